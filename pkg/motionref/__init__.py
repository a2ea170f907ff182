__version__ = "0.1.0"

__all__ = ["RunConfig", "load_config", "ReferringSegmenter", "generate_benchmark", "GenerationSpec",
           "train", "evaluate_run", "ablate_keyframes", "ablate_expressions"]

# Import shortcuts to the main entry points
from .config import RunConfig, load_config
from .model.segmenter import ReferringSegmenter
from .synthbench.generate import GenerationSpec, generate_benchmark
from .tools.train import train
from .tools.evaluate import evaluate_run
from .tools.ablate import ablate_keyframes, ablate_expressions
