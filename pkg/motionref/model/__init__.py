# Import shortcuts to the model components
from .text_encoder import TextEmbedding, TextSource, encode_expression, ToyTextEncoder, ExternalTextEncoder
from .backbone import FeaturePyramid, ToyBackbone
from .decoder import QuerySet, FramePrediction, LanguageQueryDecoder, predict_masks, select_queries
from .keyframes import (SelectionStrategy, FrameScorer, aggregate_frames, select_top_frames,
                        baseline_select)
from .interframe import InterFrameAttention
from .segmenter import ReferringSegmenter, SegmenterOutput, binarize_output, query_masks

__all__ = ["TextEmbedding", "TextSource", "encode_expression", "ToyTextEncoder", "ExternalTextEncoder",
           "FeaturePyramid", "ToyBackbone", "QuerySet", "FramePrediction", "LanguageQueryDecoder",
           "predict_masks", "select_queries", "SelectionStrategy", "FrameScorer", "aggregate_frames",
           "select_top_frames", "baseline_select", "InterFrameAttention", "ReferringSegmenter",
           "SegmenterOutput", "binarize_output", "query_masks"]
