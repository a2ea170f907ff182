"""
Tools for comparing the artifacts of two runs
"""

import os
import json
import hashlib

import torch
import tabulate

__all__ = ["run_snapshot", "diff_snapshots", "pprint_snapshot_diff", "state_digest"]

SNAPSHOT_SUFFIXES = (".json", ".jsonl", ".pt")


def state_digest(state):
    """
    Content hash of a nested state dict.
    """
    digest = hashlib.sha256()

    def feed(key, value):
        digest.update(key.encode("utf-8"))
        if isinstance(value, torch.Tensor):
            digest.update(str(value.dtype).encode("utf-8"))
            digest.update(str(tuple(value.shape)).encode("utf-8"))
            digest.update(value.detach().cpu().contiguous().numpy().tobytes())
        elif isinstance(value, dict):
            for k in sorted(value, key=str):
                feed(f"{key}.{k}", value[k])
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value):
                feed(f"{key}[{i}]", v)
        else:
            digest.update(repr(value).encode("utf-8"))

    feed("", state)
    return digest.hexdigest()


def _file_digest(path):
    if path.endswith(".pt"):
        return state_digest(torch.load(path, map_location="cpu"))
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def run_snapshot(run_dir):
    """
    Digest of every log, report, config and checkpoint under run_dir, keyed
    by relative path.
    """
    snap = {}
    for root, _, files in os.walk(run_dir):
        for name in sorted(files):
            if not name.endswith(SNAPSHOT_SUFFIXES):
                continue
            path = os.path.join(root, name)
            snap[os.path.relpath(path, run_dir)] = _file_digest(path)
    return snap


def _metadata_free(path):
    # Reports carry absolute checkpoint paths in their metadata
    with open(path, "r") as f:
        data = json.load(f)
    data.pop("metadata", None)
    return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()


def diff_snapshots(a, b):
    """
    Compare two runs. a and b are run directories or snapshots.

    Returns:
        Sorted list of (relative path, reason) for every artifact that is
        missing from one run or differs in content.
    """
    dirs = (a, b)
    snaps = [run_snapshot(x) if isinstance(x, str) else x for x in dirs]
    diffs = []
    for key in sorted(set(snaps[0]) | set(snaps[1])):
        if key not in snaps[0] or key not in snaps[1]:
            diffs.append((key, "missing in " + ("first" if key not in snaps[0] else "second")))
        elif snaps[0][key] != snaps[1][key]:
            if key.endswith(".json") and all(isinstance(x, str) for x in dirs):
                if _metadata_free(os.path.join(a, key)) == _metadata_free(os.path.join(b, key)):
                    continue
            diffs.append((key, "content differs"))
    return diffs


def pprint_snapshot_diff(diffs):
    """
    Print out differing artifacts
    """
    if not diffs:
        print("Runs are identical")
        return
    print(tabulate.tabulate(diffs, headers=("Artifact", "Difference")))
