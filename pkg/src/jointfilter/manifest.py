"""JSON-Lines dataset manifests.

One object per line describing a sample::

    {"target_path": "d01.pgm", "guidance_path": "c01.ppm", "gt_path": "d01.pgm",
     "depth_scale": 1000.0, "missing_value": 0}

An optional first line without ``target_path`` but with a ``dataset`` key
is a header and may set ``unit_scale`` and ``mask_missing``. Relative paths
resolve against the manifest's directory. Unknown keys are ignored.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .evaluate import EvalConvention
from .netpbm import read_image


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SamplePair:
    target_path: str
    guidance_path: str
    gt_path: str = None
    depth_scale: float = 1.0
    missing_value: float = 0.0

    def __post_init__(self):
        if not self.target_path or not self.guidance_path:
            raise ValueError("paths must be non-empty")
        if self.depth_scale <= 0:
            raise ValueError("depth_scale must be > 0")

    @property
    def truth_path(self):
        return self.gt_path or self.target_path


@dataclass
class Manifest:
    pairs: list = field(default_factory=list)
    dataset: str = ""
    convention: EvalConvention = None
    root: str = "."

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.root, path)


def parse_manifest(text, root="."):
    pairs = []
    dataset = ""
    convention = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise ManifestError(f"line {lineno}: expected a JSON object")
        if not pairs and "target_path" not in obj and "dataset" in obj and "guidance_path" not in obj:
            dataset = str(obj["dataset"])
            convention = EvalConvention(obj.get("unit_scale"), bool(obj.get("mask_missing", False)))
            continue
        for key in ("target_path", "guidance_path"):
            if not obj.get(key):
                raise ManifestError(f"line {lineno}: missing {key}")
        try:
            pairs.append(SamplePair(
                target_path=str(obj["target_path"]),
                guidance_path=str(obj["guidance_path"]),
                gt_path=obj.get("gt_path"),
                depth_scale=float(obj.get("depth_scale", 1.0)),
                missing_value=float(obj.get("missing_value", 0.0)),
            ))
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"line {lineno}: {exc}") from None
    return Manifest(pairs, dataset, convention, root)


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh.read(), os.path.dirname(os.path.abspath(path)))


def write_manifest(path, pairs, dataset=None, unit_scale=None, mask_missing=False):
    with open(path, "w", encoding="utf-8") as fh:
        if dataset is not None:
            head = {"dataset": dataset, "mask_missing": mask_missing}
            if unit_scale is not None:
                head["unit_scale"] = unit_scale
            fh.write(json.dumps(head) + "\n")
        for p in pairs:
            obj = {k: v for k, v in vars(p).items() if v is not None}
            fh.write(json.dumps(obj) + "\n")


def load_pair(manifest, pair):
    """``(gt, guidance)`` arrays for one entry."""
    gt = read_image(manifest.resolve(pair.truth_path))
    guidance = read_image(manifest.resolve(pair.guidance_path))
    if gt.shape[1:] != guidance.shape[1:]:
        raise ValueError(f"{pair.truth_path} {gt.shape[1:]} and {pair.guidance_path} "
                         f"{guidance.shape[1:]} differ in size")
    return gt, guidance


def load_pairs(manifest):
    return [load_pair(manifest, p) for p in manifest.pairs]


def iter_entries(manifest):
    """Yield ``(name, gt, guidance, depth_scale, missing_value)``; load failures are yielded as exceptions."""
    for p in manifest.pairs:
        try:
            gt, g = load_pair(manifest, p)
        except (OSError, ValueError) as exc:
            yield exc
            continue
        yield p.truth_path, gt, g, p.depth_scale, p.missing_value
