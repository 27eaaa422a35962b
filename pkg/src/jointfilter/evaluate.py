"""RMSE scoring with unit scaling and missing-pixel masks, dataset reports, timing."""

import csv
import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend, baselines
from .tensor import ShapeError
from .train import UPSAMPLE, synthesize_target

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConvention:
    """``unit_scale`` maps [0, 1] intensities to reported units (None: use each pair's depth_scale)."""

    unit_scale: float = None
    mask_missing: bool = False

    def __post_init__(self):
        if self.unit_scale is not None and self.unit_scale <= 0:
            raise ValueError("unit_scale must be > 0")


@dataclass
class EvalReport:
    names: list = field(default_factory=list)
    rmse: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def mean(self):
        return statistics.fmean(self.rmse) if self.rmse else math.nan

    @property
    def std(self):
        return statistics.pstdev(self.rmse) if self.rmse else math.nan

    def to_dict(self):
        d = asdict(self)
        d.update(mean=self.mean, std=self.std, count=len(self.rmse), skipped_count=len(self.skipped))
        return d

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "rmse", "seconds"])
            for row in zip(self.names, self.rmse, self.seconds):
                w.writerow([row[0], repr(row[1]), f"{row[2]:.6f}"])


def rmse(pred, gt, mask=None, conv=None):
    """Root mean squared error over unmasked pixels, in ``conv.unit_scale`` units."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    scale = 1.0 if conv is None or conv.unit_scale is None else conv.unit_scale
    d = scale * (pred - gt)
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask), pred.shape) if np.ndim(mask) < pred.ndim \
            else np.asarray(mask)
        if mask.shape != pred.shape:
            raise ShapeError(f"mask {mask.shape} does not match image {pred.shape}")
        keep = mask.astype(bool)
        if not keep.any():
            raise ValueError("mask leaves no valid pixels")
        d = d[keep]
    return math.sqrt(float(np.mean(d * d)))


def degrade(gt, task, index=0):
    """Full-res degraded target and the low-res input (None for denoising)."""
    if task.kind == UPSAMPLE:
        low = baselines.nearest_downsample(gt, task.scale)
        return baselines.bicubic_resize(low, gt.shape[-2], gt.shape[-1]), low
    return synthesize_target(gt, None, task, np.random.default_rng([task.seed, index])), None


def eval_dataset(filt, data, task, conv=None):
    """Score ``filt(target, guidance, low)`` on every entry of ``data``.

    ``data`` is a Manifest or an iterable of ``(name, gt, guidance)`` or
    ``(name, gt, guidance, unit_scale, missing_value)``. Entries that fail to
    load are skipped and listed in ``report.skipped``.
    """
    conv = conv or EvalConvention()
    if hasattr(data, "pairs"):
        from .manifest import iter_entries
        entries = iter_entries(data)
        if data.convention is not None and conv == EvalConvention():
            conv = data.convention
    else:
        entries = data
    report = EvalReport()
    for i, entry in enumerate(entries):
        if isinstance(entry, Exception):
            log.warning("skipping entry %d: %s", i, entry)
            report.skipped.append(str(entry))
            continue
        name, gt, guidance, *rest = entry
        unit = conv.unit_scale if conv.unit_scale is not None else (rest[0] if rest else 1.0)
        missing = rest[1] if len(rest) > 1 else 0.0
        gt = np.asarray(gt, dtype=np.float64)
        target, low = degrade(gt, task, i)
        t0 = time.perf_counter()
        pred = filt(target, guidance, low)
        dt = time.perf_counter() - t0
        mask = (gt != missing) if conv.mask_missing else None
        report.names.append(name)
        report.rmse.append(rmse(pred, gt, mask, EvalConvention(unit)))
        report.seconds.append(dt)
    return report


@dataclass
class BenchResult:
    seconds: float
    threads: int
    times: list
    backend: str


def benchmark_runtime(filt, height=480, width=640, threads=1, repetitions=3, seed=0):
    """Median wall-clock of ``filt(target, guidance)`` after one warm-up call.

    ``filt`` may also be a Model, in which case the joint filter is timed.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be >= 3")
    from .net import Model
    if isinstance(filt, Model):
        from .apply import joint_filter
        model = filt
        filt = lambda t, g: joint_filter(model, t, g)
    rng = np.random.default_rng(seed)
    target = rng.random((1, height, width)).astype(np.float32)
    guidance = rng.random((3, height, width)).astype(np.float32)
    prev = _backend.get_num_threads()
    _backend.set_num_threads(threads)
    try:
        filt(target, guidance)
        times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            filt(target, guidance)
            times.append(time.perf_counter() - t0)
    finally:
        _backend.set_num_threads(prev)
    return BenchResult(statistics.median(times), threads, times, _backend.get_backend())
