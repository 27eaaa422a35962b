"""Training: degraded-target synthesis, patch sampling, loss and SGD with momentum.

All three branches are updated together from one backward pass per step.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, net
from .tensor import ShapeError

log = logging.getLogger(__name__)

UPSAMPLE = "upsample"
DENOISE = "denoise"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    kind: str = UPSAMPLE
    scale: int = 8
    noise_variance: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (UPSAMPLE, DENOISE):
            raise ValueError(f"task kind must be {UPSAMPLE!r} or {DENOISE!r}, got {self.kind!r}")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 32
    patches_total: int = 160_000
    batch_size: int = 128
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 1
    seed: int = 0
    lr_decay: float = 0.1
    lr_decay_at: float = 0.8

    def validate(self, net_config=None):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patches_total < 0 or self.epochs < 0:
            raise ValueError("patches_total and epochs must be >= 0")
        if net_config is not None and self.patch_size < net_config.f1:
            raise ValueError(f"patch_size {self.patch_size} is smaller than f1={net_config.f1}")
        return self

    @property
    def steps_per_epoch(self):
        return math.ceil(self.patches_total / self.batch_size)

    @property
    def total_steps(self):
        return self.epochs * self.steps_per_epoch

    def lr_at(self, step):
        if step >= self.lr_decay_at * self.total_steps:
            return self.learning_rate * self.lr_decay
        return self.learning_rate


@dataclass
class LossRecord:
    iteration: int
    loss: float
    seconds: float


@dataclass
class OptimizerState:
    velocity: np.ndarray

    @classmethod
    def zeros(cls, model):
        return cls(np.zeros(net.param_count(model.config), dtype=model.dtype))


@dataclass
class TrainResult:
    model: net.Model
    losses: list = field(default_factory=list)

    @property
    def checkpoint(self):
        return net.serialize(self.model)


def synthesize_target(gt, guidance, task, rng=None):
    """Degrade ``gt`` into a full-resolution target for ``task``.

    Upsampling: nearest-neighbour decimation then bicubic resize back to the
    original grid. Denoising: additive Gaussian noise, clamped to [0, 1].
    ``guidance`` is unused by either recipe and kept for a uniform signature.
    """
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim == 2:
        gt = gt[None]
    if task.kind == UPSAMPLE:
        low = baselines.nearest_downsample(gt, task.scale)
        return baselines.bicubic_resize(low, gt.shape[1], gt.shape[2])
    if rng is None:
        rng = np.random.default_rng(task.seed)
    if task.noise_variance == 0:
        return gt.copy()
    noisy = gt + rng.normal(0.0, math.sqrt(task.noise_variance), size=gt.shape)
    return np.clip(noisy, 0.0, 1.0)


def degrade_all(images, task):
    """Full-image targets for every ``(gt, guidance)``; noise streams seeded per image."""
    return [synthesize_target(gt, g, task, np.random.default_rng([task.seed, i]))
            for i, (gt, g) in enumerate(images)]


def patch_positions(shapes, count, patch, rng):
    """``count`` draws of (image index, top, left), uniform over valid positions."""
    out = []
    for _ in range(count):
        i = int(rng.integers(len(shapes)))
        h, w = shapes[i]
        out.append((i, int(rng.integers(h - patch + 1)), int(rng.integers(w - patch + 1))))
    return out


def sample_patches(images, task, cfg, targets=None):
    """Cut ``cfg.patches_total`` co-located (target, guidance, gt) patches.

    ``images`` is a list of ``(gt, guidance)`` arrays. Targets are degraded at
    full-image size before cutting. Returns three stacked arrays
    ``(M, C, P, P)``.
    """
    p = cfg.patch_size
    for i, (gt, g) in enumerate(images):
        if gt.shape[-2] < p or gt.shape[-1] < p:
            raise ShapeError(f"image {i} ({gt.shape[-2]}x{gt.shape[-1]}) is smaller than patch {p}")
        if gt.shape[-2:] != g.shape[-2:]:
            raise ShapeError(f"image {i}: gt {gt.shape} and guidance {g.shape} differ in size")
    if targets is None:
        targets = degrade_all(images, task) if cfg.patches_total else []
    rng = np.random.default_rng([cfg.seed, 1])
    pos = patch_positions([gt.shape[-2:] for gt, _ in images], cfg.patches_total, p, rng)
    cut = lambda a, y, x: np.asarray(a)[..., y:y + p, x:x + p]
    t = np.stack([cut(targets[i], y, x) for i, y, x in pos]) if pos else np.empty((0, 1, p, p))
    g = np.stack([cut(images[i][1], y, x) for i, y, x in pos]) if pos else np.empty((0, 3, p, p))
    gt = np.stack([cut(images[i][0], y, x) for i, y, x in pos]) if pos else np.empty((0, 1, p, p))
    return t, g, gt


def loss(output, gt):
    output, gt = np.asarray(output), np.asarray(gt)
    if output.shape != gt.shape:
        raise ShapeError(f"output {output.shape} and gt {gt.shape} differ")
    d = output.astype(np.float64) - gt
    return float(np.mean(d * d))


def loss_grad(output, gt):
    output, gt = np.asarray(output), np.asarray(gt)
    if output.shape != gt.shape:
        raise ShapeError(f"output {output.shape} and gt {gt.shape} differ")
    return (2.0 * (output - gt) / output.size).astype(output.dtype)


def sgd_step(model, grads, state, cfg, lr=None):
    """One momentum step; returns ``(new_model, new_state)``.

    v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v
    """
    lr = cfg.learning_rate if lr is None else lr
    w = model.parameters()
    g = grads.parameters() if isinstance(grads, net.Model) else np.asarray(grads)
    if g.shape != w.shape or state.velocity.shape != w.shape:
        raise ShapeError("gradient / optimizer state structure does not mirror the model")
    v = cfg.momentum * state.velocity - lr * (g + cfg.weight_decay * w)
    v = v.astype(model.dtype)
    return model.with_parameters(w + v), OptimizerState(v)


def _load_images(data):
    if hasattr(data, "pairs"):
        from .manifest import load_pairs
        return load_pairs(data)
    return [(np.asarray(gt, np.float64), np.asarray(g, np.float64)) for gt, g in data]


def train(data, task, net_config, cfg, model=None, max_steps=None, time_budget=None, log_every=50):
    """Minimize the mean squared error over sampled patches.

    ``data`` is a Manifest or a list of ``(gt, guidance)`` arrays. Runs
    ``cfg.total_steps`` steps unless cut short by ``max_steps`` or
    ``time_budget`` (seconds). Returns a TrainResult with the loss curve.
    """
    images = _load_images(data)
    if not images:
        raise TrainingError("training set is empty")
    cfg.validate(net_config)
    if model is None:
        model = net.build_network(net_config)
    targets, guides, gts = sample_patches(images, task, cfg)
    targets = targets.astype(model.dtype)
    guides = guides.astype(model.dtype)
    gts = gts.astype(np.float64)

    state = OptimizerState.zeros(model)
    rng = np.random.default_rng([cfg.seed, 2])
    total = cfg.total_steps if max_steps is None else min(cfg.total_steps, max_steps)
    records = []
    start = time.perf_counter()
    step = 0
    order = np.arange(0)
    while step < total:
        if step % cfg.steps_per_epoch == 0:
            order = rng.permutation(len(targets))
        k = step % cfg.steps_per_epoch
        idx = order[k * cfg.batch_size:(k + 1) * cfg.batch_size]
        out, trace = net.forward(model, targets[idx], guides[idx], keep_trace=True)
        value = loss(out, gts[idx])
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at iteration {step}")
        grads = net.backward(model, trace, loss_grad(out, gts[idx]))
        model, state = sgd_step(model, grads, state, cfg, cfg.lr_at(step))
        records.append(LossRecord(step, value, time.perf_counter() - start))
        if log_every and step % log_every == 0:
            log.info("iter %d loss %.6g", step, value)
        step += 1
        if time_budget is not None and time.perf_counter() - start > time_budget:
            log.info("time budget reached after %d steps", step)
            break
    return TrainResult(model, records)


def write_loss_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "seconds"])
        for r in records:
            w.writerow([r.iteration, repr(r.loss), f"{r.seconds:.6f}"])
