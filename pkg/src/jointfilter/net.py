"""The joint filtering network: target branch, guidance branch, fusion branch.

The target branch and guidance branch each map their input to ``n3``
feature channels. Their outputs are concatenated (target first) and the
fusion branch predicts a residual that is added back to the target when
the skip connection is on. Every layer uses same-mode zero padding; ReLU
follows every layer except the last one of each branch.
"""

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor import SAME, ConvLayer, ShapeError, conv2d_backward, conv2d_forward, relu_backward

MAGIC = b"DJF"
VERSION = 1
BRANCHES = ("t", "g", "f")


class ConfigError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    n1: int = 96
    n2: int = 48
    n3: int = 1
    f1: int = 9
    f2: int = 1
    f3: int = 5
    depth_t: int = 3
    depth_g: int = 3
    depth_f: int = 3
    target_channels: int = 1
    guidance_channels: int = 3
    skip_connection: bool = True
    seed: int = 0
    init_std: float = 1e-3
    init_scheme: str = "gaussian"

    def validate(self):
        for name in ("n1", "n2", "n3", "target_channels", "guidance_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("f1", "f2", "f3"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"{name} must be a positive odd kernel size, got {k}")
        if self.depth_t != self.depth_g:
            raise ConfigError(f"depth_t ({self.depth_t}) and depth_g ({self.depth_g}) must match")
        if self.depth_t < 0:
            raise ConfigError("branch depth must be >= 0")
        if self.depth_f < 1:
            raise ConfigError("depth_f must be >= 1")
        if self.init_std < 0:
            raise ConfigError("init_std must be >= 0")
        if self.init_scheme not in ("gaussian", "he"):
            raise ConfigError(f"init_scheme must be 'gaussian' or 'he', got {self.init_scheme!r}")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()


def _layer_plan(depth, c_in, c_out, cfg):
    """(in, out, kernel) for each layer of a branch of the given depth.

    Depth 3 is n1@f1, n2@f2, out@f3. Deeper branches repeat the n2@f2 layer
    before the last one; depth 2 drops the middle layer; depth 1 keeps only
    the last.
    """
    if depth == 0:
        return []
    if depth == 1:
        return [(c_in, c_out, cfg.f3)]
    if depth == 2:
        return [(c_in, cfg.n1, cfg.f1), (cfg.n1, c_out, cfg.f3)]
    plan = [(c_in, cfg.n1, cfg.f1), (cfg.n1, cfg.n2, cfg.f2)]
    plan += [(cfg.n2, cfg.n2, cfg.f2)] * (depth - 3)
    plan.append((cfg.n2, c_out, cfg.f3))
    return plan


def layer_plans(cfg):
    """Layer shapes of the three branches, keyed ``t``, ``g``, ``f``."""
    cfg.validate()
    if cfg.depth_t == 0:
        fuse_in = cfg.target_channels + cfg.guidance_channels
    else:
        fuse_in = 2 * cfg.n3
    return {
        "t": _layer_plan(cfg.depth_t, cfg.target_channels, cfg.n3, cfg),
        "g": _layer_plan(cfg.depth_g, cfg.guidance_channels, cfg.n3, cfg),
        "f": _layer_plan(cfg.depth_f, fuse_in, cfg.target_channels, cfg),
    }


def param_count(cfg):
    return sum(o * i * k * k + o for plan in layer_plans(cfg).values() for i, o, k in plan)


@dataclass(eq=False)
class Model:
    config: NetworkConfig
    layers_t: list
    layers_g: list
    layers_f: list

    def __post_init__(self):
        plans = layer_plans(self.config)
        for name in BRANCHES:
            layers = self.branch(name)
            shapes = [(l.in_channels, l.out_channels, l.kernel_size) for l in layers]
            if shapes != plans[name]:
                raise ConfigError(f"branch {name} layers {shapes} do not match config plan {plans[name]}")

    def branch(self, name):
        return {"t": self.layers_t, "g": self.layers_g, "f": self.layers_f}[name]

    def layers(self):
        return self.layers_t + self.layers_g + self.layers_f

    @property
    def dtype(self):
        return self.layers()[0].dtype

    def astype(self, dtype):
        cast = lambda ls: [ConvLayer(l.weights.astype(dtype), l.biases.astype(dtype)) for l in ls]
        return Model(self.config, cast(self.layers_t), cast(self.layers_g), cast(self.layers_f))

    def copy(self):
        return self.astype(self.dtype)

    def parameters(self):
        """Flat parameter vector in checkpoint order."""
        return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in self.layers()])

    def with_parameters(self, flat):
        flat = np.asarray(flat)
        if flat.size != param_count(self.config):
            raise ShapeError(f"expected {param_count(self.config)} parameters, got {flat.size}")
        return _unflatten(self.config, flat)

    def zero_like(self):
        return self.with_parameters(np.zeros(param_count(self.config), self.dtype))


def _unflatten(cfg, flat):
    plans = layer_plans(cfg)
    pos = 0
    branches = {}
    for name in BRANCHES:
        layers = []
        for i, o, k in plans[name]:
            nw = o * i * k * k
            w = flat[pos:pos + nw].reshape(o, i, k, k)
            b = flat[pos + nw:pos + nw + o]
            pos += nw + o
            layers.append(ConvLayer(w.copy(), b.copy()))
        branches[name] = layers
    return Model(cfg, branches["t"], branches["g"], branches["f"])


def build_network(config=None, dtype=np.float32):
    """Zero-mean Gaussian weights, zero biases, seeded by ``config.seed``.

    The ``gaussian`` scheme uses ``init_std`` for every layer; ``he`` uses
    sqrt(2 / fan_in) per layer, except the last fusion layer, which keeps
    ``init_std`` so the initial residual stays small.
    """
    cfg = (config or NetworkConfig()).validate()
    rng = np.random.default_rng(cfg.seed)
    branches = {}
    for name in BRANCHES:
        layers = []
        plan = layer_plans(cfg)[name]
        for j, (i, o, k) in enumerate(plan):
            std = cfg.init_std
            if cfg.init_scheme == "he" and not (name == "f" and j == len(plan) - 1):
                std = np.sqrt(2.0 / (i * k * k))
            w = rng.normal(0.0, std, size=(o, i, k, k)).astype(dtype)
            layers.append(ConvLayer(w, np.zeros(o, dtype)))
        branches[name] = layers
    return Model(cfg, branches["t"], branches["g"], branches["f"])


@dataclass
class ForwardTrace:
    """Inputs and pre-activations of every layer, batched ``(N, C, H, W)``."""

    target: np.ndarray
    guidance: np.ndarray
    inputs: dict = field(default_factory=dict)
    preacts: dict = field(default_factory=dict)
    fused: np.ndarray = None
    residual: np.ndarray = None
    output: np.ndarray = None
    batched: bool = True


def _run_branch(layers, x, inputs, preacts):
    for i, layer in enumerate(layers):
        inputs.append(x)
        z = conv2d_forward(x, layer, SAME)
        preacts.append(z)
        x = np.maximum(z, 0) if i < len(layers) - 1 else z
    return x


def _as_batch(x, dtype, what):
    x = np.asarray(x)
    if x.ndim == 3:
        return np.ascontiguousarray(x[None], dtype=dtype), False
    if x.ndim == 4:
        return np.ascontiguousarray(x, dtype=dtype), True
    raise ShapeError(f"{what} must be (C, H, W) or (N, C, H, W), got {x.shape}")


def forward(model, target, guidance, keep_trace=False):
    """Run the network. Returns ``(output, trace)``; ``trace`` is None unless requested."""
    cfg = model.config
    t, batched = _as_batch(target, model.dtype, "target")
    g, _ = _as_batch(guidance, model.dtype, "guidance")
    if t.shape[1] != cfg.target_channels:
        raise ShapeError(f"target has {t.shape[1]} channels, model expects {cfg.target_channels}")
    if g.shape[1] != cfg.guidance_channels:
        raise ShapeError(f"guidance has {g.shape[1]} channels, model expects {cfg.guidance_channels}")
    if t.shape[0] != g.shape[0] or t.shape[2:] != g.shape[2:]:
        raise ShapeError(f"target {t.shape} and guidance {g.shape} differ in batch or spatial size")

    trace = ForwardTrace(t, g, {n: [] for n in BRANCHES}, {n: [] for n in BRANCHES}, batched=batched)
    ft = _run_branch(model.layers_t, t, trace.inputs["t"], trace.preacts["t"])
    fg = _run_branch(model.layers_g, g, trace.inputs["g"], trace.preacts["g"])
    fused = np.concatenate([ft, fg], axis=1)
    residual = _run_branch(model.layers_f, fused, trace.inputs["f"], trace.preacts["f"])
    out = t + residual if cfg.skip_connection else residual
    trace.fused, trace.residual, trace.output = fused, residual, out
    if not batched:
        out = out[0]
    return out, (trace if keep_trace else None)


def _backprop_branch(layers, inputs, preacts, grad, need_input_grad=True):
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        if i < len(layers) - 1:
            grad = relu_backward(preacts[i], grad)
        grad, gw, gb = conv2d_backward(inputs[i], layers[i], SAME, grad, need_input_grad or i > 0)
        grads[i] = ConvLayer(gw, gb)
    return grad, grads


def backward(model, trace, grad_output, return_input_grads=False):
    """Parameter gradients for ``grad_output`` = dLoss/dOutput.

    Returns a ``Model`` whose layers hold the gradients. With
    ``return_input_grads`` also returns ``(grad_target, grad_guidance)``.
    """
    if trace is None:
        raise ValueError("backward needs the trace from forward(..., keep_trace=True)")
    go, _ = _as_batch(grad_output, model.dtype, "grad_output")
    if go.shape != trace.output.shape:
        raise ShapeError(f"grad_output shape {go.shape} does not match output {trace.output.shape}")
    cfg = model.config
    g_fused, grads_f = _backprop_branch(model.layers_f, trace.inputs["f"], trace.preacts["f"], go)
    if cfg.depth_t == 0:
        split = cfg.target_channels
    else:
        split = cfg.n3
    g_t, grads_t = _backprop_branch(model.layers_t, trace.inputs["t"], trace.preacts["t"],
                                    np.ascontiguousarray(g_fused[:, :split]), return_input_grads)
    g_g, grads_g = _backprop_branch(model.layers_g, trace.inputs["g"], trace.preacts["g"],
                                    np.ascontiguousarray(g_fused[:, split:]), return_input_grads)
    if cfg.skip_connection and g_t is not None:
        g_t = g_t + go
    grads = Model(cfg, grads_t, grads_g, grads_f)
    if return_input_grads:
        if not trace.batched:
            g_t, g_g = g_t[0], g_g[0]
        return grads, (g_t, g_g)
    return grads


def serialize(model):
    """Checkpoint bytes: b"DJF", version, u32 LE JSON length, JSON config, f32 LE params."""
    cfg = json.dumps(model.config.to_dict(), sort_keys=True).encode("utf-8")
    payload = model.parameters().astype("<f4").tobytes()
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(cfg)) + cfg + payload


def read_header(data):
    """Parse the checkpoint header; returns ``(config, payload_offset)``."""
    if len(data) < 8:
        raise CheckpointError("truncated stream: header incomplete")
    if data[:3] != MAGIC:
        raise CheckpointError("bad magic")
    if data[3] != VERSION:
        raise CheckpointError(f"unsupported version {data[3]}")
    (n,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + n:
        raise CheckpointError("truncated stream: config incomplete")
    try:
        cfg = NetworkConfig.from_dict(json.loads(data[8:8 + n].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as exc:
        raise CheckpointError(f"malformed config: {exc}") from exc
    return cfg, 8 + n


def deserialize(data, dtype=np.float32):
    data = bytes(data)
    cfg, offset = read_header(data)
    expect = param_count(cfg) * 4
    got = len(data) - offset
    if got < expect:
        raise CheckpointError(f"truncated stream: payload has {got} bytes, config needs {expect}")
    if got > expect:
        raise CheckpointError(f"payload length {got} does not match config ({expect} bytes)")
    flat = np.frombuffer(data, dtype="<f4", offset=offset).astype(dtype)
    return _unflatten(cfg, flat)


def save(model, path):
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load(path, dtype=np.float32):
    with open(path, "rb") as fh:
        return deserialize(fh.read(), dtype)
