"""Network construction and inference for the fixed low-complexity stack.

The layer topology is fixed; only the channel widths vary:

    conv(c1) + BN + tanh
    conv(c2) + BN + relu
    avgpool (5, 5)
    conv(c3) + BN + tanh
    avgpool (4, 10)
    flatten (channel-major)
    dense(dense) + tanh
    dense(n_classes) + softmax

Networks are plain parameter dictionaries; all compute goes through the
pure functions in :mod:`lcnn.nn`, so forwards are deterministic and
thread-safe on read-only networks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .exceptions import ConfigError, PrecisionError, ShapeError

POOL1 = (5, 5)
POOL2 = (4, 10)

_ARCH_RE = re.compile(r"^\d+(-\d+){3,4}$")


@dataclass(frozen=True)
class ArchConfig:
    """Channel widths of the fixed stack; ``16-16-32-100`` notation."""

    c1: int
    c2: int
    c3: int
    dense: int
    n_classes: int = 10
    input_shape: tuple = (1, 40, 51)

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "dense", "n_classes"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise ConfigError(f"input_shape must be (C, H, W) >= 1, got {self.input_shape}")
        if min(self.pool1_out) < 1 or min(self.pool2_out) < 1:
            raise ConfigError(
                f"input {self.input_shape} leaves empty spatial dims after pooling"
            )

    @property
    def pool1_out(self):
        _, h, w = self.input_shape
        return h // POOL1[0], w // POOL1[1]

    @property
    def pool2_out(self):
        h, w = self.pool1_out
        return h // POOL2[0], w // POOL2[1]

    @property
    def flatten_size(self):
        h, w = self.pool2_out
        return self.c3 * h * w

    @property
    def arch_string(self):
        return f"{self.c1}-{self.c2}-{self.c3}-{self.dense}"

    @classmethod
    def parse(cls, arch, **kwargs):
        """Parse ``"c1-c2-c3-dense"`` (optionally ``-n_classes``) notation."""
        if not _ARCH_RE.match(arch):
            raise ConfigError(f"bad architecture string {arch!r}")
        parts = [int(p) for p in arch.split("-")]
        if len(parts) == 5:
            kwargs.setdefault("n_classes", parts[4])
        return cls(parts[0], parts[1], parts[2], parts[3], **kwargs)


# parameter tensors in storage / draw order
def param_shapes(config: ArchConfig) -> dict:
    """Mapping of parameter name -> shape for every stored tensor."""
    c_in = config.input_shape[0]
    shapes = {}
    for i, (cin, cout) in enumerate(
        [(c_in, config.c1), (config.c1, config.c2), (config.c2, config.c3)], start=1
    ):
        shapes[f"conv{i}.weight"] = (cout, cin, 3, 3)
        shapes[f"conv{i}.bias"] = (cout,)
        for stat in ("gamma", "beta", "mean", "var"):
            shapes[f"bn{i}.{stat}"] = (cout,)
    shapes["dense1.weight"] = (config.dense, config.flatten_size)
    shapes["dense1.bias"] = (config.dense,)
    shapes["dense2.weight"] = (config.n_classes, config.dense)
    shapes["dense2.bias"] = (config.n_classes,)
    return shapes


TRAINABLE_SUFFIXES = ("weight", "bias", "gamma", "beta")


def trainable_keys(config: ArchConfig) -> list:
    return [k for k in param_shapes(config) if k.split(".")[1] in TRAINABLE_SUFFIXES]


@dataclass
class Network:
    """Parameter store for one built network.

    ``precision`` is ``"float32"`` for trainable networks or ``"int8"``
    after quantization (int8 networks keep per-tensor qparams and must be
    run through :func:`lcnn.quantization.infer`). ``input_norm`` is an
    optional (mean, std) pair applied to features before the first conv;
    the trainer sets it when dataset standardization is enabled.
    """

    config: ArchConfig
    params: dict
    precision: str = "float32"
    qparams: dict | None = None
    input_norm: tuple | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def copy(self) -> "Network":
        return Network(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            precision=self.precision,
            qparams=dict(self.qparams) if self.qparams else None,
            input_norm=self.input_norm,
            name=self.name,
            meta=dict(self.meta),
        )

    def validate(self):
        expected = param_shapes(self.config)
        if set(expected) != set(self.params):
            missing = set(expected) ^ set(self.params)
            raise ShapeError(f"network parameter set mismatch: {sorted(missing)}")
        for k, shape in expected.items():
            if tuple(self.params[k].shape) != shape:
                raise ShapeError(f"{k} has shape {self.params[k].shape}, expected {shape}")


def build(config: ArchConfig, seed: int = 0) -> Network:
    """Build a float32 network with seeded Glorot-uniform weights.

    BN starts at gamma=1, beta=0, running mean=0, running var=1; biases
    start at zero. The draw order (conv1, conv2, conv3, dense1, dense2)
    is fixed so a seed always yields bit-identical weights.
    """
    rng = np.random.default_rng(seed)
    shapes = param_shapes(config)
    params = {}
    for key, shape in shapes.items():
        kind = key.split(".")[1]
        if kind == "weight":
            if len(shape) == 4:
                fan_in = shape[1] * 9
                fan_out = shape[0] * 9
            else:
                fan_in, fan_out = shape[1], shape[0]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[key] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        elif kind in ("bias", "beta", "mean"):
            params[key] = np.zeros(shape, dtype=np.float32)
        else:  # gamma, var
            params[key] = np.ones(shape, dtype=np.float32)
    net = Network(config=config, params=params)
    net.validate()
    return net


def _check_float(net: Network):
    if net.precision != "float32":
        raise PrecisionError(
            f"network is {net.precision}; use lcnn.quantization.infer for quantized inference"
        )


def apply_input_norm(net: Network, x):
    if net.input_norm is None:
        return x
    mean, std = net.input_norm
    return ((x - mean) / std).astype(x.dtype)


def forward_batch(net: Network, x, params=None):
    """Inference forward for a batch (N, C, H, W) -> (N, n_classes) probabilities."""
    _check_float(net)
    p = params if params is not None else net.params
    x = np.asarray(x)
    if x.shape[1:] != net.config.input_shape:
        raise ShapeError(
            f"features {x.shape[1:]} do not match network input {net.config.input_shape}"
        )
    return infer_probs(p, apply_input_norm(net, x))


def infer_probs(p, x):
    """Inference stack on already-normalized features; no input checks."""
    h = nn.conv2d_forward(x, p["conv1.weight"], p["conv1.bias"])
    h = nn.batchnorm_forward(h, p["bn1.gamma"], p["bn1.beta"], p["bn1.mean"], p["bn1.var"])
    h = nn.tanh_forward(h)
    h = nn.conv2d_forward(h, p["conv2.weight"], p["conv2.bias"])
    h = nn.batchnorm_forward(h, p["bn2.gamma"], p["bn2.beta"], p["bn2.mean"], p["bn2.var"])
    h = nn.relu_forward(h)
    h = nn.avgpool_forward(h, POOL1)
    h = nn.conv2d_forward(h, p["conv3.weight"], p["conv3.bias"])
    h = nn.batchnorm_forward(h, p["bn3.gamma"], p["bn3.beta"], p["bn3.mean"], p["bn3.var"])
    h = nn.tanh_forward(h)
    h = nn.avgpool_forward(h, POOL2)
    h = h.reshape(h.shape[0], -1)
    h = nn.dense_forward(h, p["dense1.weight"], p["dense1.bias"])
    h = nn.tanh_forward(h)
    h = nn.dense_forward(h, p["dense2.weight"], p["dense2.bias"])
    return nn.softmax_forward(h)


def forward(net: Network, features):
    """Single-sample forward: (C, H, W) features -> (n_classes,) probabilities."""
    features = np.asarray(features)
    if features.ndim != 3:
        raise ShapeError(f"expected (C, H, W) features, got shape {features.shape}")
    return forward_batch(net, features[None])[0]


def train_forward(params, x, bn_eps=nn.BN_EPS):
    """Training-mode forward (batch-stats BN). Returns (probs, caches, bn_stats).

    ``bn_stats`` maps bn layer name -> (batch_mean, batch_var) for the
    caller to fold into running statistics; params are not mutated.
    ``x`` must already be input-normalized.
    """
    caches = {}
    stats = {}

    h = x
    cols1 = nn._im2col3(nn._pad1(h), h.shape[2], h.shape[3])
    a1 = nn.conv2d_forward(h, params["conv1.weight"], params["conv1.bias"], cols=cols1)
    b1, bn1c, m1, v1 = nn.batchnorm_train_forward(
        a1, params["bn1.gamma"], params["bn1.beta"], bn_eps
    )
    stats["bn1"] = (m1, v1)
    t1 = nn.tanh_forward(b1)

    cols2 = nn._im2col3(nn._pad1(t1), t1.shape[2], t1.shape[3])
    a2 = nn.conv2d_forward(t1, params["conv2.weight"], params["conv2.bias"], cols=cols2)
    b2, bn2c, m2, v2 = nn.batchnorm_train_forward(
        a2, params["bn2.gamma"], params["bn2.beta"], bn_eps
    )
    stats["bn2"] = (m2, v2)
    r2 = nn.relu_forward(b2)
    p1 = nn.avgpool_forward(r2, POOL1)

    cols3 = nn._im2col3(nn._pad1(p1), p1.shape[2], p1.shape[3])
    a3 = nn.conv2d_forward(p1, params["conv3.weight"], params["conv3.bias"], cols=cols3)
    b3, bn3c, m3, v3 = nn.batchnorm_train_forward(
        a3, params["bn3.gamma"], params["bn3.beta"], bn_eps
    )
    stats["bn3"] = (m3, v3)
    t3 = nn.tanh_forward(b3)
    p2 = nn.avgpool_forward(t3, POOL2)
    flat = p2.reshape(p2.shape[0], -1)

    d1 = nn.dense_forward(flat, params["dense1.weight"], params["dense1.bias"])
    t4 = nn.tanh_forward(d1)
    d2 = nn.dense_forward(t4, params["dense2.weight"], params["dense2.bias"])
    probs = nn.softmax_forward(d2)

    caches.update(
        x=x, cols1=cols1, bn1c=bn1c, t1=t1, cols2=cols2, bn2c=bn2c, b2=b2, p1=p1,
        r2_shape=r2.shape, cols3=cols3, bn3c=bn3c, t3=t3, p2_shape=p2.shape,
        flat=flat, t4=t4, probs=probs,
    )
    return probs, caches, stats


def train_backward(params, caches, labels, need_input_grad=False):
    """Backward pass matching :func:`train_forward`. Returns gradients dict.

    The dict has one entry per trainable parameter; when
    ``need_input_grad`` is set it also carries an ``"input"`` entry.
    """
    grads = {}
    probs = caches["probs"]
    dlogits = nn.cross_entropy_softmax_grad(probs, labels)

    dt4, grads["dense2.weight"], grads["dense2.bias"] = nn.dense_backward(
        caches["t4"], params["dense2.weight"], dlogits
    )
    dd1 = nn.tanh_backward(caches["t4"], dt4)
    dflat, grads["dense1.weight"], grads["dense1.bias"] = nn.dense_backward(
        caches["flat"], params["dense1.weight"], dd1
    )
    dp2 = dflat.reshape(caches["p2_shape"])
    dt3 = nn.avgpool_backward(dp2, caches["t3"].shape, POOL2)
    db3 = nn.tanh_backward(caches["t3"], dt3)
    da3, grads["bn3.gamma"], grads["bn3.beta"] = nn.batchnorm_train_backward(
        db3, caches["bn3c"]
    )
    dp1, grads["conv3.weight"], grads["conv3.bias"] = nn.conv2d_backward(
        caches["p1"], params["conv3.weight"], da3, cols=caches["cols3"]
    )
    dr2 = nn.avgpool_backward(dp1, caches["r2_shape"], POOL1)
    db2 = nn.relu_backward(caches["b2"], dr2)
    da2, grads["bn2.gamma"], grads["bn2.beta"] = nn.batchnorm_train_backward(
        db2, caches["bn2c"]
    )
    dt1, grads["conv2.weight"], grads["conv2.bias"] = nn.conv2d_backward(
        caches["t1"], params["conv2.weight"], da2, cols=caches["cols2"]
    )
    db1 = nn.tanh_backward(caches["t1"], dt1)
    da1, grads["bn1.gamma"], grads["bn1.beta"] = nn.batchnorm_train_backward(
        db1, caches["bn1c"]
    )
    dx, grads["conv1.weight"], grads["conv1.bias"] = nn.conv2d_backward(
        caches["x"], params["conv1.weight"], da1,
        cols=caches["cols1"], need_dx=need_input_grad,
    )
    if need_input_grad:
        grads["input"] = dx
    return grads


def loss_and_grads(params, x, labels, need_input_grad=False):
    """Training-mode loss and gradients for a batch (pure; no stat updates)."""
    probs, caches, _ = train_forward(params, x)
    loss = nn.cross_entropy(probs, labels)
    grads = train_backward(params, caches, labels, need_input_grad=need_input_grad)
    return loss, grads


def layer_output_shapes(config: ArchConfig) -> list:
    """(name, shape) of every intermediate activation, flatten included."""
    c, h, w = config.input_shape
    h1, w1 = config.pool1_out
    h2, w2 = config.pool2_out
    return [
        ("input", (c, h, w)),
        ("conv1", (config.c1, h, w)),
        ("conv2", (config.c2, h, w)),
        ("pool1", (config.c2, h1, w1)),
        ("conv3", (config.c3, h1, w1)),
        ("pool2", (config.c3, h2, w2)),
        ("flatten", (config.flatten_size,)),
        ("dense1", (config.dense,)),
        ("dense2", (config.n_classes,)),
    ]
