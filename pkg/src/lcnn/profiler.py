"""Parameter, MAC, and size accounting for built networks.

Counting convention (the ``convention`` tag on every report):

* conv 3x3: ``C_out * (9 * C_in + 1)`` params, ``H_out * W_out * C_out * 9 * C_in`` MACs
* batchnorm: 4 params per channel (gamma, beta, running mean, running var),
  1 MAC per output element for the folded scale-and-shift
* dense: ``out * (in + 1)`` params, ``in * out`` MACs
* pooling and activations: 0 params, 0 MACs

Params count stored tensor elements, so a report always equals the
element count of the network it describes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ArchConfig, Network

CONVENTION = "conv=Cout*(9*Cin+1)p/HWCout*9*Cin m; bn=4C p/1 m per elt; dense=out*(in+1)p/in*out m"

DEFAULT_MAX_PARAMS = 128_000
DEFAULT_MAX_MACS = 30_000_000


@dataclass(frozen=True)
class LayerCost:
    name: str
    params: int
    macs: int


@dataclass
class ComplexityReport:
    layers: list
    total_params: int
    total_macs: int
    raw_bytes: int = 0
    qparam_bytes: int = 0
    overhead_bytes: int = 0
    convention: str = CONVENTION
    label: str = ""

    @property
    def total_bytes(self) -> int:
        return self.raw_bytes + self.qparam_bytes + self.overhead_bytes

    @property
    def total_kb(self) -> float:
        return self.total_bytes / 1024.0

    @classmethod
    def from_totals(cls, params, macs, label=""):
        return cls(layers=[], total_params=int(params), total_macs=int(macs), label=label)


def layer_costs(config: ArchConfig) -> list:
    c_in, h, w = config.input_shape
    h1, w1 = config.pool1_out
    h2, w2 = config.pool2_out
    spec = [
        ("conv1", "conv", c_in, config.c1, h * w),
        ("bn1", "bn", None, config.c1, h * w),
        ("conv2", "conv", config.c1, config.c2, h * w),
        ("bn2", "bn", None, config.c2, h * w),
        ("pool1", "pool", None, config.c2, h1 * w1),
        ("conv3", "conv", config.c2, config.c3, h1 * w1),
        ("bn3", "bn", None, config.c3, h1 * w1),
        ("pool2", "pool", None, config.c3, h2 * w2),
        ("dense1", "dense", config.flatten_size, config.dense, None),
        ("dense2", "dense", config.dense, config.n_classes, None),
    ]
    out = []
    for name, kind, fan_in, fan_out, area in spec:
        if kind == "conv":
            out.append(LayerCost(name, fan_out * (9 * fan_in + 1), area * fan_out * 9 * fan_in))
        elif kind == "bn":
            out.append(LayerCost(name, 4 * fan_out, fan_out * area))
        elif kind == "dense":
            out.append(LayerCost(name, fan_out * (fan_in + 1), fan_in * fan_out))
        else:
            out.append(LayerCost(name, 0, 0))
    return out


def count_params(config: ArchConfig) -> int:
    return sum(c.params for c in layer_costs(config))


def count_macs(config: ArchConfig) -> int:
    return sum(c.macs for c in layer_costs(config))


def size_breakdown(net: Network) -> tuple:
    """(raw_bytes, qparam_bytes, overhead_bytes) of the serialized network.

    raw counts tensor payload bytes (4/element float32, 1/element int8);
    qparam counts 12 bytes (f64 scale + i32 zero point) per quantized
    tensor; overhead is everything else in the container.
    """
    from . import container

    raw = sum(arr.nbytes for arr in net.params.values())
    qparam = 12 * len(net.qparams) if net.qparams else 0
    total = len(container.network_to_bytes(net))
    return raw, qparam, total - raw - qparam


def profile(config_or_net, label="") -> ComplexityReport:
    """Complexity report for an ArchConfig or a built Network."""
    net = None
    if isinstance(config_or_net, Network):
        net = config_or_net
        config = net.config
        label = label or net.name
    else:
        config = config_or_net
    layers = layer_costs(config)
    report = ComplexityReport(
        layers=layers,
        total_params=sum(c.params for c in layers),
        total_macs=sum(c.macs for c in layers),
        label=label or config.arch_string,
    )
    if net is not None:
        report.raw_bytes, report.qparam_bytes, report.overhead_bytes = size_breakdown(net)
    else:
        report.raw_bytes = 4 * report.total_params
    return report


def profile_ensemble(members: list, label="ensemble") -> ComplexityReport:
    """Sum of the members' reports; members are configs, networks, or reports."""
    if not members:
        raise ValueError("ensemble must have at least one member")
    reports = [m if isinstance(m, ComplexityReport) else profile(m) for m in members]
    out = ComplexityReport(
        layers=[],
        total_params=sum(r.total_params for r in reports),
        total_macs=sum(r.total_macs for r in reports),
        raw_bytes=sum(r.raw_bytes for r in reports),
        qparam_bytes=sum(r.qparam_bytes for r in reports),
        overhead_bytes=sum(r.overhead_bytes for r in reports),
        label=label,
    )
    return out


@dataclass
class BudgetResult:
    passed: bool
    violations: list
    param_margin: int
    mac_margin: int

    def describe(self) -> str:
        state = "pass" if self.passed else "fail: " + ", ".join(self.violations)
        return (
            f"budget {state} (params margin {self.param_margin}, "
            f"MACs margin {self.mac_margin})"
        )


def budget_gate(
    report: ComplexityReport,
    max_params: int = DEFAULT_MAX_PARAMS,
    max_macs: int = DEFAULT_MAX_MACS,
) -> BudgetResult:
    """Check a report against the parameter and MAC limits."""
    violations = []
    if report.total_params > max_params:
        violations.append(f"params {report.total_params} > {max_params}")
    if report.total_macs > max_macs:
        violations.append(f"macs {report.total_macs} > {max_macs}")
    return BudgetResult(
        passed=not violations,
        violations=violations,
        param_margin=max_params - report.total_params,
        mac_margin=max_macs - report.total_macs,
    )


def format_report(report: ComplexityReport) -> str:
    lines = [f"# complexity report: {report.label}"]
    if report.layers:
        lines.append(f"{'layer':<10}{'params':>10}{'macs':>12}")
        for c in report.layers:
            lines.append(f"{c.name:<10}{c.params:>10}{c.macs:>12}")
    lines.append(f"total params {report.total_params}")
    lines.append(f"total macs {report.total_macs} ({report.total_macs / 1e6:.4f}M)")
    if report.total_bytes:
        lines.append(
            f"size bytes {report.total_bytes} ({report.total_kb:.2f} KB): "
            f"raw {report.raw_bytes} + qparams {report.qparam_bytes} "
            f"+ container {report.overhead_bytes}"
        )
    lines.append(f"convention: {report.convention}")
    return "\n".join(lines)


def report_kv(report: ComplexityReport) -> dict:
    """Flat key-value view of a report for machine-readable output."""
    kv = {
        "label": report.label,
        "total_params": report.total_params,
        "total_macs": report.total_macs,
        "raw_bytes": report.raw_bytes,
        "qparam_bytes": report.qparam_bytes,
        "overhead_bytes": report.overhead_bytes,
        "total_bytes": report.total_bytes,
        "convention": report.convention,
    }
    for c in report.layers:
        kv[f"layer.{c.name}.params"] = c.params
        kv[f"layer.{c.name}.macs"] = c.macs
    return kv
