"""Similarity-based filter pruning.

Redundant filters are found per conv layer: the two filters whose
flattened weight vectors have the smallest cosine distance form a pair,
one member of the pair is deleted, and the search repeats on the
remaining unpaired filters. Deleting a filter removes its bias and
batchnorm entries and the matching input slices of the next layer, so
the pruned network is a smaller valid network of the same topology.

Distances use conv weights only (biases and batchnorm excluded) and are
computed in float64 from the weights of the network the plan is built
on; plans for different layers are independent and commute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, PrecisionError, ShapeError
from .model import ArchConfig, Network

CONV_LAYERS = ("C1", "C2", "C3")


def filter_cosine_distance(f_i, f_j) -> float:
    """Cosine distance in [0, 2] between two flattened filters.

    Two zero-norm filters are maximally redundant (distance 0); a
    zero-norm filter against a nonzero one is distance 1.
    """
    a = np.asarray(f_i, dtype=np.float64).ravel()
    b = np.asarray(f_j, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"filters differ in shape: {f_i.shape} vs {f_j.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 1.0
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def pairwise_distances(weights) -> np.ndarray:
    """All-pairs cosine distance matrix for a (C_out, ...) weight tensor."""
    flat = np.asarray(weights, dtype=np.float64).reshape(weights.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    cos = (flat @ flat.T) / np.outer(safe, safe)
    dist = np.clip(1.0 - cos, 0.0, 2.0)
    zero = norms == 0.0
    dist[zero, :] = 1.0
    dist[:, zero] = 1.0
    dist[np.ix_(zero, zero)] = 0.0
    return dist


@dataclass
class LayerPlan:
    """Removals for one conv layer; ``partners[i]`` survives ``removed[i]``."""

    layer: str
    removed: list
    partners: list

    def __post_init__(self):
        if self.layer not in CONV_LAYERS:
            raise ConfigError(f"unknown conv layer {self.layer!r}")
        if len(self.removed) != len(set(self.removed)):
            raise ConfigError(f"duplicate removal indices in {self.layer}")


@dataclass
class PruningPlan:
    layers: list

    def counts(self) -> dict:
        return {lp.layer: len(lp.removed) for lp in self.layers}

    def to_text(self) -> str:
        lines = ["# pruning plan"]
        for lp in sorted(self.layers, key=lambda p: p.layer):
            lines.append(
                f"{lp.layer}: removed={sorted(lp.removed)} "
                f"pairs={sorted(zip(lp.removed, lp.partners))}"
            )
        return "\n".join(lines)


def find_redundant(layer_weights, k: int, layer: str = "C1") -> LayerPlan:
    """Greedy closest-pair selection of ``k`` filters to remove.

    Each round picks the minimum-distance pair among filters that are
    neither removed nor already kept as a pair partner, removes the
    higher-index member, and retires both from further pairing. Ties
    break toward the lexicographically smallest (i, j).
    """
    c_out = layer_weights.shape[0]
    if not 1 <= k < c_out:
        raise ValueError(f"need 1 <= k < {c_out}, got k={k}")
    if 2 * k > c_out:
        raise ValueError(f"k={k} pairs need {2 * k} filters but layer has {c_out}")
    dist = pairwise_distances(layer_weights)
    available = np.ones(c_out, dtype=bool)
    removed, partners = [], []
    for _ in range(k):
        best = None
        best_pair = None
        for i in range(c_out):
            if not available[i]:
                continue
            for j in range(i + 1, c_out):
                if not available[j]:
                    continue
                if best is None or dist[i, j] < best:
                    best = dist[i, j]
                    best_pair = (i, j)
        i, j = best_pair
        partners.append(i)
        removed.append(j)
        available[i] = False
        available[j] = False
    return LayerPlan(layer=layer, removed=removed, partners=partners)


def plan_for_layers(net: Network, counts: dict) -> PruningPlan:
    """Build a plan from the network's current weights; ``counts`` maps
    layer name ("C1".."C3") to the number of filters to remove."""
    _require_float(net)
    layer_plans = []
    for layer in CONV_LAYERS:
        if layer not in counts:
            continue
        idx = CONV_LAYERS.index(layer) + 1
        layer_plans.append(
            find_redundant(net.params[f"conv{idx}.weight"], counts[layer], layer=layer)
        )
    return PruningPlan(layers=layer_plans)


def _require_float(net: Network):
    if net.precision != "float32":
        raise PrecisionError("pruning operates on float networks")


def apply_plan(net: Network, plan: PruningPlan) -> Network:
    """Delete planned filters and rewire downstream layers.

    Removing filter ``f`` of conv ``i`` drops its weight row, bias, and
    the four batchnorm entries, plus input-channel slices of conv
    ``i+1``; for the last conv it drops the matching flatten positions
    from the first dense layer's weight columns.
    """
    _require_float(net)
    params = {k: v.copy() for k, v in net.params.items()}
    widths = {"C1": net.config.c1, "C2": net.config.c2, "C3": net.config.c3}
    spatial = net.config.pool2_out[0] * net.config.pool2_out[1]

    for lp in sorted(plan.layers, key=lambda p: CONV_LAYERS.index(p.layer)):
        width = widths[lp.layer]
        removed = set(lp.removed)
        if not removed:
            continue
        if not all(0 <= r < width for r in removed):
            raise ShapeError(f"{lp.layer} removal indices out of range 0..{width - 1}")
        if len(removed) >= width:
            raise ShapeError(f"cannot remove all {width} filters of {lp.layer}")
        keep = [i for i in range(width) if i not in removed]
        idx = CONV_LAYERS.index(lp.layer) + 1
        params[f"conv{idx}.weight"] = params[f"conv{idx}.weight"][keep]
        params[f"conv{idx}.bias"] = params[f"conv{idx}.bias"][keep]
        for stat in ("gamma", "beta", "mean", "var"):
            params[f"bn{idx}.{stat}"] = params[f"bn{idx}.{stat}"][keep]
        if lp.layer != "C3":
            params[f"conv{idx + 1}.weight"] = params[f"conv{idx + 1}.weight"][:, keep]
        else:
            cols = [c * spatial + s for c in keep for s in range(spatial)]
            params["dense1.weight"] = params["dense1.weight"][:, cols]
        widths[lp.layer] = len(keep)

    config = ArchConfig(
        widths["C1"], widths["C2"], widths["C3"], net.config.dense,
        n_classes=net.config.n_classes, input_shape=net.config.input_shape,
    )
    params = {k: np.ascontiguousarray(v) for k, v in params.items()}
    pruned = Network(
        config=config, params=params, precision="float32",
        input_norm=net.input_norm, name=net.name, meta=dict(net.meta),
    )
    pruned.validate()
    return pruned


VARIANT_LAYERS = [
    ("Pruned_C1", ("C1",)),
    ("Pruned_C2", ("C2",)),
    ("Pruned_C3", ("C3",)),
    ("Pruned_C12", ("C1", "C2")),
    ("Pruned_C23", ("C2", "C3")),
    ("Pruned_C123", ("C1", "C2", "C3")),
]


def make_variants(net: Network, counts=(4, 4, 10)) -> list:
    """The six pruned variants: C1, C2, C3, C1+C2, C2+C3, C1+C2+C3.

    All plans are computed once from ``net``'s weights, so variants
    sharing a layer share that layer's removals.
    """
    by_layer = dict(zip(CONV_LAYERS, counts))
    plans = {
        layer: find_redundant(
            net.params[f"conv{CONV_LAYERS.index(layer) + 1}.weight"],
            by_layer[layer], layer=layer,
        )
        for layer in CONV_LAYERS
    }
    variants = []
    for name, layer_set in VARIANT_LAYERS:
        plan = PruningPlan(layers=[plans[layer] for layer in layer_set])
        pruned = apply_plan(net, plan)
        pruned.name = name
        variants.append(pruned)
    return variants
