"""Prediction aggregation and metric evaluation for network ensembles."""

from __future__ import annotations

import numpy as np

from . import model, quantization
from .training import LabeledDataset, evaluate_probs


def aggregate(predictions) -> np.ndarray:
    """Unweighted elementwise mean of probability vectors (or matrices)."""
    if len(predictions) == 0:
        raise ValueError("cannot aggregate an empty prediction list")
    stacked = np.stack([np.asarray(p) for p in predictions])
    return stacked.mean(axis=0)


def _member_probs(net: model.Network, features) -> np.ndarray:
    if net.precision == "int8":
        return quantization.infer_batch(net, features)
    return model.forward_batch(net, features)


def ensemble_probs(nets, features) -> np.ndarray:
    """Mean class probabilities of several networks on a feature batch."""
    return aggregate([_member_probs(net, features) for net in nets])


def evaluate(nets_or_net, dataset: LabeledDataset) -> tuple:
    """(accuracy percent, mean log-loss) of a network or an ensemble.

    A list of networks is aggregated by probability averaging; argmax
    ties resolve to the lowest class index.
    """
    if isinstance(nets_or_net, model.Network):
        probs = _member_probs(nets_or_net, dataset.features)
    else:
        probs = ensemble_probs(list(nets_or_net), dataset.features)
    return evaluate_probs(probs, dataset.labels)
