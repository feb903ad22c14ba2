"""Post-training INT8 quantization of network parameters.

Per-tensor asymmetric affine scheme: the calibration range is the
tensor's [min, max] widened to include 0, so zero is always exactly
representable. Codes are int8, ``q = clamp(round(x / scale) + zp)``
with round-half-to-even; dequantization is ``(q - zp) * scale``.
Compute stays float: quantized networks are dequantized before running
the forward pass (weight-only quantization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .exceptions import NumericError, PrecisionError
from .model import Network

QMIN, QMAX = -128, 127


@dataclass
class QuantizedTensor:
    data: np.ndarray  # int8, original shape
    scale: float
    zero_point: int

    @property
    def shape(self):
        return self.data.shape


def compute_qparams(min_val: float, max_val: float) -> tuple:
    """(scale, zero_point) for an affine int8 grid over [min, max] u {0}."""
    if not (np.isfinite(min_val) and np.isfinite(max_val)):
        raise NumericError("quantization bounds must be finite")
    if min_val > max_val:
        raise NumericError(f"min {min_val} > max {max_val}")
    lo = min(float(min_val), 0.0)
    hi = max(float(max_val), 0.0)
    if hi == lo:  # both zero after widening
        return 1.0, 0
    scale = (hi - lo) / 255.0
    zero_point = int(np.rint(-lo / scale)) - 128
    return scale, int(np.clip(zero_point, QMIN, QMAX))


def quantize_with_qparams(t, scale: float, zero_point: int) -> np.ndarray:
    codes = np.rint(np.asarray(t, dtype=np.float64) / scale) + zero_point
    return np.clip(codes, QMIN, QMAX).astype(np.int8)


def quantize_tensor(t) -> QuantizedTensor:
    """Quantize a float tensor with qparams calibrated from its range."""
    t = np.asarray(t)
    if not np.all(np.isfinite(t)):
        raise NumericError("cannot quantize non-finite tensor")
    scale, zero_point = compute_qparams(float(t.min()), float(t.max()))
    return QuantizedTensor(quantize_with_qparams(t, scale, zero_point), scale, zero_point)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    return ((q.data.astype(np.float64) - q.zero_point) * q.scale).astype(np.float32)


def quantize_model(net: Network) -> Network:
    """Quantize every parameter tensor of a float network per-tensor."""
    if net.precision != "float32":
        raise PrecisionError("network is already quantized")
    params = {}
    qparams = {}
    for key, arr in net.params.items():
        q = quantize_tensor(arr)
        params[key] = q.data
        qparams[key] = (q.scale, q.zero_point)
    return Network(
        config=net.config, params=params, precision="int8", qparams=qparams,
        input_norm=net.input_norm, name=net.name, meta=dict(net.meta),
    )


def dequantize_model(net: Network) -> Network:
    """Reconstruct a float network from a quantized one."""
    if net.precision != "int8":
        raise PrecisionError("network is not quantized")
    params = {
        key: dequantize(QuantizedTensor(arr, *net.qparams[key]))
        for key, arr in net.params.items()
    }
    return Network(
        config=net.config, params=params, precision="float32",
        input_norm=net.input_norm, name=net.name, meta=dict(net.meta),
    )


def infer(net: Network, features):
    """Single-sample inference for a quantized network."""
    return model.forward(dequantize_model(net), features)


def infer_batch(net: Network, features):
    """Batch inference for a quantized network."""
    return model.forward_batch(dequantize_model(net), features)
