"""Input validation helpers for the estimator layer."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError


def check_waveform_batch(X) -> np.ndarray:
    """Coerce to a (n_clips, n_samples) float array of equal-length clips."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        out = X.astype(np.float64, copy=False)
    else:
        clips = [np.asarray(c, dtype=np.float64) for c in X]
        if not clips:
            raise ValueError("empty waveform batch")
        lengths = {c.shape for c in clips}
        if any(c.ndim != 1 for c in clips) or len(lengths) != 1:
            raise ShapeError("all clips must be 1-D and the same length")
        out = np.stack(clips)
    if out.size == 0:
        raise ValueError("empty waveform batch")
    if not np.all(np.isfinite(out)):
        raise ValueError("waveforms contain non-finite values")
    return out


def check_feature_batch(X, input_shape) -> np.ndarray:
    """Coerce to (n, C, H, W) float32 feature maps matching ``input_shape``.

    Accepts the native 4-D layout or the flattened 2-D layout
    (n, C*H*W) for interoperability with matrix-shaped pipelines.
    """
    X = np.asarray(X, dtype=np.float32)
    flat = int(np.prod(input_shape))
    if X.ndim == 2 and X.shape[1] == flat:
        X = X.reshape(len(X), *input_shape)
    if X.ndim != 4 or X.shape[1:] != tuple(input_shape):
        raise ShapeError(
            f"expected features of shape (n, {input_shape[0]}, {input_shape[1]}, "
            f"{input_shape[2]}) or (n, {flat}), got {X.shape}"
        )
    if len(X) == 0:
        raise ValueError("empty feature batch")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ShapeError(f"labels must be 1-D of length {n}, got shape {y.shape}")
    return y
