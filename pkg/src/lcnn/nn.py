"""Layer primitives with explicit forward and backward passes.

Everything here is a pure function on numpy arrays in channels-first,
row-major layout. Spatial ops accept a single sample ``(C, H, W)`` or a
batch ``(N, C, H, W)``; dense ops accept ``(n,)`` or ``(N, n)``. The
working precision is float32; passing float64 arrays runs the same code
in 64-bit mode, which the gradient checker relies on.

Convolutions are fixed 3x3, stride 1, zero padding 1, so spatial shape
is preserved. Average pooling uses stride == window and drops trailing
rows/columns that do not fill a complete window.
"""

from __future__ import annotations

import numpy as np

from .exceptions import NumericError, ShapeError

BN_EPS = 1e-3
BN_MOMENTUM = 0.99
CE_EPS = 1e-12


def _as_batch(x, ndim):
    """Promote a single sample to a batch of one; report whether it was promoted."""
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected {ndim - 1}D sample or {ndim}D batch, got shape {x.shape}")
    return x, False


# ---------------------------------------------------------------------------
# convolution


def _im2col3(xpad, h, w):
    """Unfold 3x3 patches of a padded batch into (N, C*9, H*W) columns."""
    n, c = xpad.shape[:2]
    cols = np.empty((n, c, 3, 3, h, w), dtype=xpad.dtype)
    for p in range(3):
        for q in range(3):
            cols[:, :, p, q] = xpad[:, :, p : p + h, q : q + w]
    return cols.reshape(n, c * 9, h * w)


def _pad1(x):
    n, c, h, w = x.shape
    xpad = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
    xpad[:, :, 1:-1, 1:-1] = x
    return xpad


def _check_conv_shapes(x, w, b):
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ShapeError(f"conv weights must be (C_out, C_in, 3, 3), got {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(
            f"input has {x.shape[1]} channels but conv weights expect {w.shape[1]}"
        )
    if b.shape != (w.shape[0],):
        raise ShapeError(f"conv bias must be ({w.shape[0]},), got {b.shape}")
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise ShapeError(f"spatial dims must be >= 1, got {x.shape}")


def conv2d_forward(x, w, b, cols=None):
    """3x3 same convolution. ``cols`` may pass a precomputed im2col buffer."""
    x, single = _as_batch(x, 4)
    _check_conv_shapes(x, w, b)
    n, _, h, wd = x.shape
    c_out = w.shape[0]
    if cols is None:
        cols = _im2col3(_pad1(x), h, wd)
    y = np.matmul(w.reshape(c_out, -1), cols).reshape(n, c_out, h, wd)
    y += b[:, None, None]
    return y[0] if single else y


def conv2d_backward(x, w, dy, cols=None, need_dx=True):
    """Gradients of the 3x3 same convolution: returns (dx, dw, db)."""
    x, single = _as_batch(x, 4)
    dy, _ = _as_batch(dy, 4)
    _check_conv_shapes(x, w, np.zeros(w.shape[0], dtype=w.dtype))
    n, c_in, h, wd = x.shape
    c_out = w.shape[0]
    if cols is None:
        cols = _im2col3(_pad1(x), h, wd)
    dy2 = dy.reshape(n, c_out, h * wd)
    db = dy2.sum(axis=(0, 2))
    dw = np.matmul(dy2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    dx = None
    if need_dx:
        dcols = np.matmul(w.reshape(c_out, -1).T, dy2)
        dcols = dcols.reshape(n, c_in, 3, 3, h, wd)
        dxpad = np.zeros((n, c_in, h + 2, wd + 2), dtype=x.dtype)
        for p in range(3):
            for q in range(3):
                dxpad[:, :, p : p + h, q : q + wd] += dcols[:, :, p, q]
        dx = dxpad[:, :, 1:-1, 1:-1]
        if single:
            dx = dx[0]
    return dx, dw, db


# ---------------------------------------------------------------------------
# batch normalization


def batchnorm_forward(x, gamma, beta, mean, var, eps=BN_EPS):
    """Inference-mode batchnorm with explicit per-channel statistics."""
    x, single = _as_batch(x, 4)
    if np.any(var + eps <= 0):
        raise NumericError("batchnorm requires var + eps > 0")
    scale = (gamma / np.sqrt(var + eps)).astype(x.dtype)
    shift = (beta - mean * scale).astype(x.dtype)
    y = x * scale[:, None, None] + shift[:, None, None]
    return y[0] if single else y


def batchnorm_train_forward(x, gamma, beta, eps=BN_EPS):
    """Training-mode batchnorm using batch statistics over (N, H, W).

    Returns ``(y, cache, batch_mean, batch_var)``; the caller folds the
    batch statistics into its running averages.
    """
    x, _ = _as_batch(x, 4)
    axes = (0, 2, 3)
    mean = x.mean(axis=axes)
    var = x.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
    y = gamma[:, None, None] * xhat + beta[:, None, None]
    cache = (xhat, inv_std.astype(x.dtype), gamma)
    return y, cache, mean, var


def batchnorm_train_backward(dy, cache):
    """Gradients of training-mode batchnorm: returns (dx, dgamma, dbeta)."""
    xhat, inv_std, gamma = cache
    m = dy.shape[0] * dy.shape[2] * dy.shape[3]
    axes = (0, 2, 3)
    dbeta = dy.sum(axis=axes)
    dgamma = (dy * xhat).sum(axis=axes)
    dxhat = dy * gamma[:, None, None]
    dx = (
        dxhat
        - dxhat.mean(axis=axes)[:, None, None]
        - xhat * (dxhat * xhat).mean(axis=axes)[:, None, None]
    ) * inv_std[:, None, None]
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# pooling


def avgpool_forward(x, window):
    """Average pooling with stride == window; incomplete windows are dropped."""
    x, single = _as_batch(x, 4)
    ph, pw = window
    n, c, h, w = x.shape
    ho, wo = h // ph, w // pw
    if ho < 1 or wo < 1:
        raise ShapeError(f"pool window {window} larger than input {(h, w)}")
    y = x[:, :, : ho * ph, : wo * pw].reshape(n, c, ho, ph, wo, pw).mean(axis=(3, 5))
    return y[0] if single else y


def avgpool_backward(dy, input_shape, window):
    """Gradient of average pooling for an input of ``input_shape``."""
    dy, single = _as_batch(dy, 4)
    ph, pw = window
    n, c, ho, wo = dy.shape
    h, w = input_shape[-2:]
    dx = np.zeros((n, c, h, w), dtype=dy.dtype)
    g = dy / np.asarray(ph * pw, dtype=dy.dtype)
    dx[:, :, : ho * ph, : wo * pw] = np.broadcast_to(
        g[:, :, :, None, :, None], (n, c, ho, ph, wo, pw)
    ).reshape(n, c, ho * ph, wo * pw)
    return dx[0] if single else dx


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, w, b):
    """Affine layer y = W x + b with W of shape (out, in)."""
    x, single = _as_batch(x, 2)
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"dense input length {x.shape[1]} != weight columns {w.shape[1]}")
    y = np.matmul(x[:, None, :], w.T)[:, 0] + b
    return y[0] if single else y


def dense_backward(x, w, dy):
    """Gradients of the affine layer: returns (dx, dw, db)."""
    x, single = _as_batch(x, 2)
    dy, _ = _as_batch(dy, 2)
    db = dy.sum(axis=0)
    dw = dy.T @ x
    dx = dy @ w
    return (dx[0] if single else dx), dw, db


# ---------------------------------------------------------------------------
# activations


def tanh_forward(x):
    return np.tanh(x)


def tanh_backward(y, dy):
    """Gradient given the forward output y = tanh(x)."""
    return dy * (1.0 - y * y)


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, dy):
    return dy * (x > 0)


def softmax_forward(x):
    """Row-wise softmax with max subtraction for stability."""
    x, single = _as_batch(x, 2)
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if single else p


def softmax_backward(p, dy):
    """Generic softmax VJP given forward output p."""
    p, single = _as_batch(p, 2)
    dy, _ = _as_batch(dy, 2)
    dot = (dy * p).sum(axis=1, keepdims=True)
    dx = p * (dy - dot)
    return dx[0] if single else dx


# ---------------------------------------------------------------------------
# loss


def cross_entropy(probs, labels):
    """Mean categorical cross-entropy -log(p[label] + eps) over a batch."""
    probs, single = _as_batch(probs, 2)
    labels = np.atleast_1d(labels)
    picked = probs[np.arange(len(labels)), labels]
    losses = -np.log(picked + CE_EPS)
    return float(losses.mean())


def cross_entropy_softmax_grad(probs, labels):
    """Gradient of mean cross-entropy w.r.t. the softmax *logits*.

    Up to the loss epsilon this is (p - onehot) / N; the exact factor
    p_y / (p_y + eps) is kept so analytic gradients match finite
    differences to machine precision.
    """
    probs, _ = _as_batch(probs, 2)
    labels = np.atleast_1d(labels)
    n = len(labels)
    idx = np.arange(n)
    picked = probs[idx, labels]
    factor = picked / (picked + CE_EPS)
    onehot = np.zeros_like(probs)
    onehot[idx, labels] = 1.0
    dlogits = (probs - onehot) * (factor / n)[:, None]
    return dlogits.astype(probs.dtype)


# ---------------------------------------------------------------------------
# gradient checking


def numerical_gradient(f, x, step=1e-5):
    """Central finite differences of a scalar function at ``x`` (in place)."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        flat[i] = orig - step
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def relative_error(a, b, floor=1e-6):
    """Max absolute difference normalized by the larger gradient magnitude.

    ``floor`` keeps the ratio meaningful when a gradient is identically
    zero (e.g. conv biases that a following batch-stats batchnorm
    cancels): differences below the floor are compared absolutely.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / scale)
