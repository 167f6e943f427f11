"""Dense-tensor operations with exact reverse-mode gradients.

Every forward returns ``(output, cache)``; the paired ``*_backward`` takes
that cache plus the upstream gradient and returns gradients for each
input.  There is no computation graph: models run these ops as an
explicit forward schedule and unwind the caches in reverse.

Convolution is cross-correlation (no kernel flip).  "same" padding is
zero padding with the extra sample on the bottom/right, sized so that the
output extent is ceil(input/stride).  All ops preserve the dtype of their
inputs: float32 during training, float64 under gradient checking.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_and_pad(size: int, k: int, stride: int, padding: str) -> tuple[int, int, int]:
    if padding == "valid":
        if size < k:
            raise ValueError(f"kernel {k} does not fit input extent {size}")
        return (size - k) // stride + 1, 0, 0
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + k - size, 0)
        lo = total // 2
        return out, lo, total - lo
    raise ValueError(f"unknown padding {padding!r}")


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray,
           stride: int = 1, padding: str = "same"):
    """2-D cross-correlation. x: (H,W,Cin), w: (kh,kw,Cin,Cout), b: (Cout,)."""
    if x.ndim != 3 or w.ndim != 4:
        raise ValueError(f"bad ranks: input {x.shape}, weight {w.shape}")
    if x.shape[2] != w.shape[2]:
        raise ValueError(
            f"input channels {x.shape[2]} != weight channels {w.shape[2]}"
        )
    if b.shape != (w.shape[3],):
        raise ValueError(f"bias shape {b.shape} does not match {w.shape[3]} outputs")
    if stride not in (1, 2):
        raise ValueError(f"unsupported stride {stride}")
    h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    hout, pt, pb = _out_and_pad(h, kh, stride, padding)
    wout, pl, pr = _out_and_pad(wd, kw, stride, padding)
    xp = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    # (hout, wout, cin, kh, kw) -> rows of flattened patches in (kh, kw, cin)
    # order so a plain matmul against the flattened kernel applies the filter.
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 4, 2)).reshape(
        hout * wout, kh * kw * cin)
    out = (cols @ w.reshape(kh * kw * cin, cout) + b).reshape(hout, wout, cout)
    cache = (cols, w, x.shape, xp.shape, stride, (pt, pl), (hout, wout))
    return out, cache


def conv2d_backward(cache, dout: np.ndarray):
    """Gradients of conv2d w.r.t. (input, weight, bias)."""
    cols, w, x_shape, xp_shape, stride, (pt, pl), (hout, wout) = cache
    kh, kw, cin, cout = w.shape
    dout_f = dout.reshape(hout * wout, cout)
    dw = (cols.T @ dout_f).reshape(w.shape)
    db = dout_f.sum(axis=0)
    dcols = (dout_f @ w.reshape(kh * kw * cin, cout).T).reshape(
        hout, wout, kh, kw, cin)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    for u in range(kh):
        for v in range(kw):
            dxp[u:u + hout * stride:stride,
                v:v + wout * stride:stride] += dcols[:, :, u, v, :]
    h, wd, _ = x_shape
    dx = dxp[pt:pt + h, pl:pl + wd]
    return dx, dw, db


def conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray,
           stride: int = 1, padding: str = "same"):
    """1-D cross-correlation. x: (L,Cin), w: (k,Cin,Cout), b: (Cout,)."""
    if x.ndim != 2 or w.ndim != 3:
        raise ValueError(f"bad ranks: input {x.shape}, weight {w.shape}")
    out2, cache = conv2d(x[:, None, :], w[:, None, :, :], b, stride, padding)
    return out2[:, 0, :], cache


def conv1d_backward(cache, dout: np.ndarray):
    dx2, dw2, db = conv2d_backward(cache, dout[:, None, :])
    return dx2[:, 0, :], dw2[:, 0, :, :], db


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Affine map over the last axis. x: (...,Din), w: (Din,Dout), b: (Dout,)."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != weight rows {w.shape[0]}")
    out = x @ w + b
    return out, (x, w)


def dense_backward(cache, dout: np.ndarray):
    x, w = cache
    xf = x.reshape(-1, w.shape[0])
    df = dout.reshape(-1, w.shape[1])
    dw = xf.T @ df
    db = df.sum(axis=0)
    dx = (df @ w.T).reshape(x.shape)
    return dx, dw, db


def relu(x: np.ndarray):
    """Elementwise max(x, 0); the subgradient at 0 is 0."""
    return np.maximum(x, 0), (x > 0)


def relu_backward(cache, dout: np.ndarray):
    return dout * cache


def softmax_rows(x: np.ndarray):
    """Row-wise softmax of a 2-D array, stabilized by max subtraction."""
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {x.shape}")
    e = np.exp(x - x.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    return s, s


def softmax_rows_backward(cache, dout: np.ndarray):
    s = cache
    return s * (dout - (dout * s).sum(axis=1, keepdims=True))


def concat_channels(a: np.ndarray, b: np.ndarray, axis: int = 0):
    """Concatenate two arrays; the backward pass splits the gradient."""
    out = np.concatenate([a, b], axis=axis)
    return out, (a.shape[axis], axis)


def concat_channels_backward(cache, dout: np.ndarray):
    split, axis = cache
    da, db = np.split(dout, [split], axis=axis)
    return da, db


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all entries."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, diff


def mse_loss_backward(cache, dloss: float = 1.0):
    diff = cache
    return (2.0 * dloss / diff.size) * diff
