"""Functional convolution, transposed convolution, and pooling kernels.

All spatial ops run through one im2col/col2im pair, which makes
conv2d_transpose the exact adjoint of conv2d by construction: conv is
``y = W @ cols(x)`` and the transpose is ``x = cols_T(W.T @ y)``.
"""

from __future__ import annotations

import numpy as np

from dreamdrive.errors import DimensionError


def conv_out_size(extent: int, kernel: int, stride: int, pad: int) -> int:
    return (extent + 2 * pad - kernel) // stride + 1


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Gather sliding windows into a [N, C*kh*kw, Ho*Wo] matrix."""
    n, c, h, w = x.shape
    ho = conv_out_size(h, kh, stride, pad)
    wo = conv_out_size(w, kw, stride, pad)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols.reshape(n, c * kh * kw, ho * wo)


def col2im(cols: np.ndarray, x_shape: tuple, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Scatter-add of im2col: exact transpose of the gather above."""
    n, c, h, w = x_shape
    ho = conv_out_size(h, kh, stride, pad)
    wo = conv_out_size(w, kw, stride, pad)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols6[:, :, i, j]
    if pad:
        return xp[:, :, pad:-pad, pad:-pad]
    return xp


def _check_4d(name: str, x: np.ndarray) -> None:
    if x.ndim != 4:
        raise DimensionError(f"{name} must be 4-d [N,C,H,W], got rank {x.ndim}")


def conv2d_forward(x, weight, bias, stride: int, pad: int):
    """Cross-correlation plus bias. weight is [K, C, kh, kw]."""
    _check_4d("conv2d input", x)
    _check_4d("conv2d weight", weight)
    k, cw, kh, kw = weight.shape
    n, c, h, w = x.shape
    if c != cw:
        raise DimensionError(f"conv2d channel axis mismatch: input C={c}, kernel C={cw}")
    ho = conv_out_size(h, kh, stride, pad)
    wo = conv_out_size(w, kw, stride, pad)
    if ho < 1 or wo < 1:
        raise DimensionError(
            f"conv2d spatial axis collapsed: {h}x{w} with k={kh}, stride={stride}, pad={pad}"
        )
    cols = im2col(x, kh, kw, stride, pad)
    w2 = weight.reshape(k, c * kh * kw)
    out = np.matmul(w2[None], cols).reshape(n, k, ho, wo)
    if bias is not None:
        out += bias[:, None, None]
    cache = (x.shape, cols, weight, stride, pad)
    return out, cache


def conv2d_backward(dout, cache):
    x_shape, cols, weight, stride, pad = cache
    n = x_shape[0]
    k, c, kh, kw = weight.shape
    dout2 = dout.reshape(n, k, -1)
    w2 = weight.reshape(k, c * kh * kw)
    dw = np.matmul(dout2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
    db = dout.sum(axis=(0, 2, 3))
    dcols = np.matmul(w2.T[None], dout2)
    dx = col2im(dcols, x_shape, kh, kw, stride, pad)
    return dx, dw, db


def conv2d_transpose_forward(z, weight, bias, stride: int, pad: int):
    """Fractionally-strided convolution: the adjoint of conv2d with the same
    geometry. weight is [C_in, C_out, kh, kw]."""
    _check_4d("conv2d_transpose input", z)
    _check_4d("conv2d_transpose weight", weight)
    cin, cout, kh, kw = weight.shape
    n, c, h, w = z.shape
    if c != cin:
        raise DimensionError(f"conv2d_transpose channel axis mismatch: input C={c}, kernel C_in={cin}")
    ho = (h - 1) * stride - 2 * pad + kh
    wo = (w - 1) * stride - 2 * pad + kw
    if ho < 1 or wo < 1:
        raise DimensionError(
            f"conv2d_transpose spatial axis collapsed: {h}x{w} with k={kh}, stride={stride}, pad={pad}"
        )
    w2 = weight.reshape(cin, cout * kh * kw)
    z2 = z.reshape(n, cin, h * w)
    cols = np.matmul(w2.T[None], z2)
    out = col2im(cols, (n, cout, ho, wo), kh, kw, stride, pad)
    if bias is not None:
        out += bias[:, None, None]
    cache = (z2, z.shape, weight, stride, pad, (n, cout, ho, wo))
    return out, cache


def conv2d_transpose_backward(dout, cache):
    z2, z_shape, weight, stride, pad, _ = cache
    cin, cout, kh, kw = weight.shape
    n = z_shape[0]
    w2 = weight.reshape(cin, cout * kh * kw)
    dcols = im2col(dout, kh, kw, stride, pad)
    dz = np.matmul(w2[None], dcols).reshape(z_shape)
    dw = np.matmul(z2, dcols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
    db = dout.sum(axis=(0, 2, 3))
    return dz, dw, db


def maxpool_forward(x, kernel: int = 3, stride: int = 2):
    """Windowed maximum; remembers each window's argmax (first index wins ties)."""
    _check_4d("maxpool input", x)
    n, c, h, w = x.shape
    if h < kernel or w < kernel:
        raise DimensionError(f"maxpool window {kernel} larger than input {h}x{w}")
    ho = conv_out_size(h, kernel, stride, 0)
    wo = conv_out_size(w, kernel, stride, 0)
    win = np.empty((n, c, ho, wo, kernel, kernel), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            win[:, :, :, :, i, j] = x[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    flat = win.reshape(n, c, ho, wo, kernel * kernel)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    cache = (x.shape, arg, kernel, stride)
    return out, cache


def maxpool_backward(dout, cache):
    x_shape, arg, kernel, stride = cache
    n, c, h, w = x_shape
    ho, wo = arg.shape[2], arg.shape[3]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    nn, cc, hh, ww = np.indices((n, c, ho, wo), sparse=False)
    hi = hh * stride + arg // kernel
    wi = ww * stride + arg % kernel
    np.add.at(dx, (nn, cc, hi, wi), dout)
    return dx
