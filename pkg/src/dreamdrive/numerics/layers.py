"""Differentiable layers. Each layer caches what its backward pass needs;
backward accumulates parameter gradients and returns the input gradient."""

from __future__ import annotations

import numpy as np

from dreamdrive.errors import DegenerateBatchError, DimensionError
from dreamdrive.numerics import convops
from dreamdrive.numerics.tensor import LayerParams, Tensor
from dreamdrive.rng import Prng

INIT_STD = 0.02  # zero-mean normal for conv/dense weights


class Layer:
    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def layer_params(self) -> list[LayerParams]:
        return []


class Conv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0, rng: Prng | None = None,
                 name="conv", dtype=np.float32):
        self.stride, self.pad = stride, pad
        rng = rng or Prng(0)
        w = rng.normal((out_ch, in_ch, kernel, kernel), std=INIT_STD, dtype=dtype)
        self.params = LayerParams(name, Tensor(w), Tensor(np.zeros(out_ch, dtype=dtype)))
        self._cache = None

    def forward(self, x, training):
        out, self._cache = convops.conv2d_forward(
            x, self.params.weight.data, self.params.bias.data, self.stride, self.pad)
        return out

    def backward(self, dout):
        dx, dw, db = convops.conv2d_backward(dout, self._cache)
        self.params.weight.add_grad(dw)
        self.params.bias.add_grad(db)
        return dx

    def layer_params(self):
        return [self.params]


class ConvTranspose2d(Layer):
    def __init__(self, in_ch, out_ch, kernel, stride=1, pad=0, rng: Prng | None = None,
                 name="tconv", dtype=np.float32):
        self.stride, self.pad = stride, pad
        rng = rng or Prng(0)
        w = rng.normal((in_ch, out_ch, kernel, kernel), std=INIT_STD, dtype=dtype)
        self.params = LayerParams(name, Tensor(w), Tensor(np.zeros(out_ch, dtype=dtype)))
        self._cache = None

    def forward(self, x, training):
        out, self._cache = convops.conv2d_transpose_forward(
            x, self.params.weight.data, self.params.bias.data, self.stride, self.pad)
        return out

    def backward(self, dout):
        dx, dw, db = convops.conv2d_transpose_backward(dout, self._cache)
        self.params.weight.add_grad(dw)
        self.params.bias.add_grad(db)
        return dx

    def layer_params(self):
        return [self.params]


class MaxPool2d(Layer):
    def __init__(self, kernel=3, stride=2):
        self.kernel, self.stride = kernel, stride
        self._cache = None

    def forward(self, x, training):
        out, self._cache = convops.maxpool_forward(x, self.kernel, self.stride)
        return out

    def backward(self, dout):
        return convops.maxpool_backward(dout, self._cache)


class BatchNorm2d(Layer):
    """Per-channel normalization over (N, H, W) with learned scale/shift."""

    def __init__(self, channels, eps=1e-5, momentum=0.1, name="bn", dtype=np.float32):
        self.eps, self.momentum = eps, momentum
        self.params = LayerParams(
            name,
            Tensor(np.ones(channels, dtype=dtype)),
            Tensor(np.zeros(channels, dtype=dtype)),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )
        self._cache = None

    def forward(self, x, training):
        if x.ndim != 4:
            raise DimensionError(f"batchnorm input must be 4-d, got rank {x.ndim}")
        gamma = self.params.weight.data[:, None, None]
        beta = self.params.bias.data[:, None, None]
        if training:
            n, c, h, w = x.shape
            m = n * h * w
            if m < 2:
                raise DegenerateBatchError(
                    f"batchnorm '{self.params.name}' needs >=2 elements per channel, got {m}")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
            bm = self.momentum
            self.params.running_mean *= 1 - bm
            self.params.running_mean += bm * mean.astype(self.params.running_mean.dtype)
            self.params.running_var *= 1 - bm
            self.params.running_var += bm * var.astype(self.params.running_var.dtype)
            self._cache = ("train", x, xhat, inv_std, m)
        else:
            inv_std = 1.0 / np.sqrt(self.params.running_var + self.eps)
            xhat = (x - self.params.running_mean[:, None, None]) * inv_std[:, None, None]
            self._cache = ("eval", xhat, inv_std)
        return gamma * xhat + beta

    def backward(self, dout):
        gamma = self.params.weight.data[:, None, None]
        if self._cache[0] == "train":
            _, x, xhat, inv_std, m = self._cache
            self.params.weight.add_grad((dout * xhat).sum(axis=(0, 2, 3)))
            self.params.bias.add_grad(dout.sum(axis=(0, 2, 3)))
            dxhat = dout * gamma
            # closed-form batch-statistics gradient
            s1 = dxhat.sum(axis=(0, 2, 3))[:, None, None]
            s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[:, None, None]
            dx = (dxhat - s1 / m - xhat * s2 / m) * inv_std[:, None, None]
            return dx
        _, xhat, inv_std = self._cache
        self.params.weight.add_grad((dout * xhat).sum(axis=(0, 2, 3)))
        self.params.bias.add_grad(dout.sum(axis=(0, 2, 3)))
        return dout * gamma * inv_std[:, None, None]

    def layer_params(self):
        return [self.params]


class LeakyReLU(Layer):
    """max(x, slope*x); the derivative at exactly zero is the slope."""

    def __init__(self, slope=0.2):
        self.slope = slope
        self._mask = None

    def forward(self, x, training):
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, dout):
        return np.where(self._mask, dout, self.slope * dout)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, training):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0)


class Tanh(Layer):
    def __init__(self):
        self._out = None

    def forward(self, x, training):
        self._out = np.tanh(x)
        return self._out

    def backward(self, dout):
        return dout * (1 - self._out * self._out)


class Sigmoid(Layer):
    def __init__(self):
        self._out = None

    def forward(self, x, training):
        self._out = 1.0 / (1.0 + np.exp(-x))
        return self._out

    def backward(self, dout):
        return dout * self._out * (1 - self._out)


class Dropout(Layer):
    """Inverted dropout: survivors scaled by 1/(1-p) at train time, identity
    at inference. Masks come from the owning run's seeded PRNG stream."""

    def __init__(self, p: float, rng: Prng):
        if not 0 <= p < 1:
            raise ValueError(f"dropout p must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng
        self._mask = None

    def forward(self, x, training):
        if not training or self.p == 0.0:
            self._mask = None
            return x
        keep = self.rng.uniform(x.size).reshape(x.shape) >= self.p
        self._mask = keep.astype(x.dtype) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Dense(Layer):
    """Affine map on [N, F] inputs; weight is [F, G]."""

    def __init__(self, in_features, out_features, rng: Prng | None = None,
                 name="dense", dtype=np.float32):
        rng = rng or Prng(0)
        w = rng.normal((in_features, out_features), std=INIT_STD, dtype=dtype)
        self.params = LayerParams(name, Tensor(w), Tensor(np.zeros(out_features, dtype=dtype)))
        self._x = None

    def forward(self, x, training):
        if x.ndim != 2:
            raise DimensionError(f"dense input must be 2-d [N,F], got rank {x.ndim}")
        if x.shape[1] != self.params.weight.data.shape[0]:
            raise DimensionError(
                f"dense feature axis mismatch: input F={x.shape[1]}, "
                f"weight expects {self.params.weight.data.shape[0]}")
        self._x = x
        return x @ self.params.weight.data + self.params.bias.data

    def backward(self, dout):
        self.params.weight.add_grad(self._x.T @ dout)
        self.params.bias.add_grad(dout.sum(axis=0))
        return dout @ self.params.weight.data.T

    def layer_params(self):
        return [self.params]


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, training):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class ChannelPad(Layer):
    """Append zero channels so inputs of differing channel counts can share
    one convolution trunk."""

    def __init__(self, in_ch: int, total_ch: int):
        if total_ch < in_ch:
            raise DimensionError(f"cannot pad {in_ch} channels down to {total_ch}")
        self.in_ch, self.total_ch = in_ch, total_ch

    def forward(self, x, training):
        if x.shape[1] != self.in_ch:
            raise DimensionError(f"channel pad expected C={self.in_ch}, got {x.shape[1]}")
        if self.total_ch == self.in_ch:
            return x
        n, _, h, w = x.shape
        out = np.zeros((n, self.total_ch, h, w), dtype=x.dtype)
        out[:, : self.in_ch] = x
        return out

    def backward(self, dout):
        return dout[:, : self.in_ch].copy()


class Sequential(Layer):
    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x, training):
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def layer_params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.layer_params())
        return out
