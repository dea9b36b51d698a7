"""Finite-difference verification of every layer and loss gradient.

Runs in double precision with central differences (h = 1e-5); a failing
check is a report entry, not an exception.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from dreamdrive.numerics import losses
from dreamdrive.numerics.layers import (
    BatchNorm2d,
    Conv2d,
    ConvTranspose2d,
    Dense,
    Dropout,
    Layer,
    LeakyReLU,
    MaxPool2d,
    ReLU,
    Sequential,
    Sigmoid,
    Tanh,
)
from dreamdrive.rng import Prng

H_STEP = 1e-5
DEFAULT_TOL = 1e-4
BATCHNORM_TOL = 1e-3  # batch statistics couple elements; looser bound


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())


def _central_diff(f: Callable[[], float], arr: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + H_STEP
        up = f()
        flat[i] = orig - H_STEP
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * H_STEP)
    return grad


def check_layer(name: str, layer: Layer, x: np.ndarray, tol: float = DEFAULT_TOL,
                training: bool = True) -> CheckResult:
    """Check d(sum(out * R))/dx and /dparams for a layer or stack."""
    rng = Prng(0xC0FFEE)
    out = layer.forward(x, training)
    proj = rng.normal(out.shape, dtype=np.float64)

    def loss() -> float:
        return float((layer.forward(x, training) * proj).sum())

    for lp in layer.layer_params():
        lp.zero_grads()
    layer.forward(x, training)
    dx = layer.backward(proj.copy())

    worst = _rel_err(dx, _central_diff(loss, x))
    for lp in layer.layer_params():
        for _, tensor in lp.trainable():
            worst = max(worst, _rel_err(tensor.grad, _central_diff(loss, tensor.data)))
    return CheckResult(name, worst, tol)


def check_loss(name: str, fn: Callable[[np.ndarray], tuple], x: np.ndarray,
               tol: float = DEFAULT_TOL) -> CheckResult:
    _, analytic = fn(x)
    numeric = _central_diff(lambda: fn(x)[0], x)
    return CheckResult(name, _rel_err(analytic, numeric), tol)


def _rand(rng: Prng, shape: Sequence[int], away_from_zero: float = 0.0) -> np.ndarray:
    x = rng.normal(shape, dtype=np.float64)
    if away_from_zero:
        # keep inputs off activation kinks so finite differences stay valid
        x = np.where(np.abs(x) < away_from_zero, away_from_zero + np.abs(x), x)
    return x


def gradient_check_all(seed: int = 7) -> list[CheckResult]:
    """Every layer kind and loss the three networks use."""
    rng = Prng(seed)
    f64 = np.float64
    results = [
        check_layer("dense", Dense(6, 5, rng=rng, dtype=f64), _rand(rng, (4, 6))),
        check_layer("conv2d", Conv2d(3, 4, 3, stride=2, pad=1, rng=rng, dtype=f64),
                    _rand(rng, (2, 3, 6, 6))),
        check_layer(
            "conv2d+leaky_relu",
            Sequential([Conv2d(2, 3, 3, stride=1, pad=1, rng=rng, dtype=f64), LeakyReLU(0.2)]),
            _rand(rng, (2, 2, 5, 5), away_from_zero=0.05)),
        check_layer("conv2d_transpose", ConvTranspose2d(4, 3, 4, stride=2, pad=1, rng=rng, dtype=f64),
                    _rand(rng, (2, 4, 3, 3))),
        check_layer("maxpool", MaxPool2d(3, 2), _rand(rng, (2, 2, 7, 7))),
        check_layer("batchnorm", BatchNorm2d(3, name="bn", dtype=f64),
                    _rand(rng, (8, 3, 4, 4)), tol=BATCHNORM_TOL),
        check_layer("dropout(p=0)", Dropout(0.0, rng), _rand(rng, (4, 6))),
        check_layer("leaky_relu", LeakyReLU(0.2), _rand(rng, (5, 7), away_from_zero=0.05)),
        check_layer("relu", ReLU(), _rand(rng, (5, 7), away_from_zero=0.05)),
        check_layer("tanh", Tanh(), _rand(rng, (5, 7))),
        check_layer("sigmoid", Sigmoid(), _rand(rng, (5, 7))),
    ]

    labels = np.array([0, 1, 2, 1, 0, 2])
    results.append(check_loss("softmax_xent",
                              lambda z: losses.softmax_xent(z, labels),
                              _rand(rng, (6, 3))))
    probs = 0.2 + 0.6 * rng.uniform(8)
    targets = (rng.uniform(8) < 0.5).astype(np.float64)
    results.append(check_loss("bce", lambda p: losses.bce(p, targets), probs))
    return results
