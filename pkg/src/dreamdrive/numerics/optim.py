"""SGD with momentum, the one optimizer the networks train with."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from dreamdrive.errors import PoisonedGradientError
from dreamdrive.numerics.tensor import Hyperparams, LayerParams


def sgd_momentum_step(params: Iterable[LayerParams], hp: Hyperparams) -> None:
    """v <- momentum*v - lr*g; p <- p + v, per element; gradients cleared.

    Parameters whose gradient slot is empty are skipped, so one step can be
    applied to a parameter list that shares layers with another network.
    Duplicate LayerParams (shared trunks) are updated once.
    """
    seen: set[int] = set()
    for lp in params:
        if id(lp) in seen:
            continue
        seen.add(id(lp))
        for slot, tensor in lp.trainable():
            g = tensor.grad
            if g is None:
                continue
            if np.isnan(g).any():
                raise PoisonedGradientError(f"NaN gradient in parameter '{lp.name}.{slot}'")
            v = lp.velocity.get(slot)
            if v is None:
                v = np.zeros_like(tensor.data)
                lp.velocity[slot] = v
            v *= hp.momentum
            v -= hp.learning_rate * g
            tensor.data += v
            tensor.grad = None


def zero_grads(params: Iterable[LayerParams]) -> None:
    for lp in params:
        lp.zero_grads()
