"""Core value types: tensors with gradient slots, per-layer parameter
bundles, and the hyperparameter record shared by all training code."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dreamdrive.errors import ConfigError


class Tensor:
    """Dense n-dimensional array (row-major) with an optional gradient slot."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray):
        self.data = np.ascontiguousarray(data)
        self.grad: np.ndarray | None = None

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def add_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ValueError(f"gradient shape {g.shape} != value shape {self.data.shape}")
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None


class LayerParams:
    """Parameters of one layer: weight, optional bias, optional batch-norm
    running statistics, and one momentum buffer per trainable tensor."""

    def __init__(
        self,
        name: str,
        weight: Tensor,
        bias: Tensor | None = None,
        running_mean: np.ndarray | None = None,
        running_var: np.ndarray | None = None,
    ):
        self.name = name
        self.weight = weight
        self.bias = bias
        self.running_mean = running_mean
        self.running_var = running_var
        self.velocity: dict[str, np.ndarray] = {}

    def trainable(self) -> list[tuple[str, Tensor]]:
        slots = [("weight", self.weight)]
        if self.bias is not None:
            slots.append(("bias", self.bias))
        return slots

    def zero_grads(self) -> None:
        for _, t in self.trainable():
            t.zero_grad()


@dataclass
class Hyperparams:
    """Training knobs; defaults follow the conventions baked into the models."""

    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    dropout_p: float = 0.5
    leaky_slope: float = 0.2
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1
    l1_weight: float = 10.0
    epochs: int = 25
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.bn_epsilon <= 0:
            raise ConfigError(f"bn_epsilon must be positive, got {self.bn_epsilon}")
        if not 0 < self.bn_momentum <= 1:
            raise ConfigError(f"bn_momentum must be in (0, 1], got {self.bn_momentum}")
        if self.l1_weight < 0:
            raise ConfigError(f"l1_weight must be nonnegative, got {self.l1_weight}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
