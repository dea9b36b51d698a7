"""Dense tensor math, differentiable layers, losses, SGD-with-momentum,
and a finite-difference gradient checker. Everything the three networks
are built from; no general computation graph, just the layers they need.
"""

from dreamdrive.numerics.tensor import Tensor, LayerParams, Hyperparams
from dreamdrive.numerics.layers import (
    BatchNorm2d,
    ChannelPad,
    Conv2d,
    ConvTranspose2d,
    Dense,
    Dropout,
    Flatten,
    LeakyReLU,
    MaxPool2d,
    ReLU,
    Sequential,
    Sigmoid,
    Tanh,
)
from dreamdrive.numerics.losses import bce, l1_loss, softmax_xent
from dreamdrive.numerics.optim import sgd_momentum_step, zero_grads
from dreamdrive.numerics.gradcheck import CheckResult, gradient_check_all

__all__ = [
    "Tensor",
    "LayerParams",
    "Hyperparams",
    "Conv2d",
    "ConvTranspose2d",
    "MaxPool2d",
    "BatchNorm2d",
    "Dense",
    "Dropout",
    "Flatten",
    "ChannelPad",
    "LeakyReLU",
    "ReLU",
    "Tanh",
    "Sigmoid",
    "Sequential",
    "softmax_xent",
    "bce",
    "l1_loss",
    "sgd_momentum_step",
    "zero_grads",
    "CheckResult",
    "gradient_check_all",
]
