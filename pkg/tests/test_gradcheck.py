import numpy as np

from dreamdrive.numerics import gradient_check_all
from dreamdrive.numerics.gradcheck import BATCHNORM_TOL, DEFAULT_TOL, check_layer
from dreamdrive.numerics.layers import BatchNorm2d, Conv2d, Dense, LeakyReLU, Sequential
from dreamdrive.rng import Prng


def test_dense_gradient():
    rng = Prng(1)
    res = check_layer("dense", Dense(6, 5, rng=rng, dtype=np.float64),
                      rng.normal((4, 6), dtype=np.float64))
    assert res.max_rel_err < 1e-4


def test_conv_leaky_stack_gradient():
    rng = Prng(2)
    stack = Sequential([Conv2d(2, 3, 3, stride=1, pad=1, rng=rng, dtype=np.float64), LeakyReLU(0.2)])
    x = rng.normal((2, 2, 5, 5), dtype=np.float64)
    x = np.where(np.abs(x) < 0.05, 0.1, x)
    res = check_layer("conv+leaky", stack, x)
    assert res.max_rel_err < 1e-4


def test_batchnorm_gradient_looser_tolerance():
    rng = Prng(3)
    res = check_layer("bn", BatchNorm2d(3, dtype=np.float64),
                      rng.normal((8, 3, 4, 4), dtype=np.float64), tol=BATCHNORM_TOL)
    assert res.max_rel_err < 1e-3


def test_full_report_passes():
    results = gradient_check_all()
    names = {r.name for r in results}
    assert {"dense", "conv2d", "conv2d_transpose", "maxpool", "batchnorm",
            "dropout(p=0)", "leaky_relu", "relu", "tanh", "sigmoid",
            "softmax_xent", "bce", "conv2d+leaky_relu"} <= names
    for r in results:
        assert r.passed, f"{r.name}: {r.max_rel_err} >= {r.tolerance}"
        assert r.tolerance in (DEFAULT_TOL, BATCHNORM_TOL)
