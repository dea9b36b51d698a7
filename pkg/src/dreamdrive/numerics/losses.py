"""Loss functions; each returns (scalar loss, gradient w.r.t. its input)."""

from __future__ import annotations

import numpy as np

BCE_CLAMP = 1e-7


def softmax_xent(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows with log-sum-exp stabilization.

    Gradient is (softmax - onehot) / N.
    """
    labels = np.asarray(labels)
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    logp = z - np.log(denom)
    loss = -float(logp[np.arange(n), labels].mean())
    grad = ez / denom
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad.astype(logits.dtype)


def bce(prediction: np.ndarray, target) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on probabilities, clamped away from {0, 1}."""
    prediction = np.asarray(prediction)
    t = np.broadcast_to(np.asarray(target, dtype=prediction.dtype), prediction.shape)
    lo, hi = BCE_CLAMP, 1.0 - BCE_CLAMP
    inside = (prediction > lo) & (prediction < hi)
    p = np.clip(prediction, lo, hi)
    loss = -float((t * np.log(p) + (1 - t) * np.log(1 - p)).mean())
    grad = np.where(inside, (p - t) / (p * (1 - p)), 0.0) / prediction.size
    return loss, grad.astype(prediction.dtype)


def l1_loss(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error; gradient is sign(prediction - target) / numel."""
    diff = prediction - target
    loss = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(prediction.dtype)
