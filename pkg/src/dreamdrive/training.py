"""Training loops for the adversarial pair and the classifier, evaluation
metrics, and per-epoch loss logging."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dreamdrive.datalog import Transition
from dreamdrive.errors import TrainingDivergedError
from dreamdrive.models import (
    Classifier,
    Discriminator,
    Generator,
    frames_to_unit,
    save_checkpoint,
)
from dreamdrive.numerics import Hyperparams, bce, l1_loss, sgd_momentum_step, softmax_xent, zero_grads
from dreamdrive.rng import Prng, derive_seed

CSV_HEADER = "epoch,d_loss,g_adv,g_l1,cls_loss,cls_acc"


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float | None = None
    g_adv_loss: float | None = None
    g_l1_loss: float | None = None
    cls_loss: float | None = None
    cls_train_acc: float | None = None


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)
    wall_seconds: float = 0.0
    final: dict[str, float] = field(default_factory=dict)


def transitions_to_arrays(transitions: list[Transition], dtype=np.float32):
    """One-time conversion to model inputs: unit-range frame tensors and labels."""
    ft = frames_to_unit(np.stack([t.frame_t for t in transitions]), dtype)
    ft1 = frames_to_unit(np.stack([t.frame_t1 for t in transitions]), dtype)
    actions = np.array([t.action for t in transitions], dtype=np.int64)
    return ft, ft1, actions


def _batches(n: int, batch_size: int, rng: Prng):
    order = rng.shuffled_indices(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_gan(transitions: list[Transition], gen: Generator, disc: Discriminator,
              hp: Hyperparams, out_dir=None) -> TrainReport:
    """Alternating 1:1 updates per batch: one discriminator step on
    (real -> 1, generated -> 0), then one generator step on the adversarial
    loss plus l1_weight * L1 against the recorded next frame."""
    if not transitions:
        raise ValueError("train_gan needs a nonempty dataset")
    start = time.perf_counter()
    ft_all, ft1_all, act_all = transitions_to_arrays(transitions)
    shuffle_rng = Prng(derive_seed(hp.seed, 0xA1))
    report = TrainReport()
    best_l1 = math.inf
    ch = disc.frame_t1_channel

    for epoch in range(1, hp.epochs + 1):
        d_sum = adv_sum = l1_sum = 0.0
        n_batches = 0
        for batch_no, idx in enumerate(_batches(len(transitions), hp.batch_size, shuffle_rng)):
            ft, ft1, act = ft_all[idx], ft1_all[idx], act_all[idx]
            fake = gen.forward(ft, act, training=True)

            # discriminator step
            loss_real, dreal = bce(disc.forward(ft, ft1, act, training=True), 1.0)
            disc.backward(dreal)
            loss_fake, dfake_p = bce(disc.forward(ft, fake, act, training=True), 0.0)
            disc.backward(dfake_p)
            d_loss = 0.5 * (loss_real + loss_fake)
            sgd_momentum_step(disc.layer_params(), hp)

            # generator step: non-saturating adversarial term + L1 anchor
            g_adv, dadv = bce(disc.forward(ft, fake, act, training=True), 1.0)
            dstack = disc.backward(dadv)
            dfake = dstack[:, ch : ch + 1].copy()
            g_l1, dl1 = l1_loss(fake, ft1)
            if hp.l1_weight:
                dfake += hp.l1_weight * dl1
            gen.backward(dfake)
            sgd_momentum_step(gen.layer_params(), hp)
            zero_grads(disc.layer_params())  # D grads picked up during the G step

            if not (math.isfinite(d_loss) and math.isfinite(g_adv) and math.isfinite(g_l1)):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}", epoch, batch_no)
            d_sum += d_loss
            adv_sum += g_adv
            l1_sum += g_l1
            n_batches += 1

        record = EpochRecord(epoch, d_loss=d_sum / n_batches,
                             g_adv_loss=adv_sum / n_batches, g_l1_loss=l1_sum / n_batches)
        report.records.append(record)
        if out_dir is not None:
            out_dir = Path(out_dir)
            save_checkpoint(gen, out_dir / "gen-last.sadw")
            save_checkpoint(disc, out_dir / "disc-last.sadw")
            if record.g_l1_loss < best_l1:
                best_l1 = record.g_l1_loss
                save_checkpoint(gen, out_dir / "gen-best.sadw")
                save_checkpoint(disc, out_dir / "disc-best.sadw")

    report.wall_seconds = time.perf_counter() - start
    last = report.records[-1]
    report.final = {"d_loss": last.d_loss, "g_adv": last.g_adv_loss, "g_l1": last.g_l1_loss}
    return report


def train_classifier(train_set: list[Transition], cls: Classifier, hp: Hyperparams,
                     out_dir=None) -> TrainReport:
    """Softmax cross-entropy with SGD momentum; dropout and batch statistics
    active throughout."""
    if not train_set:
        raise ValueError("train_classifier needs a nonempty train set")
    start = time.perf_counter()
    ft_all, ft1_all, labels_all = transitions_to_arrays(train_set)
    shuffle_rng = Prng(derive_seed(hp.seed, 0xC7))
    report = TrainReport()
    best_loss = math.inf

    for epoch in range(1, hp.epochs + 1):
        loss_sum = 0.0
        hits = 0
        n_batches = 0
        for batch_no, idx in enumerate(_batches(len(train_set), hp.batch_size, shuffle_rng)):
            logits = cls.forward(ft_all[idx], ft1_all[idx], training=True)
            loss, grad = softmax_xent(logits, labels_all[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_no}", epoch, batch_no)
            cls.backward(grad)
            sgd_momentum_step(cls.layer_params(), hp)
            loss_sum += loss * len(idx)
            hits += int((logits.argmax(axis=1) == labels_all[idx]).sum())
            n_batches += 1

        record = EpochRecord(epoch, cls_loss=loss_sum / len(train_set),
                             cls_train_acc=hits / len(train_set))
        report.records.append(record)
        if out_dir is not None:
            out_dir = Path(out_dir)
            save_checkpoint(cls, out_dir / "cls-last.sadw")
            if record.cls_loss < best_loss:
                best_loss = record.cls_loss
                save_checkpoint(cls, out_dir / "cls-best.sadw")

    report.wall_seconds = time.perf_counter() - start
    last = report.records[-1]
    report.final = {"cls_loss": last.cls_loss, "cls_train_acc": last.cls_train_acc}
    return report


@dataclass
class ClassifierEval:
    accuracy: float
    confusion: np.ndarray  # [true, predicted]


def eval_classifier(test_set: list[Transition], cls: Classifier,
                    batch_size: int = 64) -> ClassifierEval:
    if not test_set:
        raise ValueError("eval_classifier needs a nonempty test set")
    ft, ft1, labels = transitions_to_arrays(test_set)
    confusion = np.zeros((3, 3), dtype=np.int64)
    for start in range(0, len(test_set), batch_size):
        sl = slice(start, start + batch_size)
        pred = cls.forward(ft[sl], ft1[sl], training=False).argmax(axis=1)
        for t, p in zip(labels[sl], pred):
            confusion[t, p] += 1
    accuracy = float(np.trace(confusion)) / len(test_set)
    return ClassifierEval(accuracy, confusion)


@dataclass
class GeneratorEval:
    mae: float
    identity_baseline_mae: float
    per_action_mae: list[float]


def eval_generator(test_set: list[Transition], gen: Generator,
                   batch_size: int = 64) -> GeneratorEval:
    """MAE in unit pixel scale against the recorded next frame; the baseline
    predicts no change at all."""
    if not test_set:
        raise ValueError("eval_generator needs a nonempty test set")
    ft, ft1, actions = transitions_to_arrays(test_set)
    err_sum = np.zeros(3)
    base_sum = 0.0
    counts = np.zeros(3, dtype=np.int64)
    per_pixel = ft.shape[2] * ft.shape[3]
    for start in range(0, len(test_set), batch_size):
        sl = slice(start, start + batch_size)
        pred = gen.forward(ft[sl], actions[sl], training=False)
        err = np.abs(pred - ft1[sl]).mean(axis=(1, 2, 3))
        base_sum += float(np.abs(ft[sl] - ft1[sl]).sum()) / per_pixel
        for a in range(3):
            mask = actions[sl] == a
            err_sum[a] += float(err[mask].sum())
            counts[a] += int(mask.sum())
    mae = float(err_sum.sum() / len(test_set))
    baseline = base_sum / len(test_set)
    per_action = [float(err_sum[a] / counts[a]) if counts[a] else float("nan") for a in range(3)]
    return GeneratorEval(mae, baseline, per_action)


def _fmt(value: float | None) -> str:
    return "" if value is None else format(value, ".9g")


def emit_loss_csv(report: TrainReport, path) -> None:
    lines = [CSV_HEADER]
    for r in report.records:
        lines.append(",".join([
            str(r.epoch), _fmt(r.d_loss), _fmt(r.g_adv_loss), _fmt(r.g_l1_loss),
            _fmt(r.cls_loss), _fmt(r.cls_train_acc),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")
