import numpy as np
import pytest

from dreamdrive.datalog import collect, read_dataset
from dreamdrive.models import Classifier, Discriminator, Generator, build_models
from dreamdrive.numerics import Hyperparams
from dreamdrive.rng import Prng
from dreamdrive.training import (
    CSV_HEADER,
    EpochRecord,
    TrainReport,
    emit_loss_csv,
    eval_classifier,
    eval_generator,
    train_classifier,
    train_gan,
)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny.sadg"
    collect(5, 96, path)
    return list(read_dataset(path))


def gan_hp(**kw):
    base = dict(learning_rate=0.002, epochs=1, batch_size=16, seed=1)
    base.update(kw)
    return Hyperparams(**base)


class TestTrainGan:
    def test_pure_adversarial_mode_runs(self, tiny_dataset):
        gen, disc, _ = build_models(1)
        report = train_gan(tiny_dataset[:32], gen, disc, gan_hp(l1_weight=0.0))
        assert len(report.records) == 1
        r = report.records[0]
        assert all(np.isfinite([r.d_loss, r.g_adv_loss, r.g_l1_loss]))

    def test_fixed_seed_bit_identical_losses(self, tiny_dataset):
        runs = []
        for _ in range(2):
            gen, disc, _ = build_models(3)
            report = train_gan(tiny_dataset[:48], gen, disc, gan_hp(epochs=2, seed=7))
            runs.append([(r.d_loss, r.g_adv_loss, r.g_l1_loss) for r in report.records])
        assert runs[0] == runs[1]

    def test_checkpoints_written(self, tiny_dataset, tmp_path):
        gen, disc, _ = build_models(1)
        train_gan(tiny_dataset[:32], gen, disc, gan_hp(), out_dir=tmp_path)
        for name in ["gen-last.sadw", "gen-best.sadw", "disc-last.sadw", "disc-best.sadw"]:
            assert (tmp_path / name).exists()

    def test_empty_dataset_rejected(self):
        gen, disc, _ = build_models(1)
        with pytest.raises(ValueError):
            train_gan([], gen, disc, gan_hp())


class TestTrainClassifier:
    def test_loss_decreases_on_tiny_run(self, tiny_dataset):
        _, _, cls = build_models(2)
        hp = Hyperparams(learning_rate=0.01, epochs=4, batch_size=16, seed=2)
        report = train_classifier(tiny_dataset[:64], cls, hp)
        assert len(report.records) == 4
        assert report.records[-1].cls_loss < report.records[0].cls_loss * 1.5

    def test_fixed_seed_bit_identical(self, tiny_dataset):
        runs = []
        for _ in range(2):
            _, _, cls = build_models(5)
            hp = Hyperparams(learning_rate=0.01, epochs=2, batch_size=16, seed=5)
            report = train_classifier(tiny_dataset[:48], cls, hp)
            runs.append([(r.cls_loss, r.cls_train_acc) for r in report.records])
        assert runs[0] == runs[1]

    def test_epochs_default_25(self):
        assert Hyperparams().epochs == 25


class TestEvalClassifier:
    def test_untrained_near_chance_on_balanced_set(self, tiny_dataset):
        # perfectly balanced three-way labels: any fixed predictor scores 1/3
        by_class = {a: [t for t in tiny_dataset if t.action == a] for a in range(3)}
        n = min(len(v) for v in by_class.values())
        balanced = sum((v[:n] for v in by_class.values()), [])
        _, _, cls = build_models(11)
        result = eval_classifier(balanced, cls)
        assert abs(result.accuracy - 1 / 3) < 0.25
        assert result.confusion.sum() == len(balanced)

    def test_confusion_rows_match_class_counts(self, tiny_dataset):
        _, _, cls = build_models(11)
        result = eval_classifier(tiny_dataset, cls)
        for a in range(3):
            assert result.confusion[a].sum() == sum(1 for t in tiny_dataset if t.action == a)

    def test_eval_does_not_mutate(self, tiny_dataset):
        _, _, cls = build_models(11)
        before = [arr.copy() for _, arr in cls.named_tensors()]
        eval_classifier(tiny_dataset[:16], cls)
        after = [arr for _, arr in cls.named_tensors()]
        for b, a in zip(before, after):
            assert np.array_equal(b, a)


class TestEvalGenerator:
    def test_identity_generator_matches_baseline(self, tiny_dataset):
        class CopyGen:
            def forward(self, ft, actions, training):
                return ft.copy()

        result = eval_generator(tiny_dataset[:32], CopyGen())
        assert result.mae == pytest.approx(result.identity_baseline_mae, rel=1e-6)

    def test_mae_nonnegative(self, tiny_dataset):
        gen, _, _ = build_models(1)
        result = eval_generator(tiny_dataset[:16], gen)
        assert result.mae >= 0
        assert result.identity_baseline_mae >= 0
        assert len(result.per_action_mae) == 3


class TestLossCsv:
    def test_line_count(self, tmp_path):
        report = TrainReport(records=[EpochRecord(i + 1, cls_loss=0.5 / (i + 1),
                                                  cls_train_acc=0.5) for i in range(25)])
        path = tmp_path / "loss.csv"
        emit_loss_csv(report, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 26
        assert lines[0] == CSV_HEADER

    def test_round_trip_six_digits(self, tmp_path):
        report = TrainReport(records=[
            EpochRecord(1, d_loss=0.123456789, g_adv_loss=1.23456789e-3, g_l1_loss=9.87654321)])
        path = tmp_path / "loss.csv"
        emit_loss_csv(report, path)
        row = path.read_text().strip().split("\n")[1].split(",")
        assert float(row[1]) == pytest.approx(0.123456789, rel=1e-6)
        assert float(row[2]) == pytest.approx(1.23456789e-3, rel=1e-6)
        assert float(row[3]) == pytest.approx(9.87654321, rel=1e-6)
        assert row[4] == "" and row[5] == ""

    def test_empty_report_header_only(self, tmp_path):
        path = tmp_path / "loss.csv"
        emit_loss_csv(TrainReport(), path)
        assert path.read_text() == CSV_HEADER + "\n"
