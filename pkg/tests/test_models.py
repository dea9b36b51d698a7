import numpy as np
import pytest

from dreamdrive.errors import CheckpointError
from dreamdrive.models import (
    Classifier,
    Discriminator,
    Generator,
    action_channels,
    build_models,
    count_layers,
    frames_to_unit,
    load_checkpoint,
    save_checkpoint,
    unit_to_frames,
)
from dreamdrive.numerics import Hyperparams, sgd_momentum_step, softmax_xent
from dreamdrive.numerics.layers import Conv2d, Dense, Dropout, MaxPool2d
from dreamdrive.roadworld import world_init, render
from dreamdrive.rng import Prng


def sample_frames(n=2, seed=0):
    frames = np.stack([render(world_init(seed + i)) for i in range(n)])
    return frames_to_unit(frames)


class TestFrameConversion:
    def test_round_trip_palette(self):
        frame = render(world_init(3))
        unit = frames_to_unit(frame)
        assert unit.shape == (1, 1, 64, 64)
        assert unit.min() >= -1.0 and unit.max() <= 1.0
        back = unit_to_frames(unit)
        assert np.array_equal(back[0], frame)

    def test_action_channels_one_hot(self):
        ch = action_channels([0, 2], 4, 4)
        assert ch.shape == (2, 3, 4, 4)
        assert np.all(ch[0, 0] == 1) and np.all(ch[0, 1:] == 0)
        assert np.all(ch[1, 2] == 1) and np.all(ch[1, :2] == 0)


class TestGenerator:
    def test_output_shape_matches_input(self):
        gen = Generator(Prng(1))
        out = gen.forward(sample_frames(2), [0, 2], training=False)
        assert out.shape == (2, 1, 64, 64)

    def test_output_in_tanh_range(self):
        gen = Generator(Prng(1))
        out = gen.forward(sample_frames(3), [0, 1, 2], training=False)
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_inference_deterministic(self):
        gen = Generator(Prng(2))
        x = sample_frames(2)
        a = gen.forward(x, [1, 1], training=False)
        b = gen.forward(x, [1, 1], training=False)
        assert np.array_equal(a, b)

    def test_no_dense_layers(self):
        gen = Generator(Prng(1))
        assert count_layers(gen, Dense) == 0


class TestDiscriminator:
    def test_untrained_output_in_unit_interval(self):
        disc = Discriminator(Prng(3))
        x = sample_frames(4)
        probs = disc.forward(x, x, [0, 1, 2, 1], training=False)
        assert probs.shape == (4,)
        assert np.all((probs > 0) & (probs < 1))

    def test_no_dense_layers(self):
        assert count_layers(Discriminator(Prng(1)), Dense) == 0

    def test_unconditional_variant(self):
        disc = Discriminator(Prng(3), conditional=False)
        x = sample_frames(2)
        probs = disc.forward(x, x, [0, 1], training=False)
        assert probs.shape == (2,)
        assert disc.frame_t1_channel == 0

    def test_input_batchnorm_variant(self):
        disc = Discriminator(Prng(3), input_batchnorm=True)
        x = sample_frames(4)
        probs = disc.forward(x, x, [0, 1, 2, 1], training=True)
        assert np.all(np.isfinite(probs))


class TestClassifier:
    def test_logits_shape(self):
        cls = Classifier(Prng(4))
        x = sample_frames(3)
        logits = cls.forward(x, x, training=False)
        assert logits.shape == (3, 3)

    def test_identical_frames_identical_features(self):
        cls = Classifier(Prng(4))
        x = sample_frames(1)
        both = np.concatenate([x, x], axis=0)
        feats = cls.per_frame_features(both, training=False)
        assert np.array_equal(feats[0], feats[1])

    def test_structural_layout(self):
        cls = Classifier(Prng(4))
        assert count_layers(cls, Conv2d) == 5
        assert count_layers(cls, Dense) == 4  # three hidden + readout
        assert count_layers(cls, MaxPool2d) == 3
        # pooling right after the conv1, conv2, conv5 blocks
        kinds = [type(l).__name__ for l in cls.trunk_net.layers]
        assert kinds == [
            "Conv2d", "BatchNorm2d", "ReLU", "MaxPool2d",
            "Conv2d", "BatchNorm2d", "ReLU", "MaxPool2d",
            "Conv2d", "BatchNorm2d", "ReLU",
            "Conv2d", "BatchNorm2d", "ReLU",
            "Conv2d", "BatchNorm2d", "ReLU", "MaxPool2d",
        ]

    def test_dropout_p_half(self):
        cls = Classifier(Prng(4))
        drops = [l for l in cls.head.layers if isinstance(l, Dropout)]
        assert len(drops) == 2
        assert all(d.p == 0.5 for d in drops)

    def test_backward_runs_and_accumulates(self):
        cls = Classifier(Prng(5))
        x = sample_frames(4)
        logits = cls.forward(x, x, training=True)
        _, grad = softmax_xent(logits, [0, 1, 2, 0])
        d_t, d_t1 = cls.backward(grad)
        assert d_t.shape == x.shape and d_t1.shape == x.shape
        assert any(lp.weight.grad is not None for lp in cls.layer_params())


class TestSharedTrunk:
    def test_checksums_equal_across_networks(self):
        gen, disc, cls = build_models(7, shared_trunk=True)
        assert gen.trunk_checksum() == disc.trunk_checksum() == cls.trunk_checksum()
        assert gen.trunk_checksum() is not None

    def test_checksums_stay_equal_after_step(self):
        gen, disc, cls = build_models(7, shared_trunk=True)
        x = sample_frames(2)
        logits = cls.forward(x, x, training=True)
        _, grad = softmax_xent(logits, [0, 1])
        cls.backward(grad)
        sgd_momentum_step(cls.layer_params(), Hyperparams(learning_rate=0.01))
        assert gen.trunk_checksum() == disc.trunk_checksum() == cls.trunk_checksum()

    def test_shared_forward_shapes(self):
        gen, disc, cls = build_models(7, shared_trunk=True)
        x = sample_frames(2)
        assert gen.forward(x, [0, 1], training=False).shape == (2, 1, 64, 64)
        assert disc.forward(x, x, [0, 1], training=False).shape == (2,)
        assert cls.forward(x, x, training=False).shape == (2, 3)

    def test_default_build_has_no_shared_trunk(self):
        gen, disc, cls = build_models(7)
        assert gen.trunk_checksum() is None


class TestCheckpoints:
    def test_generator_round_trip_bit_exact(self, tmp_path):
        gen = Generator(Prng(8))
        path = tmp_path / "gen.sadw"
        save_checkpoint(gen, path)
        gen2 = Generator(Prng(999))
        load_checkpoint(path, gen2)
        for (n1, a1), (n2, a2) in zip(gen.named_tensors(), gen2.named_tensors()):
            assert n1 == n2
            assert a1.tobytes() == a2.tobytes()

    def test_save_load_preserves_outputs(self, tmp_path):
        cls = Classifier(Prng(9))
        x = sample_frames(2)
        before = cls.forward(x, x, training=False)
        path = tmp_path / "cls.sadw"
        save_checkpoint(cls, path)
        cls2 = Classifier(Prng(1234))
        load_checkpoint(path, cls2)
        assert np.array_equal(before, cls2.forward(x, x, training=False))

    def test_wrong_spec_names_first_mismatch(self, tmp_path):
        gen = Generator(Prng(8))
        path = tmp_path / "gen.sadw"
        save_checkpoint(gen, path)
        with pytest.raises(CheckpointError, match="conv1"):
            load_checkpoint(path, Classifier(Prng(8)))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.sadw"
        path.write_bytes(b"JUNKxxxx")
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path, Generator(Prng(1)))
