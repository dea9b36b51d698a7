import numpy as np

from dreamdrive.rng import Prng, derive_seed, mix64


def test_scalar_and_array_paths_agree():
    a = Prng(12345)
    b = Prng(12345)
    scalars = [a.next_u64() for _ in range(257)]
    assert np.array_equal(np.array(scalars, dtype=np.uint64), b.u64_array(257))


def test_same_seed_same_stream():
    assert [Prng(7).next_u64() for _ in range(10)] == [Prng(7).next_u64() for _ in range(10)]


def test_different_seeds_differ():
    assert Prng(0).u64_array(8).tolist() != Prng(1).u64_array(8).tolist()


def test_uniform_range_and_mean():
    u = Prng(42).uniform(100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_normal_moments():
    z = Prng(3).normal((200_000,), std=2.0, dtype=np.float64)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 2.0) < 0.02


def test_normal_deterministic_and_shape():
    a = Prng(9).normal((3, 4, 5))
    b = Prng(9).normal((3, 4, 5))
    assert a.shape == (3, 4, 5)
    assert np.array_equal(a, b)


def test_randint_bounds():
    rng = Prng(11)
    draws = [rng.randint(7) for _ in range(2000)]
    assert min(draws) == 0 and max(draws) == 6


def test_shuffled_indices_is_permutation():
    idx = Prng(5).shuffled_indices(100)
    assert sorted(idx.tolist()) == list(range(100))


def test_clone_continues_identically():
    rng = Prng(77)
    rng.u64_array(13)
    c = rng.clone()
    assert rng.next_u64() == c.next_u64()


def test_derive_seed_decorrelates():
    s = {derive_seed(1, t) for t in range(100)}
    assert len(s) == 100
    assert derive_seed(1, 0) != derive_seed(2, 0)


def test_mix64_stays_in_64_bits():
    for z in [0, 1, 2**63, 2**64 - 1, 0xDEADBEEF]:
        out = mix64(z)
        assert 0 <= out < 2**64
