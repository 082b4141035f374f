"""Deterministic RNG behavior and distribution sanity."""

import numpy as np
import pytest

from evogene.numcore import Rng


def test_same_seed_same_stream():
    a = Rng(42).standard_normal(100)
    b = Rng(42).standard_normal(100)
    np.testing.assert_array_equal(a, b)


def test_different_seeds_differ():
    a = Rng(1).standard_normal(50)
    b = Rng(2).standard_normal(50)
    assert not np.array_equal(a, b)


def test_derived_streams_are_independent_of_call_order():
    x1 = Rng.derive(7, 0).uniform(0, 1, 10)
    _ = Rng.derive(7, 1).uniform(0, 1, 1000)
    x2 = Rng.derive(7, 0).uniform(0, 1, 10)
    np.testing.assert_array_equal(x1, x2)


def test_derived_keys_give_distinct_streams():
    a = Rng.derive(5, 0).uniform(0, 1, 20)
    b = Rng.derive(5, 1).uniform(0, 1, 20)
    assert not np.array_equal(a, b)


def test_standard_normal_moments():
    z = Rng(123).standard_normal(200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_standard_normal_odd_size():
    z = Rng(9).standard_normal(7)
    assert z.shape == (7,)
    assert np.all(np.isfinite(z))


def test_standard_normal_2d_shape():
    z = Rng(9).standard_normal((3, 5))
    assert z.shape == (3, 5)


def test_uniform_bounds():
    u = Rng(77).uniform(2.0, 3.0, 10_000)
    assert u.min() >= 2.0
    assert u.max() < 3.0


def test_permutation_is_permutation():
    p = Rng(4).permutation(100)
    assert sorted(p.tolist()) == list(range(100))


def test_integer_in_range():
    r = Rng(8)
    draws = [r.integer(10) for _ in range(1000)]
    assert min(draws) >= 0
    assert max(draws) <= 9
    assert len(set(draws)) == 10


def test_choice_weighted_respects_weights():
    r = Rng(15)
    w = np.array([0.0, 0.0, 1.0])
    assert all(r.choice_weighted(w) == 2 for _ in range(50))


def test_choice_weighted_zero_total_falls_back_uniform():
    r = Rng(16)
    w = np.zeros(4)
    draws = {r.choice_weighted(w) for _ in range(200)}
    assert draws == {0, 1, 2, 3}


def test_choice_weighted_frequencies():
    r = Rng(21)
    w = np.array([1.0, 3.0])
    n = 20_000
    ones = sum(r.choice_weighted(w) for _ in range(n))
    assert ones / n == pytest.approx(0.75, abs=0.02)
