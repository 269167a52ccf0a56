import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentrecon.moments import (
    AffineMap,
    Box,
    MomentVector,
    enumerate_indices,
    index_count,
    monomial_eval,
    monomial_matrix,
    moments_of_atoms,
    rescale_moments,
)


def brute_force_indices(q, d):
    # graded, then lexicographically descending within a degree
    allidx = [a for a in itertools.product(range(d + 1), repeat=q) if sum(a) <= d]
    return sorted(allidx, key=lambda a: (sum(a), tuple(-v for v in a)))


def test_enumerate_small_cases():
    assert enumerate_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert enumerate_indices(1, 3) == [(0,), (1,), (2,), (3,)]
    assert len(enumerate_indices(4, 8)) == 495


@pytest.mark.parametrize("q", range(1, 7))
def test_enumerate_count_and_order(q):
    for d in range(0, 13):
        idx = enumerate_indices(q, d)
        assert len(idx) == comb(q + d, d) == index_count(q, d)
        if comb(q + d, d) <= 5000:
            assert idx == brute_force_indices(q, d)


def test_enumerate_rejects_bad_input():
    with pytest.raises(ValueError):
        enumerate_indices(0, 2)


def test_monomial_eval_examples():
    assert monomial_eval((2, 3), (1, 2)) == 18
    assert monomial_eval((0.5, -1, 4), (0, 0, 0)) == 1
    assert monomial_eval((0.3, 0.7), (3, 1)) == pytest.approx(0.0189, rel=1e-12)
    with pytest.raises(ValueError):
        monomial_eval((1.0, 2.0), (1, 1, 1))


@given(
    z=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    a=st.lists(st.integers(0, 4), min_size=3, max_size=3),
    b=st.lists(st.integers(0, 4), min_size=3, max_size=3),
)
def test_monomial_eval_multiplicative(z, a, b):
    ab = [x + y for x, y in zip(a, b)]
    lhs = monomial_eval(z, ab)
    rhs = monomial_eval(z, a) * monomial_eval(z, b)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_monomial_matrix_matches_pointwise(rng):
    pts = rng.uniform(-1, 1, (17, 3))
    idx = enumerate_indices(3, 5)
    M = monomial_matrix(pts, idx)
    for k in rng.integers(0, len(idx), 20):
        for j in rng.integers(0, len(pts), 5):
            assert M[k, j] == pytest.approx(monomial_eval(pts[j], idx[k]), rel=1e-13, abs=1e-15)


def test_rescale_shifted_dirac():
    y = MomentVector(("x1",), 2, [1.0, 1.0, 1.0], Box([0.0], [2.0]))
    z = rescale_moments(y, AffineMap([1.0], [-1.0]))
    assert z.values[1] == pytest.approx(0.0, abs=1e-15)
    assert z.box == Box([-1.0], [1.0])


def test_rescale_lebesgue_to_unit_interval():
    y = MomentVector(("x1",), 4, [1 / (k + 1) for k in range(5)], Box([0.0], [1.0]))
    z = rescale_moments(y, AffineMap([2.0], [-1.0]))
    # pushforward of Lebesgue on [0,1] is half Lebesgue on [-1,1]
    assert z.values[1] == pytest.approx(0.0, abs=1e-15)
    assert z.values[2] == pytest.approx(1 / 3, rel=1e-14)


def test_rescale_round_trip(rng):
    box = Box([0.0, -1.5, 2.0], [3.5, 1.5, 4.0])
    pts = rng.uniform(box.lo, box.hi, (6, 3))
    y = moments_of_atoms(pts, rng.uniform(0.1, 1.0, 6), 8, ("t", "u1", "x1"), box)
    amap = AffineMap.to_unit(box)
    back = rescale_moments(rescale_moments(y, amap), amap.inverse())
    np.testing.assert_allclose(back.values, y.values, rtol=1e-12, atol=1e-12 * np.abs(y.values).max())


def test_affine_map_requires_invertible():
    with pytest.raises(ValueError):
        AffineMap([1.0, 0.0], [0.0, 0.0])
    y = MomentVector(("x1",), 2, [1.0, 0.0, 0.0], Box([0.0], [1.0]))
    with pytest.raises(ValueError):
        rescale_moments(y, AffineMap([1.0, 1.0], [0.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    q=st.integers(1, 3),
    natoms=st.integers(1, 6),
    degree=st.sampled_from([2, 4, 6]),
)
def test_rescale_matches_mapped_atoms(seed, q, natoms, degree):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, (natoms, q))
    w = rng.uniform(0.1, 2.0, natoms)
    scale = rng.uniform(0.3, 2.0, q) * rng.choice([-1, 1], q)
    amap = AffineMap(scale, rng.uniform(-1, 1, q))
    coords = tuple(f"x{i + 1}" for i in range(q))
    box = Box(-2 * np.ones(q), 2 * np.ones(q))
    y = moments_of_atoms(pts, w, degree, coords, box)
    direct = moments_of_atoms(amap(pts), w, degree, coords, amap.apply_box(box))
    z = rescale_moments(y, amap)
    np.testing.assert_allclose(z.values, direct.values, rtol=1e-10, atol=1e-10 * np.abs(direct.values).max())


def test_moment_vector_validation():
    box = Box([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        MomentVector(("x1", "x2"), 2, np.ones(5), box)
    with pytest.raises(ValueError):
        MomentVector(("x1", "x1"), 2, np.ones(6), box)
    y = MomentVector(("x1", "x2"), 2, np.arange(6.0), box)
    assert y[(1, 1)] == 4.0
    assert (3, 0) not in y
    with pytest.raises(KeyError):
        y[(3, 0)]


def test_marginal_picks_axis_moments(rng):
    box = Box([0.0, -1.0, -1.0], [1.0, 1.0, 1.0])
    pts = rng.uniform(box.lo, box.hi, (4, 3))
    w = rng.uniform(0.2, 1.0, 4)
    y = moments_of_atoms(pts, w, 6, ("t", "u1", "x1"), box)
    m = y.marginal([0, 2], 4)
    ref = moments_of_atoms(pts[:, [0, 2]], w, 4, ("t", "x1"), box.sub([0, 2]))
    np.testing.assert_allclose(m.values, ref.values, rtol=1e-14)
    assert m.coords == ("t", "x1")
