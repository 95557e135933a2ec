"""Geometry, atomic measures and the moment distance."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circleflow.circle import (
    TOL_MERGE,
    TWO_PI,
    AtomicMeasure,
    CirclePoint,
    GraphParams,
    MassError,
    epsilon,
    measure_distance,
    normalize_angle,
    pushforward,
)

angles = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


def random_measure(rng, n_max=5):
    n = rng.integers(1, n_max + 1)
    w = rng.random(n)
    return AtomicMeasure(rng.uniform(0, TWO_PI, n), w / w.sum())


# ------------------------------------------------------------------ epsilon


def test_epsilon_at_vertex_one():
    assert epsilon(CirclePoint(0.0), GraphParams(math.pi / 2)) == 1


def test_epsilon_closed_at_l():
    l = math.pi / 2
    assert epsilon(CirclePoint(l), GraphParams(l)) == 1


def test_epsilon_on_second_edge():
    l = math.pi / 2
    assert epsilon(CirclePoint(l + 0.1), GraphParams(l)) == -1


@given(st.floats(min_value=0.05, max_value=math.pi), angles)
def test_epsilon_constant_on_edges(l, theta):
    g = GraphParams(l)
    th = normalize_angle(theta)
    assert epsilon(th, g) == (1 if th <= l else -1)


def test_epsilon_vectorized():
    g = GraphParams(1.0)
    assert epsilon(np.array([0.0, 0.5, 1.0, 1.5, 6.0]), g).tolist() == [1, 1, 1, -1, -1]


@pytest.mark.parametrize("l", [0.0, -1.0, 4.0])
def test_graph_params_rejects_bad_l(l):
    with pytest.raises(ValueError):
        GraphParams(l)


@given(angles)
def test_circle_point_normalized(theta):
    p = CirclePoint(theta)
    assert 0.0 <= p.theta < TWO_PI
    assert math.copysign(1.0, p.theta) == 1.0


def test_negative_zero_is_cleared():
    assert math.copysign(1.0, CirclePoint(-0.0).theta) == 1.0
    assert normalize_angle(-TWO_PI) == 0.0


# ---------------------------------------------------------------- measures


def test_atoms_merge_within_tolerance():
    mu = AtomicMeasure([1.0, 1.0 + TOL_MERGE / 2, 2.0], [0.25, 0.25, 0.5])
    assert len(mu) == 2
    assert mu.weights.tolist() == [0.5, 0.5]


def test_atoms_merge_across_wrap():
    mu = AtomicMeasure([1e-10, TWO_PI - 1e-10], [0.5, 0.5])
    assert len(mu) == 1
    assert mu.mass == 1.0


def test_zero_weight_atoms_dropped():
    mu = AtomicMeasure([0.5, 1.5], [1.0, 0.0])
    assert mu.support.tolist() == [0.5]


def test_atoms_sorted():
    mu = AtomicMeasure([3.0, 1.0, 2.0], [0.2, 0.3, 0.5])
    assert np.all(np.diff(mu.thetas) > 0)


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        AtomicMeasure([0.0, 1.0], [1.5, -0.5])


# ---------------------------------------------------------------- distance


def test_distance_identical_diracs():
    assert measure_distance(AtomicMeasure.dirac(0.0), AtomicMeasure.dirac(0.0)) == 0.0


def test_distance_antipodal_diracs():
    # only the odd cosine moments differ, by 2 each; cos(k theta) carries weight 2^{-2k}
    expected = math.sqrt(sum(4.0 * 2.0 ** (-2 * k) for k in range(1, 17, 2)))
    d = measure_distance(AtomicMeasure.dirac(0.0), AtomicMeasure.dirac(math.pi))
    assert d > 0
    assert d == pytest.approx(expected, rel=1e-14)


def test_distance_ignores_atom_order():
    a = AtomicMeasure([0.0, math.pi], [0.5, 0.5])
    b = AtomicMeasure([math.pi, 0.0], [0.5, 0.5])
    assert measure_distance(a, b) == 0.0


def test_distance_symmetric_and_triangle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a, b, c = (random_measure(rng) for _ in range(3))
        ab, bc, ac = measure_distance(a, b), measure_distance(b, c), measure_distance(a, c)
        assert ab == pytest.approx(measure_distance(b, a), abs=1e-15)
        assert ac <= ab + bc + 1e-14


# -------------------------------------------------------------- pushforward


def test_pushforward_identity_kernel():
    mu = AtomicMeasure.dirac(1.3)
    out = pushforward(mu, AtomicMeasure.dirac)
    assert out.is_dirac_at(1.3)


def test_pushforward_constant_kernel_collapses():
    mu = AtomicMeasure([0.4, 2.0], [0.5, 0.5])
    out = pushforward(mu, lambda x: AtomicMeasure.dirac(3.0))
    assert out.is_dirac_at(3.0)
    assert out.weights.tolist() == [1.0]


def test_pushforward_single_atom():
    out = pushforward(AtomicMeasure.dirac(0.0), lambda x: AtomicMeasure([1.0, 2.0], [0.25, 0.75]))
    assert out.thetas.tolist() == [1.0, 2.0]
    assert out.weights.tolist() == [0.25, 0.75]


def test_pushforward_rejects_defective_kernel():
    with pytest.raises(MassError):
        pushforward(AtomicMeasure.dirac(0.0), lambda x: AtomicMeasure([1.0], [0.5]))


@settings(max_examples=200)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_pushforward_preserves_mass(seed):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng)
    kernels = {}

    def k(x):
        if x not in kernels:
            kernels[x] = random_measure(rng)
        return kernels[x]

    for _ in range(5):
        mu = pushforward(mu, k)
    assert abs(mu.mass - 1.0) <= 1e-12
    assert np.all((mu.weights >= 0) & (mu.weights <= 1))
