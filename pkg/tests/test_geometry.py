from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mengerlab import geometry as g
from mengerlab.errors import DegenerateInputError, InputError

from conftest import cayley_menger_volume, random_rotation

TETRA = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0], [0.5, math.sqrt(3) / 6, math.sqrt(2.0 / 3.0)]])
EQUI = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def triples(n=2):
    return arrays(float, (3, n), elements=coords)


# --- simplex_measure -------------------------------------------------------


def test_measure_examples():
    assert g.simplex_measure([[0.0], [1.0]]) == pytest.approx(1.0)
    assert g.simplex_measure([[0, 0], [1, 0], [0, 1]]) == pytest.approx(0.5)
    assert g.simplex_measure(TETRA) == pytest.approx(1 / (6 * math.sqrt(2)), rel=1e-12)


def test_measure_matches_cayley_menger(rng):
    for k, n in [(2, 3), (3, 3), (3, 5), (4, 6)]:
        for _ in range(20):
            T = rng.standard_normal((k + 1, n))
            assert g.simplex_measure(T) == pytest.approx(cayley_menger_volume(T), rel=1e-7)


def test_point_tuple_rejects_ragged():
    with pytest.raises(InputError):
        g.PointTuple([[0, 0], [1, 0, 0]])
    with pytest.raises(InputError):
        g.simplex_measure([[0, 0], [1, 0, 0]])


def test_measure_batch(rng):
    T = rng.standard_normal((7, 3, 3))
    out = g.simplex_measure(T)
    assert out.shape == (7,)
    assert out[3] == pytest.approx(g.simplex_measure(T[3]))


# --- diameter / heights ----------------------------------------------------


def test_diameter_examples():
    assert g.diameter([[0, 0], [3, 4]]) == 5.0
    assert g.diameter([[1, 1], [1, 1]]) == 0.0
    assert g.diameter([[0, 0], [1, 0], [1, 1], [0, 1]]) == pytest.approx(math.sqrt(2))


def test_min_height_examples():
    assert g.min_height([[0, 0], [1, 0], [0, 1]]) == pytest.approx(math.sqrt(2) / 2)
    assert g.min_height([[0, 0], [1, 0], [2, 0]]) == 0.0
    assert g.min_height(EQUI) == pytest.approx(math.sqrt(3) / 2)


# --- Menger radius / curvature ---------------------------------------------


def test_menger_radius_examples():
    assert g.menger_radius([1, 0], [0, 1], [-1, 0]) == pytest.approx(1.0)
    assert g.menger_radius([0, 0], [1, 0], [0, 1]) == pytest.approx(math.sqrt(2) / 2)
    assert g.menger_radius([0, 0], [1, 0], [2, 0]) == math.inf
    with pytest.raises(DegenerateInputError):
        g.menger_radius([0, 0], [0, 0], [1, 1])


def test_menger_curvature_examples():
    assert g.menger_curvature(*EQUI) == pytest.approx(math.sqrt(3))
    assert g.menger_curvature([0, 0], [0, 0], [1, 2]) == 0.0
    assert g.menger_curvature([1, 0], [0, 1], [-1, 0]) == pytest.approx(1.0)


def test_discrete_curvature_examples():
    assert g.discrete_curvature([[0, 0], [1, 0], [0, 1]]) == pytest.approx(1 / (4 * math.sqrt(2)))
    assert g.discrete_curvature([[0, 0], [1, 1], [2, 2]]) == 0.0
    assert g.discrete_curvature(TETRA) == pytest.approx(1 / (6 * math.sqrt(2)), rel=1e-12)
    assert g.discrete_curvature([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(triples(3), st.sampled_from([0.5, 2.0, 10.0]))
def test_scaling_laws(T, lam):
    K = g.discrete_curvature(T)
    H = g.simplex_measure(T)
    assert g.simplex_measure(lam * T) == pytest.approx(lam ** 2 * H, rel=1e-9, abs=1e-9)
    if g.min_height(T) > 1e-3 * max(g.diameter(T), 1e-300):
        assert g.discrete_curvature(lam * T) == pytest.approx(K / lam, rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(triples(3), st.integers(0, 2 ** 31))
def test_rigid_and_permutation_invariance(T, seed):
    rng = np.random.default_rng(seed)
    # a unit shift of a tiny tuple destroys its coordinates in floating point
    assume(g.diameter(T) > 1e-3)
    assume(g.min_height(T) >= 1e-3 * g.diameter(T))
    R = random_rotation(rng, 3)
    shift = rng.standard_normal(3)
    T2 = T @ R.T + shift
    perm = rng.permutation(3)
    c = g.menger_curvature(*T)
    assert g.menger_curvature(*T2) == pytest.approx(c, rel=1e-8)
    assert g.menger_curvature(*T[perm]) == pytest.approx(c, rel=1e-12)
    assert g.discrete_curvature(T2) == pytest.approx(g.discrete_curvature(T), rel=1e-8)


@settings(max_examples=300, deadline=None)
@given(triples(2))
def test_dominance(T):
    if g.min_height(T) <= 0:
        return
    assert g.menger_curvature(*T) >= g.discrete_curvature(T) * (1 - 1e-12)


def test_curvature_is_inverse_radius(rng):
    T = rng.standard_normal((500, 3, 3))
    c = g.menger_curvature(T[:, 0], T[:, 1], T[:, 2])
    r = np.array([g.menger_radius(*t) for t in T])
    np.testing.assert_allclose(c * r, 1.0, rtol=1e-10)


# --- faces, spindles, planes -----------------------------------------------


def test_height_face_examples():
    h, f, plane = g.simplex_height_face([[0, 0], [1, 0], [0.5, 1]], m=1)
    assert (h, f) == pytest.approx((1.0, 1.0))
    assert plane.distance([0.5, 1.0]) == pytest.approx(1.0)
    assert g.simplex_height_face([[0, 0], [1, 0], [3, 0]], m=1)[0] == pytest.approx(0.0)
    h, f, _ = g.simplex_height_face([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 2]], m=2)
    assert (h, f) == pytest.approx((2.0, 0.5))
    with pytest.raises(DegenerateInputError):
        g.simplex_height_face([[0, 0], [0, 0], [1, 1]], m=1)


def test_heights_and_faces_batch_agrees(rng):
    T = rng.standard_normal((20, 4, 3))
    h, fm, _ = g.heights_and_faces(T)
    for i in range(20):
        hi, fi, _ = g.simplex_height_face(T[i])
        assert h[i] == pytest.approx(hi, rel=1e-10)
        assert fm[i] == pytest.approx(fi, rel=1e-10)


def test_spindle():
    P, Q = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    assert g.spindle_contains(P, Q, 0.1, [0.5, 0.0])
    ang = 0.6
    x = np.array([math.cos(ang / 2), math.sin(ang / 2)]) * 0.3
    assert g.spindle_contains(P, Q, ang + 1e-9, x)
    assert not g.spindle_contains(P, Q, ang, x * (1 + 1e-12) + np.array([0, 1e-12]))
    assert not g.spindle_contains(P, Q, 1.0, [-0.1, 0.0])
    assert g.spindle_contains(P, Q, 1.0, P)
    with pytest.raises(DegenerateInputError):
        g.spindle_contains(P, P, 1.0, [0.5, 0])


def test_projection_distance():
    e1, e2 = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    assert g.projection_distance(e1, e1) == 0.0
    assert g.projection_distance(e1, e2) == pytest.approx(1.0)
    for th in (0.1, 0.7, 1.3):
        assert g.projection_distance(e1, [[math.cos(th), math.sin(th)]]) == pytest.approx(math.sin(th), rel=1e-12)
    with pytest.raises(InputError):
        g.projection_distance([[1.0, 1.0]], e1)


# --- beta numbers ----------------------------------------------------------


def test_beta_examples():
    x = np.array([0.3, -0.2])
    E = x + np.array([[t, 0.5 * t] for t in np.linspace(-1, 1, 11)])
    assert g.beta_number(E, x, 2.0, 1).value == pytest.approx(0.0, abs=1e-15)
    assert g.beta_number(np.zeros((0, 2)), x, 1.0, 1).value == 0.0
    assert g.beta_number([[9.0, 9.0]], x, 1.0, 1).value == 0.0
    with pytest.raises(InputError):
        g.beta_number(E, x, 0.0, 1)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_beta_two_points_against_sweep(eps):
    x = np.array([0.0, 0.0])
    r = 1.0
    E = np.array([[r, 0.0], [0.0, eps * r]])
    est = g.beta_number(E, x, r, 1)
    assert est.exactness == "exact"
    assert est.value <= eps + 1e-15
    assert est.value == pytest.approx(g.beta_sweep_oracle(E, x, r), abs=2e-6)


def test_beta_exact_against_sweep_random(rng):
    for _ in range(10):
        E = rng.standard_normal((15, 2)) * [1.0, 0.2]
        x = rng.standard_normal(2) * 0.1
        ex = g.beta_number(E, x, 1.5, 1).value
        oracle = g.beta_sweep_oracle(E, x, 1.5)
        assert ex <= oracle + 1e-9
        assert ex == pytest.approx(oracle, abs=5e-6)


def test_beta_approx_at_least_exact(rng):
    for _ in range(10):
        E = rng.standard_normal((30, 2)) * [1.0, 0.3]
        x = np.zeros(2)
        ex = g.beta_number(E, x, 2.0, 1).value
        ap = g.beta_number(E, x, 2.0, 1, mode="approx").value
        assert ap >= ex - 1e-12


def test_beta_plane_achieves_value(rng):
    E = rng.standard_normal((40, 3)) * [1.0, 1.0, 0.1]
    x = np.zeros(3)
    est = g.beta_number(E, x, 1.5, 2)
    inside = E[np.linalg.norm(E, axis=1) <= 1.5]
    assert np.max(est.plane.distance(inside)) / 1.5 == pytest.approx(est.value, rel=1e-12)
    assert est.exactness == "upper-bound"
