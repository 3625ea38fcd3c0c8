from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mengerlab import saw as s
from mengerlab.errors import InputError


def test_tent_examples():
    assert s.saw_base(0.25) == pytest.approx(0.5)
    assert s.saw_base(0.75) == pytest.approx(0.5)
    assert s.saw_base(7.0) == 0.0
    x = np.linspace(-3, 3, 101)
    np.testing.assert_allclose(s.saw_base(x + 1.0), s.saw_base(x), atol=1e-14)


def test_params_validation():
    for bad in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(InputError, match=r"alpha must be in \(0,1\)"):
            s.SawParams(10, bad, 3)
    with pytest.raises(InputError):
        s.SawParams(1, 0.5, 3)
    with pytest.raises(InputError):
        s.SawParams(10, 0.5, -1)


def test_from_tolerance_is_minimal():
    p = s.SawParams.from_tolerance(10, 0.5, 1e-12)
    assert p.sum_error_bound <= 1e-12
    assert s.SawParams(10, 0.5, p.K - 1).sum_error_bound > 1e-12


def test_saw_sum_examples():
    p = s.SawParams(10, 0.5, 0)
    v, b = s.saw_sum(0.25, p)
    assert v == pytest.approx(0.5)
    q = 10 ** -0.5
    assert b == pytest.approx(q / (1 - q), rel=1e-12)
    assert s.saw_sum(0.0, s.SawParams(10, 0.5, 30))[0] == 0.0


def test_saw_sum_against_float_series(rng):
    p = s.SawParams(3, 0.4, 8)
    x = rng.random(200)
    ref = sum(3.0 ** (-0.4 * k) * s.saw_base(3.0 ** k * x) for k in range(9))
    np.testing.assert_allclose(s.saw_sum(x, p)[0], ref, atol=1e-12)


def test_antiderivative_unit_closed_form():
    p = s.SawParams.from_tolerance(10, 0.5, 1e-12)
    F1, bound = s.saw_antiderivative(1.0, p)
    assert F1 == pytest.approx(s.truncated_integral_unit(p), abs=1e-15)
    q = 10 ** -0.5
    assert abs(F1 - 0.5 / (1 - q)) <= bound
    assert F1 == pytest.approx(0.7312376, abs=1e-7)


def test_antiderivative_against_quadrature():
    p = s.SawParams(4, 0.5, 4)
    f = lambda t: s.saw_sum(t, p)[0]
    for x in (0.1, 0.37, 0.5, 0.9):
        breaks = [j / 4 ** 4 / 2 for j in range(int(x * 2 * 4 ** 4) + 1)]
        ref = integrate.quad(f, 0, x, points=breaks[1:], limit=2000, epsabs=1e-13)[0]
        assert s.saw_antiderivative(x, p)[0] == pytest.approx(ref, abs=1e-11)


def test_increment_matches_difference(rng):
    p = s.SawParams.from_tolerance(10, 0.5)
    a = Fraction(37, 100)
    u = rng.random(50) * 1e-3
    inc = s.saw_increment(a, u, p)
    diff = s.saw_antiderivative(0.37 + u, p)[0] - s.saw_antiderivative(0.37, p)[0]
    np.testing.assert_allclose(inc, diff, atol=1e-13)
    # list of anchors along axis 0
    inc2 = s.saw_increment([a, Fraction(1, 2)], np.stack([u, u]), p)
    np.testing.assert_allclose(inc2[0], inc, rtol=0, atol=0)


def test_hoelder_constant():
    assert s.hoelder_constant(s.SawParams(2, 0.5, 5)) == pytest.approx(
        4 / (math.sqrt(2) - 1) + 2 * math.sqrt(2) / (math.sqrt(2) - 1), rel=1e-12
    )
    assert s.hoelder_constant(s.SawParams(2, 0.5, 5)) == pytest.approx(16.4853, abs=1e-4)
    Ns = [10, 100, 1000, 10000]
    vals = [s.hoelder_constant(s.SawParams(N, 0.5, 3)) for N in Ns]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] / (2 * 10000 ** 0.5) == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("N,alpha", [(100, 0.5), (2, 0.5), (10, 0.3), (3, 0.8)])
def test_hoelder_suite(N, alpha):
    p = s.SawParams.from_tolerance(N, alpha)
    rng = np.random.default_rng(N)
    x = rng.random(20000)
    y = np.where(rng.random(20000) < 0.5, rng.random(20000), x + rng.random(20000) * 10.0 ** -rng.integers(1, 8, 20000))
    fx, b = s.saw_sum(x, p)
    fy, _ = s.saw_sum(y, p)
    lhs = np.abs(fx - fy)
    rhs = s.hoelder_constant(p) * np.abs(x - y) ** alpha + 2 * b
    assert np.all(lhs <= rhs)


def test_graph_map():
    p = s.SawParams.from_tolerance(10, 0.5)
    out = s.graph_map(np.array([[0.0, 0.3], [0.5, 0.1]]), p)
    assert out.shape == (2, 3)
    np.testing.assert_array_equal(out[0], [0.0, 0.3, 0.0])
    assert out[1, 2] == pytest.approx(s.saw_antiderivative(0.5, p)[0])


def test_critical_alpha():
    assert s.critical_alpha(4, 1).alpha_curve == pytest.approx(0.5)
    assert s.critical_alpha(12, 2).alpha_manifold == pytest.approx(0.5)
    assert s.critical_alpha(8, 1).alpha_regularity == pytest.approx(0.625)
    with pytest.raises(InputError):
        s.critical_alpha(6, 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_saw_bounds_property(x, y):
    p = s.SawParams.from_tolerance(10, 0.5)
    f, b = s.saw_sum(np.array([x, y]), p)
    assert np.all(f >= 0) and np.all(f <= 1.0 / (1 - p.tail_ratio) + b)
    F, _ = s.saw_antiderivative(np.array([x, y]), p)
    assert (F[0] - F[1]) * (x - y) >= -1e-15
