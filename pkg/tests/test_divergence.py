from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from mengerlab import curves as cv
from mengerlab import divergence as dv
from mengerlab import saw as s
from mengerlab.errors import InputError, PreconditionError
from mengerlab.geometry import simplex_height_face


def cfg_for(N, alpha, p, **kw):
    return dv.LowerBoundConfig(s.SawParams.from_tolerance(N, alpha), p, **kw)


# --- interval families -----------------------------------------------------


def test_interval_family_example():
    fam = dv.curve_interval_family(1, 0, 10)
    assert fam.X == (0, Fraction(1, 160))
    assert fam.Y == (Fraction(1, 20) - Fraction(1, 160), Fraction(1, 20))
    assert fam.Z == (Fraction(1, 40), Fraction(1, 40) + Fraction(1, 160))


@pytest.mark.parametrize("k,N", [(1, 10), (3, 2), (2, 7)])
def test_interval_family_structure(k, N):
    Nk = N ** k
    prev_end = Fraction(-1)
    for m in range(Nk):
        fam = dv.curve_interval_family(k, m, N)
        for lo, hi in (fam.X, fam.Y, fam.Z):
            assert hi - lo == Fraction(1, 16 * Nk)
            assert 0 <= lo and hi <= 1
        assert fam.X[1] < fam.Z[0] and fam.Z[1] < fam.Y[0]
        assert fam.X[0] > prev_end
        prev_end = fam.Y[1]
    with pytest.raises(InputError):
        dv.curve_interval_family(k, Nk, N)


# --- secant gap ------------------------------------------------------------


def test_single_level_gap_is_y_minus_z(rng):
    p = s.SawParams(10, 0.5, 0)
    x = rng.uniform(0, 1 / 16, 1000)
    y = rng.uniform(1 / 2 - 1 / 16, 1 / 2, 1000)
    z = rng.uniform(1 / 4, 1 / 4 + 1 / 16, 1000)
    F = lambda t: s.saw_antiderivative(t, p)[0]
    delta = (F(y) - F(x)) / (y - x) - (F(x) - F(z)) / (x - z)
    np.testing.assert_allclose(delta, y - z, atol=1e-13)
    cfg = dv.LowerBoundConfig(p, 4.0, levels=(0,))
    g = dv.secant_gap_check(cfg, 0, 5000)
    assert g.min_ratio >= 1 / 8
    assert g.min_ratio == pytest.approx(1 / 8, abs=0.02)


def test_gap_levels_pass_and_self_similar():
    cfg = cfg_for(100, 0.5, 4.0)
    r = [dv.secant_gap_check(cfg, k).min_ratio for k in range(1, 7)]
    assert min(r) >= dv.GAP_THRESHOLD
    tail = r[1:]
    assert max(tail) / min(tail) < 1.25


def test_small_N_refused():
    cfg = cfg_for(2, 0.5, 4.0, levels=(1, 2, 3))
    with pytest.raises(PreconditionError, match="increase N"):
        dv.curve_lowerbound(cfg)


# --- curve lower bound -----------------------------------------------------


def test_curve_divergent_side():
    rep = dv.curve_lowerbound(cfg_for(100, 0.4, 4.0, levels=(2, 3, 4, 5, 6)))
    assert rep.predicted_exponent == pytest.approx(0.4)
    assert rep.fitted_exponent == pytest.approx(0.4, rel=0.15)
    assert rep.verdict == "DIVERGENT"


def test_curve_critical_flat():
    rep = dv.curve_lowerbound(cfg_for(100, 0.5, 4.0))
    v = rep.values[1:]
    gm = math.exp(float(np.mean(np.log(v))))
    assert np.all(v / gm < 2) and np.all(gm / v < 2)
    cum = np.array([r.cumulative for r in rep.levels])
    assert np.all(np.diff(cum) > 0.3 * cum[0])
    assert rep.verdict == "DIVERGENT"


def test_curve_convergent_side():
    rep = dv.curve_lowerbound(cfg_for(100, 0.6, 4.0))
    assert np.all(np.diff(rep.values) < 0)
    assert rep.fitted_exponent < 0 and rep.verdict == "CONVERGENT"
    assert rep.levels[-1].cumulative < rep.levels[0].value / (1 - 100 ** -0.3)


def test_curve_deterministic_across_threads():
    a = dv.curve_lowerbound(cfg_for(100, 0.5, 4.0, levels=(1, 2, 3), threads=1))
    b = dv.curve_lowerbound(cfg_for(100, 0.5, 4.0, levels=(1, 2, 3), threads=4))
    assert list(a.values) == list(b.values)


@pytest.mark.parametrize("k", [2, 3])
def test_restriction_monotonicity(k):
    curve = cv.saw_graph(s.SawParams.from_tolerance(2, 0.5), 400)
    chk = dv.restriction_monotonicity(curve, 2, k, 4.0)
    assert chk.restricted > 0
    assert chk.holds


# --- manifold grid and boxes -----------------------------------------------


def test_manifold_grid_example():
    cfg = cfg_for(10, 0.5, 12.0, m=1, A=0.95)
    cells = list(dv.manifold_grid(1, cfg))
    assert len(cells) == 10 == dv.cell_count(1, cfg)
    assert [c.anchor[0] for c in cells] == [Fraction(i, 10) for i in range(10)]
    np.testing.assert_allclose(cells[0].points[:, 0], [0.0, 0.05, 0.025])


def test_manifold_grid_m2_count():
    cfg = cfg_for(10, 0.5, 12.0, m=2, A=0.95)
    assert dv.cell_count(2, cfg) == 95 ** 2
    first = next(iter(dv.manifold_grid(2, cfg)))
    np.testing.assert_allclose(first.points, [[0, 0], [0.005, 0], [0, 0.005], [0.0025, 0]])


def test_box_measure():
    cfg = cfg_for(10, 0.5, 12.0, m=2)
    assert dv.box_measure(3, cfg) == pytest.approx((math.pi * cfg.delta ** 2 / 10.0 ** 6) ** 4, rel=1e-12)


def test_boxes_disjoint_same_and_cross_level():
    cfg = cfg_for(10, 0.5, 12.0, m=2, A=0.95)
    for n in (1, 2):
        cells = list(dv.manifold_grid(n, cfg))[:40]
        for a in cells:
            for b in cells:
                if a.index != b.index:
                    assert dv.boxes_disjoint(a.anchor, n, b.anchor, n, cfg)
    l1 = list(dv.manifold_grid(1, cfg))[:20]
    l2 = list(dv.manifold_grid(2, cfg))[:400]
    assert all(dv.boxes_disjoint(a.anchor, 1, b.anchor, 2, cfg) for a in l1 for b in l2)
    x = (Fraction(0), Fraction(0))
    assert not dv.boxes_disjoint(x, 1, x, 1, cfg)


# --- tuple statistics ------------------------------------------------------


@pytest.fixture(scope="module")
def stats():
    cfg = cfg_for(10, 0.5, 12.0, m=2, levels=(1, 2, 3, 4))
    return [dv.manifold_tuple_stats(cfg, n, 10_000) for n in cfg.levels]


def test_tuple_stats_positive_and_nondegenerate(stats):
    for st in stats:
        assert st.degenerate == 0
        assert st.min_height_normalized > 0 and st.min_curvature_normalized > 0
        assert st.max_dgras <= 0.5


def test_tuple_stats_within_factor_two(stats):
    k = [st.min_curvature_normalized for st in stats]
    h = [st.min_height_normalized for st in stats]
    assert max(k) / min(k) < 2 and max(h) / min(h) < 2


@pytest.mark.xfail(reason="normalized K minima drop about 40% at n=4 (N=10); stable only within x2", strict=False)
def test_tuple_stats_spread_25_percent(stats):
    k = [st.min_curvature_normalized for st in stats]
    assert max(k) / min(k) < 1.25


def test_one_dimensional_reduction():
    # canonical tuple with delta -> 0: height equals the secant-gap expression
    p = s.SawParams.from_tolerance(10, 0.5)
    for n, j in [(1, 3), (2, 17), (3, 404)]:
        Nn = 10 ** n
        x0 = Fraction(j, Nn)
        u = np.array([0.0, 0.5 / Nn, 0.25 / Nn])
        dF = s.saw_increment(x0, u, p)
        pts = np.stack([u, dF], axis=1)
        h, _, _ = simplex_height_face(pts, m=1)
        s01 = dF[1] / u[1]
        s02 = dF[2] / u[2]
        expected = u[2] * abs(s02 - s01) / math.sqrt(1 + s01 ** 2)
        assert h == pytest.approx(expected, rel=1e-9)
    cfg = dv.LowerBoundConfig(p, 4.0, m=1, delta=1e-4)
    st = dv.manifold_tuple_stats(cfg, 2, 2000)
    assert st.max_zeta1_dev < 1e-3


# --- manifold lower bound --------------------------------------------------


def test_manifold_critical_and_convergent():
    crit = dv.manifold_lowerbound(cfg_for(10, 0.5, 12.0, m=2, levels=(1, 2, 3, 4), samples_per_cell=1024))
    assert crit.predicted_exponent == pytest.approx(0.0, abs=1e-12)
    assert crit.verdict == "DIVERGENT"
    assert min(crit.values[1:]) >= 0.5 * crit.values[1]
    conv = dv.manifold_lowerbound(cfg_for(10, 0.6, 12.0, m=2, levels=(1, 2, 3, 4), samples_per_cell=1024))
    assert conv.predicted_exponent == pytest.approx(-1.2)
    assert conv.fitted_exponent < 0 and conv.verdict == "CONVERGENT"


def test_manifold_divergent_side_exponent():
    rep = dv.manifold_lowerbound(cfg_for(100, 0.4, 12.0, m=2, levels=(1, 2, 3, 4), samples_per_cell=1024))
    assert rep.predicted_exponent == pytest.approx(1.2)
    assert rep.fitted_exponent == pytest.approx(1.2, rel=0.15)


def test_manifold_just_above_threshold_decays():
    # p = 7 > m(m+1) = 6, alpha = 0.2 > 1/7
    rep = dv.manifold_lowerbound(cfg_for(100, 0.2, 7.0, m=2, levels=(1, 2, 3, 4), samples_per_cell=1024))
    assert rep.predicted_exponent < 0
    assert np.all(np.diff(rep.values) < 0)
    assert rep.verdict == "CONVERGENT"


def test_config_validation():
    with pytest.raises(InputError):
        cfg_for(10, 0.5, 12.0, delta=0.1)
    with pytest.raises(InputError):
        cfg_for(10, 0.5, 12.0, m=0)
    with pytest.raises(InputError):
        cfg_for(10, 0.5, 12.0, A=1.5)
