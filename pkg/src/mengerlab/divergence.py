"""Blow-up of the curvature energies on the saw graphs.

Curves: on the cells ``X_{k,m}, Y_{k,m}, Z_{k,m}`` of level ``k`` the secant
slopes of ``F`` differ by a fixed multiple of ``N^{-k alpha}``, so the
Menger curvature is ``~ N^{k(1-alpha)}`` there and the level-``k`` part of
``M_p`` scales like ``N^{k(p - p alpha - 2)}``.

Manifolds: tuples near the canonical points of the grid ``J_n`` have height
``~ N^{-n(1+alpha)}`` and ``K ~ N^{n(1-alpha)}``; the level-``n`` part of
``E_p`` scales like ``N^{n(m - m(m+2) + (1-alpha)p)}``.

Both harnesses integrate the true integrand on those cells; the exponents
are fitted and compared against the predictions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import saw as sawmod
from .curves import SampledCurve, scale_decomposed_mp, shell_index
from .errors import InputError, PreconditionError
from .geometry import discrete_curvature, heights_and_faces, menger_curvature
from .reduction import item_rng, ordered_map
from .report import LevelRecord, ScaleReport, blowup_fit, log_linear_slope, verdict_for

GAP_THRESHOLD = 1.0 / 16.0


@dataclass(frozen=True)
class LowerBoundConfig:
    params: sawmod.SawParams
    p: float
    levels: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    m: int = 1
    delta: float = 1.0 / 32.0
    eps_slope: float = 0.1
    A: Optional[float] = None
    cells_per_level: int = 64
    samples_per_cell: int = 64
    gap_triples: int = 1000
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.delta < 1.0 / 16.0:
            raise InputError("delta must lie in (0, 1/16)")
        if not self.p > 0:
            raise InputError("p must be positive")
        if self.m < 1:
            raise InputError("m must be at least 1")
        levels = tuple(int(k) for k in self.levels)
        if not levels or min(levels) < 0:
            raise InputError("levels must be nonnegative integers")
        object.__setattr__(self, "levels", levels)
        if self.A is not None and not 0 < self.A < 1:
            raise InputError("A must lie in (0, 1)")
        if self.cells_per_level < 1 or self.samples_per_cell < 2 or self.gap_triples < 1:
            raise InputError("sample counts must be positive")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def domain_bound(self) -> float:
        """``A``: the given value, else the largest prefix where the truncated ``f <= eps_slope``."""
        if self.A is None:
            object.__setattr__(self, "A", sawmod.slope_bound_prefix(self.params, self.eps_slope))
        return self.A

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(), "p": self.p, "levels": list(self.levels), "m": self.m,
            "delta": self.delta, "eps_slope": self.eps_slope, "A": self.A,
            "cells_per_level": self.cells_per_level, "samples_per_cell": self.samples_per_cell,
            "gap_triples": self.gap_triples, "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class IntervalFamily:
    X: Tuple[Fraction, Fraction]
    Y: Tuple[Fraction, Fraction]
    Z: Tuple[Fraction, Fraction]


def curve_interval_family(k: int, m: int, N: int) -> IntervalFamily:
    """Closed intervals ``X < Z < Y`` of length ``1/(16 N^k)`` inside cell ``m`` of level ``k``."""
    if k < 0 or N < 2:
        raise InputError("need k >= 0 and N >= 2")
    Nk = N ** k
    if not 0 <= m <= Nk - 1:
        raise InputError(f"cell index must lie in 0..{Nk - 1}")
    h = Fraction(1, Nk)
    l = h / 16
    a = m * h
    X = (a, a + l)
    Y = (a + h / 2 - l, a + h / 2)
    Z = (a + h / 4, a + h / 4 + l)
    return IntervalFamily(X, Y, Z)


def _draw_cells(rng: np.random.Generator, total: int, count: int, replace: bool) -> List[int]:
    if not replace and total <= count:
        return list(range(total))
    if total < 2 ** 62:
        return [int(v) for v in rng.choice(total, size=count, replace=replace)]
    hi = rng.integers(0, 2 ** 62, size=count)
    return sorted({int(v) % total for v in hi}) if not replace else [int(v) % total for v in hi]


def _cell_offsets(rng: np.random.Generator, Nk: int, count: int) -> np.ndarray:
    """Offsets from the cell anchor of ``count`` points each in X, Y and Z (columns x, y, z)."""
    h = 1.0 / Nk
    l = h / 16
    r = rng.random((count, 3)) * l
    return np.stack([r[:, 0], 0.5 * h - l + r[:, 1], 0.25 * h + r[:, 2]], axis=1)


@dataclass
class GapResult:
    level: int
    min_ratio: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.min_ratio >= GAP_THRESHOLD


def secant_gap_check(cfg: LowerBoundConfig, k: int, triples: Optional[int] = None) -> GapResult:
    """``min |slope(x, y) - slope(z, x)| * N^{k alpha}`` over sampled ``x in X, y in Y, z in Z``."""
    triples = triples or cfg.gap_triples
    N = cfg.N
    Nk = N ** k
    rng = item_rng(cfg.seed, 1, k)
    cells = _draw_cells(rng, Nk, triples, replace=True)
    U = _cell_offsets(rng, Nk, triples)
    anchors = [Fraction(c, Nk) for c in cells]
    dF = sawmod.saw_increment(anchors, U, cfg.params)
    ux, uy, uz = U.T
    fx, fy, fz = dF.T
    diff = (fy - fx) / (uy - ux) - (fx - fz) / (ux - uz)
    return GapResult(k, float(np.min(np.abs(diff)) * float(Nk) ** cfg.alpha), triples)


def _cell_integral(cfg: LowerBoundConfig, k: int, m: int) -> Tuple[float, float]:
    Nk = cfg.N ** k
    rng = item_rng(cfg.seed, 2, k, m)
    U = _cell_offsets(rng, Nk, cfg.samples_per_cell)
    dF = sawmod.saw_increment(Fraction(m, Nk), U, cfg.params)
    pts = np.stack([U, dF], axis=-1)
    c = menger_curvature(pts[:, 0], pts[:, 1], pts[:, 2])
    vals = c ** cfg.p
    vol = (1.0 / (16.0 * Nk)) ** 3
    return vol * float(np.mean(vals)), vol * float(np.std(vals, ddof=1)) / math.sqrt(vals.size)


def curve_lowerbound(cfg: LowerBoundConfig, k_range: Optional[Sequence[int]] = None) -> ScaleReport:
    """Per-level ``sum_m iiint_{X x Y x Z} R^{-p}`` for the graph of ``F``.

    Each level uses up to ``cells_per_level`` cells (all of them when there
    are fewer) and rescales by ``N^k / cells used``.  Refuses to run when the
    secant gap at some level falls below 1/16.
    """
    levels = tuple(k_range) if k_range is not None else cfg.levels
    N = cfg.N
    gaps = [secant_gap_check(cfg, k) for k in levels]
    bad = [g for g in gaps if not g.passed]
    if bad:
        g = bad[0]
        raise PreconditionError(
            f"secant gap check failed at level {g.level}: min ratio {g.min_ratio:.4g} < 1/16; increase N"
        )
    records = []
    for k in levels:
        Nk = N ** k
        cells = _draw_cells(item_rng(cfg.seed, 3, k), Nk, cfg.cells_per_level, replace=False)
        parts = ordered_map(lambda m, k=k: _cell_integral(cfg, k, m), cells, cfg.threads)
        vals = np.array([v for v, _ in parts])
        scale = Nk / len(cells)
        level_sum = scale * math.fsum(vals)
        if len(cells) < Nk and len(cells) > 1:
            se = Nk * float(np.std(vals, ddof=1)) / math.sqrt(len(cells))
        else:
            se = scale * math.sqrt(sum(e * e for _, e in parts))
        records.append(LevelRecord(k, level_sum, Nk, std_error=se, extra={"cells_sampled": len(cells)}))
    predicted = cfg.p - cfg.p * cfg.alpha - 2
    rep = ScaleReport(
        "curve-lowerbound", float(N), records, predicted_exponent=predicted,
        gap_check=min(g.min_ratio for g in gaps), meta={"config": cfg.to_dict()},
    )
    rep.meta["gap_by_level"] = {str(g.level): g.min_ratio for g in gaps}
    _finish(rep)
    return rep


def _finish(rep: ScaleReport) -> None:
    fitted, _, gap = blowup_fit(rep)
    rep.fitted_exponent = fitted
    rep.verdict = verdict_for(fitted)
    rep.meta["relative_gap"] = gap


@dataclass
class RestrictionCheck:
    level: int
    restricted: float
    shell_total: float
    shells: List[int]

    @property
    def holds(self) -> bool:
        return self.restricted <= self.shell_total * (1 + 1e-12)


def restricted_grid_sum(curve: SampledCurve, N: int, k: int, p: float) -> float:
    """Product-rule sum of ``R^{-p}`` over grid triples with ``x in X, y in Y, z in Z`` at level ``k``."""
    t = curve.t
    P = curve.points
    w = curve.weights
    Nk = N ** k
    total = []
    for m in range(Nk):
        fam = curve_interval_family(k, m, N)
        sel = []
        for lo, hi in (fam.X, fam.Y, fam.Z):
            sel.append(np.nonzero((t >= float(lo)) & (t <= float(hi)))[0])
        ix, iy, iz = sel
        if not (ix.size and iy.size and iz.size):
            continue
        a, b, c = np.meshgrid(ix, iy, iz, indexing="ij")
        cv = menger_curvature(P[a], P[b], P[c])
        total.append(math.fsum((w[a] * w[b] * w[c] * cv ** p).ravel()))
    return math.fsum(total)


def restriction_monotonicity(curve: SampledCurve, N: int, k: int, p: float, threads=None) -> RestrictionCheck:
    """Compare the level-``k`` restricted sum with the full shells of matching ``d(x, y)``.

    Pairs ``x in X, y in Y`` have ``|x - y| in [3/8, 1/2] N^{-k}``; every shell
    meeting that range is included.
    """
    L = curve.length
    lo = (3.0 / 8.0) / N ** k / L
    hi = 0.5 / N ** k / L
    ks = sorted(set(int(v) for v in shell_index(np.array([lo, hi]))))
    ks = list(range(min(ks), max(ks) + 1))
    rep = scale_decomposed_mp(curve, p, threads=threads)
    by_level = {r.level: r.value for r in rep.levels}
    return RestrictionCheck(k, restricted_grid_sum(curve, N, k, p), math.fsum(by_level.get(s, 0.0) for s in ks), ks)


# ---------------------------------------------------------------------------
# manifolds


@dataclass(frozen=True)
class GridCell:
    index: Tuple[int, ...]
    anchor: Tuple[Fraction, ...]
    points: np.ndarray  # (m + 2, m): x_0 .. x_{m+1}


def canonical_offsets(m: int, Nn: int) -> np.ndarray:
    """Offsets of ``x_0 .. x_{m+1}`` from the anchor: ``0, e_k / (2 N^n), e_1 / (4 N^n)``."""
    base = np.zeros((m + 2, m))
    for k in range(1, m + 1):
        base[k, k - 1] = 0.5 / Nn
    base[m + 1, 0] = 0.25 / Nn
    return base


def grid_side(n: int, cfg: LowerBoundConfig) -> int:
    """Anchors per axis: ``ceil(A N^n)``, exactly for rational ``A``."""
    A = Fraction(cfg.domain_bound())
    return int(math.ceil(A * cfg.N ** n))


def manifold_grid(n: int, cfg: LowerBoundConfig) -> Iterator[GridCell]:
    """Anchors of ``J_n = N^{-n} Z^m & [0, A)^m`` with their canonical tuples, lazily."""
    Nn = cfg.N ** n
    side = grid_side(n, cfg)
    base = canonical_offsets(cfg.m, Nn)
    for idx in itertools.product(range(side), repeat=cfg.m):
        anchor = tuple(Fraction(i, Nn) for i in idx)
        yield GridCell(idx, anchor, np.array([float(a) for a in anchor]) + base)


def cell_count(n: int, cfg: LowerBoundConfig) -> int:
    return grid_side(n, cfg) ** cfg.m


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def box_measure(n: int, cfg: LowerBoundConfig) -> float:
    """``H^{m(m+2)}(U(x)) = (omega_m delta^m N^{-nm})^{m+2}``."""
    m = cfg.m
    return (unit_ball_volume(m) * cfg.delta ** m / float(cfg.N) ** (n * m)) ** (m + 2)


def _box_centres(x: Sequence[Fraction], n: int, N: int) -> List[List[Fraction]]:
    m = len(x)
    Nn = N ** n
    out = [list(x)]
    for k in range(m):
        c = list(x)
        c[k] += Fraction(1, 2 * Nn)
        out.append(c)
    c = list(x)
    c[0] += Fraction(1, 4 * Nn)
    out.append(c)
    return out


def boxes_disjoint(x: Sequence[Fraction], n1: int, y: Sequence[Fraction], n2: int, cfg: LowerBoundConfig) -> bool:
    """Exact test that ``U(x)`` (level ``n1``) and ``U(y)`` (level ``n2``) are disjoint.

    Products of closed balls are disjoint iff some pair of factor balls is.
    """
    d = Fraction(cfg.delta)
    r = d / cfg.N ** n1 + d / cfg.N ** n2
    for cx, cy in zip(_box_centres(x, n1, cfg.N), _box_centres(y, n2, cfg.N)):
        if sum((a - b) ** 2 for a, b in zip(cx, cy)) > r * r:
            return True
    return False


def _ball_points(rng: np.random.Generator, shape: Tuple[int, ...], m: int, radius: float) -> np.ndarray:
    g = rng.normal(size=shape + (m,))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return g * radius * rng.random(shape + (1,)) ** (1.0 / m)


def _tuples_in_box(cfg: LowerBoundConfig, n: int, j1: Sequence[int], rng, count_per_anchor: int):
    """Local points ``G(z) - G(x)`` for tuples ``z`` uniform in ``U(x)``, anchors with first index ``j1``."""
    m = cfg.m
    Nn = cfg.N ** n
    Z = canonical_offsets(m, Nn) + _ball_points(rng, (len(j1), count_per_anchor, m + 2), m, cfg.delta / Nn)
    anchors = [Fraction(int(j), Nn) for j in j1]
    dF = sawmod.saw_increment(anchors, Z[..., 0], cfg.params)
    return Z, np.concatenate([Z, dF[..., None]], axis=-1)


@dataclass
class TupleStats:
    level: int
    samples: int
    min_height_normalized: float
    min_curvature_normalized: float
    degenerate: int
    max_dgras: float
    max_zeta1_dev: float
    max_zeta_other: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def manifold_tuple_stats(cfg: LowerBoundConfig, n: int, samples: int = 10_000) -> TupleStats:
    """Normalized minima of height ``h(T) N^{n(1+alpha)}`` and ``K_G(T) N^{-n(1-alpha)}``.

    Anchors are uniform in ``J_n`` and each ``T`` is uniform in ``U(x)``.
    Also reports the angle ``dgras(p(T), R^m)`` and the coefficients
    ``zeta`` of ``z_{m+1} - z_0`` in the basis ``z_i - z_0``.
    """
    m = cfg.m
    Nn = cfg.N ** n
    rng = item_rng(cfg.seed, 4, n)
    side = grid_side(n, cfg)
    j1 = rng.integers(0, side, size=samples)
    Z, Y = _tuples_in_box(cfg, n, j1, rng, 1)
    Z, Y = Z[:, 0], Y[:, 0]
    h, _, basis = heights_and_faces(Y)
    K = np.asarray(discrete_curvature(Y))
    degenerate = int(np.sum(~np.isfinite(h) | (h <= 0)))
    good = np.isfinite(h) & (h > 0)
    # dgras between the face plane and R^m x {0}
    proj = np.einsum("sia,sib->sab", basis, basis)
    flat = np.zeros((m + 1, m + 1))
    flat[:m, :m] = np.eye(m)
    dg = np.linalg.norm(proj - flat, ord=2, axis=(1, 2))
    E = np.swapaxes(Z[:, 1 : m + 1, :] - Z[:, :1, :], 1, 2)
    zeta = np.linalg.solve(E, (Z[:, m + 1, :] - Z[:, 0, :])[..., None])[..., 0]
    return TupleStats(
        n, samples,
        float(np.min(h[good])) * float(Nn) ** (1 + cfg.alpha) if good.any() else 0.0,
        float(np.min(K[good])) * float(Nn) ** (-(1 - cfg.alpha)) if good.any() else 0.0,
        degenerate,
        float(np.max(dg)),
        float(np.max(np.abs(zeta[:, 0] - 0.5))),
        float(np.max(np.abs(zeta[:, 1:]))) if m > 1 else 0.0,
    )


def _class_integral(cfg: LowerBoundConfig, n: int, j: int) -> Tuple[float, float]:
    rng = item_rng(cfg.seed, 5, n, j)
    _, Y = _tuples_in_box(cfg, n, [j], rng, cfg.samples_per_cell)
    K = np.asarray(discrete_curvature(Y[0]))
    vals = K ** cfg.p
    meas = box_measure(n, cfg)
    return meas * float(np.mean(vals)), meas * float(np.std(vals, ddof=1)) / math.sqrt(vals.size)


def manifold_lowerbound(cfg: LowerBoundConfig, n_range: Optional[Sequence[int]] = None) -> ScaleReport:
    """Per-level ``sum_{x in J_n} int_{U(x)} K_G^p`` for the saw graph over ``[0, A)^m``.

    ``G(x + t e_i) = G(x) + t e_i`` for ``i >= 2`` and ``K`` is translation
    invariant, so the integral over ``U(x)`` depends only on the first index
    of ``x``; the ``ceil(A N^n)`` first-index classes (or a deterministic
    subsample of ``cells_per_level`` of them) are integrated by Monte-Carlo.

    Each record's ``value`` is ``A^m N^{nm}`` times the mean cell integral,
    the lower bound summed in the divergence argument; ``extra['raw']`` is
    the sum over all ``|J_n| = ceil(A N^n)^m`` cells.  The two agree as
    ``n`` grows, but at small ``n`` the ceiling dominates the raw sum, so the
    exponent is fitted on ``value``.
    """
    levels = tuple(n_range) if n_range is not None else cfg.levels
    A = cfg.domain_bound()
    N = cfg.N
    m = cfg.m
    records = []
    for n in levels:
        side = grid_side(n, cfg)
        classes = sorted(_draw_cells(item_rng(cfg.seed, 6, n), side, cfg.cells_per_level, replace=False))
        parts = ordered_map(lambda j, n=n: _class_integral(cfg, n, j), classes, cfg.threads)
        vals = np.array([v for v, _ in parts])
        mean_cell = float(np.mean(vals))
        if len(classes) > 1:
            se_mean = math.sqrt(float(np.var(vals, ddof=1)) / len(classes) + sum(e * e for _, e in parts) / len(classes) ** 2)
        else:
            se_mean = parts[0][1]
        weight = A ** m * float(N) ** (n * m)
        J = side ** m
        records.append(
            LevelRecord(
                n, weight * mean_cell, J, std_error=weight * se_mean,
                extra={"raw": J * mean_cell, "classes_sampled": len(classes), "mean_cell": mean_cell},
            )
        )
    predicted = m - m * (m + 2) + (1 - cfg.alpha) * cfg.p
    rep = ScaleReport("manifold-lowerbound", float(N), records, predicted_exponent=predicted, meta={"config": cfg.to_dict(), "A": A})
    _finish(rep)
    try:
        raw_fit, _ = _raw_fit(rep)
        rep.meta["raw_fitted_exponent"] = raw_fit
    except PreconditionError:
        pass
    return rep


def _raw_fit(rep: ScaleReport):
    return log_linear_slope(rep.level_indices, [r.extra["raw"] for r in rep.levels], rep.base)


__all__ = [
    "LowerBoundConfig", "IntervalFamily", "GapResult", "RestrictionCheck", "GridCell", "TupleStats",
    "curve_interval_family", "secant_gap_check", "curve_lowerbound", "restricted_grid_sum",
    "restriction_monotonicity", "manifold_grid", "cell_count", "box_measure", "boxes_disjoint",
    "manifold_tuple_stats", "manifold_lowerbound", "blowup_fit", "canonical_offsets", "GAP_THRESHOLD",
]
