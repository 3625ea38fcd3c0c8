"""Sampled curves and the Menger-type energies ``M_p``, ``I_p``, ``U_p``.

A :class:`SampledCurve` stores parameters ``t_i``, points ``Gamma(t_i)`` and
quadrature weights.  The energies are product-rule sums over sample triples
(or Monte-Carlo estimates for large samples); tuples with repeated indices
get weight zero.

One pass over the triples (:func:`energy_report`) yields ``M_p``, ``I_p``,
``U_p`` and the dyadic shell split of ``M_p`` together, so the quantities are
consistent with each other by construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import saw as sawmod
from .errors import DegenerateInputError, InputError, PreconditionError
from .geometry import COLLINEAR_RTOL, menger_curvature
from .reduction import blocks, item_rng, ordered_map, ordered_sum
from .report import LevelRecord, ScaleReport, log_linear_slope

RIEMANN_MAX_SAMPLES = 400
CHORD_RTOL = 1e-9


@dataclass(frozen=True)
class SampledCurve:
    """Samples of a curve; ``length`` is the parameter period ``L``.

    ``parametrization`` is ``"arclength"`` (unit speed) or ``"graph"``
    (``t`` is the graph abscissa).  ``weights`` are per-sample quadrature
    weights along the parameter and sum to ``length``.
    """

    t: np.ndarray
    points: np.ndarray
    closed: bool
    length: float
    weights: np.ndarray
    parametrization: str = "arclength"
    meta: Dict[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != t.size or w.shape != t.shape:
            raise InputError("t, points and weights must agree in sample count")
        if t.size < 3:
            raise InputError("a sampled curve needs at least 3 samples")
        if np.any(np.diff(t) <= 0):
            raise InputError("curve parameters must be strictly increasing")
        if self.parametrization not in ("arclength", "graph"):
            raise InputError("parametrization must be 'arclength' or 'graph'")
        if not math.isclose(float(np.sum(w)), float(self.length), rel_tol=1e-12):
            raise InputError("quadrature weights must sum to the curve length")
        if self.parametrization == "arclength":
            chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            if np.any(chords > np.diff(t) * (1 + CHORD_RTOL) + 1e-300):
                raise InputError("chord longer than parameter increment: not an arc-length sampling")
        for name, arr in (("t", t), ("points", pts), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def param_distance(self, i, j) -> np.ndarray:
        """``d_{S_L}`` for closed curves, ``|t_i - t_j|`` otherwise."""
        d = np.abs(self.t[i] - self.t[j])
        if self.closed:
            d = np.minimum(d, self.length - d)
        return d

    def index_distance(self, i, j) -> np.ndarray:
        d = np.abs(np.asarray(i) - np.asarray(j))
        if self.closed:
            d = np.minimum(d, self.n - d)
        return d

    def scaled(self, lam: float) -> "SampledCurve":
        """``lam * Gamma`` reparametrized by ``lam * t``."""
        return SampledCurve(
            self.t * lam, self.points * lam, self.closed, self.length * lam, self.weights * lam, self.parametrization
        )

    def moved(self, rotation: np.ndarray, shift: np.ndarray) -> "SampledCurve":
        pts = self.points @ np.asarray(rotation, dtype=float).T + np.asarray(shift, dtype=float)
        return SampledCurve(self.t, pts, self.closed, self.length, self.weights, self.parametrization)


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature for the curve energies.

    ``scheme`` is ``"riemann"``, ``"mc"`` or ``"auto"`` (product rule up to
    400 samples, Monte-Carlo beyond).  ``exclusion`` drops tuples whose
    indices are within that many steps of each other; 0 drops only exact
    repeats.
    """

    scheme: str = "auto"
    samples: int = 200_000
    seed: int = 0
    exclusion: int = 0
    streams: int = 8
    outer_samples: int = 64

    def __post_init__(self):
        if self.scheme not in ("auto", "riemann", "mc"):
            raise InputError("scheme must be 'auto', 'riemann' or 'mc'")
        if self.exclusion < 0 or self.samples < 1 or self.streams < 2:
            raise InputError("invalid quadrature parameters")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    def resolve(self, n: int) -> str:
        if self.scheme != "auto":
            return self.scheme
        return "riemann" if n <= RIEMANN_MAX_SAMPLES else "mc"


# ---------------------------------------------------------------------------
# construction


def voronoi_weights(t: np.ndarray, closed: bool, length: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if closed:
        nxt = np.append(t[1:], t[0] + length)
        prv = np.insert(t[:-1], 0, t[-1] - length)
        return 0.5 * (nxt - prv)
    w = np.empty_like(t)
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    w[0] = 0.5 * (t[1] - t[0])
    w[-1] = 0.5 * (t[-1] - t[-2])
    return w


def resample_arclength(points, n: int, closed: bool) -> SampledCurve:
    """``n`` samples equally spaced in cumulative chord length of a polyline."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InputError("need a polyline with at least two points")
    if n < 3:
        raise InputError("need at least 3 samples")
    path = np.vstack([pts, pts[:1]]) if closed else pts
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    L = float(cum[-1])
    if L <= 0:
        raise InputError("zero-length polyline")
    s = L * np.arange(n) / (n if closed else n - 1)
    # locate segment, skipping zero-length segments
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    while np.any(seg[idx] == 0):
        bad = seg[idx] == 0
        idx[bad] = np.minimum(idx[bad] + 1, len(seg) - 1)
    frac = np.clip((s - cum[idx]) / seg[idx], 0.0, 1.0)
    out = path[idx] + frac[:, None] * (path[idx + 1] - path[idx])
    if not closed:
        out[-1] = path[-1]
    return SampledCurve(s, out, closed, L, voronoi_weights(s, closed, L), "arclength")


def circle(radius: float = 1.0, n: int = 200, center=(0.0, 0.0)) -> SampledCurve:
    if not radius > 0:
        raise InputError("radius must be positive")
    L = 2 * math.pi * radius
    t = L * np.arange(n) / n
    th = t / radius
    pts = np.asarray(center, dtype=float) + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    return SampledCurve(t, pts, True, L, np.full(n, L / n), "arclength")


def segment(a=(0.0, 0.0), b=(1.0, 0.0), n: int = 200) -> SampledCurve:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    L = float(np.linalg.norm(b - a))
    if L == 0:
        raise InputError("segment endpoints coincide")
    s = np.linspace(0.0, 1.0, n)
    t = L * s
    return SampledCurve(t, a + s[:, None] * (b - a), False, L, voronoi_weights(t, False, L), "arclength")


def ellipse(a: float = 1.0, b: float = 0.5, n: int = 200, oversample: int = 64) -> SampledCurve:
    """Closed ellipse resampled by arc length from a fine polygon."""
    if not (a > 0 and b > 0):
        raise InputError("semi-axes must be positive")
    th = 2 * math.pi * np.arange(n * oversample) / (n * oversample)
    poly = np.stack([a * np.cos(th), b * np.sin(th)], axis=1)
    return resample_arclength(poly, n, closed=True)


def saw_graph(params: sawmod.SawParams, n: int = 400, x_range=(0.0, 1.0), arclength_weights: bool = False) -> SampledCurve:
    """Graph ``(x, F(x))`` parametrized by ``x``.

    With ``arclength_weights`` the weights carry ``|Gamma'| = sqrt(1 + f^2)``
    so the energies integrate against arc length instead of ``dx``.
    """
    x0, x1 = (float(v) for v in x_range)
    if not x1 > x0:
        raise InputError("x_range must be increasing")
    x = np.linspace(x0, x1, n)
    F, _ = sawmod.saw_antiderivative(x, params)
    pts = np.stack([x, F], axis=1)
    w = voronoi_weights(x, False, x1 - x0)
    length = x1 - x0
    if arclength_weights:
        f, _ = sawmod.saw_sum(x, params)
        w = w * np.sqrt(1.0 + f * f)
        length = float(np.sum(w))
    return SampledCurve(x, pts, False, length, w, "graph", meta={"saw": params.to_dict()})


def from_csv(path: str, closed: bool = False) -> SampledCurve:
    """Read rows ``t, x_1, ..., x_n``; an optional header and ``#`` comments are skipped."""
    rows: List[List[float]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise InputError(f"{path}: row {lineno}: non-numeric value in {row!r}") from None
            if rows and len(vals) != len(rows[0]):
                raise InputError(f"{path}: row {lineno}: expected {len(rows[0])} columns, got {len(vals)}")
            if len(vals) < 2:
                raise InputError(f"{path}: row {lineno}: need t and at least one coordinate")
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: row {lineno}: non-finite value")
            if rows and vals[0] <= rows[-1][0]:
                raise InputError(f"{path}: row {lineno}: parameter not strictly increasing")
            rows.append(vals)
    if len(rows) < 3:
        raise InputError(f"{path}: need at least 3 data rows")
    arr = np.array(rows)
    t, pts = arr[:, 0], arr[:, 1:]
    if closed:
        L = float(t[-1] - t[0] + np.linalg.norm(pts[0] - pts[-1]))
    else:
        L = float(t[-1] - t[0])
    return SampledCurve(t, pts, closed, L, voronoi_weights(t, closed, L), "arclength")


# ---------------------------------------------------------------------------
# diagnostics


def bilipschitz_constant(curve: SampledCurve, block: int = 256) -> float:
    """``min_{i != j} |Gamma_i - Gamma_j| / d(t_i, t_j)``."""
    P = curve.points
    best = math.inf
    idx = np.arange(curve.n)
    for rows in blocks(curve.n, block):
        r = np.array(rows)
        chord = np.linalg.norm(P[r, None, :] - P[None, :, :], axis=-1)
        d = curve.param_distance(r[:, None], idx[None, :])
        off = r[:, None] != idx[None, :]
        if np.any(off & (chord == 0)):
            raise DegenerateInputError("duplicate points: curve is not injective")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(off, chord / np.where(off, d, 1.0), np.inf)
        best = min(best, float(np.min(ratio)))
    return best


# ---------------------------------------------------------------------------
# energies


@dataclass
class EnergyResult:
    kind: str
    energy: float
    scheme: str
    samples: int
    std_error: Optional[float] = None
    shells: Optional[ScaleReport] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "energy": self.energy, "scheme": self.scheme, "samples": self.samples}
        if self.std_error is not None:
            d["std_error"] = self.std_error
        if self.shells is not None:
            d["shells"] = [
                {"level": r.level, "sum": r.value, "pairs": r.cells} for r in self.shells.levels
            ]
        return d


def _wedge_matrix(U: np.ndarray) -> np.ndarray:
    """``|u_j ^ u_k|`` for all pairs of rows of ``U``."""
    d = U.shape[1]
    if d == 1:
        return np.zeros((U.shape[0], U.shape[0]))
    acc = np.zeros((U.shape[0], U.shape[0]))
    for a in range(d):
        for b in range(a + 1, d):
            m = np.outer(U[:, a], U[:, b])
            m -= m.T
            acc += m * m
    return np.sqrt(acc)


def curvature_slab(P: np.ndarray, i: int, D: np.ndarray) -> np.ndarray:
    """Menger curvature ``c(P_i, P_j, P_k)`` for all ``j, k``; zeros where undefined."""
    U = P - P[i]
    r = np.linalg.norm(U, axis=1)
    four_area = 2.0 * _wedge_matrix(U)
    prod = r[:, None] * r[None, :] * D
    ok = (prod > 0) & (four_area >= COLLINEAR_RTOL * prod)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ok, four_area / np.where(ok, prod, 1.0), 0.0)


def shell_index(ratio: np.ndarray) -> np.ndarray:
    """``k`` with ``ratio in (2^{-k-1}, 2^{-k}]``, computed exactly from the binary exponent."""
    ratio = np.asarray(ratio, dtype=float)
    mant, e = np.frexp(ratio)
    k = np.where(mant == 0.5, 1 - e, -e)
    return np.where(ratio > 0, k, -1)


def _riemann_pass(curve: SampledCurve, p: float, kinds: Iterable[str], exclusion: int, threads, max_shell: int):
    P = curve.points
    w = curve.weights
    n = curve.n
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    idx = np.arange(n)
    jk_far = curve.index_distance(idx[:, None], idx[None, :]) > exclusion
    kinds = set(kinds)

    def work(rows):
        acc = {"M": [], "I": [], "U": []}
        shells = np.zeros(max_shell + 2)
        pairs = np.zeros(max_shell + 2, dtype=np.int64)
        for i in rows:
            c = curvature_slab(P, i, D)
            far_i = curve.index_distance(idx, i) > exclusion
            mask = jk_far & far_i[:, None] & far_i[None, :]
            c = np.where(mask, c, 0.0)
            if "M" in kinds or "shells" in kinds:
                cp = c ** p
                row = cp @ w  # sum over k for each j
                if "M" in kinds:
                    acc["M"].append(w[i] * ordered_sum(w * row))
                if "shells" in kinds:
                    d = curve.param_distance(i, idx) / curve.length
                    k = np.minimum(shell_index(d), max_shell + 1)
                    fa = far_i & (k >= 0)
                    shells += np.bincount(k[fa], weights=(w[i] * w * row)[fa], minlength=max_shell + 2)
                    pairs += np.bincount(k[fa], minlength=max_shell + 2)
            if "I" in kinds:
                inner = np.max(c, axis=1)
                acc["I"].append(w[i] * ordered_sum(np.where(far_i, w * inner ** p, 0.0)))
            if "U" in kinds:
                acc["U"].append(w[i] * float(np.max(c)) ** p)
        return acc, shells, pairs

    parts = ordered_map(work, blocks(n, 16), threads)
    out = {k: ordered_sum(v for acc, _, _ in parts for v in acc[k]) for k in ("M", "I", "U")}
    shells = np.zeros(max_shell + 2)
    pairs = np.zeros(max_shell + 2, dtype=np.int64)
    for _, s, c in parts:
        shells += s
        pairs += c
    return out, shells, pairs


def _mc_pass(curve: SampledCurve, p: float, kinds: Iterable[str], q: QuadratureSpec, threads):
    P = curve.points
    n = curve.n
    L = curve.length
    prob = curve.weights / L
    kinds = set(kinds)
    per = max(q.samples // q.streams, 1)

    def stream(s):
        rng = item_rng(q.seed, s)
        res = {}
        if "M" in kinds:
            ijk = rng.choice(n, size=(per, 3), p=prob)
            i, j, k = ijk.T
            ok = (
                (curve.index_distance(i, j) > q.exclusion)
                & (curve.index_distance(i, k) > q.exclusion)
                & (curve.index_distance(j, k) > q.exclusion)
            )
            c = menger_curvature(P[i], P[j], P[k])
            res["M"] = L ** 3 * float(np.mean(np.where(ok, c ** p, 0.0)))
        if "I" in kinds:
            m = max(per // n, 16)
            ij = rng.choice(n, size=(m, 2), p=prob)
            vals = []
            for a, b in ij:
                if curve.index_distance(a, b) <= q.exclusion:
                    vals.append(0.0)
                    continue
                vals.append(_sup_over_third(curve, a, b, q.exclusion) ** p)
            res["I"] = L ** 2 * float(np.mean(vals))
        if "U" in kinds:
            D = None
            vals = []
            for a in rng.choice(n, size=max(q.outer_samples // q.streams, 2), p=prob):
                if D is None:
                    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
                c = curvature_slab(P, a, D)
                far = curve.index_distance(np.arange(n), a) > q.exclusion
                jk = curve.index_distance(np.arange(n)[:, None], np.arange(n)[None, :]) > q.exclusion
                c = np.where(far[:, None] & far[None, :] & jk, c, 0.0)
                vals.append(float(np.max(c)) ** p)
            res["U"] = L * float(np.mean(vals))
        return res

    parts = ordered_map(stream, range(q.streams), threads)
    out, err = {}, {}
    for key in kinds & {"M", "I", "U"}:
        v = np.array([r[key] for r in parts])
        out[key] = float(np.mean(v))
        err[key] = float(np.std(v, ddof=1) / math.sqrt(len(v)))
    return out, err


def _sup_over_third(curve: SampledCurve, a: int, b: int, excl: int) -> float:
    P = curve.points
    idx = np.arange(curve.n)
    ok = (curve.index_distance(idx, a) > excl) & (curve.index_distance(idx, b) > excl)
    c = menger_curvature(P[a], P[b], P[idx[ok]])
    return float(np.max(c)) if np.size(c) else 0.0


def max_shell_level(curve: SampledCurve) -> int:
    """Finest dyadic shell that can hold a pair of distinct samples."""
    dmin = float(np.min(np.diff(curve.t)))
    return int(shell_index(np.array([dmin / curve.length]))[0])


def energy_report(
    curve: SampledCurve,
    p: float,
    q: Optional[QuadratureSpec] = None,
    kinds: Sequence[str] = ("M",),
    threads: Optional[int] = None,
) -> Dict[str, EnergyResult]:
    """Evaluate the requested energies (``"M"``, ``"I"``, ``"U"``) in one pass.

    With the product rule, ``"M"`` also carries the dyadic shell split by
    ``d(x, y)``.
    """
    if not p > 0:
        raise InputError("p must be positive")
    q = q or QuadratureSpec()
    scheme = q.resolve(curve.n)
    kinds = list(kinds)
    if any(k not in ("M", "I", "U") for k in kinds):
        raise InputError("energy kinds are 'M', 'I' and 'U'")
    results: Dict[str, EnergyResult] = {}
    if scheme == "riemann":
        top = max_shell_level(curve)
        want = set(kinds) | ({"shells"} if "M" in kinds else set())
        vals, shells, pairs = _riemann_pass(curve, p, want, q.exclusion, threads, top)
        for k in kinds:
            results[k] = EnergyResult(k, vals[k], "riemann", curve.n)
        if "M" in kinds:
            results["M"].shells = _shell_report(shells, pairs, p)
    else:
        vals, err = _mc_pass(curve, p, kinds, q, threads)
        for k in kinds:
            results[k] = EnergyResult(k, vals[k], "mc", q.samples, std_error=err[k])
    return results


def _shell_report(shells: np.ndarray, pairs: np.ndarray, p: float) -> ScaleReport:
    # last bin collects anything finer than the grid allows; it is empty in practice
    recs = [LevelRecord(k, float(shells[k]), int(pairs[k])) for k in range(len(shells)) if pairs[k] > 0]
    rep = ScaleReport("mp-shells", 2.0, recs, meta={"p": p, "shell": "d(x,y)/L in (2^-k-1, 2^-k]"})
    try:
        rep.fitted_exponent, _ = log_linear_slope(rep.level_indices, rep.values, 2.0)
    except PreconditionError:
        rep.fitted_exponent = None
    return rep


def energy_mp(curve: SampledCurve, p: float, q: Optional[QuadratureSpec] = None, threads=None) -> float:
    """``M_p = iiint R^{-p}``."""
    return energy_report(curve, p, q, ("M",), threads)["M"].energy


def energy_ip(curve: SampledCurve, p: float, q: Optional[QuadratureSpec] = None, threads=None) -> float:
    """``I_p = iint (inf_s R)^{-p}``."""
    return energy_report(curve, p, q, ("I",), threads)["I"].energy


def energy_up(curve: SampledCurve, p: float, q: Optional[QuadratureSpec] = None, threads=None) -> float:
    """``U_p = int (inf_{s,t} R)^{-p}``."""
    return energy_report(curve, p, q, ("U",), threads)["U"].energy


def scale_decomposed_mp(
    curve: SampledCurve, p: float, q: Optional[QuadratureSpec] = None, predicted: Optional[float] = None, threads=None
) -> ScaleReport:
    """Per-shell totals of ``M_p`` by ``d(x, y) / L in (2^-k-1, 2^-k]``.

    ``fitted_exponent`` is the base-2 growth rate per shell; a curve with
    shell sums ``~ 2^{-k s}`` gives ``-s``.  Always uses the product rule.
    """
    q = q or QuadratureSpec(scheme="riemann")
    if q.resolve(curve.n) != "riemann":
        q = QuadratureSpec("riemann", exclusion=q.exclusion)
    res = energy_report(curve, p, q, ("M",), threads)["M"]
    rep = res.shells
    rep.predicted_exponent = predicted
    rep.meta["energy_mp"] = res.energy
    return rep


# ---------------------------------------------------------------------------
# secant cones


@dataclass
class ConeReport:
    max_angle_ratio: float
    max_bound_fraction: float
    pairs: int
    passed: bool
    alpha: float
    holder_C: float
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "max_angle_ratio": self.max_angle_ratio,
            "max_bound_fraction": self.max_bound_fraction,
            "pairs": self.pairs,
            "passed": self.passed,
            "alpha": self.alpha,
            "holder_C": self.holder_C,
            "epsilon": self.epsilon,
        }


def _angles_from(P: np.ndarray, apex: int, others: np.ndarray) -> np.ndarray:
    """``angle(P_z - P_apex, P_y - P_apex)`` for ``z, y`` in ``others`` (matrix)."""
    V = P[others] - P[apex]
    wedge = _wedge_matrix(V)
    dot = V @ V.T
    return np.arctan2(wedge, dot)


def secant_cone_check(curve: SampledCurve, alpha: float, holder_C: float, epsilon: float) -> ConeReport:
    """Secant-angle test of the cone inclusion for ``|Gamma'|`` Hoelder curves.

    For sample pairs ``x < y`` with ``h = |x - y| < epsilon`` and every sample
    ``z`` strictly between them, the angle at ``Gamma(x)`` between the secants
    to ``Gamma(z)`` and ``Gamma(y)`` (and symmetrically at ``Gamma(y)``) must
    not exceed ``2 arcsin(min(1, 2.5 C h^alpha))``.  ``max_angle_ratio`` is
    the largest ``angle / h^alpha``; ``max_bound_fraction`` the largest
    ``angle / bound``.
    """
    if not 0 < alpha <= 1:
        raise InputError("alpha must be in (0, 1]")
    if not (holder_C > 0 and epsilon > 0):
        raise InputError("holder_C and epsilon must be positive")
    if not 2.5 * holder_C * epsilon ** alpha < 1:
        raise PreconditionError("need (5/2) C epsilon^alpha < 1")
    P = curve.points
    t = curve.t
    n = curve.n
    worst_ratio = 0.0
    worst_frac = 0.0
    npairs = 0
    span = np.searchsorted(t, t + epsilon, side="left") - np.arange(n)  # samples with t_j - t_i < eps
    if curve.closed:
        # walk past the seam by unrolling one period
        t = np.concatenate([t, t + curve.length])
        P = np.vstack([P, P])
        span = np.searchsorted(t, t[:n] + epsilon, side="left") - np.arange(n)
    for i in range(n):
        w = int(span[i])
        if w < 3:
            continue
        win = np.arange(i, i + w)
        h = t[win[1:]] - t[i]
        A = _angles_from(P, i, win[1:])  # A[z, y]
        before = np.triu(np.ones((w - 1, w - 1), dtype=bool), k=1)  # z strictly before y
        ax = np.max(np.where(before, A, 0.0), axis=0)
        # from y's side: angle at P_y between P_z and P_x, for i < z < y
        ay = np.zeros(w - 1)
        for c, y in enumerate(win[1:]):
            if c == 0:
                continue
            V = P[win[1 : c + 1]] - P[y]
            u = P[i] - P[y]
            wv = _pair_wedge(V, u)
            ay[c] = float(np.max(np.arctan2(wv, V @ u)))
        theta = np.maximum(ax, ay)
        bound = 2 * np.arcsin(np.minimum(1.0, 2.5 * holder_C * h ** alpha))
        sel = np.arange(w - 1) >= 1  # needs at least one intermediate sample
        if not np.any(sel):
            continue
        npairs += int(sel.sum())
        worst_ratio = max(worst_ratio, float(np.max(theta[sel] / h[sel] ** alpha)))
        worst_frac = max(worst_frac, float(np.max(theta[sel] / bound[sel])))
    return ConeReport(worst_ratio, worst_frac, npairs, worst_frac <= 1.0, alpha, holder_C, epsilon)


def _pair_wedge(V: np.ndarray, u: np.ndarray) -> np.ndarray:
    d = V.shape[1]
    acc = np.zeros(V.shape[0])
    for a in range(d):
        for b in range(a + 1, d):
            m = V[:, a] * u[b] - V[:, b] * u[a]
            acc += m * m
    return np.sqrt(acc)
