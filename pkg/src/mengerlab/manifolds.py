"""Chart-graph manifolds, the ``E_p`` energy and the beta-number inequality checks.

A :class:`SampledManifold` is a single chart ``G : box in R^m -> R^n`` with
its area weight ``|JG|`` and tangent planes.  ``E_p`` integrates the discrete
curvature ``K`` of ``m+2`` points against ``H^m`` on each factor; through the
chart this becomes an integral over ``box^{m+2}`` with weight ``prod |JG|``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import saw as sawmod
from .errors import InputError, PreconditionError
from .geometry import beta_number, diameter, discrete_curvature, orthonormal_span, simplex_measure
from .reduction import item_rng, ordered_map
from .report import LevelRecord, ScaleReport, log_linear_slope


@dataclass(frozen=True)
class SampledManifold:
    """Graph-type chart over the box ``[lo, hi]``.

    ``embed`` maps ``(..., m)`` chart points to ``(..., n)``; ``jacobian``
    maps one chart point to the ``(n, m)`` differential.  ``offsets(x0, U)``
    returns ``G(x0 + U) - G(x0)`` and may be overridden for extra precision.
    """

    kind: str
    m: int
    n: int
    lo: np.ndarray
    hi: np.ndarray
    embed: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    area_weight: Callable[[np.ndarray], np.ndarray]
    offsets_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    flat: bool = False
    alpha: Optional[float] = None
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.size != self.m or hi.size != self.m or np.any(hi <= lo):
            raise InputError("chart box must be a nondegenerate box in R^m")
        if self.n < self.m + 1:
            raise InputError("ambient dimension must exceed m")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def offsets(self, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
        if self.offsets_fn is not None:
            return self.offsets_fn(x0, U)
        x0 = np.asarray(x0, dtype=float)
        base = self.embed(x0)
        return self.embed(x0[..., None, :] + U) - base[..., None, :]

    def tangent(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal rows spanning ``DG(x)``."""
        return orthonormal_span(self.jacobian(np.asarray(x, dtype=float)).T, rank=self.m)

    def diameter_bound(self, grid: int = 33) -> float:
        """Diagonal of the bounding box of ``G`` on a chart grid (an estimate of ``diam``)."""
        axes = [np.linspace(a, b, grid) for a, b in zip(self.lo, self.hi)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        Y = self.embed(X)
        return float(np.linalg.norm(Y.max(axis=0) - Y.min(axis=0)))

    def scaled(self, lam: float) -> "SampledManifold":
        """``lam * Sigma`` through the chart ``x -> lam G(x / lam)`` on ``lam * box``."""
        if not lam > 0:
            raise InputError("scale factor must be positive")
        base = self
        return SampledManifold(
            self.kind, self.m, self.n, self.lo * lam, self.hi * lam,
            lambda x: lam * base.embed(np.asarray(x) / lam),
            lambda x: base.jacobian(np.asarray(x) / lam),
            lambda x: base.area_weight(np.asarray(x) / lam),
            offsets_fn=lambda x0, U: lam * base.offsets(np.asarray(x0) / lam, np.asarray(U) / lam),
            flat=self.flat, alpha=self.alpha, params={**self.params, "lam": lam},
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "n": self.n, "lo": self.lo.tolist(), "hi": self.hi.tolist(), **self.params}


# ---------------------------------------------------------------------------
# generators


def flat_patch(m: int = 2, side: float = 1.0, n: Optional[int] = None) -> SampledManifold:
    n = m + 1 if n is None else n
    if m < 1:
        raise InputError("m must be at least 1")

    def embed(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, np.zeros(x.shape[:-1] + (n - m,))], axis=-1)

    def jac(x):
        return np.eye(n, m)

    return SampledManifold(
        "flat-patch", m, n, np.zeros(m), np.full(m, side), embed, jac,
        lambda x: np.ones(np.shape(x)[:-1]), flat=True, params={"side": side},
    )


def sphere_patch(m: int = 2, radius: float = 1.0, half_width: float = 0.5) -> SampledManifold:
    """Graph of the lower cap ``x -> rho - sqrt(rho^2 - |x|^2)`` over ``[-w, w]^m``."""
    if not (radius > 0 and 0 < half_width and half_width * math.sqrt(m) < radius):
        raise InputError("need 0 < half_width * sqrt(m) < radius")
    rho = float(radius)

    def height(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1)
        # rho - sqrt(rho^2 - r2) without cancellation
        return r2 / (rho + np.sqrt(rho * rho - r2))

    def embed(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([x, height(x)[..., None]], axis=-1)

    def jac(x):
        x = np.asarray(x, dtype=float)
        g = x / np.sqrt(rho * rho - np.sum(x * x))
        return np.vstack([np.eye(m), g[None, :]])

    def area(x):
        x = np.asarray(x, dtype=float)
        return rho / np.sqrt(rho * rho - np.sum(x * x, axis=-1))

    return SampledManifold(
        "sphere-patch", m, m + 1, np.full(m, -half_width), np.full(m, half_width), embed, jac, area,
        alpha=1.0, params={"radius": rho, "half_width": half_width},
    )


def saw_graph(m: int, params: sawmod.SawParams, lo: float = 0.0, hi: float = 1.0) -> SampledManifold:
    """``G(x) = (x, F(x^1))`` over ``[lo, hi]^m``; area weight ``sqrt(1 + f(x^1)^2)``."""
    if m < 1:
        raise InputError("m must be at least 1")

    def embed(x):
        return sawmod.graph_map(x, params)

    def jac(x):
        x = np.asarray(x, dtype=float)
        f = float(sawmod.saw_fast(x[0], params))
        J = np.vstack([np.eye(m), np.zeros((1, m))])
        J[m, 0] = f
        return J

    def area(x):
        f = sawmod.saw_fast(np.asarray(x, dtype=float)[..., 0], params)
        return np.sqrt(1.0 + f * f)

    def offsets(x0, U):
        # anchors are the exact binary values of x0^1, so F(x0 + u) - F(x0) keeps relative precision in u
        x0 = np.asarray(x0, dtype=float)
        U = np.asarray(U, dtype=float)
        if x0.ndim == 1:
            dF = sawmod.saw_increment(Fraction(float(x0[0])), U[..., 0], params)
        else:
            anchors = [Fraction(float(v)) for v in x0[..., 0].reshape(-1)]
            flat = U[..., 0].reshape((len(anchors),) + U.shape[x0.ndim - 1 : -1])
            dF = sawmod.saw_increment(anchors, flat, params).reshape(U.shape[:-1])
        return np.concatenate([U, dF[..., None]], axis=-1)

    return SampledManifold(
        "saw-graph", m, m + 1, np.full(m, lo), np.full(m, hi), embed, jac, area,
        offsets_fn=offsets, alpha=params.alpha, params={"saw": params.to_dict()},
    )


@dataclass(frozen=True)
class ShellSpec:
    """Dyadic shells ``diam in (2^{-k-1}, 2^{-k}]`` for ``k = K0..k_max``."""

    K0: int
    k_max: int

    def __post_init__(self):
        if self.K0 > self.k_max:
            raise InputError("need K0 <= k_max")

    @classmethod
    def for_manifold(cls, M: SampledManifold, k_max: int) -> "ShellSpec":
        """Largest ``K0`` with ``2^{-K0} >= 2 diam``."""
        K0 = int(math.floor(-math.log2(2 * M.diameter_bound())))
        return cls(K0, max(k_max, K0))


# ---------------------------------------------------------------------------
# E_p


def _tuple_integrand(M: SampledManifold, Z: np.ndarray, p: float) -> np.ndarray:
    """``K(G(z_0..z_{m+1}))^p * prod |JG(z_i)|`` for tuples ``Z`` of shape ``(S, m+2, m)``."""
    Y = M.offsets(Z[:, 0, :], Z - Z[:, :1, :])
    K = discrete_curvature(Y)
    w = np.prod(M.area_weight(Z), axis=-1)
    return np.where(K > 0, K ** p, 0.0) * w, Y


@dataclass
class MCEstimate:
    estimate: float
    std_error: float
    samples: int
    streams: int

    def __iter__(self):
        return iter((self.estimate, self.std_error))

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error, "samples": self.samples, "streams": self.streams}


def _stream_stats(values: Sequence[float]) -> Tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(len(v)))


def energy_ep_mc(
    M: SampledManifold, p: float, samples: int = 200_000, seed: int = 0, streams: int = 8,
    chunk: int = 20_000, threads: Optional[int] = None,
) -> MCEstimate:
    """Uniform Monte-Carlo over ``box^{m+2}``; error bar from the spread of stream means.

    With equal stream sizes the jackknife standard error of the mean reduces
    to ``std(stream means) / sqrt(streams)``.
    """
    if not p > 0:
        raise InputError("p must be positive")
    if samples < streams or streams < 2:
        raise InputError("need at least 2 streams and one sample per stream")
    if M.flat:
        return MCEstimate(0.0, 0.0, samples, streams)
    per = samples // streams
    vol = M.volume ** (M.m + 2)

    def stream(s):
        rng = item_rng(seed, s)
        acc = 0.0
        done = 0
        while done < per:
            c = min(chunk, per - done)
            Z = M.lo + (M.hi - M.lo) * rng.random((c, M.m + 2, M.m))
            vals, _ = _tuple_integrand(M, Z, p)
            acc += math.fsum(vals)
            done += c
        return vol * acc / per

    est, se = _stream_stats(ordered_map(stream, range(streams), threads))
    return MCEstimate(est, se, per * streams, streams)


def _sample_in_box(rng, z0: np.ndarray, half: float, M: SampledManifold, count: int):
    """Uniform points in ``(z0 + [-half, half]^m) & chart``; returns points and box volumes."""
    a = np.maximum(z0 - half, M.lo)
    b = np.minimum(z0 + half, M.hi)
    U = rng.random((z0.shape[0], count, M.m))
    return a[:, None, :] + (b - a)[:, None, :] * U, np.prod(b - a, axis=-1)


def energy_ep_shells(
    M: SampledManifold, p: float, shells: ShellSpec, samples_per_shell: int = 20_000, seed: int = 0,
    streams: int = 8, predicted: Optional[float] = None, threads: Optional[int] = None,
) -> ScaleReport:
    """Per-shell estimates of ``E_p`` restricted to ``diam(G(T)) in (2^{-k-1}, 2^{-k}]``.

    Shell ``k`` draws ``z_0`` uniformly and the other points uniformly in the
    chart box ``z_0 + [-2^{-k}, 2^{-k}]^m`` (which contains every tuple of the
    shell because ``|G(x) - G(y)| >= |x - y|`` for graphs); importance weights
    make each estimate unbiased.  A final remainder record collects
    ``diam <= 2^{-k_max-1}``.  The report's fitted exponent is the base-2
    growth rate per shell.
    """
    if not p > 0:
        raise InputError("p must be positive")
    m = M.m
    levels = list(range(shells.K0, shells.k_max + 1))
    per = max(samples_per_shell // streams, 1)

    def shell_stream(item):
        k, s, remainder = item
        rng = item_rng(seed, k + 1000, s, int(remainder))
        half = 2.0 ** (-k - 1) if remainder else 2.0 ** (-k)
        z0 = M.lo + (M.hi - M.lo) * rng.random((per, m))
        rest, bvol = _sample_in_box(rng, z0, half, M, m + 1)
        Z = np.concatenate([z0[:, None, :], rest], axis=1)
        if M.flat:
            return 0.0
        vals, Y = _tuple_integrand(M, Z, p)
        d = diameter(Y)
        if remainder:
            inside = d <= 2.0 ** (-k - 1)
        else:
            inside = (d > 2.0 ** (-k - 1)) & (d <= 2.0 ** (-k))
        wts = M.volume * bvol ** (m + 1)
        return math.fsum(np.where(inside, vals * wts, 0.0)) / per

    items = [(k, s, False) for k in levels for s in range(streams)]
    items += [(shells.k_max, s, True) for s in range(streams)]
    parts = ordered_map(shell_stream, items, threads)
    recs = []
    for i, k in enumerate(levels):
        est, se = _stream_stats(parts[i * streams : (i + 1) * streams])
        recs.append(LevelRecord(k, est, per * streams, std_error=se))
    rem, rem_se = _stream_stats(parts[len(levels) * streams :])
    rep = ScaleReport(
        "ep-shells", 2.0, recs, predicted_exponent=predicted,
        meta={"p": p, "m": m, "remainder": rem, "remainder_std_error": rem_se, "K0": shells.K0, "k_max": shells.k_max},
    )
    total_se = math.sqrt(sum(r.std_error ** 2 for r in recs) + rem_se ** 2)
    rep.meta["total_with_remainder"] = rep.total + rem
    rep.meta["total_std_error"] = total_se
    try:
        rep.fitted_exponent, _ = log_linear_slope(rep.level_indices, rep.values, 2.0)
    except PreconditionError:
        rep.fitted_exponent = None
    return rep


def shell_prediction(m: int, p: float, alpha: float) -> float:
    """Base-2 per-shell growth rate ``-(m(m+1) + p alpha - p)`` from the finiteness proof."""
    return -(m * (m + 1) + p * alpha - p)


# ---------------------------------------------------------------------------
# beta numbers on manifolds


def _ball_cloud(M: SampledManifold, a: np.ndarray, r: float, per_axis: int) -> np.ndarray:
    """Points ``G(a + u) - G(a)`` for a chart grid ``u in [-r, r]^m`` (clipped to the chart).

    ``Sigma & B(G(a), r)`` lies in the image of this chart cube since chart
    distances never exceed ambient distances.
    """
    axes = [np.linspace(max(-r, lo - c), min(r, hi - c), per_axis) for c, lo, hi in zip(a, M.lo, M.hi)]
    U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, M.m)
    return M.offsets(a, U)


def _beta_at(M: SampledManifold, a: np.ndarray, r: float, cloud: np.ndarray, descend: bool = True) -> float:
    mode = "exact" if (M.m == 1 and M.n == 2) else "approx"
    est = beta_number(cloud, np.zeros(M.n), r, M.m, mode=mode, candidates=[M.tangent(a)], descend=descend)
    return est.value


def centre_grid(M: SampledManifold, count: int) -> np.ndarray:
    per = max(1, int(round(count ** (1.0 / M.m))))
    axes = [lo + (hi - lo) * (np.arange(per) + 0.5) / per for lo, hi in zip(M.lo, M.hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, M.m)


@dataclass
class BetaFit:
    slope: Optional[float]
    C_fit: Optional[float]
    exponent: Optional[float]
    violations: int
    checked: int
    degenerate_flat: bool
    radii: List[float]
    beta_max: List[float]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope, "C_fit": self.C_fit, "exponent": self.exponent, "violations": self.violations,
            "checked": self.checked, "degenerate_flat": self.degenerate_flat, "radii": self.radii, "beta_max": self.beta_max,
        }


def beta_scaling_fit(
    M: SampledManifold,
    centers: int = 64,
    radii: Optional[Sequence[float]] = None,
    per_axis: Optional[int] = None,
    exponent: Optional[float] = None,
    calibrate_fraction: float = 0.5,
    slack: float = 0.10,
    threads: Optional[int] = None,
) -> BetaFit:
    """Decay of ``beta(a, r)`` with ``r``.

    ``slope`` is the least-squares log-log slope of ``max_a beta(a, r)``.  The
    bound ``C_fit r^e`` uses ``e = exponent`` (default: the fitted slope) and
    ``C_fit`` is the smallest constant covering the coarsest
    ``calibrate_fraction`` of the radii; violations are pairs ``(a, r)`` at the
    remaining finer radii with ``beta > (1 + slack) C_fit r^e``.  The finer
    radii are thus a genuine extrapolation of the calibrated bound.
    """
    radii = sorted((2.0 ** -np.arange(3, 13)).tolist() if radii is None else [float(r) for r in radii], reverse=True)
    if any(r <= 0 for r in radii):
        raise InputError("radii must be positive")
    per_axis = per_axis or (129 if M.m == 1 else 17)
    C = centre_grid(M, centers)

    def work(a):
        out = []
        for r in radii:
            cloud = _ball_cloud(M, a, r, per_axis)
            out.append(_beta_at(M, a, r, cloud))
        return out

    B = np.array(ordered_map(work, list(C), threads))
    bmax = B.max(axis=0)
    rr = np.array(radii)
    if np.all(bmax <= 1e-14):
        return BetaFit(None, None, None, 0, B.size, True, radii, bmax.tolist())
    slope = float(np.polyfit(np.log(rr), np.log(np.maximum(bmax, 1e-300)), 1)[0])
    e = slope if exponent is None else float(exponent)
    ncal = max(1, int(round(calibrate_fraction * len(rr))))
    C_fit = float(np.max(bmax[:ncal] / rr[:ncal] ** e))
    test = B[:, ncal:]
    viol = int(np.sum(test > (1 + slack) * C_fit * rr[ncal:] ** e))
    return BetaFit(slope, C_fit, e, viol, int(test.size), False, radii, bmax.tolist())


def dc_constant(n: int, m: int) -> float:
    """``(2 + 4A)^n 2^{-(n-m-1)}`` with ``A = diam([0,1]^{n-m-1}) = sqrt(n-m-1)``."""
    if not 1 <= m < n:
        raise InputError("need 1 <= m < n")
    A = math.sqrt(n - m - 1)
    return (2 + 4 * A) ** n * 2.0 ** (-(n - m - 1))


@dataclass
class DcBetaReport:
    max_ratio: float
    max_ratio_normalized: float
    max_curvature_ratio: float
    C_paper: float
    violations: int
    tuples: int
    degenerate: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class ImpossibleGeometryError(PreconditionError):
    """A positive simplex volume next to a zero beta number."""


def sample_tuples(M: SampledManifold, count: int, seed: int, scale_range=(2.0 ** -10, 0.5)) -> np.ndarray:
    """Chart tuples ``(count, m+2, m)``: ``z_0`` uniform, others in a cube of log-uniform size around it."""
    rng = item_rng(seed, 7)
    z0 = M.lo + (M.hi - M.lo) * rng.random((count, M.m))
    s = np.exp(rng.uniform(math.log(scale_range[0]), math.log(scale_range[1]), count))
    a = np.maximum(z0 - s[:, None], M.lo)
    b = np.minimum(z0 + s[:, None], M.hi)
    rest = a[:, None, :] + (b - a)[:, None, :] * rng.random((count, M.m + 1, M.m))
    return np.concatenate([z0[:, None, :], rest], axis=1)


def dc_beta_bound_check(
    M: SampledManifold, tuple_count: int = 10_000, seed: int = 0, per_axis: Optional[int] = None,
    descend: bool = False, threads: Optional[int] = None,
) -> DcBetaReport:
    """``H^{m+1}(T) <= C beta(x_0, d) d^{m+1}`` on sampled tuples, ``d = diam T``.

    ``beta`` is replaced by an upper bound computed on the tuple's vertices
    together with a chart grid of ``Sigma & B(x_0, d)``; overestimating beta
    only weakens the right side, so a violation here is a violation of the
    inequality itself.
    """
    per_axis = per_axis or (33 if M.m == 1 else 9)
    Cp = dc_constant(M.n, M.m)
    Z = sample_tuples(M, tuple_count, seed)
    Y = M.offsets(Z[:, 0, :], Z - Z[:, :1, :])
    vol = np.asarray(simplex_measure(Y))
    d = np.asarray(diameter(Y))

    def work(i):
        if vol[i] <= 0 or d[i] <= 0:
            return 0.0, 0.0, True
        cloud = np.vstack([Y[i], _ball_cloud(M, Z[i, 0], float(d[i]), per_axis)])
        b = _beta_at(M, Z[i, 0], float(d[i]), cloud, descend=descend)
        if b <= 0:
            raise ImpossibleGeometryError(f"tuple {i}: positive volume {vol[i]:.3e} with beta estimate 0")
        ratio = vol[i] / (b * d[i] ** (M.m + 1))
        kd = (vol[i] / d[i] ** (M.m + 2)) * d[i] / b
        return ratio, kd, False

    res = ordered_map(work, range(tuple_count), threads)
    ratios = np.array([r[0] for r in res])
    kds = np.array([r[1] for r in res])
    degen = sum(1 for r in res if r[2])
    mx = float(ratios.max()) if ratios.size else 0.0
    return DcBetaReport(mx, mx / Cp, float(kds.max()) if kds.size else 0.0, Cp, int(np.sum(ratios > Cp)), tuple_count, degen)


def dump_tuples_csv(path: str, tuples: np.ndarray) -> None:
    """Rows ``tuple, vertex, coord_1..coord_d``."""
    T = np.asarray(tuples, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tuple", "vertex"] + [f"x{j + 1}" for j in range(T.shape[-1])])
        for i in range(T.shape[0]):
            for v in range(T.shape[1]):
                w.writerow([i, v] + [repr(float(c)) for c in T[i, v]])
