"""Van der Waerden saw, its antiderivative and the graph maps built from it.

The saw is ``f(x) = sum_k N**(-alpha*k) * f0(N**k * x)`` where ``f0`` is the
1-periodic tent with ``f0(0) = 0`` and ``f0(1/2) = 1``.  ``F`` is its
antiderivative with ``F(0) = 0``; ``F`` is ``C^{1,alpha}`` but no better.

All evaluations truncate the series at a level ``K`` carried by
:class:`SawParams`.  Every consumer in the package evaluates the *same*
truncated function, so energy and gap computations are consistent with each
other regardless of the tail.

Two evaluation paths exist:

* global: ``F(x)`` and ``f(x)`` for plain floats ``x``;
* local: ``F(a + u) - F(a)`` for an exact rational anchor ``a`` and a small
  float offset ``u``.  Cells at level ``k`` have width ``N**-k``; once this is
  far below the float spacing near ``a`` the global path cannot resolve the
  slope differences that drive the curvature, while the local path keeps full
  relative precision in ``u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import numpy as np

from .errors import InputError

DEFAULT_TOLERANCE = 1e-12

Rational = Union[int, Fraction]


@dataclass(frozen=True)
class SawParams:
    """Base ``N``, Hoelder exponent ``alpha`` and truncation level ``K``."""

    N: int
    alpha: float
    K: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InputError("N must be an integer >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must be in (0,1)")
        if int(self.K) != self.K or self.K < 0:
            raise InputError("truncation level K must be a nonnegative integer")

    @classmethod
    def from_tolerance(cls, N: int, alpha: float, tolerance: float = DEFAULT_TOLERANCE) -> "SawParams":
        """Smallest ``K`` whose neglected mass of ``F`` on [0, 1] is <= tolerance."""
        if not 0.0 < alpha < 1.0:
            raise InputError("alpha must be in (0,1)")
        if int(N) != N or N < 2:
            raise InputError("N must be an integer >= 2")
        if not tolerance > 0:
            raise InputError("tolerance must be positive")
        q = float(N) ** (-alpha)
        # q**(K+1) / (1 - q) <= tol
        K = math.ceil(math.log(tolerance * (1.0 - q)) / math.log(q) - 1.0)
        K = max(K, 0)
        while K > 0 and q ** K / (1.0 - q) <= tolerance:
            K -= 1
        return cls(int(N), float(alpha), int(K))

    @property
    def tail_ratio(self) -> float:
        return float(self.N) ** (-self.alpha)

    @property
    def sum_error_bound(self) -> float:
        """Uniform bound on the neglected part of ``f``."""
        q = self.tail_ratio
        return q ** (self.K + 1) / (1.0 - q)

    def antiderivative_error_bound(self, x) -> np.ndarray:
        """Bound on the neglected part of ``F(x)``; linear in ``|x|``."""
        return np.abs(np.asarray(x, dtype=float)) * self.sum_error_bound

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "K": self.K}


@dataclass(frozen=True)
class CriticalExponents:
    p: float
    m: int
    alpha_curve: float
    alpha_manifold: float
    alpha_regularity: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def critical_alpha(p: float, m: int) -> CriticalExponents:
    """Hoelder thresholds attached to the exponent ``p`` in dimension ``m``.

    ``alpha_manifold = 1 - m(m+1)/p`` separates finite from infinite energy;
    ``alpha_curve = 1 - 2/p`` is the curve case; ``alpha_regularity =
    1 - m(m+2)/p`` is the exponent gained back from finite energy.
    """
    if int(m) != m or m < 1:
        raise InputError("m must be a positive integer")
    if not p > m * (m + 1):
        raise InputError(f"p must exceed m(m+1) = {m * (m + 1)}")
    return CriticalExponents(
        p=float(p),
        m=int(m),
        alpha_curve=1.0 - 2.0 / p,
        alpha_manifold=1.0 - m * (m + 1) / p,
        alpha_regularity=1.0 - m * (m + 2) / p,
    )


def hoelder_constant(params: SawParams) -> float:
    """Hoelder constant of ``F' = f`` with exponent ``alpha``."""
    N, a = float(params.N), params.alpha
    return 2.0 * N / (N ** (1.0 - a) - 1.0) + 2.0 * N ** a / (N ** a - 1.0)


# ---------------------------------------------------------------------------
# the tent and its integral


def saw_base(x):
    """Periodic tent ``f0``: ``2u`` on [0, 1/2], ``2 - 2u`` on (1/2, 1]."""
    x = np.asarray(x, dtype=float)
    u = x - np.floor(x)
    out = np.where(u <= 0.5, 2.0 * u, 2.0 - 2.0 * u)
    return out if out.ndim else float(out)


def _tent_frac(u):
    # f0 restricted to u in [0, 1)
    return np.where(u <= 0.5, 2.0 * u, 2.0 - 2.0 * u)


def _g0(u):
    """Integral of ``f0`` over [0, u] for ``u`` in [0, 1]."""
    return np.where(u <= 0.5, u * u, 2.0 * u - u * u - 0.5)


def _tent_cumulative(w):
    fl = np.floor(w)
    return 0.5 * fl + _g0(w - fl)


_BREAKS = np.array([-1.0, -0.5, 0.0, 0.5, 1.0, 1.5])
_BREAK_VALUES = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])


def tent_integral(s, v):
    """Integral of ``f0`` over ``[s, s + v]`` (signed), with ``s`` in [0, 1).

    For ``|v| < 1`` the integral is assembled from the linear pieces of the
    tent between breakpoints, each piece as ``w * (f_start + slope * w / 2)``
    with widths measured from ``s``.  This keeps full relative precision when
    ``v`` is tiny, where differencing the cumulative integral would cancel.
    """
    s, v = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(v, dtype=float))
    shape = s.shape
    s = s.reshape(-1)
    v = v.reshape(-1)
    out = np.empty_like(v)

    big = np.abs(v) >= 1.0
    if big.any():
        out[big] = _tent_cumulative(s[big] + v[big]) - _tent_cumulative(s[big])

    small = ~big
    if small.any():
        ss = s[small]
        vv = v[small]
        sign = np.where(vv < 0, -1.0, 1.0)
        d = _BREAKS[None, :] - ss[:, None]
        inside = (d * sign[:, None] > 0) & (d * sign[:, None] < np.abs(vv)[:, None])
        offs = np.where(inside, d, vv[:, None])
        fvals = np.where(inside, _BREAK_VALUES[None, :], 0.0)
        offs = np.concatenate([np.zeros((ss.size, 1)), offs, vv[:, None]], axis=1)
        fvals = np.concatenate([_tent_frac(ss)[:, None], fvals, np.zeros((ss.size, 1))], axis=1)
        order = np.argsort(offs * sign[:, None], axis=1, kind="stable")
        offs = np.take_along_axis(offs, order, axis=1)
        fvals = np.take_along_axis(fvals, order, axis=1)
        w = np.diff(offs, axis=1)
        mid = ss[:, None] + 0.5 * (offs[:, 1:] + offs[:, :-1])
        phase = mid - np.floor(mid)
        slope = np.where(phase < 0.5, 2.0, -2.0)
        out[small] = np.sum(w * (fvals[:, :-1] + 0.5 * slope * w), axis=1)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# level fractions


def _as_fraction(a) -> Fraction:
    if isinstance(a, Fraction):
        return a
    if isinstance(a, (int, np.integer)):
        return Fraction(int(a))
    if isinstance(a, (float, np.floating)):
        return Fraction(float(a))
    if isinstance(a, tuple) and len(a) == 2:
        return Fraction(int(a[0]), int(a[1]))
    raise InputError(f"cannot interpret anchor {a!r} as a rational number")


def anchor_fracs(anchors: Union[Rational, Iterable[Rational]], params: SawParams) -> np.ndarray:
    """``frac(N**j * a)`` for ``j = 0..K``, exact up to the final rounding.

    Returns shape ``(K + 1,)`` for a scalar anchor, ``(K + 1, len)`` otherwise.
    """
    scalar = not isinstance(anchors, (list, np.ndarray))
    items = [anchors] if scalar else list(anchors)
    N = params.N
    out = np.empty((params.K + 1, len(items)))
    for col, a in enumerate(items):
        fr = _as_fraction(a)
        num, den = fr.numerator % fr.denominator, fr.denominator
        for j in range(params.K + 1):
            out[j, col] = num / den  # int / int is correctly rounded
            num = (num * N) % den
    return out[:, 0] if scalar else out


def _float_fracs(x: np.ndarray, params: SawParams) -> np.ndarray:
    """Exact ``frac(N**j * x)`` for float inputs, computed with integers."""
    flat = np.asarray(x, dtype=float).reshape(-1)
    return anchor_fracs([Fraction(float(t)) for t in flat], params).reshape((params.K + 1,) + np.shape(x))


def _level_scales(params: SawParams):
    N = params.N
    j = np.arange(params.K + 1)
    # N**j as exact integers converted once; float(N**j) is correctly rounded
    powers = np.array([float(N ** int(i)) for i in j])
    heights = powers ** (-params.alpha)
    return powers, heights


# ---------------------------------------------------------------------------
# public evaluators


def saw_sum(x, params: SawParams):
    """Truncated saw ``f(x)`` and its uniform truncation bound.

    Level fractions come from exact integer arithmetic on the binary value of
    ``x``, so deep levels are not polluted by the rounding of ``N**j * x``.
    """
    x = np.asarray(x, dtype=float)
    fr = _float_fracs(x, params)
    _, heights = _level_scales(params)
    vals = _tent_frac(fr)
    value = np.tensordot(heights, vals, axes=(0, 0))
    value = value if np.ndim(value) else float(value)
    return value, params.sum_error_bound


def saw_increment(anchor, u, params: SawParams) -> np.ndarray:
    """``F(a + u) - F(a)`` for exact rational anchor(s) ``a``.

    ``anchor`` is a scalar rational (Fraction, int, ``(num, den)`` or float)
    or a 1-D sequence of them; in the latter case ``u`` must have the anchors
    along its first axis.  Level ``j`` contributes
    ``N**(-j(1+alpha)) * tent_integral(frac(N**j a), N**j u)``; all level
    terms share the sign of ``u`` so the sum is free of cancellation.
    """
    u = np.asarray(u, dtype=float)
    s = anchor_fracs(anchor, params)
    powers, heights = _level_scales(params)
    total = np.zeros(np.shape(u))
    for j in range(params.K + 1):
        sj = s[j]
        if np.ndim(sj):
            sj = sj.reshape(sj.shape + (1,) * (u.ndim - 1))
        total = total + tent_integral(sj, powers[j] * u) * (heights[j] / powers[j])
    return total


def saw_local_slope(anchor, u, params: SawParams) -> np.ndarray:
    """Truncated ``f(a + u)`` evaluated from the anchor's level fractions.

    Float accuracy only; used for area weights and tangent planes.
    """
    u = np.asarray(u, dtype=float)
    s = anchor_fracs(anchor, params)
    powers, heights = _level_scales(params)
    total = np.zeros(np.shape(u))
    for j in range(params.K + 1):
        sj = s[j]
        if np.ndim(sj):
            sj = sj.reshape(sj.shape + (1,) * (u.ndim - 1))
        w = sj + powers[j] * u
        total = total + heights[j] * _tent_frac(w - np.floor(w))
    return total


def saw_antiderivative(x, params: SawParams):
    """Truncated ``F(x) = int_0^x f`` and its truncation bound ``|x| q**(K+1)/(1-q)``."""
    x = np.asarray(x, dtype=float)
    value = saw_increment(0, x, params)
    bound = params.antiderivative_error_bound(x)
    if not np.ndim(value):
        return float(value), float(bound)
    return value, bound


def saw_fast(x, params: SawParams) -> np.ndarray:
    """Float-only ``f(x)``; adequate where ``f`` is only a weight or slope."""
    return saw_local_slope(0, x, params)


def graph_map(x, params: SawParams) -> np.ndarray:
    """``G(x^1..x^m) = (x^1..x^m, F(x^1))``; the last axis of ``x`` holds the chart coordinates."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    F = saw_increment(0, x[..., 0], params)
    return np.concatenate([x, F[..., None]], axis=-1)


def graph_map_with_bound(x, params: SawParams):
    pts = graph_map(x, params)
    return pts, params.antiderivative_error_bound(np.asarray(x, dtype=float)[..., 0])


def truncated_integral_unit(params: SawParams) -> float:
    """Closed form of the truncated ``F(1) = sum_{k<=K} N**(-alpha k) / 2``."""
    q = params.tail_ratio
    return 0.5 * (1.0 - q ** (params.K + 1)) / (1.0 - q)


def slope_bound_prefix(params: SawParams, eps_slope: float, grid_exponent: int = 20) -> float:
    """Largest ``A`` in (0, 1) such that the truncated ``f`` stays <= eps on [0, A).

    The scan runs on the dyadic grid ``i / 2**grid_exponent``; ``A`` is the
    first grid point where ``f`` exceeds ``eps_slope`` (or ``1 - 2**-grid_exponent``
    if it never does).
    """
    if not eps_slope > 0:
        raise InputError("eps_slope must be positive")
    n = 2 ** grid_exponent
    chunk = 1 << 16
    for start in range(0, n, chunk):
        x = np.arange(start, min(start + chunk, n)) / n
        vals = saw_fast(x, params)
        bad = np.nonzero(vals > eps_slope)[0]
        if bad.size:
            A = x[bad[0]]
            if A <= 0:
                raise InputError("eps_slope too small: f exceeds it at the origin")
            return float(A)
    return 1.0 - 1.0 / n
