"""Finite-dimensional geometry of point tuples.

Simplex measures, circumradius (Menger radius) and Menger curvature, the
discrete curvature ``K(T) = H^{m+1}(conv T) / diam(T)^{m+2}``, spindles,
Grassmannian projector distance and Jones beta numbers of finite sets.

Functions taking a tuple accept a :class:`PointTuple` or any array of shape
``(..., k+1, n)``; the leading axes are treated as a batch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateInputError, InputError

COLLINEAR_RTOL = 1e-15
ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class PointTuple:
    """Ordered ``k+1`` points in ``R^n``."""

    points: np.ndarray

    def __post_init__(self):
        try:
            pts = np.array(self.points, dtype=float)
        except ValueError as exc:
            raise InputError("points have different ambient dimensions") from exc
        if pts.ndim != 2:
            raise InputError("points must form a (k+1, n) array with a common dimension n")
        if pts.shape[0] < 2:
            raise InputError("a tuple needs at least two points")
        if pts.shape[0] - 1 > pts.shape[1]:
            raise InputError(f"a {pts.shape[0] - 1}-simplex does not fit in R^{pts.shape[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0] - 1

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist()}


@dataclass(frozen=True)
class AffinePlane:
    """``base + span(basis)``; ``basis`` rows are orthonormal."""

    base: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        base = np.array(self.base, dtype=float).reshape(-1)
        basis = np.array(self.basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[None, :]
        if basis.shape[1] != base.size:
            raise InputError("plane basis and base point have different ambient dimension")
        _check_orthonormal(basis)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def distance(self, y) -> np.ndarray:
        """Euclidean distance of point(s) ``y`` to the plane."""
        d = np.asarray(y, dtype=float) - self.base
        resid = d - (d @ self.basis.T) @ self.basis
        return np.linalg.norm(resid, axis=-1)

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def to_dict(self) -> dict:
        return {"base": self.base.tolist(), "basis": self.basis.tolist()}


@dataclass(frozen=True)
class BetaEstimate:
    value: float
    plane: AffinePlane
    exactness: str  # "exact" or "upper-bound"
    points_used: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "exactness": self.exactness,
            "plane": self.plane.to_dict(),
            "points_used": self.points_used,
        }


def _check_orthonormal(basis: np.ndarray, tol: float = ORTHONORMAL_TOL):
    gram = basis @ basis.T
    if not np.allclose(gram, np.eye(basis.shape[0]), rtol=0.0, atol=tol):
        raise InputError("plane basis is not orthonormal")


def _as_points(T) -> np.ndarray:
    try:
        pts = np.asarray(T.points if isinstance(T, PointTuple) else T, dtype=float)
    except ValueError as exc:
        raise InputError("points have different ambient dimensions") from exc
    if pts.ndim < 2:
        raise InputError("expected an array of points with shape (..., k+1, n)")
    return pts


def _wedge_norm(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``|u ^ v|`` from the 2x2 minors; avoids the cancellation in ``|u|^2|v|^2 - (u.v)^2``."""
    n = u.shape[-1]
    if n == 1:
        return np.zeros(np.broadcast_shapes(u.shape, v.shape)[:-1])
    acc = 0.0
    for a, b in itertools.combinations(range(n), 2):
        minor = u[..., a] * v[..., b] - u[..., b] * v[..., a]
        acc = acc + minor * minor
    return np.sqrt(acc)


# ---------------------------------------------------------------------------
# measures


def simplex_measure(T) -> np.ndarray:
    """``H^k(conv T)`` of a ``k``-simplex given by ``k+1`` vertices.

    Uses the Gram determinant of the edge vectors (square root over ``k!``).
    Triangles use the minors form and full-dimensional simplices a plain
    determinant; both are the same quantity computed with less cancellation.
    Otherwise tiny negative Gram eigenvalues are clipped to zero.
    """
    pts = _as_points(T)
    k = pts.shape[-2] - 1
    n = pts.shape[-1]
    if k < 1:
        raise InputError("need at least two points")
    E = pts[..., 1:, :] - pts[..., :1, :]
    if k == 1:
        out = np.linalg.norm(E[..., 0, :], axis=-1)
    elif k == 2:
        out = 0.5 * _wedge_norm(E[..., 0, :], E[..., 1, :])
    elif k == n:
        out = np.abs(np.linalg.det(E)) / math.factorial(k)
    else:
        gram = E @ np.swapaxes(E, -1, -2)
        ev = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        out = np.sqrt(np.prod(ev, axis=-1)) / math.factorial(k)
    return out if np.ndim(out) else float(out)


def diameter(T) -> np.ndarray:
    """Largest pairwise Euclidean distance."""
    pts = _as_points(T)
    diff = pts[..., :, None, :] - pts[..., None, :, :]
    out = np.max(np.linalg.norm(diff, axis=-1), axis=(-1, -2))
    return out if np.ndim(out) else float(out)


def min_height(T) -> np.ndarray:
    """Smallest distance from a vertex to the affine hull of the others.

    ``h_i = k * H^k(T) / H^{k-1}(face_i)``; zero for degenerate simplices.
    """
    pts = _as_points(T)
    k = pts.shape[-2] - 1
    vol = np.asarray(simplex_measure(pts))
    if k == 1:
        return vol if vol.ndim else float(vol)
    diam = np.asarray(diameter(pts))
    heights = []
    for i in range(k + 1):
        face = np.delete(pts, i, axis=-2)
        fvol = np.asarray(simplex_measure(face))
        with np.errstate(divide="ignore", invalid="ignore"):
            heights.append(np.where(fvol > 0, k * vol / np.where(fvol > 0, fvol, 1.0), 0.0))
    h = np.min(np.stack(heights, axis=-1), axis=-1)
    degenerate = vol <= 1e-14 * np.power(diam, k)
    h = np.where(degenerate, 0.0, h)
    return h if h.ndim else float(h)


# ---------------------------------------------------------------------------
# Menger radius / curvature


def _triangle_terms(a, b, c):
    a, b, c = (np.asarray(t, dtype=float) for t in (a, b, c))
    if not (a.shape[-1] == b.shape[-1] == c.shape[-1]):
        raise InputError("points have different dimensions")
    u, v = b - a, c - a
    four_area = 2.0 * _wedge_norm(u, v)
    ab = np.linalg.norm(u, axis=-1)
    ac = np.linalg.norm(v, axis=-1)
    bc = np.linalg.norm(c - b, axis=-1)
    return four_area, ab * ac * bc, (ab, ac, bc)


def menger_radius(a, b, c) -> float:
    """Circumradius ``|ab||ac||bc| / (4 area)``; ``inf`` for collinear triples.

    Raises :class:`DegenerateInputError` if two of the points coincide.
    """
    four_area, prod, sides = _triangle_terms(a, b, c)
    if np.ndim(four_area):
        raise InputError("menger_radius takes single points; use menger_curvature for batches")
    if min(float(s) for s in sides) == 0.0:
        raise DegenerateInputError("Menger radius undefined for coincident points")
    if four_area < COLLINEAR_RTOL * prod:
        return math.inf
    return float(prod / four_area)


def menger_curvature(a, b, c):
    """Inverse circumradius; zero for collinear triples and coincident points.

    Broadcasts over leading axes.
    """
    four_area, prod, _ = _triangle_terms(a, b, c)
    ok = (prod > 0) & (four_area >= COLLINEAR_RTOL * prod)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(ok, four_area / np.where(ok, prod, 1.0), 0.0)
    return out if np.ndim(out) else float(out)


def discrete_curvature(T):
    """``H^{m+1}(conv T) / diam(T)^{m+2}`` for ``m+2`` points; zero if ``diam = 0``."""
    pts = _as_points(T)
    k = pts.shape[-2] - 1
    vol = np.asarray(simplex_measure(pts))
    diam = np.asarray(diameter(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(diam > 0, vol / np.where(diam > 0, diam, 1.0) ** (k + 1), 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# heights, faces, planes


def orthonormal_span(vectors: np.ndarray, rank: Optional[int] = None) -> np.ndarray:
    """Orthonormal rows spanning the rows of ``vectors`` (via SVD)."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    r = rank if rank is not None else int(np.sum(s > 1e-12 * max(s[0], 1e-300)))
    return vt[:r]


def simplex_height_face(T, m: Optional[int] = None):
    """Height of the last vertex over the face spanned by the first ``m+1``.

    Returns ``(height, face_measure, face_plane)``.
    """
    pts = _as_points(T)
    if pts.ndim != 2:
        raise InputError("simplex_height_face takes a single tuple; see heights_and_faces")
    if m is None:
        m = pts.shape[0] - 2
    if pts.shape[0] != m + 2:
        raise InputError(f"expected {m + 2} points for m = {m}")
    face = pts[: m + 1]
    fmeas = float(simplex_measure(face)) if m >= 1 else 1.0
    scale = float(diameter(pts))
    if m >= 1 and fmeas <= 1e-14 * scale ** m:
        raise DegenerateInputError("face spanned by the first m+1 points is degenerate")
    basis = orthonormal_span(face[1:] - face[0], rank=m) if m >= 1 else np.zeros((0, pts.shape[1]))
    plane = AffinePlane(face[0], basis) if m >= 1 else None
    d = pts[-1] - face[0]
    resid = d - (d @ basis.T) @ basis if m >= 1 else d
    return float(np.linalg.norm(resid)), fmeas, plane


def heights_and_faces(pts: np.ndarray):
    """Batch version of :func:`simplex_height_face` for shape ``(..., m+2, n)``.

    Returns ``(heights, face_measures, bases)``; degenerate faces give NaN heights.
    """
    pts = np.asarray(pts, dtype=float)
    m = pts.shape[-2] - 2
    face = pts[..., : m + 1, :]
    fmeas = np.asarray(simplex_measure(face))
    E = face[..., 1:, :] - face[..., :1, :]  # (..., m, n)
    q, _ = np.linalg.qr(np.swapaxes(E, -1, -2))  # (..., n, m)
    basis = np.swapaxes(q, -1, -2)
    d = pts[..., -1, :] - pts[..., 0, :]
    coef = np.einsum("...mn,...n->...m", basis, d)
    resid = d - np.einsum("...m,...mn->...n", coef, basis)
    h = np.linalg.norm(resid, axis=-1)
    scale = np.asarray(diameter(pts))
    bad = fmeas <= 1e-14 * scale ** m
    h = np.where(bad, np.nan, h)
    return h, fmeas, basis


def angle_between(u, v) -> np.ndarray:
    """Angle in [0, pi] between vectors, via ``atan2(|u^v|, u.v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.arctan2(_wedge_norm(u, v), np.sum(u * v, axis=-1))


def spindle_contains(P, Q, angle: float, x) -> bool:
    """Membership in ``C+(P, PQ, angle) & C+(Q, QP, angle)``.

    Each half cone is open: the angle to the axis must be strictly below
    ``angle / 2``.  The two vertices themselves count as members.
    """
    P, Q, x = (np.asarray(t, dtype=float) for t in (P, Q, x))
    if np.array_equal(P, Q):
        raise DegenerateInputError("spindle needs distinct vertices")
    if not 0.0 < angle < math.pi:
        raise InputError("opening angle must lie in (0, pi)")
    if np.array_equal(x, P) or np.array_equal(x, Q):
        return True
    half = 0.5 * angle
    at_p = float(angle_between(Q - P, x - P))
    at_q = float(angle_between(P - Q, x - Q))
    return at_p < half and at_q < half


def _basis_of(U) -> np.ndarray:
    B = U.basis if isinstance(U, AffinePlane) else np.atleast_2d(np.asarray(U, dtype=float))
    _check_orthonormal(B)
    return B


def projection_distance(U, V) -> float:
    """Operator norm ``||pi_U - pi_V||`` of the difference of orthogonal projectors."""
    A = _basis_of(U)
    B = _basis_of(V)
    if A.shape[1] != B.shape[1]:
        raise InputError("planes live in different ambient spaces")
    diff = A.T @ A - B.T @ B
    return float(np.linalg.norm(diff, ord=2))


# ---------------------------------------------------------------------------
# beta numbers


def _sup_dist(Y: np.ndarray, basis: np.ndarray) -> float:
    if Y.size == 0:
        return 0.0
    resid = Y - (Y @ basis.T) @ basis
    return float(np.max(np.linalg.norm(resid, axis=1)))


def _line_normal(direction: np.ndarray) -> np.ndarray:
    d = direction / np.linalg.norm(direction)
    return np.array([-d[1], d[0]])


def _exact_line_beta(Y: np.ndarray):
    """Min over lines through 0 of ``max_i |<y_i, normal>|`` in the plane.

    The objective is a max of ``|r_i sin(theta - phi_i)|``.  Between the
    angles where two pieces tie, it is a single ``|sin|`` arc, concave between
    zeros, so its minimum sits at a tie angle or at a zero.  Ties happen for
    directions along ``y_i +- y_j`` and zeros along ``y_i``; enumerating those
    is exact.  Only vertices of ``conv(Y u -Y)`` can attain the max.
    """
    nz = Y[np.linalg.norm(Y, axis=1) > 0]
    if nz.shape[0] == 0:
        return 0.0, np.array([1.0, 0.0])
    sym = np.vstack([nz, -nz])
    try:
        hull = ConvexHull(sym)
        V = sym[hull.vertices]
    except (QhullError, ValueError):
        # all points on one line through the origin
        d = nz[np.argmax(np.linalg.norm(nz, axis=1))]
        return 0.0, d / np.linalg.norm(d)
    cands = [V]
    i, j = np.triu_indices(V.shape[0], k=1)
    cands.append(V[i] + V[j])
    cands.append(V[i] - V[j])
    D = np.vstack(cands)
    D = D[np.linalg.norm(D, axis=1) > 1e-300]
    D = D / np.linalg.norm(D, axis=1)[:, None]
    normals = np.stack([-D[:, 1], D[:, 0]], axis=1)
    vals = np.max(np.abs(normals @ V.T), axis=1)
    best = int(np.argmin(vals))
    return float(vals[best]), D[best]


def _complement(basis: np.ndarray) -> np.ndarray:
    n = basis.shape[1]
    q, _ = np.linalg.qr(np.hstack([basis.T, np.eye(n)]))
    return q[:, basis.shape[0] : n].T


def _descend_plane(Y: np.ndarray, start: np.ndarray, maxiter: int = 400) -> np.ndarray:
    """Local minimisation of the max residual over m-planes near ``start``."""
    m, n = start.shape
    if m == n or Y.shape[0] == 0:
        return start
    comp = _complement(start)

    def basis_for(w):
        W = w.reshape(m, n - m)
        q, _ = np.linalg.qr((start + W @ comp).T)
        return q.T

    def obj(w):
        return _sup_dist(Y, basis_for(w))

    res = optimize.minimize(
        obj,
        np.zeros(m * (n - m)),
        method="Nelder-Mead",
        options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-14},
    )
    return basis_for(res.x)


def beta_number(
    E,
    x,
    r: float,
    m: int,
    mode: str = "exact",
    candidates: Sequence[np.ndarray] = (),
    descend: bool = True,
) -> BetaEstimate:
    """Jones beta number ``inf_H sup_{y in E, |y-x| <= r} dist(y, x+H) / r``.

    ``mode="exact"`` is honoured for lines in the plane (``m=1, n=2``); every
    other case returns an upper bound from the best of: the total least
    squares plane through ``x``, any ``candidates`` (rows spanning m-planes,
    e.g. a tangent plane), and a local descent on the max residual started
    from the best of those.  The reported value is always achieved by the
    returned plane, so it is a valid upper bound.  The ball is closed.
    """
    if not r > 0:
        raise InputError("radius must be positive")
    if mode not in ("exact", "approx"):
        raise InputError("mode must be 'exact' or 'approx'")
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    if not 1 <= m <= n:
        raise InputError("plane dimension must satisfy 1 <= m <= n")
    E = np.atleast_2d(np.asarray(E, dtype=float)) if np.size(E) else np.zeros((0, n))
    if E.shape[1] != n:
        raise InputError("point set and centre have different dimensions")
    Y = E - x
    Y = Y[np.linalg.norm(Y, axis=1) <= r * (1.0 + 1e-12)]
    if Y.shape[0] == 0:
        return BetaEstimate(0.0, AffinePlane(x, np.eye(n)[:m]), "exact", 0)

    if mode == "exact" and m == 1 and n == 2:
        val, d = _exact_line_beta(Y)
        return BetaEstimate(val / r, AffinePlane(x, d[None, :]), "exact", Y.shape[0])

    starts = []
    _, s, vt = np.linalg.svd(Y, full_matrices=True)
    starts.append(vt[:m])
    for c in candidates:
        starts.append(orthonormal_span(np.atleast_2d(c), rank=m))
    vals = [_sup_dist(Y, B) for B in starts]
    best = starts[int(np.argmin(vals))]
    best_val = min(vals)
    if descend and m < n and best_val > 0:
        B = _descend_plane(Y, best)
        v = _sup_dist(Y, B)
        if v < best_val:
            best, best_val = B, v
    exactness = "exact" if (best_val == 0.0 or m == n) else "upper-bound"
    return BetaEstimate(best_val / r, AffinePlane(x, best), exactness, Y.shape[0])


def beta_sweep_oracle(E, x, r: float, resolution: float = 1e-6) -> float:
    """Brute-force line beta in the plane by a dense sweep of line angles."""
    x = np.asarray(x, dtype=float)
    Y = np.atleast_2d(np.asarray(E, dtype=float)) - x
    Y = Y[np.linalg.norm(Y, axis=1) <= r * (1.0 + 1e-12)]
    if Y.shape[0] == 0:
        return 0.0
    n_ang = int(math.ceil(math.pi / resolution))
    best = math.inf
    for start in range(0, n_ang, 1 << 18):
        th = (np.arange(start, min(start + (1 << 18), n_ang)) * (math.pi / n_ang))
        normals = np.stack([-np.sin(th), np.cos(th)], axis=1)
        best = min(best, float(np.min(np.max(np.abs(normals @ Y.T), axis=1))))
    return best / r
