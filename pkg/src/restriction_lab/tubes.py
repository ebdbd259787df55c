"""Tube incidence geometry: angle bins, exact box intersections, Kakeya sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .packets import Tube, frame_for
from .partition import Region, Slab, slab_cover

_EPS = 1e-12


# ---------------------------------------------------------------------------
# convex clipping


def _faces(t: Tube) -> list[np.ndarray]:
    """Outward-oriented faces of a box, as ``(4, 3)`` vertex arrays."""
    c, A, h = t.center, t.axes, t.half_lengths
    out = []
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        for s in (-1.0, 1.0):
            base = c + s * h[k] * A[k]
            u, v = h[i] * A[i], h[j] * A[j]
            quad = np.array([base - u - v, base + u - v, base + u + v, base - u + v])
            # (A[i] x A[j]) = A[k] for a right-handed frame; flip for the -k face
            if s < 0:
                quad = quad[::-1]
            out.append(quad)
    if np.linalg.det(A) < 0:
        out = [f[::-1] for f in out]
    return out


def _halfspaces(t: Tube) -> list[tuple[np.ndarray, float]]:
    """Planes ``n . x <= d`` bounding the box."""
    out = []
    for k in range(3):
        n = t.axes[k]
        m = float(n @ t.center)
        out.append((n, m + t.half_lengths[k]))
        out.append((-n, -m + t.half_lengths[k]))
    return out


def _clip_polygon(poly: np.ndarray, n: np.ndarray, d: float, tol: float):
    """Sutherland-Hodgman against ``n . x <= d``; returns (polygon, new points)."""
    if len(poly) == 0:
        return poly, []
    s = poly @ n - d
    if np.all(np.abs(s) <= tol):
        # the face lies on the plane: it closes the cut when it faces along n,
        # otherwise the solid touches the half-space only in this face
        if _normal(poly) @ n > 0:
            return poly, None
        return np.zeros((0, 3)), "flat"
    out, cut = [], []
    m = len(poly)
    for a in range(m):
        b = (a + 1) % m
        pa, pb, sa, sb = poly[a], poly[b], s[a], s[b]
        if sa <= tol:
            out.append(pa)
        if (sa < -tol and sb > tol) or (sa > tol and sb < -tol):
            q = pa + (sa / (sa - sb)) * (pb - pa)
            out.append(q)
            cut.append(q)
        elif abs(sa) <= tol:
            cut.append(pa)
    return (np.array(out) if len(out) >= 3 else np.zeros((0, 3))), cut


def _normal(poly: np.ndarray) -> np.ndarray:
    """Newell normal of a planar polygon (orientation from vertex order)."""
    return np.sum(np.cross(poly, np.roll(poly, -1, axis=0)), axis=0)


def _cap(points: list[np.ndarray], n: np.ndarray, tol: float) -> Optional[np.ndarray]:
    if len(points) < 3:
        return None
    P = np.array(points)
    keep = [P[0]]
    for p in P[1:]:
        if all(np.linalg.norm(p - q) > tol for q in keep):
            keep.append(p)
    if len(keep) < 3:
        return None
    P = np.array(keep)
    c = P.mean(axis=0)
    a = P[0] - c
    a = a - (a @ n) * n
    if np.linalg.norm(a) < tol:
        a = P[1] - c
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    ang = np.arctan2((P - c) @ b, (P - c) @ a)
    return P[np.argsort(ang)]


def clip_box(t1: Tube, t2: Tube) -> list[np.ndarray]:
    """Faces of ``t1 cap t2`` (outward oriented), in coordinates centred at ``t1``."""
    shift = t1.center
    a = Tube(np.zeros(3), t1.axes, t1.half_lengths)
    b = Tube(t2.center - shift, t2.axes, t2.half_lengths)
    scale = float(max(t1.half_lengths.max(), t2.half_lengths.max()))
    tol = _EPS * scale
    faces = _faces(a)
    for n, d in _halfspaces(b):
        new, cut, closed = [], [], False
        for f in faces:
            g, c = _clip_polygon(f, n, d, tol)
            if isinstance(c, str):
                return []
            if len(g):
                new.append(g)
            if c is None:
                closed = True
            else:
                cut.extend(c)
        cap = None if closed else _cap(cut, n, tol)
        if cap is not None:
            new.append(cap)
        faces = new
        if not faces:
            break
    return faces


def polyhedron_volume(faces: Sequence[np.ndarray]) -> float:
    """Divergence theorem: ``(1/6) sum v0 . (v_i x v_{i+1})`` over fan triangles."""
    vol = 0.0
    for f in faces:
        v0 = f[0]
        cr = np.cross(f[1:-1], f[2:])
        vol += float(np.sum(cr @ v0))
    return vol / 6.0


def _bounding_radius(t: Tube) -> float:
    return float(np.linalg.norm(t.half_lengths))


def intersection_volume(t1: Tube, t2: Tube) -> float:
    """Exact ``|T1 cap T2|``; 0 for empty or degenerate intersections."""
    if np.linalg.norm(t1.center - t2.center) > _bounding_radius(t1) + _bounding_radius(t2):
        return 0.0
    v = polyhedron_volume(clip_box(t1, t2))
    return max(v, 0.0)


def intersection_volume_mc(t1: Tube, t2: Tube, n: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo oracle: uniform points in ``T1``; returns (estimate, std dev)."""
    u = rng.uniform(-1.0, 1.0, (n, 3)) * t1.half_lengths
    x = t1.center + u @ t1.axes
    f = float(np.mean(t2.contains(x, tol=0.0)))
    V = t1.volume
    return V * f, V * math.sqrt(max(f * (1 - f), 0.0) / n)


# ---------------------------------------------------------------------------
# angles and tube sets


def angle_between(t1: Tube, t2: Tube) -> float:
    c = abs(float(t1.direction @ t2.direction))
    return math.acos(min(1.0, c))


def angle_bin(t1: Tube, t2: Tube, R: float) -> int:
    """``round(angle / R^{-1/2})``."""
    return int(round(angle_between(t1, t2) * math.sqrt(R)))


@dataclass
class TubeSet:
    tubes: list[Tube]
    R: float
    lam: float

    def __post_init__(self):
        ids = [t.slab_id for t in self.tubes]
        if len(set(ids)) != len(ids):
            raise ParameterError("at most one tube per slab")


def kakeya_l2(ts: TubeSet, pairs: Optional[list] = None) -> float:
    """``|| sum chi_T ||_2^2 = sum_{i,j} |T_i cap T_j|``."""
    T = ts.tubes
    total = sum(t.volume for t in T)
    for i in range(len(T)):
        for j in range(i + 1, len(T)):
            v = intersection_volume(T[i], T[j])
            if pairs is not None:
                pairs.append((i, j, v))
            total += 2.0 * v
    return total


def kakeya_l2_grid(ts: TubeSet, step: Optional[float] = None) -> float:
    """Discretization oracle: ``int (sum chi_T)^2`` by a midpoint grid."""
    T = ts.tubes
    h = ts.R**0.25 / 4 if step is None else step
    V = np.vstack([t.vertices() for t in T])
    lo, hi = V.min(axis=0), V.max(axis=0)
    axes = [np.arange(lo[i] + h / 2, hi[i], h) for i in range(3)]
    total = 0.0
    X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
    xy = np.column_stack([X.ravel(), Y.ravel()])
    for z in axes[2]:
        pts = np.column_stack([xy, np.full(len(xy), z)])
        cnt = np.zeros(len(pts))
        for t in T:
            cnt += t.contains(pts, tol=0.0)
        total += float(np.sum(cnt**2))
    return total * h**3


def omega0_slabs(R: float, lam: float) -> list[Slab]:
    """Slab cover of ``[lam, 2 lam] x [0, R^{-1/4}]``."""
    if lam * lam * math.sqrt(R) < 1 - 1e-12:
        raise ParameterError("need lambda^2 R^{1/2} >= 1 for a nonempty cover")
    b1 = min(2 * lam, 1.0)
    return slab_cover(Region(lam, b1, 0.0, R**-0.25), R, lam)


def axis_tube(slab: Slab, R: float, center=(0.0, 0.0, 0.0)) -> Tube:
    fr = frame_for(slab, R)
    return Tube(np.asarray(center, float), fr.axes, fr.lengths / 2, fr.slab_id)


def bush(R: float, lam: float) -> TubeSet:
    """One tube per slab of the ``Omega_{lam,0}`` cover, all through the origin."""
    return TubeSet([axis_tube(s, R) for s in omega0_slabs(R, lam)], R, lam)


def random_translates(R: float, lam: float, rng: np.random.Generator, spread: Optional[float] = None) -> TubeSet:
    """Same tubes with centres uniform in ``B_spread`` (default ``R/2``)."""
    rad = R / 2 if spread is None else spread
    out = []
    for s in omega0_slabs(R, lam):
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        out.append(axis_tube(s, R, d * rad * rng.random() ** (1 / 3)))
    return TubeSet(out, R, lam)


def kakeya_bound(R: float, lam: float) -> float:
    """``lam R^{9/4} log R``."""
    return lam * R**2.25 * math.log(R)


def pair_bound(R: float, lam: float, j: int) -> float:
    """``8 lam R^{7/4} / j``."""
    return 8.0 * lam * R**1.75 / j
