"""Quadrature for the extension operator and its L^p norms over balls.

Because the phase is additive, ``x . (xi, psi(xi))`` splits into an
``xi1`` part and an ``xi2`` part. On tensor Gauss-Legendre nodes the
operator is therefore a bilinear form ``E g(x) = a(x)^T V b(x)`` with

    a_k = w1_k e(x1 xi1_k + x3 phi1(xi1_k)),   b_l = w2_l e(x2 xi2_l + x3 phi2(xi2_l)),

and ``V`` the matrix of density values. Batches of points become one
matrix product; dense grids become ``A V B^T`` per ``x3`` slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ParameterError, ResolutionError, ResourceError
from .geometry import BASE_PHASE, Phase, poly_abs_max, poly_eval
from .partition import Region

TWO_PI = 2.0 * np.pi
DEFAULT_ORDER = 4
DEFAULT_CYCLES = 0.25
DEFAULT_MAX_NODES = 4_000_000
DEFAULT_R_MAX = 256.0
DENSE_MAX_R = 32.0
DENSE_SPACING = 0.25
CHUNK = 4096


# ---------------------------------------------------------------------------
# profiles: g as a function of frequency


@dataclass(frozen=True)
class Profile:
    """A density ``g(xi1, xi2)`` that is smooth between known breakpoints.

    ``kind`` is one of ``constant``, ``cap`` (indicator of ``box``) or
    ``phase-array`` (``e(theta[i, k])`` on a uniform grid over ``box``, zero
    outside). ``scale`` multiplies every value.
    """

    kind: str = "constant"
    box: Optional[tuple[float, float, float, float]] = None
    theta: Optional[np.ndarray] = field(default=None, compare=False)
    scale: complex = 1.0

    @classmethod
    def constant(cls, c: complex = 1.0) -> "Profile":
        return cls("constant", None, None, c)

    @classmethod
    def cap(cls, q: Region) -> "Profile":
        return cls("cap", (q.a1, q.b1, q.a2, q.b2))

    @classmethod
    def random_phase(cls, box, shape: tuple[int, int], rng: np.random.Generator) -> "Profile":
        """Steinhaus density: independent uniform phases on an ``n1 x n2`` grid."""
        if isinstance(box, Region):
            box = (box.a1, box.b1, box.a2, box.b2)
        return cls("phase-array", tuple(box), rng.random(shape))

    @property
    def modulus_bound(self) -> float:
        return abs(self.scale)

    def breakpoints(self, axis: int) -> list[float]:
        if self.kind == "constant":
            return []
        a, b = self.box[2 * axis], self.box[2 * axis + 1]
        if self.kind == "cap":
            return [a, b]
        n = self.theta.shape[axis]
        return list(np.linspace(a, b, n + 1))

    def grid(self, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
        """Values on the tensor grid ``xi1 x xi2`` (shape ``(len(xi1), len(xi2))``)."""
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        if self.kind == "constant":
            return np.full((xi1.size, xi2.size), self.scale, dtype=complex)
        a1, b1, a2, b2 = self.box
        in1 = (xi1 >= a1) & (xi1 <= b1)
        in2 = (xi2 >= a2) & (xi2 <= b2)
        if self.kind == "cap":
            return self.scale * np.outer(in1, in2).astype(complex)
        n1, n2 = self.theta.shape
        i1 = np.clip(np.floor((xi1 - a1) / (b1 - a1) * n1).astype(int), 0, n1 - 1)
        i2 = np.clip(np.floor((xi2 - a2) / (b2 - a2) * n2).astype(int), 0, n2 - 1)
        v = np.exp(1j * TWO_PI * self.theta[np.ix_(i1, i2)])
        return self.scale * v * np.outer(in1, in2)

    def pullback(self, offset: Sequence[float], scale: Sequence[float], amplitude: float = 1.0) -> "Profile":
        """The profile ``eta -> amplitude * g(offset + scale * eta)``."""
        if self.kind == "constant":
            return replace(self, scale=self.scale * amplitude)
        o1, o2 = offset
        s1, s2 = scale
        a1, b1, a2, b2 = self.box
        box = ((a1 - o1) / s1, (b1 - o1) / s1, (a2 - o2) / s2, (b2 - o2) / s2)
        return replace(self, box=box, scale=self.scale * amplitude)


# ---------------------------------------------------------------------------
# densities


@lru_cache(maxsize=32)
def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    return t, w


def axis_rule(a: float, b: float, breaks: Sequence[float], h: float, order: int):
    """Composite Gauss-Legendre rule on ``[a, b]`` with cells of side <= ``h``.

    Cell edges include every breakpoint inside ``(a, b)``.
    """
    pts = sorted({a, b, *[t for t in breaks if a < t < b]})
    t, w = _gauss(order)
    nodes, weights = [], []
    hmax = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((hi - lo) / h - 1e-9)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
        hmax = max(hmax, float(2 * half.max()))
    return np.concatenate(nodes), np.concatenate(weights), hmax


@dataclass
class Density:
    """Samples of ``g`` on a tensor quadrature over ``region``.

    ``values[k, l]`` is ``g(nodes1[k], nodes2[l])``.
    """

    region: Region
    nodes1: np.ndarray
    w1: np.ndarray
    nodes2: np.ndarray
    w2: np.ndarray
    values: np.ndarray
    modulus_bound: float
    cell_sides: tuple[float, float]
    cycles: float = DEFAULT_CYCLES
    order: int = DEFAULT_ORDER

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nodes1.size, self.nodes2.size)

    @property
    def size(self) -> int:
        return self.nodes1.size * self.nodes2.size

    @property
    def nodes(self) -> np.ndarray:
        g1, g2 = np.meshgrid(self.nodes1, self.nodes2, indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.w1, self.w2).ravel()

    def integral(self) -> complex:
        return complex(self.w1 @ self.values @ self.w2)

    def with_values(self, values: np.ndarray, modulus_bound: Optional[float] = None) -> "Density":
        values = np.asarray(values, dtype=complex).reshape(self.shape)
        mb = float(np.abs(values).max()) if modulus_bound is None else modulus_bound
        return replace(self, values=values, modulus_bound=mb)

    def conjugate(self) -> "Density":
        return replace(self, values=np.conj(self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(self.w1 @ np.abs(self.values) ** 2 @ self.w2))


def parse_g_spec(spec: Union[str, Profile], region: Region, seed: Optional[int]) -> Profile:
    """Accepts a Profile or one of ``constant``, ``cap:a1,b1,a2,b2``, ``unimodular:n1,n2``."""
    if isinstance(spec, Profile):
        return spec
    name, _, arg = spec.partition(":")
    if name == "constant":
        return Profile.constant()
    if name in ("cap", "cap-indicator"):
        return Profile.cap(Region.parse(arg))
    if name in ("unimodular", "unimodular-phase-array"):
        n1, n2 = (int(s) for s in (arg or "8,8").split(","))
        return Profile.random_phase(region, (n1, n2), np.random.default_rng(seed))
    raise ParameterError(f"unknown g spec {spec!r}")


def axis_bandwidth(phase: Phase, axis: int, a: float, b: float, R: float) -> float:
    """Largest spatial frequency ``|x_i| + |x3| max|phi_i'|`` over ``|x| <= R``."""
    return R * math.hypot(1.0, phase.slope_bound(axis, a, b))


def build_density(
    region: Region,
    R_target: float,
    g_spec: Union[str, Profile] = "constant",
    seed: Optional[int] = None,
    phase: Phase = BASE_PHASE,
    order: int = DEFAULT_ORDER,
    cycles: float = DEFAULT_CYCLES,
    max_nodes: float = DEFAULT_MAX_NODES,
    extra_breaks: tuple = ((), ()),
) -> Density:
    """Tensor Gauss-Legendre density resolving ``E g`` on ``|x| <= R_target + 1``.

    The extra unit of radius covers the boundary cells of dense grids. With
    the default order and cycle budget the cell side is at most
    ``1/(4 R_target)``. ``extra_breaks`` adds cell edges per axis on top of
    the profile's own breakpoints.
    """
    if R_target <= 0:
        raise ParameterError("R_target must be positive")
    prof = parse_g_spec(g_spec, region, seed)
    R_eff = R_target + 1.0
    rules = []
    for i in (0, 1):
        a, b = region.interval(i)
        h = cycles / axis_bandwidth(phase, i, a, b, R_eff)
        n_est = order * math.ceil((b - a) / h)
        rules.append((a, b, h, n_est))
    if rules[0][3] * rules[1][3] > max_nodes:
        raise ResourceError(
            f"density needs ~{rules[0][3] * rules[1][3]:.3g} nodes > budget {max_nodes:.3g}"
        )
    out = []
    for i, (a, b, h, _) in enumerate(rules):
        out.append(axis_rule(a, b, list(prof.breakpoints(i)) + list(extra_breaks[i]), h, order))
    (n1, w1, h1), (n2, w2, h2) = out
    values = prof.grid(n1, n2)
    return Density(region, n1, w1, n2, w2, values, prof.modulus_bound, (h1, h2), cycles, order)


# ---------------------------------------------------------------------------
# evaluation


def axis_factors(nodes, weights, coeffs, xlin, x3) -> np.ndarray:
    """``weights * e(xlin * nodes + x3 * phi(nodes))`` for each point (rows)."""
    phi = poly_eval(coeffs, nodes)
    arg = np.multiply.outer(xlin, nodes) + np.multiply.outer(x3, phi)
    return weights * np.exp(1j * TWO_PI * arg)


def check_resolution(g: Density, phase: Phase, X: np.ndarray) -> None:
    """Raise if some point needs finer cells than ``g`` provides."""
    X = np.atleast_2d(X)
    for i in (0, 1):
        a, b = g.region.interval(i)
        M = phase.slope_bound(i, a, b)
        need = g.cell_sides[i] * (np.abs(X[:, i]) + np.abs(X[:, 2]) * M)
        worst = float(need.max()) if need.size else 0.0
        if worst > g.cycles * (1 + 1e-9):
            raise ResolutionError(
                f"axis {i + 1}: phase varies {worst:.3g} cycles per cell (budget {g.cycles})"
            )


def factor_matrices(g: Density, phase: Phase, X: np.ndarray):
    """``(A, B)`` with ``E g(X_s) = sum_k,l A[s,k] V[k,l] B[s,l]``."""
    A = axis_factors(g.nodes1, g.w1, phase.axis1, X[:, 0], X[:, 2])
    B = axis_factors(g.nodes2, g.w2, phase.axis2, X[:, 1], X[:, 2])
    return A, B


def apply_factors(A: np.ndarray, V: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise ``a_s^T V b_s``."""
    return np.sum((A @ V) * B, axis=1)


def evaluate(g: Density, phase: Phase, X: np.ndarray, check: bool = True, chunk: int = CHUNK) -> np.ndarray:
    """``E g`` at each row of ``X`` (shape ``(n, 3)``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if check:
        check_resolution(g, phase, X)
    out = np.empty(len(X), dtype=complex)
    for s in range(0, len(X), chunk):
        A, B = factor_matrices(g, phase, X[s : s + chunk])
        out[s : s + chunk] = apply_factors(A, g.values, B)
    return out


def extend(g: Density, phase: Phase, x) -> Union[complex, np.ndarray]:
    """Quadrature value of ``int g(xi) e(x1 xi1 + x2 xi2 + x3 psi(xi)) dxi``.

    A single point returns a complex scalar; an ``(n, 3)`` array returns an
    array.
    """
    x = np.asarray(x, dtype=float)
    if x.shape == (3,):
        return complex(evaluate(g, phase, x[None, :])[0])
    if x.ndim != 2 or x.shape[1] != 3:
        raise ParameterError("x must be a point or an (n, 3) array")
    return evaluate(g, phase, x)


# ---------------------------------------------------------------------------
# L^p norms over balls


@dataclass(frozen=True)
class NormEstimate:
    value: float
    std_error: float
    p: float
    R: float
    method: str
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "p": self.p,
            "R": self.R,
            "method": self.method,
            "n_samples": self.n_samples,
        }


def ball_volume(R: float) -> float:
    return 4.0 / 3.0 * math.pi * R**3


def ball_samples(R: float, n: int, seed: int, block: int = 0, stratify: int = 0) -> np.ndarray:
    """``n`` uniform points in ``B_R`` from the stream ``(seed, block)``.

    With ``stratify = S > 0`` the radius is drawn from ``S`` equal-volume
    shells in turn, which keeps the plain sample mean unbiased.
    """
    rng = np.random.default_rng([seed, block])
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    u = rng.random(n)
    if stratify:
        u = (np.arange(n) % stratify + u) / stratify
    return d * (R * np.cbrt(u))[:, None]


def jackknife_blocks(block_means: np.ndarray, block_sizes: np.ndarray, fn) -> tuple[float, float]:
    """Delete-one-block jackknife of ``fn(mean)``: (estimate, standard error)."""
    n = block_sizes.sum()
    total = float((block_means * block_sizes).sum() / n)
    B = len(block_means)
    if B < 2:
        return fn(total), float("nan")
    loo = (total * n - block_means * block_sizes) / (n - block_sizes)
    th = np.array([fn(m) for m in loo])
    se = math.sqrt((B - 1) / B * float(((th - th.mean()) ** 2).sum()))
    return fn(total), se


def _slice_structured(M: np.ndarray) -> bool:
    return M[0, 1] == 0 and M[1, 0] == 0 and M[2, 0] == 0 and M[2, 1] == 0


def _resolution_bound_for_ball(g: Density, phase: Phase, M: np.ndarray, radius: float) -> None:
    """Check the worst point of ``M(B_radius)`` without enumerating it."""
    worst = []
    for i in (0, 1):
        a, b = g.region.interval(i)
        s = phase.slope_bound(i, a, b)
        r_i, r_3 = M[i], s * M[2]
        w = radius * max(np.linalg.norm(r_i + r_3), np.linalg.norm(r_i - r_3))
        worst.append(g.cell_sides[i] * w)
        if g.cell_sides[i] * w > g.cycles * (1 + 1e-9):
            raise ResolutionError(
                f"axis {i + 1}: phase varies {worst[-1]:.3g} cycles per cell (budget {g.cycles})"
            )


@lru_cache(maxsize=4)
def dense_ball_weights(R: float, h: float = DENSE_SPACING, sub: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Grid ``x = k h`` on ``[-R, R]`` and weights = volume of each cell inside ``B_R``.

    Cells fully inside get ``h^3``; cells crossing the sphere get the midpoint
    fraction of ``sub^3`` subcells.
    """
    n = int(math.ceil(R / h))
    x = h * np.arange(-n, n + 1)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    half_diag = 0.5 * math.sqrt(3.0) * h
    W = np.where(r + half_diag <= R, h**3, 0.0)
    edge = np.argwhere(np.abs(r - R) < half_diag)
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    o = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), -1).reshape(-1, 3) * h
    for s in range(0, len(edge), 8192):
        e = edge[s : s + 8192]
        c = x[e]
        pts = c[:, None, :] + o[None, :, :]
        inside = (np.einsum("ijk,ijk->ij", pts, pts) <= R * R).mean(axis=1)
        W[e[:, 0], e[:, 1], e[:, 2]] = inside * h**3
    W.setflags(write=False)
    x.setflags(write=False)
    return x, W


def dense_abs_values(g: Density, phase: Phase, R: float, x_map: Optional[np.ndarray] = None):
    """``|E g(M x)|`` on the dense grid of ``B_R`` plus the grid weights."""
    x, W = dense_ball_weights(float(R))
    M = np.eye(3) if x_map is None else np.asarray(x_map, dtype=float)
    _resolution_bound_for_ball(g, phase, M, R + 0.5 * math.sqrt(3) * DENSE_SPACING)
    n = x.size
    out = np.zeros((n, n, n))
    if _slice_structured(M):
        for k in range(n):
            if not W[:, :, k].any():
                continue
            x3 = x[k]
            y3 = np.full(n, M[2, 2] * x3)
            A = axis_factors(g.nodes1, g.w1, phase.axis1, M[0, 0] * x + M[0, 2] * x3, y3)
            B = axis_factors(g.nodes2, g.w2, phase.axis2, M[1, 1] * x + M[1, 2] * x3, y3)
            out[:, :, k] = np.abs(A @ g.values @ B.T)
    else:
        idx = np.argwhere(W > 0)
        Y = x[idx] @ M.T
        out[idx[:, 0], idx[:, 1], idx[:, 2]] = np.abs(evaluate(g, phase, Y, check=False))
    return out, W


def lp_norm_ball(
    g: Density,
    phase: Phase,
    p: float,
    R: float,
    method: str = "monte-carlo",
    seed: int = 0,
    n_samples: int = 200_000,
    x_map: Optional[np.ndarray] = None,
    stratify: int = 0,
    n_blocks: int = 20,
    R_max: float = DEFAULT_R_MAX,
) -> NormEstimate:
    """``||E g||_{L^p(M B_R)}`` where ``M = x_map`` (identity by default).

    Uses ``int_{M B} |F|^p = |det M| int_B |F(M x)|^p``, so any image of the
    ball reuses the same quadrature on ``B_R``.
    """
    if not 2.0 <= p <= 8.0:
        raise ParameterError(f"p={p} outside [2, 8]")
    if R <= 0:
        raise ParameterError("R must be positive")
    if R > R_max:
        raise ResourceError(f"R={R} exceeds R_max={R_max}")
    M = np.eye(3) if x_map is None else np.asarray(x_map, dtype=float)
    det = abs(float(np.linalg.det(M)))
    if method == "dense-grid":
        if R > DENSE_MAX_R:
            raise ResourceError(f"dense grid limited to R <= {DENSE_MAX_R}, got R={R}")
        vals, W = dense_abs_values(g, phase, R, M)
        total = float(np.sum(W * vals**p))
        return NormEstimate((det * total) ** (1.0 / p), 0.0, p, R, "dense-grid", int((W > 0).sum()))
    if method != "monte-carlo":
        raise ParameterError(f"unknown method {method!r}")
    n_blocks = max(1, min(n_blocks, n_samples))
    sizes = np.full(n_blocks, n_samples // n_blocks)
    sizes[: n_samples % n_blocks] += 1
    means = np.empty(n_blocks)
    for b, m in enumerate(sizes):
        X = ball_samples(R, int(m), seed, b, stratify) @ M.T
        means[b] = float(np.mean(np.abs(evaluate(g, phase, X)) ** p))
    vol = ball_volume(R) * det
    est, se = jackknife_blocks(means, sizes, lambda m: (vol * max(m, 0.0)) ** (1.0 / p))
    return NormEstimate(est, se, p, R, "monte-carlo", int(sizes.sum()))


# ---------------------------------------------------------------------------
# curves


def curve_extend(
    coeffs: Sequence[float],
    interval: tuple[float, float],
    y,
    profile=None,
    breaks: Sequence[float] = (),
    order: int = 8,
    cycles: float = 0.5,
) -> np.ndarray:
    """``int_I h(t) e(y1 t + y2 phi(t)) dt`` for rows of ``y`` (shape ``(n, 2)``).

    ``profile`` is a vectorized callable ``h(t)`` (default 1) smooth between
    ``breaks``. Cells are sized from the largest ``|y|`` requested.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    a, b = interval
    M = poly_abs_max(coeffs, a, b, deriv=1)
    band = float(np.max(np.abs(y[:, 0]) + np.abs(y[:, 1]) * M)) + 1.0
    t, w, _ = axis_rule(a, b, breaks, cycles / band, order)
    hv = np.ones_like(t) if profile is None else np.asarray(profile(t), dtype=complex)
    F = axis_factors(t, w, coeffs, y[:, 0], y[:, 1])
    return F @ hv
