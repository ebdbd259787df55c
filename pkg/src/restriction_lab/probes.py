"""Empirical estimators for decoupling, square-function and restriction constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ParameterError, ResourceError
from .geometry import BASE_PHASE, Phase
from .oscillator import (
    DEFAULT_MAX_NODES,
    DEFAULT_R_MAX,
    DENSE_MAX_R,
    Density,
    NormEstimate,
    Profile,
    axis_factors,
    ball_samples,
    ball_volume,
    build_density,
    dense_ball_weights,
    factor_matrices,
    lp_norm_ball,
)
from .partition import Region
from .rescale import rescale_case_a

# experiment quadrature: 8-point cells with 2 cycles of phase per cell (~4e-6 per cell)
EXP_ORDER = 8
EXP_CYCLES = 2.0


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float


def fit_exponent(params: Sequence[float], values: Sequence[float]) -> Fit:
    """Least squares line through ``(log param, log value)``.

    ``residual`` is the root mean square of the log residuals.
    """
    x = np.asarray(params, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ParameterError("need at least 3 (parameter, value) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("parameters and values must be positive")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    return Fit(float(slope), float(icpt), float(np.sqrt(np.mean(res**2))))


@dataclass
class ConstantSeries:
    name: str
    grid: list[float]
    constants: list[float]
    fit: Optional[Fit]
    seed: int
    trials: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(c <= 0 for c in self.constants):
            raise ParameterError("constants must be positive")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ParameterError("grid must be strictly increasing")

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "grid": list(self.grid),
            "constants": list(self.constants),
            "seed": self.seed,
            "trials": self.trials,
        }
        if self.fit is not None:
            d["fit"] = {"slope": self.fit.slope, "intercept": self.fit.intercept, "residual": self.fit.residual}
        d.update(self.extra)
        return d


def make_series(name, grid, constants, seed, trials, **extra) -> ConstantSeries:
    fit = fit_exponent(grid, constants) if len(grid) >= 3 else None
    return ConstantSeries(name, list(map(float, grid)), list(map(float, constants)), fit, seed, trials, extra)


# ---------------------------------------------------------------------------
# recurrence


@dataclass(frozen=True)
class RecurrenceResult:
    bound: float
    levels: int
    contraction: float
    diverges: bool
    history: tuple


def recurrence_iterate(A: float, C: float, K: float, p: float, R: float, base: float = 1.0) -> RecurrenceResult:
    """Unroll ``Q(R) <= A + c Q(R / K^{1/4})`` with ``c = C K^{3/(2p) - 1/2}``.

    Levels are counted while ``R > K^{1/4}``; the last level uses ``base``.
    After ``L`` levels the bound is ``sum_{i<L} c^i A + c^L base``.
    """
    if K <= 1:
        raise ParameterError("K must exceed 1")
    if p <= 0 or R <= 0:
        raise ParameterError("p and R must be positive")
    c = C * K ** (1.5 / p - 0.5)
    step = K**0.25
    L = 0
    r = float(R)
    while r > step * (1 + 1e-12):
        r /= step
        L += 1
    q = base
    hist = [q]
    for _ in range(L):
        q = A + c * q
        hist.append(q)
    return RecurrenceResult(q, L, c, c >= 1.0, tuple(hist))


def recurrence_closed_form(A: float, c: float, L: int, base: float = 1.0) -> float:
    if c == 1.0:
        return L * A + base
    return A * (1 - c**L) / (1 - c) + c**L * base


# ---------------------------------------------------------------------------
# point sets shared by all trials


def _mc_blocks(R: float, n: int, seed: int, n_blocks: int = 10) -> Iterator[tuple[np.ndarray, float]]:
    sizes = np.full(n_blocks, n // n_blocks)
    sizes[: n % n_blocks] += 1
    w = ball_volume(R) / n
    for b, m in enumerate(sizes):
        if m:
            yield ball_samples(R, int(m), seed, b), w


def piece_sums(
    g0: Density,
    phase: Phase,
    Vs: Sequence[np.ndarray],
    pieces: Sequence[np.ndarray],
    p: float,
    R: float,
    method: str,
    seed: int = 0,
    n_samples: int = 20_000,
) -> np.ndarray:
    """For each trial: ``[int |F|^p, int (sum |F_k|^2)^{p/2}, int |F_1|^p, ...]`` over ``B_R``.

    ``F = E g`` with values ``Vs[t]`` on the nodes of ``g0``; ``F_k`` keeps
    only the ``xi1`` node indices ``pieces[k]``. Exponentials are shared by
    all trials.
    """
    T, P = len(Vs), len(pieces)
    out = np.zeros((T, 2 + P))

    def reduce(t, parts, w):
        F = sum(parts)
        out[t, 0] += float(np.sum(w * np.abs(F) ** p))
        S = sum(np.abs(q) ** 2 for q in parts)
        out[t, 1] += float(np.sum(w * S ** (p / 2)))
        for k, q in enumerate(parts):
            out[t, 2 + k] += float(np.sum(w * np.abs(q) ** p))

    if method == "dense-grid":
        if R > DENSE_MAX_R:
            raise ResourceError(f"dense grid limited to R <= {DENSE_MAX_R}")
        x, W = dense_ball_weights(float(R))
        for kz in range(x.size):
            Wk = W[:, :, kz]
            if not Wk.any():
                continue
            x3 = np.full(x.size, x[kz])
            A = axis_factors(g0.nodes1, g0.w1, phase.axis1, x, x3)
            B = axis_factors(g0.nodes2, g0.w2, phase.axis2, x, x3)
            for t, V in enumerate(Vs):
                parts = [A[:, I] @ V[I, :] @ B.T for I in pieces]
                reduce(t, parts, Wk)
    elif method == "monte-carlo":
        for X, w in _mc_blocks(R, n_samples, seed):
            for s in range(0, len(X), 4096):
                A, B = factor_matrices(g0, phase, X[s : s + 4096])
                for t, V in enumerate(Vs):
                    parts = [np.sum((A[:, I] @ V[I, :]) * B, axis=1) for I in pieces]
                    reduce(t, parts, w)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return out


def _auto_method(R: float, R_max: float) -> str:
    if R > R_max:
        raise ResourceError(f"ball radius {R:g} exceeds R_max={R_max:g}")
    return "dense-grid" if R <= DENSE_MAX_R else "monte-carlo"


def _column_pieces(nodes1: np.ndarray, edges: Sequence[float]) -> list[np.ndarray]:
    out = []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        last = k == len(edges) - 2
        m = (nodes1 >= a) & ((nodes1 <= b) if last else (nodes1 < b))
        out.append(np.nonzero(m)[0])
    return out


def _steinhaus(shape, rng) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(shape))


def _random_values(g0: Density, cells: tuple[int, int], rng) -> np.ndarray:
    """Unimodular values constant on an ``n1 x n2`` grid of sub-cells of the region."""
    prof = Profile.random_phase(g0.region, cells, rng)
    return prof.grid(g0.nodes1, g0.nodes2)


# ---------------------------------------------------------------------------
# decoupling


@dataclass
class ConstantResult:
    constant: float
    ratios: list[float]
    R: float
    n_pieces: int
    method: str
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "constant": self.constant,
            "ratios": list(self.ratios),
            "R": self.R,
            "n_pieces": self.n_pieces,
            "method": self.method,
        }
        d.update(self.extra)
        return d


def decoupling_constant(
    p: float,
    lam: float,
    sigma: float,
    trials: int,
    seed: int,
    single_slab: bool = False,
    n_samples: int = 20_000,
    R_max: float = DEFAULT_R_MAX,
    max_nodes: float = DEFAULT_MAX_NODES,
    phase: Phase = BASE_PHASE,
    method: Optional[str] = None,
) -> ConstantResult:
    """``max_t ||F||_p / (sum_tau ||F_tau||_p^2)^{1/2}`` on ``B_{sigma^{-4}}``.

    ``F = E g`` for Steinhaus ``g`` on ``[lam, 2 lam] x [0, sigma]`` and
    ``tau`` the ``lam^{-1} sigma^2``-wide strips. Dense grid when the radius is
    at most 32, Monte Carlo otherwise.
    """
    if p < 2:
        raise ParameterError("p must be >= 2")
    if not (0 < sigma <= 1 and 0 < lam <= 0.5):
        raise ParameterError("need 0 < sigma <= 1 and 0 < lambda <= 1/2")
    R = sigma**-4.0
    meth = method or _auto_method(R, R_max)
    if R > R_max:
        raise ResourceError(f"ball radius {R:g} exceeds R_max={R_max:g}")
    region = Region(lam, min(2 * lam, 1.0), 0.0, sigma)
    w_tau = sigma * sigma / lam
    n_tau = max(1, int(round((region.b1 - region.a1) / w_tau)))
    edges = list(np.linspace(region.a1, region.b1, n_tau + 1))
    # random cells ~2/R wide, nested inside the tau strips
    per = max(1, int(math.ceil(w_tau * R / 2)))
    cells = (n_tau * per, max(1, int(math.ceil(sigma * R / 2))))
    brk = (np.linspace(region.a1, region.b1, cells[0] + 1), np.linspace(region.a2, region.b2, cells[1] + 1))
    g0 = build_density(
        region, R, Profile.constant(), phase=phase, order=EXP_ORDER, cycles=EXP_CYCLES,
        max_nodes=max_nodes, extra_breaks=brk,
    )
    pieces = _column_pieces(g0.nodes1, edges)
    rng = np.random.default_rng(seed)
    Vs = []
    for _ in range(trials):
        V = _random_values(g0, cells, rng)
        if single_slab:
            mask = np.zeros(g0.nodes1.size, bool)
            mask[pieces[int(rng.integers(n_tau))]] = True
            V = V * mask[:, None]
        Vs.append(V)
    sums = piece_sums(g0, phase, Vs, pieces, p, R, meth, seed, n_samples)
    num = sums[:, 0] ** (1 / p)
    den = np.sqrt(np.sum(sums[:, 2:] ** (2 / p), axis=1))
    ratios = num / den
    return ConstantResult(float(ratios.max()), ratios.tolist(), R, n_tau, meth, {"nodes": g0.size})


def decoupling_series(p, lam, sigmas, trials, seed, **kw) -> ConstantSeries:
    """``D`` against ``1/sigma``; raises ResourceError if any ball is too large."""
    res = [decoupling_constant(p, lam, s, trials, seed, **kw) for s in sigmas]
    inv = [1.0 / s for s in sigmas]
    order = np.argsort(inv)
    return make_series(
        "decouple",
        [inv[i] for i in order],
        [res[i].constant for i in order],
        seed,
        trials,
        p=p,
        lam=lam,
    )


# ---------------------------------------------------------------------------
# square function


def square_function_constant(
    p: float,
    lam: float,
    R: float,
    trials: int,
    seed: int,
    n_samples: int = 20_000,
    R_max: float = DEFAULT_R_MAX,
    phase: Phase = BASE_PHASE,
    single_slab: bool = False,
    method: Optional[str] = None,
) -> ConstantResult:
    """``max_t ||F||_p / ||(sum |F_theta|^2)^{1/2}||_p`` on ``B_R``.

    ``g`` is Steinhaus on ``Omega_{lam,0} = [lam, 2 lam] x [0, R^{-1/4}]`` and
    the pieces are the ``lam^{-1} R^{-1/2} x R^{-1/4}`` slabs.
    """
    if not 2 <= p <= 4:
        raise ParameterError("p must lie in [2, 4]")
    if R > 64:
        raise ResourceError("square-function probe limited to R <= 64")
    meth = method or _auto_method(R, R_max)
    region = Region(lam, min(2 * lam, 1.0), 0.0, R**-0.25)
    d1 = 1.0 / (lam * math.sqrt(R))
    n_th = max(1, int(math.ceil((region.b1 - region.a1) / d1 - 1e-9)))
    edges = [region.a1 + k * d1 for k in range(n_th)] + [region.b1]
    per = max(1, int(math.ceil(d1 * R / 2)))
    # random cells subdivide each slab (the last, clipped slab gets the same count)
    brk = np.concatenate([np.linspace(a, b, per + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [[region.b1]])
    n2 = max(1, int(math.ceil(region.b2 * R / 2)))
    g0 = build_density(
        region, R, Profile.constant(), phase=phase, order=EXP_ORDER, cycles=EXP_CYCLES,
        extra_breaks=(brk, np.linspace(0.0, region.b2, n2 + 1)),
    )
    pieces = _column_pieces(g0.nodes1, edges)
    rng = np.random.default_rng(seed)
    idx1 = np.clip(np.searchsorted(brk, g0.nodes1, side="right") - 1, 0, len(brk) - 2)
    idx2 = np.clip(np.floor(g0.nodes2 / region.b2 * n2).astype(int), 0, n2 - 1)
    Vs = []
    for _ in range(trials):
        th = _steinhaus((len(brk) - 1, n2), rng)
        V = th[np.ix_(idx1, idx2)]
        if single_slab:
            mask = np.zeros(g0.nodes1.size, bool)
            mask[pieces[int(rng.integers(n_th))]] = True
            V = V * mask[:, None]
        Vs.append(V)
    sums = piece_sums(g0, phase, Vs, pieces, p, R, meth, seed, n_samples)
    ratios = (sums[:, 0] / sums[:, 1]) ** (1 / p)
    return ConstantResult(float(ratios.max()), ratios.tolist(), R, n_th, meth, {"nodes": g0.size})


# ---------------------------------------------------------------------------
# extremizer search


@dataclass
class ExtremizerResult:
    g: Density
    estimate: NormEstimate
    objective: list[float]
    status: str
    iterations: int

    @property
    def lower_bound(self) -> float:
        return self.estimate.value / max(self.g.modulus_bound, 1e-300)


class LpObjective:
    """``J(g) = mean_s |E g(x_s)|^p`` on a fixed sample set."""

    def __init__(self, g0: Density, phase: Phase, X: np.ndarray, p: float):
        self.A, self.B = factor_matrices(g0, phase, X)
        self.p = p
        self.n = len(X)

    def field(self, V: np.ndarray) -> np.ndarray:
        return np.sum((self.A @ V) * self.B, axis=1)

    def value(self, V: np.ndarray) -> float:
        return float(np.mean(np.abs(self.field(V)) ** self.p))

    def grad_conj(self, V: np.ndarray, E: Optional[np.ndarray] = None) -> np.ndarray:
        """``dJ / d conj(g)``, a matrix shaped like ``V``."""
        E = self.field(V) if E is None else E
        w = np.abs(E) ** (self.p - 2) * E * (self.p / 2 / self.n)
        return np.conj(self.A).T @ (w[:, None] * np.conj(self.B))

    def grad_theta(self, V: np.ndarray) -> np.ndarray:
        """Derivative in the node phases of ``g = |g| exp(i theta)``."""
        G = np.conj(self.grad_conj(V))  # dJ/dg
        return 2.0 * np.real(G * 1j * V)


def _unimodular(Z: np.ndarray) -> np.ndarray:
    m = np.abs(Z)
    return np.where(m > 0, Z / np.where(m > 0, m, 1.0), 1.0)


def extremizer_search(
    region: Region,
    phase: Phase,
    p: float,
    R: float,
    iters: int,
    seed: int,
    n_fit: int = 8000,
    n_eval: int = 100_000,
    patience: int = 50,
    tol: float = 1e-4,
    g_init: Optional[np.ndarray] = None,
    order: int = EXP_ORDER,
    cycles: float = EXP_CYCLES,
    R_max: float = DEFAULT_R_MAX,
) -> ExtremizerResult:
    """Projected gradient ascent of ``||E g||_p^p`` over ``|g| <= 1``.

    The step ``g + eta grad`` is projected back to unit modulus; ``eta``
    halves until the objective improves, so the accepted sequence is
    monotone. ``eta = inf`` is tried first (``g <- phase(grad)``). A step
    gaining less than ``tol`` (relative) is non-improving; ``patience`` of
    those in a row ends the search as converged.
    """
    if R > R_max:
        raise ResourceError(f"R={R} exceeds R_max={R_max}")
    g0 = build_density(region, R, Profile.constant(), phase=phase, order=order, cycles=cycles)
    X = ball_samples(R, n_fit, seed, 10_000)
    obj = LpObjective(g0, phase, X, p)
    V = np.ones(g0.shape, complex) if g_init is None else _unimodular(np.asarray(g_init).reshape(g0.shape))
    J = obj.value(V)
    hist = [J]
    stale = 0
    status = "max-iters"
    it = 0
    for it in range(1, iters + 1):
        G = obj.grad_conj(V)
        gn = float(np.abs(G).max())
        improved = False
        if gn > 0:
            for eta in [math.inf] + [2.0**-k / gn for k in range(0, 20)]:
                cand = _unimodular(G) if math.isinf(eta) else _unimodular(V + eta * G)
                Jc = obj.value(cand)
                if Jc > J:
                    gain = (Jc - J) / J
                    V, J, improved = cand, Jc, True
                    break
        hist.append(J)
        if not improved:
            # no ascent direction left: a repeated search would be identical
            status = "converged"
            break
        stale = stale + 1 if gain < tol else 0
        if stale >= patience:
            status = "converged"
            break
    g = g0.with_values(V, 1.0)
    est = lp_norm_ball(g, phase, p, R, "monte-carlo", seed=seed + 1, n_samples=n_eval, R_max=R_max)
    return ExtremizerResult(g, est, hist, status, it)


def trivial_upper_bound(region: Region, p: float, R: float) -> float:
    """``area * Vol(B_R)^{1/p}``, from ``|E g| <= int |g|``."""
    return region.area * ball_volume(R) ** (1 / p)


def qpr_series(p, Rs, iters, seed, region: Optional[Region] = None, **kw) -> ConstantSeries:
    region = region or Region.unit()
    vals, stats = [], []
    for R in Rs:
        r = extremizer_search(region, BASE_PHASE, p, R, iters, seed, **kw)
        vals.append(r.lower_bound)
        stats.append(r.status)
    return make_series("qpr", Rs, vals, seed, 1, p=p, status=stats)


# ---------------------------------------------------------------------------
# Knapp scaling


def knapp_exponent(m: int, p: float) -> float:
    """``(m+2)/(p m) - 2/m``: the growth rate in ``K`` of the Knapp ratio."""
    return (m + 2) / (p * m) - 2.0 / m


def knapp_transport(m: int, p: float, K: float, R: float, method: str = "dense-grid", seed: int = 0) -> tuple[float, float]:
    """(``||E_Omega 1||_{L^p(B_R)}``, ``K^{(m+2)/(pm)} ||E g~||_{L^p(image of B_R)}``)."""
    rs = rescale_case_a(K, m)
    ph = rs.old_phase
    src = build_density(rs.source, R, Profile.constant(), phase=ph, order=EXP_ORDER, cycles=EXP_CYCLES)
    lhs = lp_norm_ball(src, ph, p, R, method, seed=seed).value
    Ry = R * float(np.abs(rs.x_map).max())
    tgt = build_density(rs.target, Ry, rs.pull(Profile.constant()), phase=rs.new_phase, order=EXP_ORDER, cycles=EXP_CYCLES)
    rhs = lp_norm_ball(tgt, rs.new_phase, p, R, method, seed=seed, x_map=rs.x_map).value
    return lhs, K ** ((m + 2) / (p * m)) * rhs


def knapp_probe(m: int, p: float, Ks: Sequence[float], R: float, seed: int = 0, method: Optional[str] = None) -> ConstantSeries:
    """``||E_Omega 1||_{L^p(B_R)}`` for ``Omega = [0, K^{-1/m}]^2`` over the K grid."""
    if m not in (2, 4):
        raise ParameterError("m must be 2 or 4")
    meth = method or ("dense-grid" if R <= DENSE_MAX_R else "monte-carlo")
    lhs, rel = [], []
    for K in Ks:
        a, b = knapp_transport(m, p, K, R, meth, seed)
        lhs.append(a)
        rel.append(abs(a - b) / a)
    return make_series(
        "knapp",
        Ks,
        lhs,
        seed,
        1,
        m=m,
        p=p,
        R=R,
        predicted_exponent=knapp_exponent(m, p),
        transport_rel_error=rel,
    )
