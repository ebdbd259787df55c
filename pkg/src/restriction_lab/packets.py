"""Wave packet frames adapted to a slab.

A slab with centre ``xi_theta`` and sides ``d1 x d2 x 1/R`` is treated as a
rectangular box with orthonormal axes ``(e1, e2, n)``: ``e1`` is the unit
tangent along ``xi1``, ``n`` the unit normal, ``e2 = n x e1``. Its dual tubes
have lengths ``t = (1/d1, 1/d2, R)`` along the same axes. In the normalized
coordinates ``u_i = e_i . x / t_i`` a field band-limited to the slab is
``f(x) = e(xi_theta . x) F(u)`` with ``F`` band-limited to ``[-1/2, 1/2]^3``.

Packets are

    psi_T(x) = |T|^{-1} e(xi_theta . x) phi(2 (u - v_T)),    v_T in (1/2) Z^3,

where the window ``phi`` is separable, ``phi_hat`` is supported in
``[-1/2, 1/2]^3`` and equals 1 on ``[-1/4, 1/4]^3``. The Fourier transform of
``phi(2 u)`` is flat on the slab, so sampling on the half lattice reconstructs
band-limited ``F`` exactly and the coefficients are
``f_T = |T| <F, 8 phi(2 (. - v_T))>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ParameterError, ResourceError
from .partition import Slab

GRID_STEP = 0.25
LATTICE_STEP = 0.5
MARGIN = 8.0
_N_QUAD = 4096


# ---------------------------------------------------------------------------
# 1-D window


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    return a / (a + b)


def window_hat(w):
    """1-D window in frequency: 1 on ``|w| <= 1/4``, 0 for ``|w| >= 1/2``."""
    return smooth_step((np.abs(np.asarray(w, dtype=float)) - 0.25) / 0.25)


def bump_hat(w, width: float):
    """``exp(-1/(1 - (w/width)^2))`` on ``|w| < width``."""
    r = np.asarray(w, dtype=float) / width
    inside = np.abs(r) < 1
    out = np.zeros_like(r)
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@lru_cache(maxsize=8)
def _trap_nodes(half_width: float):
    # the integrands vanish to all orders at the ends, so the periodic
    # trapezoid rule is spectrally accurate
    w = np.linspace(-half_width, half_width, _N_QUAD + 1)[:-1]
    return w, 2 * half_width / _N_QUAD


def inverse_ft(hat_fn, half_width: float, v) -> np.ndarray:
    """``int hat(w) e(w v) dw`` for a real even ``hat`` supported in ``[-hw, hw]``."""
    w, dw = _trap_nodes(half_width)
    h = hat_fn(w)
    v = np.asarray(v, dtype=float)
    return (np.cos(2 * np.pi * np.multiply.outer(v, w)) @ h) * dw


def window(v) -> np.ndarray:
    """1-D ``phi``."""
    return inverse_ft(window_hat, 0.5, v)


def bump(v, width: float) -> np.ndarray:
    return inverse_ft(lambda w: bump_hat(w, width), width, v)


def window3(u) -> np.ndarray:
    """Separable ``phi(u1) phi(u2) phi(u3)`` at rows of ``u``."""
    u = np.atleast_2d(u)
    return window(u[:, 0]) * window(u[:, 1]) * window(u[:, 2])


# ---------------------------------------------------------------------------
# frames and tubes


@dataclass(frozen=True)
class Tube:
    center: np.ndarray
    axes: np.ndarray  # rows e1, e2, e3; e3 is the tube direction
    half_lengths: np.ndarray
    slab_id: tuple = ()

    @property
    def direction(self) -> np.ndarray:
        return self.axes[2]

    @property
    def volume(self) -> float:
        return float(8 * np.prod(self.half_lengths))

    def local(self, x) -> np.ndarray:
        return (np.atleast_2d(x) - self.center) @ self.axes.T

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return np.all(np.abs(self.local(x)) <= self.half_lengths * (1 + tol), axis=1)

    def vertices(self) -> np.ndarray:
        s = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], float)
        return self.center + (s * self.half_lengths) @ self.axes

    def translated(self, shift) -> "Tube":
        return Tube(self.center + np.asarray(shift, float), self.axes, self.half_lengths, self.slab_id)

    def scaled(self, factor: float) -> "Tube":
        return Tube(self.center * factor, self.axes, self.half_lengths * factor, self.slab_id)


@dataclass(frozen=True)
class PacketFrame:
    """Orthonormal frame and tube lengths attached to one slab."""

    xi_center: np.ndarray  # (xi1, xi2, psi(xi))
    axes: np.ndarray
    lengths: np.ndarray
    slab_id: tuple = ()

    @property
    def tube_volume(self) -> float:
        return float(np.prod(self.lengths))

    def to_u(self, x) -> np.ndarray:
        return (np.atleast_2d(x) @ self.axes.T) / self.lengths

    def to_x(self, u) -> np.ndarray:
        return (np.atleast_2d(u) * self.lengths) @ self.axes

    def same_as(self, other: "PacketFrame") -> bool:
        return (
            np.allclose(self.xi_center, other.xi_center, rtol=0, atol=1e-14)
            and np.allclose(self.axes, other.axes, rtol=0, atol=1e-14)
            and np.allclose(self.lengths, other.lengths, rtol=1e-14, atol=0)
        )


def slab_direction(slab: Slab) -> np.ndarray:
    c1, c2 = slab.center
    g1 = float(slab.phase(c1, c2, (1, 0)))
    g2 = float(slab.phase(c1, c2, (0, 1)))
    n = np.array([-g1, -g2, 1.0])
    return n / np.linalg.norm(n)


def frame_for(slab: Slab, R: float) -> PacketFrame:
    d1, d2 = slab.sides
    if min(d1, d2) <= 0 or R <= 0:
        raise ParameterError("degenerate slab")
    c1, c2 = slab.center
    g1 = float(slab.phase(c1, c2, (1, 0)))
    n = slab_direction(slab)
    e1 = np.array([1.0, 0.0, g1])
    e1 -= (e1 @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    xi = np.array([c1, c2, float(slab.phase(c1, c2))])
    return PacketFrame(xi, np.vstack([e1, e2, n]), np.array([1.0 / d1, 1.0 / d2, float(R)]), slab.index)


def _box_dist(center: np.ndarray, half: np.ndarray, axes: np.ndarray, point: np.ndarray) -> float:
    loc = axes @ (point - center)
    return float(np.linalg.norm(np.maximum(np.abs(loc) - half, 0.0)))


def tube_family(
    slab: Slab,
    R: float,
    box_radius: Optional[float] = None,
    spacing: float = 1.0,
) -> list[Tube]:
    """Tubes of the slab's frame whose closures meet ``B_{box_radius}``.

    ``spacing`` is the lattice step in tube lengths: 1 tiles space, 1/2 is the
    redundant lattice the packet frame uses.
    """
    fr = frame_for(slab, R)
    rad = R if box_radius is None else box_radius
    if rad < R * (1 - 1e-12):
        raise ParameterError("box must contain B_R")
    half = fr.lengths / 2
    ranges = [
        np.arange(-math.ceil((rad / L + 1) / spacing), math.ceil((rad / L + 1) / spacing) + 1)
        for L in fr.lengths
    ]
    out = []
    origin = np.zeros(3)
    for i in ranges[0]:
        for j in ranges[1]:
            for k in ranges[2]:
                c = ((np.array([i, j, k]) * spacing) * fr.lengths) @ fr.axes
                if _box_dist(c, half, fr.axes, origin) <= rad:
                    out.append(Tube(c, fr.axes, half, fr.slab_id))
    return out


# ---------------------------------------------------------------------------
# sampled fields


@dataclass
class SampledField:
    """Envelope ``F(u)`` of ``f = e(xi_theta . x) F(u)`` on a tensor grid in ``u``."""

    frame: PacketFrame
    grid: tuple[np.ndarray, np.ndarray, np.ndarray]
    values: np.ndarray
    R: float

    def points_u(self) -> np.ndarray:
        U = np.meshgrid(*self.grid, indexing="ij")
        return np.stack([a.ravel() for a in U], axis=1)

    def ball_mask(self) -> np.ndarray:
        U = np.meshgrid(*self.grid, indexing="ij")
        r2 = sum((U[i] * self.frame.lengths[i]) ** 2 for i in range(3))
        return r2 <= self.R**2

    def physical(self) -> np.ndarray:
        """``f`` itself (the envelope times the slab modulation)."""
        X = self.frame.to_x(self.points_u())
        f = np.exp(2j * np.pi * X @ self.frame.xi_center).reshape(self.values.shape) * self.values
        return f

    def l2_u(self) -> float:
        """``||F||_{L^2(du)}`` by the grid sum (exact for band-limited F)."""
        return float(np.sqrt(GRID_STEP**3 * np.sum(np.abs(self.values) ** 2)))

    def l2avg_hat(self) -> float:
        """``||f_hat||_{L^2_avg(slab)} = |T| ||F||_{L^2(du)}`` by Plancherel."""
        return self.frame.tube_volume * self.l2_u()


def field_grid(frame: PacketFrame, R: float, margin: float = MARGIN):
    return tuple(
        GRID_STEP * np.arange(-math.ceil((R / L + margin) / GRID_STEP), math.ceil((R / L + margin) / GRID_STEP) + 1)
        for L in frame.lengths
    )


def empty_field(slab: Slab, R: float, margin: float = MARGIN, max_points: float = 2e7) -> SampledField:
    fr = frame_for(slab, R)
    grid = field_grid(fr, R, margin)
    n = int(np.prod([g.size for g in grid]))
    if n > max_points:
        raise ResourceError(f"field grid of {n} points exceeds {max_points:.3g}")
    return SampledField(fr, grid, np.zeros(tuple(g.size for g in grid), complex), R)


def random_bandlimited(
    slab: Slab,
    R: float,
    rng: np.random.Generator,
    terms: int = 8,
    width: float = 0.3,
    margin: float = MARGIN,
) -> SampledField:
    """Sum of separable modulated bumps whose spectra lie inside the slab."""
    fld = empty_field(slab, R, margin)
    span = [R / L for L in fld.frame.lengths]
    vals = np.zeros_like(fld.values)
    for _ in range(terms):
        c = rng.standard_normal() + 1j * rng.standard_normal()
        facs = []
        for i, g in enumerate(fld.grid):
            s = rng.uniform(-span[i], span[i]) / math.sqrt(3)
            m = rng.uniform(-(0.5 - width), 0.5 - width)
            facs.append(bump(g - s, width) * np.exp(2j * np.pi * m * (g - s)))
        vals += c * np.einsum("i,j,k->ijk", *facs)
    fld.values = vals
    return fld


def packet_field(slab: Slab, R: float, v, coeff: complex = 1.0, margin: float = MARGIN) -> SampledField:
    """Envelope of ``coeff * psi_T`` for the lattice point ``v``."""
    fld = empty_field(slab, R, margin)
    facs = [window(2 * (g - vi)) for g, vi in zip(fld.grid, v)]
    fld.values = coeff / fld.frame.tube_volume * np.einsum("i,j,k->ijk", *facs).astype(complex)
    return fld


# ---------------------------------------------------------------------------
# analysis / synthesis


@dataclass
class WavePacketCoeffs:
    frame: PacketFrame
    lattice: tuple[np.ndarray, np.ndarray, np.ndarray]
    coeffs: np.ndarray
    grid: tuple[np.ndarray, np.ndarray, np.ndarray]
    R: float
    window: str = "separable smooth-step window, plateau 1/4, support 1/2"

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def tubes(self) -> list[Tube]:
        half = self.frame.lengths / 2
        out = []
        for i, a in enumerate(self.lattice[0]):
            for j, b in enumerate(self.lattice[1]):
                for k, c in enumerate(self.lattice[2]):
                    if self.coeffs[i, j, k] != 0:
                        ctr = self.frame.to_x([a, b, c])[0]
                        out.append(Tube(ctr, self.frame.axes, half, self.frame.slab_id))
        return out


def _lattice_for(grid) -> tuple[np.ndarray, ...]:
    return tuple(
        LATTICE_STEP * np.arange(math.ceil(g[0] / LATTICE_STEP), math.floor(g[-1] / LATTICE_STEP) + 1)
        for g in grid
    )


def _kernel(lat: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """``8^{1/3} phi(2 (v - w))`` per axis, rows = lattice, cols = grid."""
    d = np.subtract.outer(lat, grid)
    # both grids are multiples of 1/4, so few distinct offsets occur
    key = np.rint(d / GRID_STEP).astype(np.int64)
    uniq, inv = np.unique(key, return_inverse=True)
    vals = 2.0 * window(2 * GRID_STEP * uniq)
    return vals[inv].reshape(d.shape)


def _contract(values: np.ndarray, mats) -> np.ndarray:
    out = np.tensordot(mats[0], values, axes=(1, 0))
    out = np.tensordot(mats[1], out, axes=(1, 1)).transpose(1, 0, 2)
    out = np.tensordot(mats[2], out, axes=(1, 2)).transpose(1, 2, 0)
    return out


def analyze(f: SampledField, slab: Slab, R: float) -> WavePacketCoeffs:
    """Coefficients ``f_T = |T| <F, 8 phi(2(. - v_T))>`` on the half lattice."""
    fr = frame_for(slab, R)
    if not fr.same_as(f.frame) or abs(f.R - R) > 1e-12 * R:
        raise ParameterError("field was sampled for a different slab or radius")
    lat = _lattice_for(f.grid)
    mats = [_kernel(l, g) for l, g in zip(lat, f.grid)]
    c = fr.tube_volume * GRID_STEP**3 * _contract(f.values, mats)
    return WavePacketCoeffs(fr, lat, c, f.grid, R)


def synthesize(coeffs: WavePacketCoeffs) -> SampledField:
    """``sum_T f_T psi_T`` sampled on the analysis grid (as an envelope)."""
    mats = [_kernel(l, g).T for l, g in zip(coeffs.lattice, coeffs.grid)]
    vals = LATTICE_STEP**3 / coeffs.frame.tube_volume * _contract(coeffs.coeffs, mats)
    return SampledField(coeffs.frame, coeffs.grid, vals, coeffs.R)


def reconstruction_error(f: SampledField, g: SampledField) -> float:
    """Relative L^2 difference on ``B_R``."""
    m = f.ball_mask()
    num = np.sqrt(np.sum(np.abs(f.values[m] - g.values[m]) ** 2))
    den = np.sqrt(np.sum(np.abs(f.values[m]) ** 2))
    return float(num / den) if den > 0 else float(num)


def frame_constant(f: SampledField, coeffs: WavePacketCoeffs) -> float:
    """``(sum |f_T|^2)^{1/2} / ||f_hat||_{L^2_avg(slab)}``."""
    return coeffs.l2() / f.l2avg_hat()


def neighbour_energy(coeffs: WavePacketCoeffs, v0, radius: float) -> float:
    """Share of ``sum |f_T|^2`` on lattice points within ``radius`` (sup norm) of ``v0``."""
    V = np.meshgrid(*coeffs.lattice, indexing="ij")
    d = np.max(np.stack([np.abs(V[i] - v0[i]) for i in range(3)]), axis=0)
    e = np.abs(coeffs.coeffs) ** 2
    return float(e[d <= radius + 1e-12].sum() / e.sum())


def decay_constant(extent: float = 16.0, step: float = 0.125) -> tuple[float, float]:
    """``sup_d |phi(2 d)| (1 + |d|)^4`` over a grid of offsets ``d = u - v_T``.

    ``|T| |psi_T(x)|`` equals ``|phi(2 d)|`` exactly, so this is the measured
    constant of the packet decay bound. Returns (constant, |d| where attained).
    """
    r = np.arange(0.0, extent + step / 2, step)
    p = np.abs(window(2 * r))
    mag = np.einsum("i,j,k->ijk", p, p, p)
    d = np.sqrt(r[:, None, None] ** 2 + r[None, :, None] ** 2 + r[None, None, :] ** 2)
    val = mag * (1 + d) ** 4
    i = np.unravel_index(int(np.argmax(val)), val.shape)
    return float(val[i]), float(d[i])


def out_of_band_fraction(n: int = 256, step: float = GRID_STEP) -> float:
    """Share of ``|FT(phi(2 u))|^2`` outside ``[-1, 1]`` (one axis; separable)."""
    u = step * (np.arange(n) - n // 2)
    s = window(2 * u)
    S = np.fft.fftshift(np.abs(np.fft.fft(s)) ** 2)
    f = np.fft.fftshift(np.fft.fftfreq(n, d=step))
    tot = S.sum()
    inside = S[np.abs(f) <= 1.0 + 1e-12].sum()
    return float(1 - (inside / tot) ** 3)
