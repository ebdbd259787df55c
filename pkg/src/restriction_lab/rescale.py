"""Affine rescalings that carry a frequency cell onto a unit-scale problem.

Each rescaling is a value: a spatial matrix ``x_map``, an affine frequency
substitution ``xi = xi_offset + xi_scale * eta``, and the phase the
substitution produces. Writing ``s = xi_scale``, the change of variables gives

    E_tau g(x) = e(c(x)) * E_new g~(x_map @ x),   g~(eta) = s1 s2 g(xi(eta)),

with ``|e(c(x))| = 1``. So ``amplitude = s1 s2`` and ``jacobian = 1/(s1 s2)``
(the determinant of the map ``xi -> eta``), whose product is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .geometry import BASE_PHASE, Phase
from .oscillator import Profile, build_density, curve_extend, evaluate
from .partition import Region


@dataclass(frozen=True)
class AffineRescaling:
    name: str
    x_map: np.ndarray
    xi_offset: tuple[float, float]
    xi_scale: tuple[float, float]
    source: Region
    target: Region
    new_phase: Phase
    old_phase: Phase = BASE_PHASE

    @property
    def amplitude(self) -> float:
        return self.xi_scale[0] * self.xi_scale[1]

    @property
    def jacobian(self) -> float:
        return 1.0 / self.amplitude

    @property
    def det(self) -> float:
        return abs(float(np.linalg.det(self.x_map)))

    def map_x(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.x_map.T

    def map_xi(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.asarray(self.xi_offset) + np.asarray(self.xi_scale) * eta

    def pull(self, g: Profile) -> Profile:
        """``g~`` on the target variables."""
        return g.pullback(self.xi_offset, self.xi_scale, self.amplitude)

    def norm_factor(self, p: float) -> float:
        """``||E_tau g||_{L^p(B)} = norm_factor * ||E g~||_{L^p(x_map B)}``."""
        return self.det ** (-1.0 / p)

    def compose(self, inner: "AffineRescaling") -> "AffineRescaling":
        """Apply ``self`` first, then ``inner`` to the result."""
        off = np.asarray(self.xi_offset) + np.asarray(self.xi_scale) * np.asarray(inner.xi_offset)
        sc = np.asarray(self.xi_scale) * np.asarray(inner.xi_scale)
        src = Region(*_box(self.map_xi, inner.source))
        return AffineRescaling(
            f"{self.name}*{inner.name}",
            inner.x_map @ self.x_map,
            (float(off[0]), float(off[1])),
            (float(sc[0]), float(sc[1])),
            src,
            inner.target,
            inner.new_phase,
            self.old_phase,
        )

    def identity_error(
        self,
        g: Profile,
        X: np.ndarray,
        R_target: Optional[float] = None,
        order: int = 12,
        cycles: float = 1.0,
    ) -> float:
        """max over rows of ``X`` of ``| |E_tau g(x)| - |E g~(x_map x)| |``."""
        X = np.atleast_2d(X)
        Y = self.map_x(X)
        Rx = R_target or float(np.linalg.norm(X, axis=1).max())
        Ry = float(np.linalg.norm(Y, axis=1).max())
        d_src = build_density(self.source, Rx, g, phase=self.old_phase, order=order, cycles=cycles)
        d_tgt = build_density(self.target, Ry, self.pull(g), phase=self.new_phase, order=order, cycles=cycles)
        lhs = np.abs(evaluate(d_src, self.old_phase, X))
        rhs = np.abs(evaluate(d_tgt, self.new_phase, Y))
        return float(np.max(np.abs(lhs - rhs)))


def _box(fn, r: Region) -> tuple[float, float, float, float]:
    lo = fn([r.a1, r.a2])
    hi = fn([r.b1, r.b2])
    return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def _is_dyadic_in(lam: float, K: float) -> bool:
    q = K**-0.25
    if not (q * (1 - 1e-12) <= lam <= 0.5 * (1 + 1e-12)):
        return False
    s = math.log2(lam)
    return abs(s - round(s)) < 1e-9


def _perturbed(a: float, s: float, x3_scale: float) -> tuple[float, ...]:
    """Coefficients of ``((a + s eta)^4 - a^4 - 4 a^3 s eta) / x3_scale``."""
    return (0.0, 0.0, 6 * a * a * s * s / x3_scale, 4 * a * s**3 / x3_scale, s**4 / x3_scale)


def rescale_case_a(K: float, m: int = 4) -> AffineRescaling:
    """Self-similar rescaling of ``[0, K^{-1/m}]^2``."""
    if K < 16:
        raise ParameterError("K must be >= 16")
    s = K ** (-1.0 / m)
    ph = Phase.monomial(m)
    x_map = np.diag([s, s, 1.0 / K])
    return AffineRescaling(
        "a", x_map, (0.0, 0.0), (s, s), Region(0.0, s, 0.0, s), Region.unit(), ph, ph
    )


def rescale_case_b(K: float, lam: float) -> AffineRescaling:
    """Cell ``[lam, lam + lam^{-1} K^{-1/2}] x [0, K^{-1/4}]``."""
    if K < 16:
        raise ParameterError("K must be >= 16")
    if not _is_dyadic_in(lam, K):
        raise ParameterError(f"lambda={lam} not dyadic in [K^-1/4, 1/2]")
    s1 = 1.0 / (lam * math.sqrt(K))
    s2 = K**-0.25
    x_map = np.array(
        [[s1, 0.0, 4 * lam**3 * s1], [0.0, s2, 0.0], [0.0, 0.0, 1.0 / K]]
    )
    ph = Phase(_perturbed(lam, s1, 1.0 / K), (0.0, 0.0, 0.0, 0.0, 1.0))
    return AffineRescaling(
        "b", x_map, (lam, 0.0), (s1, s2), Region(lam, lam + s1, 0.0, s2), Region.unit(), ph
    )


def rescale_case_c(K: float, lam: float, sigma: float) -> AffineRescaling:
    """Cell ``[lam, lam + lam^{-1} K^{-1/2}] x [sigma, sigma + sigma^{-1} K^{-1/2}]``."""
    if K < 16:
        raise ParameterError("K must be >= 16")
    for v in (lam, sigma):
        if not _is_dyadic_in(v, K):
            raise ParameterError(f"{v} not dyadic in [K^-1/4, 1/2]")
    s1 = 1.0 / (lam * math.sqrt(K))
    s2 = 1.0 / (sigma * math.sqrt(K))
    x_map = np.array(
        [
            [s1, 0.0, 4 * lam**3 * s1],
            [0.0, s2, 4 * sigma**3 * s2],
            [0.0, 0.0, 1.0 / K],
        ]
    )
    ph = Phase(_perturbed(lam, s1, 1.0 / K), _perturbed(sigma, s2, 1.0 / K))
    return AffineRescaling(
        "c",
        x_map,
        (lam, sigma),
        (s1, s2),
        Region(lam, lam + s1, sigma, sigma + s2),
        Region.unit(),
        ph,
    )


def rescale_cap(lam: float, sigma: float, K: Optional[float] = None) -> AffineRescaling:
    """Cap ``[lam, lam + lam^{-1} sigma^2] x [0, sigma]`` onto a parabolic strip.

    With ``K`` given the cap is cut to ``xi2 >= K^{-1/4} sigma``, so the
    target is ``[0, 1] x [K^{-1/4}, 1]``.
    """
    if sigma <= 0 or lam <= 0:
        raise ParameterError("lambda and sigma must be positive")
    if sigma > lam:
        raise ParameterError(f"sigma={sigma} > lambda={lam}: cap wider than strip")
    if K is not None and not (K**-0.25 * (1 - 1e-12) <= lam <= 0.5 * (1 + 1e-12)):
        raise ParameterError("lambda outside [K^-1/4, 1/2]")
    s1 = sigma * sigma / lam
    s2 = sigma
    x3s = sigma**4
    x_map = np.array(
        [[s1, 0.0, 4 * lam**3 * s1], [0.0, s2, 0.0], [0.0, 0.0, x3s]]
    )
    ph = Phase(_perturbed(lam, s1, x3s), (0.0, 0.0, 0.0, 0.0, 1.0))
    lo = 0.0 if K is None else K**-0.25
    if lam + s1 > 1.0:
        raise ParameterError("cap leaves the unit square")
    return AffineRescaling(
        "cap",
        x_map,
        (lam, 0.0),
        (s1, s2),
        Region(lam, lam + s1, lo * sigma, sigma),
        Region(0.0, 1.0, lo, 1.0),
        ph,
    )


@dataclass(frozen=True)
class CurveRescaling:
    """``t = lam + lam u`` carrying ``[lam, 2 lam]`` on ``(t, t^4)`` to ``[0, 1]``."""

    lam: float
    y_map: np.ndarray
    new_coeffs: tuple[float, ...]
    old_coeffs: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 1.0)

    @property
    def amplitude(self) -> float:
        return self.lam

    def map_y(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.y_map.T

    def map_t(self, u):
        return self.lam + self.lam * np.asarray(u)

    def identity_error(self, Y: np.ndarray, h=None) -> float:
        """max of ``| |E_{[lam,2lam]} h(y)| - |E h~(y~)| |`` over rows of ``Y``."""
        Y = np.atleast_2d(Y)
        lhs = np.abs(curve_extend(self.old_coeffs, (self.lam, 2 * self.lam), Y, h))
        ht = None if h is None else (lambda u: self.lam * np.asarray(h(self.map_t(u))))
        rhs = np.abs(curve_extend(self.new_coeffs, (0.0, 1.0), self.map_y(Y), ht))
        if h is None:
            rhs = rhs * self.lam
        return float(np.max(np.abs(lhs - rhs)))


def curve_rescale(lam: float) -> CurveRescaling:
    if not 0.0 < lam <= 0.5:
        raise ParameterError("lambda must lie in (0, 1/2]")
    y_map = np.array([[lam, 4 * lam**4], [0.0, lam**4]])
    return CurveRescaling(lam, y_map, (0.0, 0.0, 6.0, 4.0, 1.0))


def curve_second_derivative(u):
    return 12.0 + 24.0 * np.asarray(u) + 12.0 * np.asarray(u) ** 2


def rescale_for(case: str, K: float = 16.0, lam: float = 0.5, sigma: float = 0.25, m: int = 4):
    """Dispatch by case name (used by the CLI)."""
    if case == "a":
        return rescale_case_a(K, m)
    if case == "b":
        return rescale_case_b(K, lam)
    if case == "c":
        return rescale_case_c(K, lam, sigma)
    if case == "cap":
        return rescale_cap(lam, sigma, K)
    if case == "curve":
        return curve_rescale(lam)
    raise ParameterError(f"unknown case {case!r}")

