"""Additive polynomial phases and the differential geometry of u^4 + v^4.

A phase is ``psi(xi) = phi1(xi1) + phi2(xi2)`` with each ``phi`` a real
polynomial stored by its coefficient list (index = power). Derivatives are
exact coefficient shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError

# second-derivative window and higher-derivative cap for admissible phases;
# the perturbed parabola 6t^2 + 4t^3 + t^4 (strip at lambda = K^{-1/4}) has
# second derivative up to 48, so the cap is 48 rather than 24
ADMISSIBLE_D2 = (4.0, 48.0)
ADMISSIBLE_D34 = 48.0


def poly_eval(coeffs: Sequence[float], t, deriv: int = 0):
    """Evaluate the ``deriv``-th derivative of a coefficient polynomial (Horner)."""
    c = np.asarray(coeffs, dtype=float)
    if deriv:
        c = P.polyder(c, deriv) if len(c) > deriv else np.zeros(1)
    return P.polyval(t, c)


def poly_abs_max(coeffs: Sequence[float], a: float, b: float, deriv: int = 0) -> float:
    """Exact max of ``|p^(deriv)|`` on ``[a, b]`` (endpoints plus critical points)."""
    c = np.asarray(coeffs, dtype=float)
    if deriv:
        c = P.polyder(c, deriv) if len(c) > deriv else np.zeros(1)
    pts = [a, b]
    if len(c) > 2:
        for r in P.polyroots(P.polyder(c)):
            if abs(r.imag) < 1e-12 and a <= r.real <= b:
                pts.append(r.real)
    return float(np.max(np.abs(P.polyval(np.array(pts), c))))


@dataclass(frozen=True)
class Phase:
    axis1: tuple[float, ...]
    axis2: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "axis1", tuple(float(c) for c in self.axis1))
        object.__setattr__(self, "axis2", tuple(float(c) for c in self.axis2))

    @classmethod
    def monomial(cls, m: int = 4) -> "Phase":
        """The base surface xi1^m + xi2^m."""
        if m < 2:
            raise ValueError("m must be >= 2")
        c = (0.0,) * m + (1.0,)
        return cls(c, c)

    def axis(self, i: int) -> tuple[float, ...]:
        return self.axis1 if i == 0 else self.axis2

    def axis_eval(self, i: int, t, deriv: int = 0):
        return poly_eval(self.axis(i), t, deriv)

    def __call__(self, xi1, xi2, order: tuple[int, int] = (0, 0)):
        o1, o2 = order
        if o1 and o2:
            return np.zeros(np.broadcast(np.asarray(xi1), np.asarray(xi2)).shape)
        if o1:
            return self.axis_eval(0, xi1, o1) + 0.0 * np.asarray(xi2)
        if o2:
            return self.axis_eval(1, xi2, o2) + 0.0 * np.asarray(xi1)
        return self.axis_eval(0, xi1) + self.axis_eval(1, xi2)

    def slope_bound(self, i: int, a: float, b: float) -> float:
        """max |phi_i'| on [a, b]."""
        return poly_abs_max(self.axis(i), a, b, deriv=1)

    def is_linear_axis(self, i: int) -> bool:
        return all(abs(c) == 0.0 for c in self.axis(i)[2:])

    def admissible(
        self,
        d2: tuple[float, float] = ADMISSIBLE_D2,
        d34: float = ADMISSIBLE_D34,
        tol: float = 1e-12,
    ) -> bool:
        """Perturbed-parabola test for each nonlinear axis on [0, 1].

        Monomial axes (xi^m) are exempt: they are the degenerate base surface.
        """
        lo, hi = d2
        for i in (0, 1):
            c = self.axis(i)
            nz = [k for k, v in enumerate(c) if v != 0.0]
            if len(nz) <= 1:
                continue
            ts = np.linspace(0.0, 1.0, 2001)
            second = poly_eval(c, ts, 2)
            if second.min() < lo - tol or second.max() > hi + tol:
                return False
            if poly_abs_max(c, 0.0, 1.0, 3) > d34 + tol:
                return False
            if poly_abs_max(c, 0.0, 1.0, 4) > d34 + tol:
                return False
        return True


BASE_PHASE = Phase.monomial(4)


def phase_eval(phase: Phase, xi, order: tuple[int, int] = (0, 0)) -> float:
    """Value or partial derivative of ``phase`` at a point of the unit square."""
    xi1, xi2 = float(xi[0]), float(xi[1])
    if not (0.0 <= xi1 <= 1.0 and 0.0 <= xi2 <= 1.0):
        raise DomainError(f"xi={xi!r} outside [0,1]^2")
    if any(o < 0 or o > 4 for o in order):
        raise DomainError(f"derivative order {order!r} outside 0..4")
    return float(phase(xi1, xi2, order))


@dataclass(frozen=True)
class FundamentalForms:
    E: float
    F: float
    G: float
    L: float
    M: float
    N: float
    k: float


def fundamental_forms(u: float, v: float) -> FundamentalForms:
    """First/second fundamental forms and Gaussian curvature of (u, v, u^4 + v^4)."""
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise DomainError(f"(u, v)=({u}, {v}) outside [0,1]^2")
    u3, v3 = u**3, v**3
    E = 1.0 + 16.0 * u3 * u3
    F = 16.0 * u3 * v3
    G = 1.0 + 16.0 * v3 * v3
    s = math.sqrt(1.0 + 16.0 * u3 * u3 + 16.0 * v3 * v3)
    L = 12.0 * u * u / s
    N = 12.0 * v * v / s
    k = 144.0 * u * u * v * v / (1.0 + 16.0 * u3 * u3 + 16.0 * v3 * v3) ** 2
    return FundamentalForms(E, F, G, L, 0.0, N, k)


def surface_point(u, v):
    return np.array([u, v, u**4 + v**4])


def unit_normal(u: float, v: float) -> np.ndarray:
    n = np.array([-4.0 * u**3, -4.0 * v**3, 1.0])
    return n / np.linalg.norm(n)
