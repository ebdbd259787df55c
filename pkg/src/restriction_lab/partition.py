"""Frequency partitions of the unit square.

Cells are half-open ``[a, b)`` except the last cell in each axis, which is
closed, so every point of ``[0, 1]^2`` has exactly one owner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .geometry import BASE_PHASE, Phase

_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    a: float
    b: float
    j: int = 0
    mu: int = 0

    @property
    def length(self) -> float:
        return self.b - self.a

    def contains(self, t: float, closed_right: bool = False) -> bool:
        return self.a <= t < self.b or (closed_right and t == self.b)


@dataclass(frozen=True)
class Region:
    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        if not (0.0 <= self.a1 < self.b1 <= 1.0 and 0.0 <= self.a2 < self.b2 <= 1.0):
            raise ParameterError(f"invalid region {self!r}")

    @classmethod
    def unit(cls) -> "Region":
        return cls(0.0, 1.0, 0.0, 1.0)

    @classmethod
    def parse(cls, text: str) -> "Region":
        parts = [float(s) for s in text.split(",")]
        if len(parts) != 4:
            raise ParameterError("region needs a1,b1,a2,b2")
        return cls(*parts)

    @property
    def area(self) -> float:
        return (self.b1 - self.a1) * (self.b2 - self.a2)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.a1 + self.b1), 0.5 * (self.a2 + self.b2))

    def interval(self, i: int) -> tuple[float, float]:
        return (self.a1, self.b1) if i == 0 else (self.a2, self.b2)

    def contains_region(self, other: "Region", tol: float = _TOL) -> bool:
        return (
            other.a1 >= self.a1 - tol
            and other.b1 <= self.b1 + tol
            and other.a2 >= self.a2 - tol
            and other.b2 <= self.b2 + tol
        )

    def contains(self, xi1, xi2):
        xi1 = np.asarray(xi1)
        xi2 = np.asarray(xi2)
        return (xi1 >= self.a1) & (xi1 <= self.b1) & (xi2 >= self.a2) & (xi2 <= self.b2)

    def overlap_area(self, other: "Region") -> float:
        w = min(self.b1, other.b1) - max(self.a1, other.a1)
        h = min(self.b2, other.b2) - max(self.a2, other.a2)
        return max(w, 0.0) * max(h, 0.0)

    def as_dict(self) -> dict:
        return {"a1": self.a1, "b1": self.b1, "a2": self.a2, "b2": self.b2}


@dataclass(frozen=True)
class Slab:
    """The ``thickness``-neighbourhood of the surface over ``base``."""

    base: Region
    thickness: float
    phase: Phase = field(default=BASE_PHASE, compare=False)
    index: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if not self.thickness > 0:
            raise ParameterError("slab thickness must be positive")

    @property
    def center(self) -> tuple[float, float]:
        return self.base.center

    @property
    def sides(self) -> tuple[float, float]:
        return (self.base.b1 - self.base.a1, self.base.b2 - self.base.a2)

    def contains(self, xi1, xi2, xi3):
        near = np.abs(np.asarray(xi3) - self.phase(xi1, xi2)) < self.thickness
        return self.base.contains(xi1, xi2) & near


def _check_K(K: float) -> int:
    if K < 16:
        raise ParameterError(f"K={K} < 16: decomposition degenerates")
    s = math.log2(K)
    if abs(s - round(s)) > 1e-12:
        raise ParameterError(f"K={K} is not a power of 2")
    return int(round(s))


def k_regular_intervals(K: float) -> list[Interval]:
    """``I_0 = [0, K^{-1/4}]`` followed by the dyadic pieces ``I_{j,mu}``.

    When ``K^{1/4}`` is not a power of two the last ``I_j`` is stretched to
    end at 1.
    """
    s = _check_K(K)
    J = s // 4
    q = 2.0 ** (-s / 4.0)
    out = [Interval(0.0, q, 0, 1)]
    for j in range(1, J + 1):
        a = 2.0 ** (j - 1) * q
        b = 1.0 if j == J else 2.0**j * q
        n = 4 ** (j - 1)
        edges = np.linspace(a, b, n + 1)
        edges[0], edges[-1] = a, b
        out.extend(Interval(float(edges[k]), float(edges[k + 1]), j, k + 1) for k in range(n))
    return out


@dataclass(frozen=True)
class Cell:
    region: Region
    j1: int
    mu1: int
    j2: int
    mu2: int

    def as_dict(self) -> dict:
        d = self.region.as_dict()
        d.update(j1=self.j1, mu1=self.mu1, j2=self.j2, mu2=self.mu2)
        return d


def k_regular_decomposition(K: float) -> list[Cell]:
    ivs = k_regular_intervals(K)
    return [
        Cell(Region(u.a, u.b, v.a, v.b), u.j, u.mu, v.j, v.mu)
        for u in ivs
        for v in ivs
    ]


def region_partition(K: float) -> tuple[Region, Region, Region, Region]:
    """``(Omega_0, Omega_1, Omega_2, Omega_3)`` split at ``K^{-1/4}`` in each axis."""
    if K < 16:
        raise ParameterError(f"K={K} < 16")
    q = K ** -0.25
    return (
        Region(q, 1.0, q, 1.0),
        Region(q, 1.0, 0.0, q),
        Region(0.0, q, q, 1.0),
        Region(0.0, q, 0.0, q),
    )


@dataclass(frozen=True)
class StripPiece:
    """One ``Omega_{lambda,sigma}`` (``sigma`` set) or ``Omega_{lambda,0}`` (``sigma`` None)."""

    lam: float
    sigma: Optional[float]
    ell: int
    region: Region


def dyadic_lambdas(K: float) -> list[float]:
    """Left endpoints of the strips ``I_j``, ``j >= 1``."""
    return sorted({iv.a for iv in k_regular_intervals(K) if iv.j >= 1})


def lambda_sigma_family(K: float, R: float, lam: Optional[float] = None) -> list[StripPiece]:
    """Enumerate the pieces of each strip ``[lambda, 2 lambda] x [0, K^{-1/4}]``."""
    _check_K(K)
    if R < K:
        raise ParameterError(f"R={R} < K={K}")
    q = K ** -0.25
    lams = dyadic_lambdas(K) if lam is None else [lam]
    n_ell = int(math.floor(math.log(R) / math.log(K) + 1e-12)) - 1
    out = []
    for lm in lams:
        if not (q - _TOL <= lm <= 0.5 + _TOL):
            raise ParameterError(f"lambda={lm} outside [K^-1/4, 1/2]")
        b1 = min(2.0 * lm, 1.0)
        if lm == max(dyadic_lambdas(K)):
            b1 = 1.0
        out.append(StripPiece(lm, None, 0, Region(lm, b1, 0.0, R**-0.25)))
        for ell in range(1, n_ell + 1):
            sig = K ** (ell / 4.0) * R**-0.25
            out.append(StripPiece(lm, sig, ell, Region(lm, b1, q * sig, sig)))
    return out


def slab_cover(
    region: Region, R: float, lam: float, sigma: Optional[float] = None, phase: Phase = BASE_PHASE
) -> list[Slab]:
    """Tile ``region`` by slabs of thickness ``1/R``.

    Cells are ``lam^{-1} R^{-1/2}`` by ``sigma^{-1} R^{-1/2}``; with
    ``sigma=None`` the second side is ``R^{-1/4}``. Boundary cells are clipped.
    """
    if R <= 0 or lam <= 0 or (sigma is not None and sigma <= 0):
        raise ParameterError("R, lambda, sigma must be positive")
    d1 = 1.0 / (lam * math.sqrt(R))
    d2 = R**-0.25 if sigma is None else 1.0 / (sigma * math.sqrt(R))
    sides = []
    for (a, b), d in zip((region.interval(0), region.interval(1)), (d1, d2)):
        L = b - a
        if d > L * (1 + 1e-9):
            raise ParameterError(f"cell side {d} exceeds region side {L}")
        n = max(1, int(math.ceil(L / d - 1e-9)))
        edges = [a + k * d for k in range(n)] + [b]
        sides.append(edges)
    e1, e2 = sides
    return [
        Slab(Region(e1[i], e1[i + 1], e2[k], e2[k + 1]), 1.0 / R, phase, (i, k))
        for i in range(len(e1) - 1)
        for k in range(len(e2) - 1)
    ]
