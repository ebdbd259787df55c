"""Dataclass configs and runners behind each CLI subcommand.

Every runner takes its config, a seed and ``R_max`` and returns an
:class:`Outcome`: the JSON payload printed by the CLI, the flat metrics
stored in the record, and an optional series. Runners are deterministic in
(config, seed).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .geometry import BASE_PHASE
from .oscillator import DEFAULT_R_MAX, Profile, build_density, lp_norm_ball
from .packets import (
    analyze,
    decay_constant,
    frame_constant,
    neighbour_energy,
    out_of_band_fraction,
    packet_field,
    random_bandlimited,
    reconstruction_error,
    synthesize,
)
from .partition import Region, k_regular_decomposition, slab_cover
from .probes import (
    decoupling_series,
    knapp_probe,
    make_series,
    qpr_series,
    recurrence_closed_form,
    recurrence_iterate,
    square_function_constant,
    trivial_upper_bound,
)
from .rescale import CurveRescaling, rescale_for
from .tubes import angle_bin, bush, kakeya_bound, kakeya_l2, pair_bound, random_translates


@dataclass
class Outcome:
    payload: dict
    metrics: dict
    series: Optional[dict] = None


def _sorted_unique(xs) -> list[float]:
    v = [float(x) for x in xs]
    if len(set(v)) != len(v):
        raise ParameterError("grid values must be distinct")
    return sorted(v)


# ---------------------------------------------------------------------------


@dataclass
class DecomposeConfig:
    K: float = 256.0

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        cells = k_regular_decomposition(self.K)
        areas = [c.region.area for c in cells]
        payload = {"K": self.K, "cells": [c.as_dict() for c in cells]}
        return Outcome(payload, {"cell_count": len(cells), "total_area": float(math.fsum(areas)), "min_area": min(areas)})


@dataclass
class ExtendConfig:
    region: str = "0,1,0,1"
    R: float = 8.0
    p: float = 4.0
    method: str = "dense-grid"
    g: str = "constant"
    n_samples: int = 200_000
    out: Optional[str] = None

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        reg = Region.parse(self.region)
        dens = build_density(reg, self.R, self.g, seed=seed)
        est = lp_norm_ball(dens, BASE_PHASE, self.p, self.R, self.method, seed=seed, n_samples=self.n_samples, R_max=R_max)
        d = est.as_dict()
        return Outcome(d, {k: v for k, v in d.items() if isinstance(v, (int, float))})


@dataclass
class RescaleCheckConfig:
    case: str = "a"
    K: float = 16.0
    lam: float = 0.5
    sigma: float = 0.25
    m: int = 4
    probes: int = 50
    radius: float = 8.0
    n_random: int = 5
    tol: float = 1e-8

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        if self.probes < 1 or self.radius <= 0:
            raise ParameterError("need probes >= 1 and radius > 0")
        rs = rescale_for(self.case, self.K, self.lam, self.sigma, self.m)
        rng = np.random.default_rng(seed)
        errs = []
        if isinstance(rs, CurveRescaling):
            Y = _disc_points(rng, self.probes, self.radius)
            errs.append(rs.identity_error(Y))
            for _ in range(self.n_random):
                a = rng.uniform(-2, 2, 4)
                errs.append(rs.identity_error(Y, lambda t, a=a: np.exp(2j * np.pi * np.polyval(a, t))))
        else:
            X = _ball_points(rng, self.probes, self.radius)
            errs.append(rs.identity_error(Profile.constant(), X, self.radius))
            for _ in range(self.n_random):
                g = Profile.random_phase(rs.source, (4, 4), rng)
                errs.append(rs.identity_error(g, X, self.radius))
        err = max(errs)
        out = {"case": self.case, "max_error": err, "passed": bool(err <= self.tol), "n_profiles": len(errs), "n_probes": self.probes}
        return Outcome(out, {k: v for k, v in out.items() if k != "case"})


def _ball_points(rng, n: int, r: float) -> np.ndarray:
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (r * rng.random(n) ** (1 / 3))[:, None]


def _disc_points(rng, n: int, r: float) -> np.ndarray:
    t = 2 * np.pi * rng.random(n)
    s = r * np.sqrt(rng.random(n))
    return np.column_stack([s * np.cos(t), s * np.sin(t)])


@dataclass
class WavepacketConfig:
    R: float = 32.0
    lam: float = 0.5
    sigma: float = 0.5
    trials: int = 5
    terms: int = 8

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        reg = Region(self.lam, min(2 * self.lam, 1.0), self.sigma, min(2 * self.sigma, 1.0))
        slab = slab_cover(reg, self.R, self.lam, self.sigma)[0]
        rng = np.random.default_rng(seed)
        cws, errs = [], []
        for _ in range(self.trials):
            f = random_bandlimited(slab, self.R, rng, terms=self.terms)
            c = analyze(f, slab, self.R)
            cws.append(frame_constant(f, c))
            errs.append(reconstruction_error(f, synthesize(c)))
        conc = neighbour_energy(analyze(packet_field(slab, self.R, (0.0, 0.0, 0.0)), slab, self.R), (0.0, 0.0, 0.0), 0.5)
        dc, dr = decay_constant()
        oob = out_of_band_fraction()
        out = {
            "frame_constant_max": max(cws),
            "frame_constant_min": min(cws),
            "recon_error_max": max(errs),
            "recon_pass": bool(max(errs) <= 1e-2),
            "packet_concentration": conc,
            "concentration_pass": bool(conc >= 0.9),
            "decay_constant": dc,
            "decay_at": dr,
            "decay_pass": bool(dc <= 1.0),
            "out_of_band_fraction": oob,
            "band_pass": bool(oob <= 1e-4),
        }
        return Outcome(out, dict(out))


@dataclass
class KakeyaConfig:
    R: float = 64.0
    lam: float = 0.5
    ensemble: str = "bush"

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        if self.ensemble == "bush":
            ts = bush(self.R, self.lam)
        elif self.ensemble == "random":
            ts = random_translates(self.R, self.lam, np.random.default_rng(seed))
        else:
            raise ParameterError(f"unknown ensemble {self.ensemble!r}")
        pairs: list = []
        l2 = kakeya_l2(ts, pairs)
        viol = 0
        for i, j, v in pairs:
            jb = angle_bin(ts.tubes[i], ts.tubes[j], self.R)
            if jb >= 1 and v > pair_bound(self.R, self.lam, jb):
                viol += 1
        bound = kakeya_bound(self.R, self.lam)
        out = {"l2": l2, "bound": bound, "ratio": l2 / bound, "pair_violations": viol, "n_tubes": len(ts.tubes), "n_pairs": len(pairs)}
        return Outcome(out, dict(out))


def _series_outcome(series) -> Outcome:
    d = series.as_dict()
    m = {k: v for k, v in d.items() if k != "seed"}
    m["constant_max"] = max(series.constants)
    for x, c in zip(series.grid, series.constants):
        m[f"constant@{x:g}"] = c
    return Outcome(d, m, d)


@dataclass
class DecoupleConfig:
    p: float = 2.0
    lam: float = 0.5
    sigmas: list = field(default_factory=lambda: [0.5])
    trials: int = 10
    n_samples: int = 20_000
    single_slab: bool = False

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        if self.p not in (2.0, 4.0, 6.0):
            raise ParameterError("p must be 2, 4 or 6")
        s = decoupling_series(
            self.p, self.lam, _sorted_unique(self.sigmas), self.trials, seed,
            n_samples=self.n_samples, R_max=R_max, single_slab=self.single_slab,
        )
        return _series_outcome(s)


@dataclass
class SqfnConfig:
    p: float = 4.0
    lam: float = 0.5
    Rs: list = field(default_factory=lambda: [16.0])
    trials: int = 10
    n_samples: int = 20_000
    single_slab: bool = False

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        Rs = _sorted_unique(self.Rs)
        res = [
            square_function_constant(self.p, self.lam, R, self.trials, seed, n_samples=self.n_samples, R_max=R_max, single_slab=self.single_slab)
            for R in Rs
        ]
        s = make_series("sqfn", Rs, [r.constant for r in res], seed, self.trials, p=self.p, lam=self.lam, methods=[r.method for r in res])
        return _series_outcome(s)


@dataclass
class QprConfig:
    p: float = 3.4
    Rs: list = field(default_factory=lambda: [8.0, 16.0, 32.0])
    iters: int = 40
    n_fit: int = 4000
    n_eval: int = 50_000

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        Rs = _sorted_unique(self.Rs)
        s = qpr_series(self.p, Rs, self.iters, seed, n_fit=self.n_fit, n_eval=self.n_eval, R_max=R_max)
        ok = all(c <= trivial_upper_bound(Region.unit(), self.p, R) for c, R in zip(s.constants, Rs))
        s.extra["below_trivial_bound"] = ok
        return _series_outcome(s)


@dataclass
class KnappConfig:
    m: int = 4
    p: float = 4.0
    Ks: list = field(default_factory=lambda: [16.0, 256.0, 4096.0])
    R: float = 8.0

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        if self.R > R_max:
            raise ParameterError(f"R={self.R} exceeds R_max={R_max}")
        s = knapp_probe(self.m, self.p, _sorted_unique(self.Ks), self.R, seed)
        s.extra["transport_rel_error_max"] = max(s.extra["transport_rel_error"])
        return _series_outcome(s)


@dataclass
class RecurrenceConfig:
    A: float = 1.0
    C: float = 1.0
    K: float = 16.0
    p: float = 4.0
    R: float = 2.0**20
    base: float = 1.0

    def run(self, seed: int, R_max: float = DEFAULT_R_MAX) -> Outcome:
        r = recurrence_iterate(self.A, self.C, self.K, self.p, self.R, self.base)
        cf = recurrence_closed_form(self.A, r.contraction, r.levels, self.base)
        out = {
            "bound": r.bound,
            "levels": r.levels,
            "contraction": r.contraction,
            "diverges": r.diverges,
            "closed_form": cf,
            "closed_form_gap": abs(cf - r.bound),
        }
        return Outcome(out, dict(out))


CONFIGS = {
    "decompose": DecomposeConfig,
    "extend": ExtendConfig,
    "rescale-check": RescaleCheckConfig,
    "wavepacket-check": WavepacketConfig,
    "kakeya": KakeyaConfig,
    "decouple": DecoupleConfig,
    "sqfn": SqfnConfig,
    "qpr": QprConfig,
    "knapp": KnappConfig,
    "recurrence": RecurrenceConfig,
}


def materialize(config) -> dict:
    """Fully materialized config (defaults included) for digests."""
    return asdict(config)
