import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from restriction_lab.errors import ParameterError
from restriction_lab.packets import Tube
from restriction_lab.tubes import (
    TubeSet,
    angle_bin,
    bush,
    intersection_volume,
    intersection_volume_mc,
    kakeya_bound,
    kakeya_l2,
    kakeya_l2_grid,
    omega0_slabs,
    pair_bound,
    random_translates,
)


def _rot(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[2] *= -1
    return q


def _aligned_overlap(c1, h1, c2, h2):
    lo = np.maximum(c1 - h1, c2 - h2)
    hi = np.minimum(c1 + h1, c2 + h2)
    return float(np.prod(np.clip(hi - lo, 0, None)))


coord = st.floats(-3, 3, allow_nan=False)
half = st.floats(0.1, 3, allow_nan=False)


@given(st.tuples(coord, coord, coord), st.tuples(half, half, half), st.tuples(coord, coord, coord), st.tuples(half, half, half))
def test_axis_aligned_matches_closed_form(c1, h1, c2, h2):
    c1, h1, c2, h2 = map(np.array, (c1, h1, c2, h2))
    t1 = Tube(c1, np.eye(3), h1)
    t2 = Tube(c2, np.eye(3), h2)
    assert intersection_volume(t1, t2) == pytest.approx(_aligned_overlap(c1, h1, c2, h2), abs=1e-9)


@given(st.integers(0, 2**20))
def test_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    t1 = Tube(rng.uniform(-1, 1, 3), _rot(rng), rng.uniform(0.5, 2, 3))
    t2 = Tube(rng.uniform(-1, 1, 3), _rot(rng), rng.uniform(0.5, 2, 3))
    v12, v21 = intersection_volume(t1, t2), intersection_volume(t2, t1)
    assert v12 == pytest.approx(v21, abs=1e-9 * t1.volume)
    assert -1e-12 <= v12 <= min(t1.volume, t2.volume) * (1 + 1e-12)


def test_self_intersection_is_volume():
    rng = np.random.default_rng(0)
    t = Tube(np.array([1.0, 2.0, 3.0]), _rot(rng), np.array([1.0, 2.0, 3.0]))
    assert intersection_volume(t, t) == pytest.approx(48.0, rel=1e-12)


def test_translates():
    t = Tube(np.zeros(3), np.eye(3), np.array([1.0, 2.0, 3.0]))
    for shift, vol in [(1.0, 24.0), (5.0 / 3.0, 8.0), (2.0, 0.0), (7.0, 0.0)]:
        assert intersection_volume(t, t.translated([shift, 0, 0])) == pytest.approx(vol, abs=1e-12)


def test_against_monte_carlo_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(40):
        t1 = Tube(rng.uniform(-1, 1, 3), _rot(rng), rng.uniform(0.5, 2, 3))
        t2 = Tube(rng.uniform(-1, 1, 3), _rot(rng), rng.uniform(0.5, 2, 3))
        est, sd = intersection_volume_mc(t1, t2, 20000, rng)
        v = intersection_volume(t1, t2)
        if sd > 0:
            worst = max(worst, abs(v - est) / sd)
        elif est == 0:
            # no hits: a true fraction above 5/n would miss with probability < e^-5
            assert v <= 5 * t1.volume / 20000
        else:
            assert v == pytest.approx(t1.volume, rel=1e-9)
    assert worst < 4.5


def test_bush_frozen():
    ts = bush(64.0, 0.5)
    assert len(ts.tubes) == 2
    assert kakeya_l2(ts) / kakeya_bound(64.0, 0.5) == pytest.approx(0.06886, abs=1e-4)
    assert kakeya_l2_grid(ts) == pytest.approx(kakeya_l2(ts), rel=0.01)


def test_pair_bound_holds_in_bush():
    for R in (64.0, 256.0):
        ts = bush(R, 0.5)
        pairs = []
        kakeya_l2(ts, pairs)
        for i, j, v in pairs:
            jb = angle_bin(ts.tubes[i], ts.tubes[j], R)
            if jb >= 1:
                assert v <= pair_bound(R, 0.5, jb)


def test_random_translates_deterministic():
    a = random_translates(64.0, 0.5, np.random.default_rng(3))
    b = random_translates(64.0, 0.5, np.random.default_rng(3))
    assert kakeya_l2(a) == kakeya_l2(b)
    assert kakeya_l2(a) <= kakeya_l2(bush(64.0, 0.5)) + 1e-9


def test_validation():
    with pytest.raises(ParameterError):
        omega0_slabs(4.0, 0.25)
    t = Tube(np.zeros(3), np.eye(3), np.ones(3), (0, 0))
    with pytest.raises(ParameterError):
        TubeSet([t, t], 16.0, 0.5)


def test_bound_formulas():
    assert kakeya_bound(64.0, 0.5) == pytest.approx(0.5 * 64**2.25 * math.log(64))
    assert pair_bound(256.0, 0.5, 2) == pytest.approx(2 * 256**1.75)
