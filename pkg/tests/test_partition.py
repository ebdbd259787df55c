import math

import pytest
from hypothesis import given, strategies as st

from restriction_lab.errors import ParameterError
from restriction_lab.partition import (
    Region,
    k_regular_decomposition,
    k_regular_intervals,
    lambda_sigma_family,
    region_partition,
    slab_cover,
)

Ks = st.sampled_from([16, 32, 64, 128, 256, 1024, 4096])


def _disjoint(cells):
    for i, a in enumerate(cells):
        for b in cells[i + 1 :]:
            if a.region.overlap_area(b.region) > 1e-15:
                return False
    return True


@pytest.mark.parametrize("K,count", [(16, 4), (256, 36), (4096, 484)])
def test_cell_counts(K, count):
    cells = k_regular_decomposition(K)
    assert len(cells) == count
    assert math.fsum(c.region.area for c in cells) == pytest.approx(1.0, abs=1e-12)


@given(Ks)
def test_decomposition_tiles_square(K):
    cells = k_regular_decomposition(K)
    assert math.fsum(c.region.area for c in cells) == pytest.approx(1.0, abs=1e-12)
    assert _disjoint(cells)
    assert all(Region.unit().contains_region(c.region) for c in cells)


@given(Ks)
def test_intervals_are_dyadic(K):
    ivs = k_regular_intervals(K)
    assert ivs[0].a == 0.0 and ivs[0].b == pytest.approx(K**-0.25)
    assert ivs[-1].b == 1.0
    for a, b in zip(ivs, ivs[1:]):
        assert a.b == pytest.approx(b.a)


def test_bad_K():
    for K in (8, 17, 100):
        with pytest.raises(ParameterError):
            k_regular_decomposition(K)


def test_region_partition_covers():
    parts = region_partition(256)
    assert math.fsum(p.area for p in parts) == pytest.approx(1.0, abs=1e-12)


def test_lambda_sigma_family():
    fam = lambda_sigma_family(16, 256, lam=0.5)
    assert [p.sigma for p in fam] == [None, pytest.approx(0.5)]
    assert fam[0].region.b2 == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        lambda_sigma_family(256, 16)


def test_region_parse_and_validation():
    r = Region.parse("0.5,1,0,0.25")
    assert r.area == pytest.approx(0.125)
    with pytest.raises(ParameterError):
        Region.parse("1,0,0,1")
    with pytest.raises(ParameterError):
        Region.parse("0,1,0")


@given(st.sampled_from([16.0, 64.0, 256.0]), st.sampled_from([0.5, 0.25]))
def test_slab_cover_tiles_region(R, lam):
    if lam * lam * math.sqrt(R) < 1:
        return
    reg = Region(lam, 2 * lam, 0.0, R**-0.25)
    slabs = slab_cover(reg, R, lam)
    assert math.fsum(s.base.area for s in slabs) == pytest.approx(reg.area, rel=1e-12)
    d1 = 1 / (lam * math.sqrt(R))
    assert all(s.sides[0] <= d1 * (1 + 1e-12) for s in slabs)
    assert all(s.thickness == 1 / R for s in slabs)


def test_slab_cover_cell_too_large():
    with pytest.raises(ParameterError):
        slab_cover(Region(0.5, 0.6, 0, 0.1), 16.0, 0.5)
