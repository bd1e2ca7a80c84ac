from __future__ import annotations

import math

import numpy as np
import pytest

from rdlab._validation import InfeasibleError
from rdlab.boho import (
    BohoGrid,
    BohoParams,
    _boho_corner,
    boho_cc_corner,
    boho_derived,
    boho_flmc_corner,
    boho_gap,
    boho_gap_direct,
    boho_region_sweep,
    boho_source,
    generic_theta_for_bsc,
)
from rdlab.regions.boundary import boundary_distance, envelope_sup_gap, region_contains


def hb(x):
    return 0.0 if x in (0, 1) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def conv(a, b):
    return a * (1 - b) + b * (1 - a)


def test_source_construction():
    src = boho_source(0.3, 0.0)
    probs = src.pmf.probs
    for x in range(2):
        for z in range(2):
            assert probs[x, 2 * x + z] == pytest.approx(0.5 * (0.3 if z else 0.7), abs=1e-15)
    assert probs[0, 2:].sum() == 0 and probs[1, :2].sum() == 0
    assert np.all(src.d1 == 0)
    assert src.d2.shape == (4, 4) and src.d2[0, 3] == 0 and src.d2[0, 1] == 1


@pytest.mark.parametrize("p,eps", [(0.1, 0.01), (0.3, 1e-3), (0.45, 0.2)])
def test_source_mismatch_and_parity(p, eps):
    probs = boho_source(p, eps).pmf.probs
    # X1 differs from the X coordinate of X2 with probability eps
    mismatch = sum(probs[x1, x2] for x1 in range(2) for x2 in range(4) if x1 != x2 // 2)
    assert mismatch == pytest.approx(eps, abs=1e-15)
    parity_one = sum(probs[:, x2].sum() for x2 in (1, 2))
    assert parity_one == pytest.approx(conv(p, 0.5), abs=1e-15)


def test_derived_values():
    d = boho_derived(BohoParams(0.3, 1e-4, 0.2, 0.05, 10_000, 0.048))
    assert d.delta_prime == pytest.approx(0.2 + 0.048 + 8 * math.exp(-11.52), rel=1e-14)
    assert d.delta_prime == pytest.approx(0.2481, abs=1e-4)
    assert d.delta_n == pytest.approx(1 - 0.9999**10_000, rel=1e-10)
    oracle = (math.log2(10_000 * 0.048**2 / 4 - math.log(4)) / 10_000
              + 0.048 * (4 + hb(0.2) - math.log2(0.2 * 0.8)) + 3 / 10_000)
    assert d.theta_prime == pytest.approx(oracle, rel=1e-14)


def test_theta_prime_specializes_generic():
    for delta, n, tau in [(0.2, 10_000, 0.048), (0.1, 40_000, 0.0245), (0.4, 3_000, 0.09)]:
        d = boho_derived(BohoParams(0.3, 1e-6, delta, 0.01, n, tau))
        generic = generic_theta_for_bsc(delta, n, tau)
        # only the log argument differs: 2 n tau^2 / |S|^2 versus n tau^2 / 4
        shift = (math.log2(n * tau**2 / 2 - math.log(4)) - math.log2(n * tau**2 / 4 - math.log(4))) / n
        assert generic - d.theta_prime == pytest.approx(shift, rel=1e-9, abs=1e-15)


def test_param_validation_names_range():
    with pytest.raises(ValueError, match="n=100 outside"):
        boho_derived(BohoParams(0.3, 1e-4, 0.2, 0.05, 100, 0.048))
    with pytest.raises(ValueError, match="tau"):
        boho_derived(BohoParams(0.3, 1e-4, 0.2, 0.05, 10_000, 0.06))
    with pytest.raises(ValueError, match="delta1"):
        boho_derived(BohoParams(0.3, 1e-4, 0.2, 0.45, 10_000, 0.048))
    with pytest.raises(ValueError, match="n=90000 outside"):
        boho_derived(BohoParams(0.3, 1e-4, 0.2, 0.05, 90_000, 0.04))


def test_cc_corner_examples():
    c = boho_cc_corner(0.3, 0.0, 0.0)
    assert (c.r1, c.r2, c.d1, c.d2) == (1.0, pytest.approx(hb(0.3), abs=1e-15), 0.0, 0.0)
    assert boho_cc_corner(0.3, 0.5, 0.1).r1 == 0.0
    c = boho_cc_corner(0.3, 0.1, 0.05)
    assert c.r1 == pytest.approx(1 - hb(0.1), abs=1e-15)
    assert c.r2 == pytest.approx(hb(0.34) - hb(0.05), abs=1e-15)
    assert c.d2 == 0.05
    with pytest.raises(ValueError):
        boho_cc_corner(0.3, 0.1, 0.6)


def test_zeroed_losses_give_cc_corner_exactly():
    for p, delta, d1 in [(0.3, 0.2, 0.05), (0.1, 0.05, 0.2), (0.45, 0.4, 0.01)]:
        cc = boho_cc_corner(p, delta, d1)
        assert _boho_corner(p, delta, d1, delta, 0.0, 0.0) == (cc.r1, cc.r2, cc.d2)


def test_flmc_corner_formula():
    prm = BohoParams(0.3, 1e-5, 0.2, 0.05, 10_000, 0.048)
    c = boho_flmc_corner(prm)
    d = boho_derived(prm)
    dn = d.delta_n
    assert c.r1 == pytest.approx(1 - hb(0.2) + d.theta_prime, abs=1e-14)
    assert c.r2 == pytest.approx(hb(conv(0.3, d.delta_prime)) - hb(0.05), abs=1e-14)
    assert c.d2 == pytest.approx(0.05 + dn * (d.delta_prime + conv(1e-5 / dn, d.delta_prime)), abs=1e-15)


def test_flmc_corner_vanishing_loss_limit():
    gaps = []
    for eps in (1e-6, 1e-9, 1e-12):
        c = boho_flmc_corner(BohoParams(0.3, eps, 0.2, 0.05, 20_000, 0.04))
        gaps.append(c.d2 - 0.05)
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert gaps[2] < 1e-7


def test_flmc_corner_r2_near_zero():
    prm = BohoParams(0.3, 1e-5, 0.2, 0.05, 10_000, 0.048)
    ceiling = conv(0.3, boho_derived(prm).delta_prime)
    c = boho_flmc_corner(BohoParams(0.3, 1e-5, 0.2, ceiling * (1 - 1e-8), 10_000, 0.048))
    assert 0 <= c.r2 < 1e-6


def test_gap_two_paths_agree():
    args = (0.3, 1e-5, 0.2, 0.05, 10_000, 0.048)
    g = boho_gap(*args)
    assert g == pytest.approx(boho_gap_direct(*args), abs=1e-12)
    assert g >= boho_derived(BohoParams(*args)).theta_prime


def test_gap_shrinks_as_eps_vanishes():
    gaps = []
    delta = 0.3
    for eps in (1e-6, 1e-9, 1e-12, 1e-15):
        n = int(10 * eps ** -0.5)
        lo, hi = 2 * math.sqrt(math.log(32 / delta) / n), delta / 4
        gaps.append(boho_gap(0.3, eps, delta, 0.05, n, math.sqrt(lo * hi)))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_sweep_empty_for_large_eps():
    with pytest.raises(InfeasibleError, match="B\\(eps\\) empty"):
        boho_region_sweep(0.3, 0.4, 0.15)


def test_cc_sweep_points_are_cc_corners():
    b = boho_region_sweep(0.3, 0.0, 0.15)
    for c in b.corners:
        ref = boho_cc_corner(0.3, c.provenance["delta"], c.provenance["delta1"])
        assert (c.rd.r1, c.rd.r2) == pytest.approx((ref.r1, ref.r2), abs=1e-14)
        assert c.provenance["delta1"] == 0.15


@pytest.fixture(scope="module")
def fig4():
    eps_list = (1e-4, 1e-5, 1e-7, 1e-14, 0.0)
    grid = BohoGrid().with_shared_n(eps_list)
    return {e: boho_region_sweep(0.3, e, 0.15, grid) for e in eps_list}


def test_sweep_nesting(fig4):
    order = (1e-4, 1e-5, 1e-7, 1e-14, 0.0)
    for big, small in zip(order, order[1:]):
        ok, worst = region_contains(fig4[small], fig4[big], 1e-9)
        assert ok, (big, small, worst)
    assert not region_contains(fig4[1e-4], fig4[0.0], 1e-9)[0]
    assert not region_contains(fig4[1e-4], fig4[1e-7], 1e-9)[0]


def test_sweep_convergence_to_cc(fig4):
    grid = np.linspace(0, 1, 1001)
    assert envelope_sup_gap(fig4[0.0], fig4[1e-14], grid) < 0.02
    assert boundary_distance(fig4[0.0], fig4[1e-14]) < 0.02


def test_sweep_corners_meet_d2(fig4):
    for eps, b in fig4.items():
        for c in b.corners:
            assert c.rd.d2 <= 0.15 + 1e-12
            if eps:
                prm = BohoParams(0.3, eps, c.provenance["delta"], c.provenance["delta1"],
                                 c.provenance["n"], c.provenance["tau"])
                ref = boho_flmc_corner(prm)
                assert (c.rd.r1, c.rd.r2, c.rd.d2) == pytest.approx((ref.r1, ref.r2, ref.d2), abs=1e-12)
