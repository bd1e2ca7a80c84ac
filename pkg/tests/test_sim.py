from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdlab.boho import BohoParams, boho_source
from rdlab.components import make_pair
from rdlab.info import JointDist, binary_entropy
from rdlab.regions.corrections import min_tau_for_theta, theta_n
from rdlab.regions.schemes import random_spec
from rdlab.sim.boho_sim import boho_end_to_end, targeted_codebook
from rdlab.sim.correction import (
    CorrectionChannel,
    average_type,
    build_correction,
    correction_from_average,
    correction_rate,
)
from rdlab.sim.interleave import (
    agreement_probability,
    induced_distance_check,
    induced_distance_exact,
    reference_joint,
    exact_induced_joint,
    interleave_and_induce,
    with_second_layer,
)
from rdlab.sim.quantizer import (
    QuantizerCodebook,
    build_quantizer,
    codebook_size,
    explicit_codebook,
    measure_covering,
)
from rdlab.sim.report import SimConfig
from rdlab.sim.rng import stream
from rdlab.sim.runner import run_sim
from rdlab.textio import ParseError
from rdlab.typicality import typical_set_array


def bsc_target(delta):
    return 0.5 * np.array([[1 - delta, delta], [delta, 1 - delta]])


def naive_dn(s, w, target):
    n = len(s)
    counts = np.zeros_like(target)
    for a, b in zip(s, w):
        counts[a, b] += 1
    return np.abs(counts / n - target).max()


def naive_encode(s, words, target, phi):
    for i, w in enumerate(words):
        if naive_dn(s, w, target) <= phi + 1e-12:
            return i
    return 0


# --- random streams ---------------------------------------------------------

def test_streams_reproduce_and_separate():
    a = stream(5, 2, "codebook").random(8)
    assert np.array_equal(a, stream(5, 2, "codebook").random(8))
    assert not np.array_equal(a, stream(5, 2, "permutation").random(8))
    assert not np.array_equal(a, stream(5, 3, "codebook").random(8))
    assert not np.array_equal(a, stream(6, 2, "codebook").random(8))
    with pytest.raises(ValueError):
        stream(-1, 0, "x")


def test_streams_uncorrelated():
    x = stream(0, 0, "source").random(200_000)
    y = stream(0, 0, "correction").random(200_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(200_000)


# --- quantizer ----------------------------------------------------------------

def test_single_output_symbol_gives_constant_encoder():
    n = 6
    q = build_quantizer([0.4, 0.6], [[1.0], [1.0]], n, 1.05 * min_tau_for_theta(2, n))
    rows = np.array(list(itertools.product(range(2), repeat=n)))
    assert np.all(q.quantize(rows) == 0)


def test_blocklength_one_by_hand():
    # S uniform binary, W = S; words 0 and 1
    target = bsc_target(0.0) + 0.0
    q = explicit_codebook([[0], [1]], 2, target, phi=0.5)
    # d_1(0, 0) = |1 - 1/2| = 1/2 <= phi; d_1(1, 0) = |1 - 0| = 1, d_1(1, 1) = 1/2
    assert q.encode([[0], [1]]).tolist() == [0, 1]
    q = explicit_codebook([[0], [1]], 2, target, phi=0.49)
    # no word is typical: both fall back to index 0
    assert q.encode([[0], [1]]).tolist() == [0, 0]
    hb = explicit_codebook([[0], [1]], 2, target, phi=0.0, rule="min-hamming")
    assert hb.encode([[0], [1]]).tolist() == [0, 1]


def test_min_hamming_ties_pick_lowest_index():
    q = explicit_codebook([[0, 0, 1], [1, 0, 0], [0, 0, 0]], 2, bsc_target(0.1), 0.0,
                          rule="min-hamming")
    # 101 is at distance 1 from both words 0 and 1
    assert q.encode([[1, 0, 1]]).tolist() == [0]
    assert q.encode([[0, 1, 0]]).tolist() == [2]


@pytest.mark.parametrize("n,delta", [(6, 0.2), (8, 0.25), (10, 0.1)])
def test_codebook_size_against_independent_formula(n, delta):
    tau = 1.1 * min_tau_for_theta(2, n)
    q = build_quantizer([0.5, 0.5], [[1 - delta, delta], [delta, 1 - delta]], n, tau, seed=3)
    # uniform input through a BSC: I(W;S) = 1 - h(delta)
    bound = 1 - binary_entropy(delta) + theta_n(bsc_target(delta), n, tau)
    e = n * bound - 1
    assert q.size == max(1, math.ceil(2.0**e))
    assert q.size >= 2.0**e and (q.size - 1) < 2.0**e
    assert math.log2(q.size) / n <= bound + 1e-12
    assert q.rate_bound == pytest.approx(bound, abs=1e-12)


def test_codebook_size_rejects_overflowing_exponent():
    with pytest.raises(ValueError):
        codebook_size(200.0, 10)
    assert codebook_size(0.0, 5) == 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.45), st.integers(2, 10), st.floats(1.01, 2.0), st.integers(0, 2**32))
def test_rate_accounting_property(delta, n, scale, seed):
    tau = scale * min_tau_for_theta(2, n)
    q = build_quantizer([0.5, 0.5], [[1 - delta, delta], [delta, 1 - delta]], n, tau, seed=seed)
    assert q.rate <= q.rate_bound + 1e-12


def test_lazy_codebook_is_deterministic_and_nested():
    n, tau = 8, 0.7
    kern = [[0.8, 0.2], [0.2, 0.8]]
    q = build_quantizer([0.5, 0.5], kern, n, tau, seed=11)
    again = build_quantizer([0.5, 0.5], kern, n, tau, seed=11)
    other = build_quantizer([0.5, 0.5], kern, n, tau, seed=12)
    short = q.truncated(5000)
    assert np.array_equal(short.codewords(), again.truncated(5000).codewords())
    assert not np.array_equal(short.codewords(), other.truncated(5000).codewords())
    assert np.array_equal(q.truncated(100).codewords(), short.codewords()[:100])
    # every word is a member of the W-typical pool
    pool = {tuple(r) for r in q.pool}
    assert all(tuple(r) in pool for r in short.codewords())


def lazy_book(n, delta, phi, size, seed):
    """Lazy typical-rule codebook at a small phi, outside the theta_n range."""
    target = bsc_target(delta)
    pool = typical_set_array(JointDist(np.array([0.5, 0.5])), n, 0.5)
    return QuantizerCodebook(n, 2, 2, "typical", size, pool, seed=seed, target=target, phi=phi)


def test_typical_encoder_matches_naive_first_index():
    n = 6
    target = bsc_target(0.2)
    q = lazy_book(n, 0.2, 0.1, 40, seed=4)
    words = q.codewords()
    rows = np.array(list(itertools.product(range(2), repeat=n)))
    expect = [naive_encode(r, words, target, q.phi) for r in rows]
    assert q.encode(rows).tolist() == expect


def test_phi_at_least_one_never_fails():
    q = explicit_codebook([[0, 0, 0]], 2, bsc_target(0.2), phi=1.0)
    res = measure_covering(q, [0.5, 0.5], bsc_target(0.2), 1.0)
    assert res.failure == 0.0


def test_covering_floor_and_monotone_failure():
    n = 8
    target = bsc_target(0.25)
    ps = np.array([0.5, 0.5])
    q = lazy_book(n, 0.25, 0.1, 4096, seed=9)
    phi = q.phi
    # floor: the whole pool as codebook; oracle by brute force
    floor = 0.0
    for s in itertools.product(range(2), repeat=n):
        if not any(naive_dn(s, w, target) <= phi + 1e-12 for w in q.pool):
            floor += 0.5**n
    full = explicit_codebook(q.pool, 2, target, phi)
    assert measure_covering(full, ps, target, phi).failure == pytest.approx(floor, abs=1e-12)
    sizes = [1, 2, 4, 8, 16, 64, 256, 1024, 4096]
    fails = [measure_covering(q.truncated(s), ps, target, phi).failure for s in sizes]
    assert all(a >= b - 1e-12 for a, b in zip(fails, fails[1:]))
    assert fails[-1] >= floor - 1e-12


def test_sampled_covering_agrees_with_exact():
    target = bsc_target(0.25)
    ps = np.array([0.5, 0.5])
    q = lazy_book(8, 0.25, 0.1, 16, seed=9)
    exact = measure_covering(q, ps, target, q.phi)
    samp = measure_covering(q, ps, target, q.phi, mode="sampled", samples=20_000, seed=1)
    assert abs(exact.failure - samp.failure) <= samp.radius


def test_quantizer_errors():
    with pytest.raises(ValueError):
        build_quantizer([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]], 6, 1.0)
    with pytest.raises(ValueError):
        build_quantizer([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]], 6, 1.0, rule="min-hamming")


# --- correction ---------------------------------------------------------------

def test_identity_correction_keeps_everything():
    target = bsc_target(0.2)
    c = correction_from_average(target.copy(), target)
    assert np.allclose(c.keep, 1.0)
    r = correction_rate(c, [0.5, 0.5], p_tau=0.9)
    assert r.h_t == 0.0 and c.residual == 0.0


def test_uniform_rows_at_p_tau_meet_lambda():
    p_tau, kw = 0.7, 2
    row = [p_tau] + [(1 - p_tau) / kw] * kw
    kern = np.array([row, row])
    c = CorrectionChannel(kern, np.zeros((2, 2)), bsc_target(0.1), bsc_target(0.1), "exact", 4,
                          math.nan)
    r = correction_rate(c, [0.5, 0.5], p_tau=p_tau)
    assert r.h_t == pytest.approx(binary_entropy(p_tau) + (1 - p_tau) * math.log2(kw), abs=1e-12)
    assert r.h_t == pytest.approx(r.lambda_n, abs=1e-12)


def naive_average(q, ps, target_shape):
    n = q.n
    out = np.zeros(target_shape)
    for s in itertools.product(range(len(ps)), repeat=n):
        w = q.quantize([s])[0]
        prob = np.prod([ps[a] for a in s])
        for a, b in zip(s, w):
            out[a, b] += prob / n
    return out


@pytest.mark.parametrize("n", [4, 6, 8])
def test_exact_correction_hits_bsc_target(n):
    delta = 0.2
    target = bsc_target(delta)
    tau = 1.05 * min_tau_for_theta(2, n)
    q = build_quantizer([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]], n, tau, seed=n)
    avg = average_type(q, [0.5, 0.5])
    assert np.allclose(avg, naive_average(q, [0.5, 0.5], (2, 2)), atol=1e-14)
    c = build_correction(q, [0.5, 0.5], target)
    assert c.residual < 1e-10
    r = correction_rate(c, [0.5, 0.5], strict=False)
    assert r.h_t <= r.grouping_bound + 1e-12


pmfs = st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4).map(
    lambda v: np.array(v).reshape(2, 2) / sum(v))


@settings(max_examples=80, deadline=None)
@given(pmfs, pmfs)
def test_correction_channel_property(avg, tgt):
    # match S-marginals so a correction exists
    avg = avg / avg.sum(axis=1, keepdims=True) * tgt.sum(axis=1, keepdims=True)
    c = correction_from_average(avg, tgt)
    assert np.all(c.p_t_given_s >= 0)
    assert np.allclose(c.p_t_given_s.sum(axis=1), 1.0, atol=1e-12)
    assert c.residual < 1e-10
    r = correction_rate(c, tgt.sum(axis=1), p_tau=0.5, strict=False)
    assert r.h_t <= r.grouping_bound + 1e-12
    if r.applicable:
        assert r.h_t <= r.lambda_n + 1e-12


def test_correction_rejects_mismatched_marginal():
    q = explicit_codebook([[0, 0]], 2, bsc_target(0.2), 1.0)
    with pytest.raises(ValueError):
        build_correction(q, [0.3, 0.7], bsc_target(0.2))


# --- interleaving -------------------------------------------------------------

def _setup(eps, n=6, tau=0.7, seed=2):
    src = boho_source(0.3, eps)
    pair = make_pair(src, [0, 1], [0, 0, 1, 1])
    ps = pair.joint_s(src).sum(axis=1)
    target = ps[:, None] * np.array([[0.8, 0.2], [0.2, 0.8]])
    q = build_quantizer(ps, [[0.8, 0.2], [0.2, 0.8]], n, tau, seed=seed)
    c = build_correction(q, ps, target)
    return src, pair, q, c, target


def test_common_input_gives_identical_chains():
    src, pair, q, c, _ = _setup(0.0)
    res = interleave_and_induce(q, c, src, pair, 2000, seed=1)
    assert res.precorrection_match == 1.0


def test_exact_joint_marginals():
    src, pair, q, c, target = _setup(0.01)
    p4 = exact_induced_joint(q, c, src, pair)
    assert p4.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(p4.sum(axis=(2, 3)), src.pmf.probs, atol=1e-14)
    # the corrected W1' chain has the target joint with S1
    sw = np.zeros((2, 2))
    np.add.at(sw, pair.f1, p4.sum(axis=(1, 3)))
    assert np.allclose(sw, target, atol=1e-12)


def test_empirical_joint_tracks_exact():
    src, pair, q, c, _ = _setup(0.01)
    res = interleave_and_induce(q, c, src, pair, 50_000, seed=3)
    exact = exact_induced_joint(q, c, src, pair)
    assert res.max_z(exact) < 4.0
    assert res.row_pvalue > 1e-3 and res.shuffle_pvalue > 1e-3
    assert abs(res.agreement - agreement_probability(exact, pair)) <= res.agreement_radius


def test_interleave_cap():
    src, pair, q, c, _ = _setup(0.01)
    with pytest.raises(ValueError):
        interleave_and_induce(q, c, src, pair, 1000, cap=100)


@pytest.mark.parametrize("n,seed", [(4, 0), (6, 1), (8, 2)])
def test_induced_distance_exact_constructions(n, seed):
    src = boho_source(0.3, 1e-3)
    pair = make_pair(src, [0, 1], [0, 0, 1, 1])
    spec = random_spec(src, pair, np.random.default_rng(seed), w_size=2)
    r = induced_distance_exact(src, spec, n, 1.05 * min_tau_for_theta(2, n), seed=seed)
    assert r.passed and r.margin > 0


def test_reference_joint_and_axes():
    src = boho_source(0.3, 0.0)
    pair = make_pair(src, [0, 1], [0, 0, 1, 1])
    spec = random_spec(src, pair, np.random.default_rng(5), w_size=2)
    ref = reference_joint(src, spec)
    assert ref.sum() == pytest.approx(1.0, abs=1e-12)
    # off-diagonal W copies carry no mass
    assert ref[:, :, 0, 1].sum() == 0 and ref[:, :, 1, 0].sum() == 0
    r = induced_distance_check(ref, ref, 0.0, 1.0, 0.0)
    assert r.distance == 0.0 and r.bound == 0.0 and r.passed
    with pytest.raises(ValueError):
        induced_distance_check(ref, ref[..., :1], 0.0, 1.0, 0.0)


def test_second_layer_extension_marginalizes_back():
    src, pair, q, c, _ = _setup(0.01)
    spec = random_spec(src, pair, np.random.default_rng(1), w_size=2)
    p4 = exact_induced_joint(q, c, src, pair)
    assert np.allclose(with_second_layer(p4, spec).sum(axis=(4, 5)), p4, atol=1e-15)


# --- BOHO end to end ------------------------------------------------------------

def test_targeted_codebook_distortion_is_exact():
    q, d = targeted_codebook(6, 4, 0.25, seed=0, draws=8)
    xs = np.array(list(itertools.product(range(2), repeat=6)))
    words = q.codewords()
    naive = np.mean([min(np.sum(x != w) for w in words) for x in xs]) / 6
    assert d == pytest.approx(naive, abs=1e-15)


def test_boho_without_mismatch_collapses():
    prm = BohoParams(0.3, 0.0, 0.25, 0.05, 8, math.nan)
    res = boho_end_to_end(prm, 20_000, seed=2)
    assert res.mismatch == 0.0
    assert abs(res.d2 - 0.05) <= res.radius


def test_boho_reference_setting_passes_gates():
    prm = BohoParams(0.3, 1e-3, 0.25, 0.05, 8, math.nan)
    res = boho_end_to_end(prm, 100_000, seed=0)
    assert res.d2_margin >= 0 and res.row_mean_margin >= 0
    assert abs(res.delta_prime - res.exact_delta_prime) < 0.01


@pytest.mark.parametrize("kw", [dict(n=21), dict(epsilon=0.4), dict(delta1=0.6)])
def test_boho_rejects_infeasible(kw):
    base = dict(p=0.3, epsilon=1e-3, delta=0.25, delta1=0.05, n=8, tau=math.nan)
    with pytest.raises(ValueError):
        boho_end_to_end(BohoParams(**{**base, **kw}), 10)


# --- runner -------------------------------------------------------------------

FLMC_CFG = """\
kind = {kind}
seed = 7
trials = 3
n = 6
m = 20000
source = boho:p=0.3,eps=0.001
f1 = 0 1
f2 = 0 0 1 1
p_w = 0.8 0.2 0.2 0.8
tau = 0.7
"""


@pytest.mark.parametrize("kind", ["quantizer", "correction", "interleave"])
def test_runner_flmc_kinds_pass_and_are_thread_independent(kind):
    text = FLMC_CFG.format(kind=kind)
    if kind != "interleave":
        text = text.replace("m = 20000\n", "")
    cfg = SimConfig.from_text(text)
    a, b = run_sim(cfg, threads=1), run_sim(cfg, threads=4)
    assert a.passed, a.failures()
    assert a.to_text() == b.to_text() and a.trials_csv() == b.trials_csv()
    assert len(a.rows) == 3


def test_runner_boho_and_seed_dependence():
    cfg = SimConfig.from_text("kind = boho\nseed = 3\ntrials = 2\nn = 8\nm = 20000\n"
                              "source = boho:p=0.3,eps=0.001\n")
    a = run_sim(cfg, threads=1)
    assert a.passed
    assert a.to_text() == run_sim(cfg, threads=2).to_text()
    assert a.to_text() != run_sim(cfg.with_seed(4)).to_text()


def test_config_round_trip_and_errors():
    cfg = SimConfig.from_text(FLMC_CFG.format(kind="interleave"))
    assert SimConfig.from_text(cfg.to_text()) == cfg
    big = SimConfig.from_text("kind = boho\nseed = 18446744073709551615\nn = 8\n"
                              "source = boho:p=0.3,eps=0\n")
    assert big.seed == 2**64 - 1
    with pytest.raises(ParseError):
        SimConfig.from_text(FLMC_CFG.format(kind="interleave") + "bogus = 1\n")
    with pytest.raises(ParseError):
        SimConfig.from_text("kind = boho\nn = 8\n")
    with pytest.raises(ParseError):
        SimConfig.from_text("kind = nope\nn = 8\nsource = x\n")
    with pytest.raises(ParseError):
        SimConfig.from_text("kind = boho\nseed = 1.5\nn = 8\nsource = boho:p=0.3,eps=0\n")


# --- multi-letter region ------------------------------------------------------

def test_mcml_distortion_matches_direct_sum():
    from rdlab.regions.corrections import flmc_corrections
    from rdlab.regions.schemes import mcml_alpha
    from rdlab.sim.interleave import induced_joint

    src = boho_source(0.3, 1e-3)
    pair = make_pair(src, [0, 1], [0, 0, 1, 1])
    spec = random_spec(src, pair, np.random.default_rng(8), w_size=2)
    n, tau = 6, 1.05 * min_tau_for_theta(2, 6)
    p6 = induced_joint(src, spec, n, tau, seed=1)
    terms = flmc_corrections(pair, spec.p_sw(src), n, tau, src.dmax, spec.joint_card(),
                             enforce_ranges=False)
    poly = mcml_alpha(src, spec, JointDist(p6, tol=1e-9), terms)
    d2 = 0.0
    for idx in itertools.product(*map(range, p6.shape)):
        x1, x2, w1, w2, u1, u2 = idx
        d2 += p6[idx] * src.d2[x2, spec.g2[w1, u1, u2]]
    assert poly.d2 == pytest.approx(d2, abs=1e-12)
    assert poly.r1 >= terms.e_n + terms.lambda_n - 1e-12
    assert poly.r2 >= terms.e_n - 1e-12


def test_mcml_region_fit():
    from rdlab.regions.estimators import MCMLRegion

    src = boho_source(0.3, 1e-3)
    pair = make_pair(src, [0, 1], [0, 0, 1, 1])
    est = MCMLRegion(d2=0.3, n=6, components=pair, n_specs=8, w_size=2).fit(src)
    assert est.corners_ and all(c.provenance["scheme"] == "mcml" for c in est.corners_)
    assert len(est.corners_) + 2 * len(est.skipped_) == 16
    again = MCMLRegion(d2=0.3, n=6, components=pair, n_specs=8, w_size=2, threads=3).fit(src)
    assert again.boundary_.corners == est.boundary_.corners
