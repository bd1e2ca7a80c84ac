"""Permutation interleaving of quantized blocks and the joint it induces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..components import ComponentPair
from ..info import variational_distance
from ..regions.corrections import covering_terms, delta_k
from ..regions.schemes import FlmcCodingSpec
from ..source import DistributedSource
from ..typicality import sequence_chunks
from .correction import CorrectionChannel, build_correction
from .quantizer import QuantizerCodebook, build_quantizer, hoeffding_radius
from .rng import stream

SAMPLE_CAP = 2**24
SHUFFLES = 199
ALPHA = 0.01


@dataclass(frozen=True)
class InterleaveResult:
    """Empirical joint of (X1, X2, W1', W2) after interleaving, with diagnostics."""

    joint: np.ndarray
    row_counts: np.ndarray
    m: int
    n: int
    row_pvalue: float
    shuffle_pvalue: float
    agreement: float
    agreement_radius: float
    precorrection_match: float

    def max_z(self, exact: np.ndarray) -> float:
        """Largest cell deviation from ``exact`` in row-level standard errors."""
        p = exact.ravel()
        se = np.sqrt(np.maximum(p * (1 - p), 1e-300) / self.m)
        dev = np.abs(self.joint.ravel() - p)
        z = np.where(p > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
        return float(z.max())


def _draw_t(rng: np.random.Generator, kernel: np.ndarray, s: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(kernel, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(s.shape)
    return (u[..., None] >= cdf[s]).sum(axis=-1)


def _shuffle_pvalue(codes: np.ndarray, rng: np.random.Generator, shuffles: int = SHUFFLES) -> float:
    """Two-sided permutation test of lag-one agreement; exchangeable sequences give uniform p."""
    def stat(c):
        return int((c[1:] == c[:-1]).sum())

    obs = stat(codes)
    null = np.array([stat(rng.permutation(codes)) for _ in range(shuffles)])
    centre = null.mean()
    extreme = np.abs(null - centre) >= abs(obs - centre) - 1e-9
    return float((1 + extreme.sum()) / (shuffles + 1))


def _row_pvalue(row_counts: np.ndarray) -> float:
    keep = row_counts.sum(axis=0) > 0
    table = row_counts[:, keep]
    if table.shape[1] < 2 or table.shape[0] < 2:
        return 1.0
    return float(stats.chi2_contingency(table)[1])


def interleave_and_induce(q: QuantizerCodebook, c: CorrectionChannel, src: DistributedSource,
                          components: ComponentPair, m: int, seed: int = 0,
                          cap: int = SAMPLE_CAP) -> InterleaveResult:
    """Simulate m blocks: quantize both component chains with one codebook,
    correct the first, permute each block, and tabulate rows."""
    n = q.n
    if n * m > cap:
        raise ValueError(f"n*m = {n * m} exceeds the sample cap {cap}")
    k1, k2 = src.sizes
    kw = q.w_size
    flat = stream(seed, 0, "source").choice(k1 * k2, size=(m, n), p=src.pmf.probs.ravel())
    x1, x2 = flat // k2, flat % k2
    s1, s2 = components.f1[x1], components.f2[x2]
    w1, w2 = q.quantize(s1), q.quantize(s2)
    same = np.all(s1 == s2, axis=1)
    pre = float(np.all(w1[same] == w2[same], axis=1).mean()) if same.any() else 1.0
    t = _draw_t(stream(seed, 0, "correction"), c.p_t_given_s, s1)
    w1c = np.where(t == 0, w1, t - 1)
    perm = stream(seed, 0, "permutation").permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    rows = np.arange(m)[:, None]
    x1, x2, w1c, w2 = x1[rows, perm], x2[rows, perm], w1c[rows, perm], w2[rows, perm]
    s1, s2 = s1[rows, perm], s2[rows, perm]
    code = ((x1 * k2 + x2) * kw + w1c) * kw + w2
    cells = k1 * k2 * kw * kw
    row_counts = np.stack([np.bincount(code[:, i], minlength=cells) for i in range(n)])
    joint = (row_counts.sum(axis=0) / (m * n)).reshape(k1, k2, kw, kw)
    agree_blocks = ((w1c == w2) & (s1 == s2)).mean(axis=1)
    shuffle_p = _shuffle_pvalue(code[:, 0], stream(seed, 0, "shuffle"))
    return InterleaveResult(joint, row_counts, m, n, _row_pvalue(row_counts), shuffle_p,
                            float(agree_blocks.mean()), hoeffding_radius(m, ALPHA), pre)


def exact_induced_joint(q: QuantizerCodebook, c: CorrectionChannel, src: DistributedSource,
                        components: ComponentPair, cap: int = 2**20) -> np.ndarray:
    """The position-averaged joint of (X1, X2, W1', W2), by enumerating (s1^n, s2^n)."""
    ks, kw, n = q.s_size, q.w_size, q.n
    if (ks * ks) ** n > cap:
        raise ValueError(f"{ks * ks}^{n} sequence pairs exceed the enumeration cap {cap}")
    p_s = components.joint_s(src)
    acc = np.zeros(ks * ks * kw * kw)
    for digits in sequence_chunks(ks * ks, n):
        a, b = digits // ks, digits % ks
        wt = np.prod(p_s[a, b], axis=1)
        live = wt > 0
        a, b, wt = a[live], b[live], wt[live]
        cell = ((a * ks + b) * kw + q.quantize(a)) * kw + q.quantize(b)
        acc += np.bincount(cell.ravel(), weights=np.repeat(wt / n, n), minlength=acc.size)
    acc = acc.reshape(ks, ks, kw, kw)
    # T acts on W1 given S1 only
    swv = np.einsum("abwz,awv->abvz", acc, c.output_kernel())
    f1, f2 = components.f1, components.f2
    ps = p_s[f1[:, None], f2[None, :]]
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(ps > 0, src.pmf.probs / np.where(ps > 0, ps, 1.0), 0.0)
    return cond[:, :, None, None] * swv[f1[:, None], f2[None, :]]


def with_second_layer(p4: np.ndarray, spec: FlmcCodingSpec) -> np.ndarray:
    """Extend (X1, X2, W1', W2) with U1 ~ P(U1|X1,W1') and U2 ~ P(U2|X2,W2)."""
    return np.einsum("abwz,awu,bzv->abwzuv", p4, spec.p_u1, spec.p_u2)


def reference_joint(src: DistributedSource, spec: FlmcCodingSpec) -> np.ndarray:
    """Single-letter joint with both W copies equal, axes (X1, X2, W, W, U1, U2)."""
    f1 = spec.components.f1
    kw = spec.w_size
    base = np.einsum("ab,aw,awu,bwv->abwuv", src.pmf.probs, spec.p_w[f1], spec.p_u1, spec.p_u2)
    out = np.zeros(base.shape[:3] + (kw,) + base.shape[3:])
    out[:, :, np.arange(kw), np.arange(kw)] = base
    return out


@dataclass(frozen=True)
class InducedDistance:
    distance: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.distance

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12


def induced_distance_check(p_prime, q_ref, epsilon: float, p_tau: float, delta_n: float) -> InducedDistance:
    """Variational distance between the induced and reference joints against
    1 - p(tau) + p(tau) delta_n + epsilon."""
    a = np.asarray(getattr(p_prime, "probs", p_prime), dtype=float)
    b = np.asarray(getattr(q_ref, "probs", q_ref), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"axis mismatch: {a.shape} vs {b.shape}")
    v = variational_distance(a, b)
    return InducedDistance(v, 1 - p_tau + p_tau * delta_n + epsilon)


def induced_joint(src: DistributedSource, spec: FlmcCodingSpec, n: int, tau: float,
                  seed: int = 0) -> np.ndarray:
    """Exact (X1, X2, W1', W2, U1, U2) joint of the construction for ``spec``:
    random quantizer, exact correction, enumeration, then the second layer."""
    p_sw = spec.p_sw(src)
    p_s = p_sw.sum(axis=1)
    q = build_quantizer(p_s, spec.p_w, n, tau, seed=seed)
    c = build_correction(q, p_s, p_sw, "exact")
    return with_second_layer(exact_induced_joint(q, c, src, spec.components), spec)


def induced_distance_exact(src: DistributedSource, spec: FlmcCodingSpec, n: int, tau: float,
                 seed: int = 0) -> InducedDistance:
    """Distance check on the exactly enumerated joint of one construction."""
    eps = spec.components.epsilon
    _, _, p_tau = covering_terms(spec.p_sw(src), n, tau)
    return induced_distance_check(induced_joint(src, spec, n, tau, seed), reference_joint(src, spec), eps,
                        p_tau, delta_k(eps, n))


def agreement_probability(p4: np.ndarray, components: ComponentPair) -> float:
    """P(W1' = W2, S1 = S2) under an (X1, X2, W1', W2) joint."""
    same = components.f1[:, None] == components.f2[None, :]
    diag = np.einsum("abww->ab", p4)
    return float(diag[same].sum())
