"""Finite-blocklength quantizers and their covering behaviour."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..info import JointDist, mutual_info
from ..regions.corrections import covering_terms, theta_n
from ..typicality import ENUM_CAP, TYPICAL_TOL, sequence_chunks, typical_set_array
from .rng import stream

CODEBOOK_CAP = 2**22
CHUNK = 4096
# rows x candidates evaluated per batch when matching
_BATCH_CELLS = 1 << 22
RULES = ("typical", "min-hamming")


def seq_codes(rows: np.ndarray, k: int) -> np.ndarray:
    """Base-k integer code of each row, most significant symbol first."""
    rows = np.asarray(rows, dtype=np.int64)
    weights = k ** np.arange(rows.shape[1] - 1, -1, -1, dtype=np.int64)
    return rows @ weights


def dn_rows(s: np.ndarray, w: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Max-cell joint-type deviation for aligned rows of s and w."""
    ks, kw = target.shape
    n = s.shape[1]
    cells = s * kw + w
    counts = np.stack([(cells == c).sum(axis=1) for c in range(ks * kw)], axis=1)
    return np.abs(counts / n - target.ravel()[None, :]).max(axis=1)


def dn_matrix(s: np.ndarray, w: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Max-cell deviation for every (row of s, row of w) pair."""
    ks, kw = target.shape
    n = s.shape[1]
    out = np.zeros((s.shape[0], w.shape[0]))
    ind_w = [(w == b).astype(np.float64).T for b in range(kw)]
    for a in range(ks):
        ia = (s == a).astype(np.float64)
        for b in range(kw):
            np.maximum(out, np.abs(ia @ ind_w[b] / n - target[a, b]), out=out)
    return out


def hamming_matrix(s: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (s[:, None, :] != w[None, :, :]).sum(axis=2)


@dataclass(frozen=True, eq=False)
class QuantizerCodebook:
    """A codebook of ``size`` words of length ``n`` and its encoder.

    With ``seed`` set, word i is ``pool[idx_i]`` where the indices are drawn
    uniformly, with replacement, in chunks from a counter-based stream, so a
    codebook of any size is defined without being stored. Without a seed
    the pool rows are the codewords.
    """

    n: int
    s_size: int
    w_size: int
    rule: str
    size: int
    pool: np.ndarray
    seed: int | None = None
    target: np.ndarray | None = None
    phi: float = math.nan
    tau: float = math.nan
    rate_bound: float = math.nan
    _chunks: dict = field(default_factory=dict, repr=False, compare=False)
    _table: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.size < 1:
            raise ValueError("a codebook needs at least one word")
        if self.seed is None and self.size > len(self.pool):
            raise ValueError("explicit codebook is smaller than its declared size")
        if self.rule == "typical" and self.target is None:
            raise ValueError("the typicality rule needs a target joint pmf")

    @property
    def lazy(self) -> bool:
        return self.seed is not None

    @property
    def rate(self) -> float:
        return math.log2(self.size) / self.n

    def truncated(self, size: int) -> "QuantizerCodebook":
        """The first ``size`` words; shares every word with the parent."""
        if not 1 <= size <= self.size:
            raise ValueError(f"size must lie in [1, {self.size}]")
        return replace(self, size=int(size), _chunks=self._chunks, _table={})

    def _chunk(self, c: int) -> np.ndarray:
        got = self._chunks.get(c)
        if got is None:
            got = stream(self.seed, c, "codebook").integers(0, len(self.pool), CHUNK)
            self._chunks[c] = got
        return got

    def pool_index(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if not self.lazy:
            return idx
        out = np.empty_like(idx)
        for c in np.unique(idx // CHUNK):
            sel = idx // CHUNK == c
            out[sel] = self._chunk(int(c))[idx[sel] % CHUNK]
        return out

    def codewords(self, limit: int = CODEBOOK_CAP) -> np.ndarray:
        if self.size > limit:
            raise ValueError(f"codebook of {self.size} words exceeds the cap {limit}")
        return self.pool[self.pool_index(np.arange(self.size))]

    def _match(self, rows: np.ndarray) -> np.ndarray:
        return dn_matrix(rows, self.pool, self.target) <= self.phi + TYPICAL_TOL

    def _encode_batch(self, rows: np.ndarray) -> np.ndarray:
        if self.rule == "min-hamming":
            return hamming_matrix(rows, self.codewords()).argmin(axis=1)
        match = self._match(rows)
        out = np.zeros(rows.shape[0], dtype=np.int64)
        if not self.lazy:
            hit = match[:, : self.size]
            found = hit.any(axis=1)
            out[found] = hit[found].argmax(axis=1)
            return out
        # rows that no pool member matches fall back at once
        pending = np.flatnonzero(match.any(axis=1))
        c = 0
        while pending.size and c * CHUNK < self.size:
            take = min(CHUNK, self.size - c * CHUNK)
            sub = match[np.ix_(pending, self._chunk(c)[:take])]
            hit = sub.any(axis=1)
            out[pending[hit]] = c * CHUNK + sub[hit].argmax(axis=1)
            pending = pending[~hit]
            c += 1
        return out

    def encode(self, rows) -> np.ndarray:
        """Index of each row's codeword: the first jointly typical word or the
        nearest in Hamming distance, lowest index on ties; index 0 on failure."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
        if rows.shape[1] != self.n:
            raise ValueError(f"rows must have length {self.n}")
        step = max(1, _BATCH_CELLS // max(len(self.pool), 1))
        parts = [self._encode_batch(rows[i:i + step]) for i in range(0, rows.shape[0], step)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def quantize(self, rows) -> np.ndarray:
        """Codeword rows for each input row, via a full table when it is small."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
        if self.s_size**self.n <= 1 << 16:
            return self.table()[seq_codes(rows, self.s_size)]
        return self.pool[self.pool_index(self.encode(rows))]

    def table(self) -> np.ndarray:
        """Codeword for every sequence of the source alphabet, in lexicographic order."""
        got = self._table.get("words")
        if got is None:
            if self.s_size**self.n > ENUM_CAP:
                raise ValueError(f"{self.s_size}^{self.n} sequences exceed the enumeration cap")
            idx = np.concatenate([self.encode(b) for b in sequence_chunks(self.s_size, self.n)])
            got = self.pool[self.pool_index(idx)]
            self._table["words"] = got
        return got


def codebook_size(rate_bound: float, n: int) -> int:
    """ceil(2^(n (I + theta_n) - 1)) as an exact integer."""
    e = n * rate_bound - 1
    if e > 1000:
        raise ValueError(f"codebook exponent {e:.4g} is beyond float range")
    return max(1, math.ceil(2.0**e))


def build_quantizer(p_s, p_w_given_s, n: int, tau: float, rule: str = "typical",
                    seed: int = 0, codewords=None, cap: int = CODEBOOK_CAP) -> QuantizerCodebook:
    """Random typical-set codebook sized from I(W;S) and theta_n(tau).

    With ``rule='min-hamming'`` the given ``codewords`` are used as is.
    """
    ps = np.asarray(getattr(p_s, "probs", p_s), dtype=float)
    kern = np.asarray(getattr(p_w_given_s, "kernel", p_w_given_s), dtype=float)
    target = ps[:, None] * kern
    ks, kw = target.shape
    if n < 1:
        raise ValueError("n must be at least 1")
    if rule == "min-hamming":
        if codewords is None:
            raise ValueError("the min-hamming rule needs explicit codewords")
        cw = np.atleast_2d(np.asarray(codewords, dtype=np.int64))
        if len(cw) > cap:
            raise ValueError(f"codebook of {len(cw)} words exceeds the cap {cap}")
        return QuantizerCodebook(n, ks, kw, rule, len(cw), cw, target=target, tau=tau)
    if rule != "typical":
        raise ValueError(f"rule must be one of {RULES}")
    if np.any(target <= 0):
        raise ValueError("the typicality rule needs a target with no zero cells")
    info = mutual_info(JointDist(target), 0, 1)
    bound = info + theta_n(target, n, tau)
    size = codebook_size(bound, n)
    # rate accounting: log2(size)/n <= I + theta_n
    if math.log2(size) / n > bound + 1e-12:
        raise ValueError(f"rate {math.log2(size) / n:.6g} exceeds I + theta_n = {bound:.6g}")
    tau_hat = tau * (ks + kw)
    pool = typical_set_array(JointDist(target.sum(axis=0)), n, tau_hat)
    if len(pool) == 0:
        raise ValueError(f"typical set of W is empty at n={n}, tau_hat={tau_hat}")
    phi = tau * (1 / ks + 1 / kw)
    return QuantizerCodebook(n, ks, kw, "typical", size, pool, seed=int(seed), target=target,
                             phi=phi, tau=tau, rate_bound=bound)


def explicit_codebook(codewords, s_size: int, target, phi: float,
                      rule: str = "typical") -> QuantizerCodebook:
    """Codebook with the given words, in order."""
    cw = np.atleast_2d(np.asarray(codewords, dtype=np.int64))
    t = np.asarray(getattr(target, "probs", target), dtype=float)
    return QuantizerCodebook(cw.shape[1], s_size, t.shape[1], rule, len(cw), cw, target=t, phi=phi)


@dataclass(frozen=True)
class CoveringResult:
    failure: float
    radius: float
    mode: str
    samples: int
    phi: float


def _source_prob(rows: np.ndarray, ps: np.ndarray) -> np.ndarray:
    return np.prod(ps[rows], axis=1)


def hoeffding_radius(samples: int, alpha: float = 0.01) -> float:
    return math.sqrt(math.log(2 / alpha) / (2 * samples))


def measure_covering(q: QuantizerCodebook, p_s, target, phi: float, mode: str = "exact",
                     samples: int = 10_000, seed: int = 0, cap: int = ENUM_CAP) -> CoveringResult:
    """P(d_n(S^n, Q(S^n)) > phi), exactly or by sampling with a 99% Hoeffding radius."""
    ps = np.asarray(getattr(p_s, "probs", p_s), dtype=float)
    t = np.asarray(getattr(target, "probs", target), dtype=float)
    if phi >= 1:
        return CoveringResult(0.0, 0.0, mode, 0, phi)
    if mode == "exact":
        if q.s_size**q.n > cap:
            raise ValueError(f"{q.s_size}^{q.n} sequences exceed the enumeration cap {cap}")
        fail = 0.0
        for rows in sequence_chunks(q.s_size, q.n):
            bad = dn_rows(rows, q.quantize(rows), t) > phi + TYPICAL_TOL
            fail += float(_source_prob(rows, ps)[bad].sum())
        return CoveringResult(min(fail, 1.0), 0.0, mode, 0, phi)
    if mode != "sampled":
        raise ValueError("mode must be 'exact' or 'sampled'")
    rows = stream(seed, 0, "covering").choice(q.s_size, size=(samples, q.n), p=ps)
    bad = dn_rows(rows, q.quantize(rows), t) > phi + TYPICAL_TOL
    return CoveringResult(float(bad.mean()), hoeffding_radius(samples), mode, samples, phi)


def covering_guarantee(q: QuantizerCodebook) -> tuple[float, float]:
    """(phi, phi') promised for a typical-rule codebook."""
    phi, phi_prime, _ = covering_terms(q.target, q.n, q.tau)
    return phi, phi_prime
