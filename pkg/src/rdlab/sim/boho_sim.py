"""End-to-end simulation of the binary one-helps-one scheme.

The first layer (constant-length min-Hamming quantizers at both encoders)
is simulated exactly; the second layer is replaced by its single-letter
limit, Bern(delta1) noise on every permuted row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..boho import EPS_MAX, BohoParams
from ..info import binary_convolve, binary_entropy
from ..regions.corrections import delta_k
from ..typicality import all_sequences
from .._parallel import pmap
from .quantizer import QuantizerCodebook, build_quantizer, hamming_matrix, hoeffding_radius
from .rng import stream

MAX_N = 20
ALPHA = 0.01


def targeted_codebook(n: int, size: int, delta: float, seed: int,
                      draws: int = 64) -> tuple[QuantizerCodebook, float]:
    """Min-Hamming binary codebook whose exact distortion on uniform input is nearest ``delta``.

    Returns the codebook and that exact distortion.
    """
    if not 1 <= n <= MAX_N:
        raise ValueError(f"first-layer blocklength n={n} outside [1, {MAX_N}]")
    rng = stream(seed, 0, "boho-codebook")
    xs = all_sequences(2, n)
    best, best_d = None, math.inf
    for _ in range(draws):
        cw = rng.integers(0, 2, size=(size, n))
        d = float(hamming_matrix(xs, cw).min(axis=1).mean() / n)
        if best is None or abs(d - delta) < abs(best_d - delta):
            best, best_d = cw, d
    q = build_quantizer([0.5, 0.5], np.eye(2), n, math.nan, rule="min-hamming", codewords=best)
    return q, best_d


@dataclass(frozen=True)
class BohoTrial:
    d2: float
    delta_prime: float
    row_means: np.ndarray
    mismatch: float


def _trial(q: QuantizerCodebook, prm: BohoParams, m: int, seed: int, trial: int) -> BohoTrial:
    n = q.n
    x = stream(seed, trial, "boho-x").integers(0, 2, size=(m, n))
    e = (stream(seed, trial, "boho-e").random((m, n)) < prm.epsilon).astype(np.int64)
    z = (stream(seed, trial, "boho-z").random((m, n)) < prm.p).astype(np.int64)
    v = q.quantize(x ^ e)
    v_hat = q.quantize(x)
    s = x ^ v_hat ^ z
    perm = stream(seed, trial, "permutation").permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    rows = np.arange(m)[:, None]
    s_tilde = s[rows, perm]
    # second layer at its single-letter limit: Bern(delta1) quantization noise
    t = (stream(seed, trial, "second-layer").random((m, n)) < prm.delta1).astype(np.int64)
    u = np.empty_like(s)
    u[rows, perm] = s_tilde ^ t
    err = (u ^ v) != (x ^ z)
    return BohoTrial(float(err.mean()), float((x != v_hat).mean()),
                     s_tilde.mean(axis=0), float(np.any(v != v_hat, axis=1).mean()))


@dataclass(frozen=True)
class BohoSimResult:
    params: BohoParams
    m: int
    trials: tuple[BohoTrial, ...]
    codebook_size: int
    exact_delta_prime: float

    @property
    def blocks(self) -> int:
        return self.m * len(self.trials)

    @property
    def d2(self) -> float:
        return float(np.mean([t.d2 for t in self.trials]))

    @property
    def delta_prime(self) -> float:
        return float(np.mean([t.delta_prime for t in self.trials]))

    @property
    def radius(self) -> float:
        """99% Hoeffding radius of a per-block average."""
        return hoeffding_radius(self.blocks, ALPHA)

    @property
    def delta_n(self) -> float:
        return delta_k(self.params.epsilon, self.params.n)

    @property
    def bound(self) -> float:
        """delta1 + delta_n (d' + (eps/delta_n) * d') at the measured first-layer distortion."""
        dn, dp, eps = self.delta_n, self.delta_prime, self.params.epsilon
        loss = 0.0 if eps == 0 else dn * (dp + binary_convolve(eps / dn, dp))
        return self.params.delta1 + loss

    @property
    def d2_margin(self) -> float:
        return self.bound + 3 * self.radius - self.d2

    @property
    def row_means(self) -> np.ndarray:
        return np.mean([t.row_means for t in self.trials], axis=0)

    @property
    def row_mean_target(self) -> float:
        return binary_convolve(self.params.p, self.delta_prime)

    @property
    def row_mean_radius(self) -> float:
        """Per-row radius, Bonferroni over the n rows."""
        return hoeffding_radius(self.blocks, ALPHA / self.params.n)

    @property
    def row_mean_margin(self) -> float:
        return self.row_mean_radius - float(np.abs(self.row_means - self.row_mean_target).max())

    @property
    def mismatch(self) -> float:
        return float(np.mean([t.mismatch for t in self.trials]))

    @property
    def rates(self) -> tuple[float, float]:
        """First-layer rate plus the second layer's single-letter rate at the measured d'."""
        r1 = math.log2(self.codebook_size) / self.params.n
        r2 = max(0.0, binary_entropy(self.row_mean_target) - binary_entropy(self.params.delta1))
        return r1, r2


def boho_end_to_end(params: BohoParams, m: int, trials: int = 1, seed: int = 0,
                    codebook_size: int = 6, draws: int = 64,
                    threads: int | None = None) -> BohoSimResult:
    """Simulate ``trials`` independent runs of m blocks of length n."""
    if not 0 < params.p < 0.5:
        raise ValueError(f"p={params.p} outside (0, 1/2)")
    if not 0 <= params.epsilon <= EPS_MAX:
        raise ValueError(f"epsilon={params.epsilon} outside [0, 1/3]")
    if not 0 < params.delta1 < 0.5:
        raise ValueError(f"delta1={params.delta1} outside (0, 1/2)")
    if trials < 1 or m < 1:
        raise ValueError("trials and m must be at least 1")
    n = int(params.n)
    if not 1 <= n <= MAX_N:
        raise ValueError(f"first-layer blocklength n={n} outside [1, {MAX_N}]")
    q, exact = targeted_codebook(n, codebook_size, params.delta, seed, draws)
    q.table()
    runs = pmap(lambda k: _trial(q, params, m, seed, k), range(trials), threads)
    return BohoSimResult(params, m, tuple(runs), codebook_size, exact)
