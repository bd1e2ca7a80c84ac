"""The T-correction channel that makes the average joint type exact."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..info import binary_entropy
from ..regions.corrections import covering_terms
from ..typicality import ENUM_CAP, sequence_chunks
from .quantizer import QuantizerCodebook, _source_prob
from .rng import stream

CORRECTION_TOL = 1e-10


def average_type(q: QuantizerCodebook, p_s, mode: str = "exact", samples: int = 100_000,
                 seed: int = 0, cap: int = ENUM_CAP) -> np.ndarray:
    """E[joint type of (S^n, Q(S^n))] as an (|S|, |W|) array."""
    ps = np.asarray(getattr(p_s, "probs", p_s), dtype=float)
    ks, kw, n = q.s_size, q.w_size, q.n
    out = np.zeros(ks * kw)
    if mode == "exact":
        if ks**n > cap:
            raise ValueError(f"{ks}^{n} sequences exceed the enumeration cap {cap}")
        for rows in sequence_chunks(ks, n):
            cells = rows * kw + q.quantize(rows)
            wts = np.repeat(_source_prob(rows, ps) / n, n)
            out += np.bincount(cells.ravel(), weights=wts, minlength=ks * kw)
    elif mode == "sampled":
        rows = stream(seed, 0, "average-type").choice(ks, size=(samples, n), p=ps)
        cells = rows * kw + q.quantize(rows)
        out = np.bincount(cells.ravel(), minlength=ks * kw) / (samples * n)
    else:
        raise ValueError("mode must be 'exact' or 'sampled'")
    return out.reshape(ks, kw)


@dataclass(frozen=True)
class CorrectionChannel:
    """P(T | S) over T in {0, 1..|W|}; T=0 keeps the quantizer output, T=t writes t-1."""

    p_t_given_s: np.ndarray
    gammas: np.ndarray
    average: np.ndarray
    target: np.ndarray
    mode: str
    n: int
    tau: float

    @property
    def keep(self) -> np.ndarray:
        return self.p_t_given_s[:, 0]

    def output_kernel(self) -> np.ndarray:
        """P(W' = v | S = a, W = w) as an (|S|, |W|, |W|) array."""
        ks, kw = self.target.shape
        k = np.broadcast_to(self.p_t_given_s[:, None, 1:], (ks, kw, kw)).copy()
        k[:, np.arange(kw), np.arange(kw)] += self.keep[:, None]
        return k

    def corrected_joint(self) -> np.ndarray:
        return np.einsum("aw,awv->av", self.average, self.output_kernel())

    @property
    def residual(self) -> float:
        return float(np.abs(self.corrected_joint() - self.target).max())

    @property
    def exact_ok(self) -> bool:
        return self.residual < CORRECTION_TOL


def correction_from_average(average: np.ndarray, target, mode: str = "exact", n: int = 0,
                            tau: float = math.nan) -> CorrectionChannel:
    """Channel from a measured average type; a zero denominator never binds."""
    avg = np.asarray(average, dtype=float)
    t = np.asarray(getattr(target, "probs", target), dtype=float)
    if avg.shape != t.shape:
        raise ValueError("average type and target must share axes")
    gam = avg - t
    den = t + gam
    if np.any(den < 0):
        raise ValueError("negative denominator in the correction channel")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, t / np.where(den > 0, den, 1.0), np.inf)
    keep = np.minimum(ratio.min(axis=1), 1.0)
    ps = t.sum(axis=1)
    rest = t - den * keep[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        rest = np.where(ps[:, None] > 0, rest / np.where(ps > 0, ps, 1.0)[:, None], 0.0)
    if rest.min() < -1e-12:
        raise ValueError(f"correction channel has a negative entry {rest.min():.3g}")
    kern = np.concatenate([keep[:, None], np.clip(rest, 0.0, None)], axis=1)
    return CorrectionChannel(kern, gam, avg, t, mode, n, tau)


def build_correction(q: QuantizerCodebook, p_s, target, mode: str = "exact",
                     samples: int = 100_000, seed: int = 0) -> CorrectionChannel:
    """Correction channel for a quantizer's measured average joint type."""
    ps = np.asarray(getattr(p_s, "probs", p_s), dtype=float)
    t = np.asarray(getattr(target, "probs", target), dtype=float)
    if not np.allclose(t.sum(axis=1), ps, atol=1e-12):
        raise ValueError("target S-marginal differs from p_s")
    avg = average_type(q, ps, mode, samples, seed)
    return correction_from_average(avg, t, mode, q.n, q.tau)


@dataclass(frozen=True)
class CorrectionRate:
    h_t: float
    lambda_n: float
    p_keep: float
    p_tau: float
    grouping_bound: float
    applicable: bool

    @property
    def ok(self) -> bool:
        """Grouping bound always; the Lambda bound when it applies."""
        return self.h_t <= self.grouping_bound + 1e-12 and (
            not self.applicable or self.h_t <= self.lambda_n + 1e-12)

    @property
    def margin(self) -> float:
        return self.lambda_n - self.h_t


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def correction_rate(c: CorrectionChannel, p_s, p_tau: float | None = None,
                    strict: bool = True) -> CorrectionRate:
    """H(T) under p_s and the Lambda_n(tau) bound.

    The Lambda bound is asserted when P(T=0) >= p(tau) >= 1/(|W|+1); on that
    range the grouping bound h(x) + (1-x) log|W| is decreasing in x.
    """
    ps = np.asarray(getattr(p_s, "probs", p_s), dtype=float)
    kw = c.target.shape[1]
    if p_tau is None:
        p_tau = covering_terms(c.target, c.n, c.tau)[2]
    pt = ps @ c.p_t_given_s
    h_t = _entropy_bits(pt)
    p0 = float(pt[0])
    lam = binary_entropy(p_tau) + (1 - p_tau) * math.log2(kw)
    group = binary_entropy(min(max(p0, 0.0), 1.0)) + (1 - p0) * math.log2(kw)
    applicable = p0 >= p_tau and p_tau >= 1 / (kw + 1)
    rate = CorrectionRate(h_t, lam, p0, float(p_tau), group, applicable)
    if strict and not rate.ok:
        raise AssertionError(f"H(T)={h_t:.6g} breaks its bound (Lambda={lam:.6g}, "
                             f"grouping={group:.6g})")
    return rate
