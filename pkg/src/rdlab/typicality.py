"""Sequences, joint types and typical sets, enumerable exactly at small n."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .info import Alphabet, JointDist, marginal_array

ENUM_CAP = 2**24
# Absolute slack on typicality thresholds so that boundary cases which
# hold with equality in exact arithmetic are not lost to rounding.
TYPICAL_TOL = 1e-12


@dataclass(frozen=True)
class SymbolSeq:
    alphabet: Alphabet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64).ravel()
        if vals.size and (vals.min() < 0 or vals.max() >= self.alphabet.size):
            raise ValueError(f"symbols must lie in [0, {self.alphabet.size})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @classmethod
    def from_string(cls, text: str, size: int = 2) -> "SymbolSeq":
        return cls(Alphabet(size), [int(c) for c in text])


@dataclass(frozen=True)
class EmpiricalType:
    axes: tuple[Alphabet, ...]
    counts: np.ndarray
    n: int

    @property
    def freqs(self) -> np.ndarray:
        return self.counts / self.n

    def to_joint(self) -> JointDist:
        return JointDist(self.freqs, self.axes)


def _values(seq, size: int | None = None) -> np.ndarray:
    if isinstance(seq, SymbolSeq):
        return seq.values
    arr = np.asarray(seq, dtype=np.int64).ravel()
    if size is not None and arr.size and (arr.min() < 0 or arr.max() >= size):
        raise ValueError(f"symbols must lie in [0, {size})")
    return arr


def joint_type(seqs: Sequence[SymbolSeq]) -> EmpiricalType:
    if not seqs:
        raise ValueError("need at least one sequence")
    axes = tuple(s.alphabet for s in seqs)
    vals = [s.values for s in seqs]
    n = vals[0].size
    if n < 1:
        raise ValueError("sequences must have length n >= 1")
    if any(v.size != n for v in vals):
        raise ValueError("sequences must have equal lengths")
    shape = tuple(a.size for a in axes)
    flat = np.ravel_multi_index(vals, shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)
    return EmpiricalType(axes, counts, n)


def type_counts(vals: Sequence[np.ndarray], shape: Sequence[int]) -> np.ndarray:
    flat = np.ravel_multi_index([np.asarray(v) for v in vals], tuple(shape))
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(tuple(shape))


def dn_distortion(s: SymbolSeq, w: SymbolSeq, target: JointDist) -> float:
    """Largest cell deviation between the joint type of (s, w) and ``target``."""
    if target.shape != (s.alphabet.size, w.alphabet.size):
        raise ValueError("target axes do not match the sequence alphabets")
    t = joint_type([s, w])
    return float(np.abs(t.freqs - target.probs).max())


def _within(freq: np.ndarray, ref: np.ndarray, thresh: float, support: np.ndarray) -> bool:
    dev = np.abs(freq - ref)
    return bool(np.all(np.where(support, dev <= thresh + TYPICAL_TOL, freq == 0)))


def is_typical(x, p: JointDist, zeta: float) -> bool:
    """Membership in the zeta-typical set of ``p``.

    ``x`` is one sequence for a 1-axis ``p`` or a list of sequences for a
    joint pmf; the threshold is zeta divided by the product alphabet size.
    Cells with zero probability must be unvisited.
    """
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    seqs = [x] if p.ndim == 1 else list(x)
    if len(seqs) != p.ndim:
        raise ValueError("number of sequences must match the pmf axes")
    vals = [_values(s, k) for s, k in zip(seqs, p.shape)]
    n = vals[0].size
    if any(v.size != n for v in vals):
        raise ValueError("sequences must have equal lengths")
    counts = type_counts(vals, p.shape)
    card = int(np.prod(p.shape))
    return _within(counts / n, p.probs, zeta / card, p.probs > 0)


def conditional_kernel(p_xy: JointDist) -> np.ndarray:
    """P(y|x); rows for zero-probability x are left at zero."""
    px = p_xy.probs.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(px > 0, p_xy.probs / np.where(px > 0, px, 1.0), 0.0)
    return k


def is_cond_typical(y, x, p_xy: JointDist, delta: float) -> bool:
    """Membership of y in the conditional typical set given x."""
    if p_xy.ndim != 2:
        raise ValueError("conditional typicality needs a 2-axis pmf")
    kx, ky = p_xy.shape
    xv, yv = _values(x, kx), _values(y, ky)
    if xv.size != yv.size:
        raise ValueError("sequences must have equal lengths")
    n = xv.size
    counts = type_counts([xv, yv], p_xy.shape)
    nx = counts.sum(axis=1, keepdims=True)
    k = conditional_kernel(p_xy)
    return _within(counts / n, nx / n * k, delta / ky, k > 0)


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def _multinomial(counts: Sequence[int]) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def sequence_chunks(k: int, n: int, chunk: int = 1 << 16) -> Iterator[np.ndarray]:
    """All of {0..k-1}^n in lexicographic order, as (rows, n) digit arrays."""
    total = k**n
    weights = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (idx[:, None] // weights[None, :]) % k


def all_sequences(k: int, n: int, cap: int = ENUM_CAP) -> np.ndarray:
    if k**n > cap:
        raise ValueError(f"|alphabet|^n = {k}^{n} exceeds the enumeration cap {cap}")
    return np.concatenate(list(sequence_chunks(k, n)), axis=0) if n > 0 else np.zeros((1, 0), int)


def typical_mask(seqs: np.ndarray, p: np.ndarray, zeta: float) -> np.ndarray:
    """Row-wise typicality of a (rows, n) array of symbols of a 1-axis pmf."""
    k = p.size
    n = seqs.shape[1]
    counts = np.stack([(seqs == a).sum(axis=1) for a in range(k)], axis=1)
    dev = np.abs(counts / n - p[None, :])
    ok = np.where(p[None, :] > 0, dev <= zeta / k + TYPICAL_TOL, counts == 0)
    return ok.all(axis=1)


def _type_is_typical(counts: Sequence[int], p: np.ndarray, n: int, zeta: float) -> bool:
    c = np.asarray(counts, dtype=float)
    return _within(c / n, p, zeta / p.size, p > 0)


def enumerate_typical(p: JointDist, n: int, zeta: float,
                      cap: int = ENUM_CAP) -> tuple[int, Iterator[np.ndarray]]:
    """Exact size of the typical set and a lazy iterator over its members.

    The count is summed over type classes; members are yielded in
    lexicographic order.
    """
    if p.ndim != 1:
        raise ValueError("enumerate_typical expects a single-axis pmf")
    if n < 1:
        raise ValueError("n must be at least 1")
    k = p.shape[0]
    if k**n > cap:
        raise ValueError(f"|alphabet|^n = {k}^{n} exceeds the enumeration cap {cap}")
    probs = p.probs
    count = sum(_multinomial(c) for c in _compositions(n, k) if _type_is_typical(c, probs, n, zeta))

    def members():
        for block in sequence_chunks(k, n):
            for row in block[typical_mask(block, probs, zeta)]:
                yield row

    return count, members()


def typical_set_array(p: JointDist, n: int, zeta: float, cap: int = ENUM_CAP) -> np.ndarray:
    k = p.shape[0]
    if k**n > cap:
        raise ValueError(f"|alphabet|^n = {k}^{n} exceeds the enumeration cap {cap}")
    blocks = [b[typical_mask(b, p.probs, zeta)] for b in sequence_chunks(k, n)]
    return np.concatenate(blocks, axis=0)


def typicality_bounds(p: JointDist, n: int, zeta: float) -> tuple[float, float]:
    """(cardinality bound, complement-probability bound) for the typical set.

    Zero-probability symbols are left out of the zeta' sum, in line with the
    support rule of the typical set.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    probs = p.probs.ravel()
    k = probs.size
    pos = probs[probs > 0]
    h = float(-(pos * np.log2(pos)).sum())
    zeta_prime = -(zeta / k) * float(np.log2(pos).sum())
    card = 2.0 ** (n * (h + zeta_prime))
    comp = 2 * k * math.exp(-2 * n * (zeta / k) ** 2)
    return card, comp


def cond_typical_count(p_xy: JointDist, x, delta: float) -> int:
    """Exact size of the conditional typical set of y given x."""
    kx, ky = p_xy.shape
    xv = _values(x, kx)
    n = xv.size
    kern = conditional_kernel(p_xy)
    total = 1
    for a in range(kx):
        na = int((xv == a).sum())
        ref = na / n * kern[a]
        sub = 0
        for c in _compositions(na, ky):
            if _within(np.asarray(c) / n, ref, delta / ky, kern[a] > 0):
                sub += _multinomial(c)
        total *= sub
    return total


@dataclass(frozen=True)
class CondCountBound:
    bound: float
    delta1: float
    zeta2: float
    alpha: float


def conditional_typical_count_lower_bound(p_xy: JointDist, x, n: int, zeta: float,
                                          delta: float) -> CondCountBound:
    """Lower bound on the number of y^n conditionally typical with x^n.

    Each factor of alpha is floored at zero, since it lower-bounds a
    probability.
    """
    if p_xy.ndim != 2:
        raise ValueError("needs a 2-axis pmf P(x, y)")
    kx, ky = p_xy.shape
    xv = _values(x, kx)
    if xv.size != n:
        raise ValueError("x has the wrong length")
    px = marginal_array(p_xy.probs, [0])
    pmax = float(px.max())
    if zeta > kx * pmax * (1 + 1e-12):
        raise ValueError(f"zeta={zeta} exceeds |X|*Pmax={kx * pmax}")
    if not is_typical(xv, JointDist(px), zeta):
        raise ValueError("x is not in the zeta-typical set")
    kern = conditional_kernel(p_xy)
    rows = px > 0
    logs = np.log2(kern[rows][kern[rows] > 0])
    delta1 = -(delta / ky) * float(logs.sum())
    h_rows = np.array([-(r[r > 0] * np.log2(r[r > 0])).sum() for r in kern[rows]])
    zeta2 = (zeta / kx) * float(h_rows.sum())
    h_cond = float((px[rows] * h_rows).sum())
    factor = max(0.0, 1 - 2 * ky * math.exp(-(n / pmax) * (delta / ky) ** 2))
    alpha = factor**kx
    bound = 2.0 ** (n * (h_cond - delta1 - zeta2)) * alpha
    return CondCountBound(bound, delta1, zeta2, alpha)
