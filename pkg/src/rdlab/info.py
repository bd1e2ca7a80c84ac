"""Discrete distributions and information measures in bits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from ._validation import PMF_TOL, check_kernel, check_pmf, check_probability
from .textio import fmt_float, parse_kv

# Information quantities this close below zero are rounding noise.
CLAMP_TOL = 1e-10

AxisRef = Union[int, str]
AxisSel = Union[AxisRef, Sequence[AxisRef], None]


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"alphabet size must be a positive integer, got {self.size}")
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.size or len(set(labels)) != self.size:
                raise ValueError("alphabet labels must be distinct and match the size")
            object.__setattr__(self, "labels", labels)


def _as_alphabets(axes, shape) -> tuple[Alphabet, ...]:
    if axes is None:
        return tuple(Alphabet(int(s)) for s in shape)
    out = tuple(a if isinstance(a, Alphabet) else Alphabet(int(a)) for a in axes)
    if tuple(a.size for a in out) != tuple(shape):
        raise ValueError(f"axis sizes {[a.size for a in out]} do not match tensor shape {shape}")
    return out


class JointDist:
    """Dense joint pmf over an ordered list of finite alphabets.

    Axes may carry names, so subsets can be given as names or indices.
    """

    def __init__(self, probs, axes: Sequence[Alphabet | int] | None = None,
                 names: Sequence[str] | None = None, tol: float = PMF_TOL):
        arr = check_pmf(probs, "joint pmf", tol)
        if arr.ndim == 0:
            raise ValueError("a joint pmf needs at least one axis")
        self.axes = _as_alphabets(axes, arr.shape)
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != arr.ndim or len(set(names)) != arr.ndim:
                raise ValueError("axis names must be distinct, one per axis")
        self.names = names
        arr = arr.copy()
        arr.setflags(write=False)
        self.probs = arr

    @property
    def ndim(self) -> int:
        return self.probs.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def __repr__(self):
        tag = f" names={list(self.names)}" if self.names else ""
        return f"JointDist(shape={self.shape}{tag})"

    def axis_index(self, ref: AxisRef) -> int:
        if isinstance(ref, str):
            if not self.names or ref not in self.names:
                raise ValueError(f"unknown axis name {ref!r}")
            return self.names.index(ref)
        i = int(ref)
        if not 0 <= i < self.ndim:
            raise ValueError(f"axis index {ref} out of range for {self.ndim} axes")
        return i

    def resolve(self, sel: AxisSel) -> tuple[int, ...]:
        if sel is None:
            return ()
        if isinstance(sel, (int, np.integer, str)):
            sel = [sel]
        idx = tuple(self.axis_index(r) for r in sel)
        if len(set(idx)) != len(idx):
            raise ValueError(f"repeated axis in {sel}")
        return idx

    def marginal(self, sel: AxisSel) -> "JointDist":
        idx = self.resolve(sel)
        if not idx:
            raise ValueError("marginal needs at least one axis")
        return JointDist(marginal_array(self.probs, idx), [self.axes[i] for i in idx],
                         [self.names[i] for i in idx] if self.names else None, tol=1e-9)

    def to_text(self) -> str:
        lines = ["kind = joint", "sizes = " + " ".join(str(a.size) for a in self.axes)]
        if self.names:
            lines.append("names = " + " ".join(self.names))
        lines.append("probabilities = " + " ".join(fmt_float(x) for x in self.probs.ravel()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "JointDist":
        kv = parse_kv(text)
        if kv.get_str("kind") != "joint":
            raise ValueError("not a joint pmf document")
        sizes = kv.get_ints("sizes")
        probs = np.array(kv.get_floats("probabilities"))
        if probs.size != int(np.prod(sizes)):
            raise ValueError(f"expected {int(np.prod(sizes))} probabilities, got {probs.size}")
        names = kv.get_str("names").split() if "names" in kv else None
        return cls(probs.reshape(sizes), names=names)


class CondDist:
    """Kernel P(to | from): tensor of shape from_sizes + to_sizes."""

    def __init__(self, kernel, n_from: int, axes: Sequence[Alphabet | int] | None = None,
                 tol: float = PMF_TOL):
        arr = check_kernel(kernel, n_from, "conditional kernel", tol)
        all_axes = _as_alphabets(axes, arr.shape)
        self.from_axes = all_axes[:n_from]
        self.to_axes = all_axes[n_from:]
        arr = arr.copy()
        arr.setflags(write=False)
        self.kernel = arr

    @property
    def n_from(self) -> int:
        return len(self.from_axes)

    @property
    def from_shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.from_axes)

    @property
    def to_shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.to_axes)

    def __repr__(self):
        return f"CondDist({self.from_shape} -> {self.to_shape})"

    def to_text(self) -> str:
        return (
            "kind = conditional\n"
            f"from_sizes = {' '.join(map(str, self.from_shape))}\n"
            f"to_sizes = {' '.join(map(str, self.to_shape))}\n"
            "probabilities = " + " ".join(fmt_float(x) for x in self.kernel.ravel()) + "\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "CondDist":
        kv = parse_kv(text)
        if kv.get_str("kind") != "conditional":
            raise ValueError("not a conditional pmf document")
        fs, ts = kv.get_ints("from_sizes"), kv.get_ints("to_sizes")
        probs = np.array(kv.get_floats("probabilities"))
        if probs.size != int(np.prod(fs + ts)):
            raise ValueError("probability count does not match sizes")
        return cls(probs.reshape(fs + ts), len(fs))


def marginal_array(probs: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Marginal on ``keep`` with axes reordered as listed."""
    keep = list(keep)
    drop = tuple(i for i in range(probs.ndim) if i not in keep)
    m = probs.sum(axis=drop) if drop else probs
    order = sorted(keep)
    return np.transpose(m, [order.index(k) for k in keep])


def _h(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _entropy_idx(d: JointDist, idx: Iterable[int]) -> float:
    idx = tuple(idx)
    if not idx:
        return 0.0
    return _h(marginal_array(d.probs, idx).ravel())


def _clamp(x: float) -> float:
    if x < 0:
        if x < -CLAMP_TOL:
            raise ArithmeticError(f"information quantity {x} is negative beyond tolerance")
        return 0.0
    return x


def entropy(d: JointDist, axes: AxisSel = None) -> float:
    """H of the marginal on ``axes`` (all axes when omitted)."""
    idx = d.resolve(axes) if axes is not None else tuple(range(d.ndim))
    if not idx:
        raise ValueError("entropy needs a non-empty axis set")
    return _entropy_idx(d, idx)


def _disjoint(d: JointDist, *sels: AxisSel) -> list[tuple[int, ...]]:
    out = [d.resolve(s) for s in sels]
    seen: set[int] = set()
    for s in out:
        if seen & set(s):
            raise ValueError("axis subsets must be pairwise disjoint")
        seen |= set(s)
    return out


def cond_entropy(d: JointDist, a: AxisSel, given: AxisSel = None) -> float:
    ia, ic = _disjoint(d, a, given)
    if not ia:
        raise ValueError("entropy needs a non-empty axis set")
    return _clamp(_entropy_idx(d, ia + ic) - _entropy_idx(d, ic))


def mutual_info(d: JointDist, a: AxisSel, b: AxisSel) -> float:
    ia, ib = _disjoint(d, a, b)
    if not ia or not ib:
        raise ValueError("mutual information needs two non-empty axis sets")
    return _clamp(_entropy_idx(d, ia) + _entropy_idx(d, ib) - _entropy_idx(d, ia + ib))


def cond_mutual_info(d: JointDist, a: AxisSel, b: AxisSel, c: AxisSel = None) -> float:
    """I(a; b | c) = H(a|c) - H(a|b,c)."""
    ia, ib, ic = _disjoint(d, a, b, c)
    if not ia or not ib:
        raise ValueError("mutual information needs two non-empty axis sets")
    val = (_entropy_idx(d, ia + ic) + _entropy_idx(d, ib + ic)
           - _entropy_idx(d, ia + ib + ic) - _entropy_idx(d, ic))
    return _clamp(val)


def variational_distance(p: JointDist | np.ndarray, q: JointDist | np.ndarray) -> float:
    if isinstance(p, JointDist) and isinstance(q, JointDist):
        if [a.size for a in p.axes] != [a.size for a in q.axes]:
            raise ValueError("variational distance needs identical axes")
    pa = p.probs if isinstance(p, JointDist) else np.asarray(p, float)
    qa = q.probs if isinstance(q, JointDist) else np.asarray(q, float)
    if pa.shape != qa.shape:
        raise ValueError(f"shape mismatch {pa.shape} vs {qa.shape}")
    return float(min(1.0, 0.5 * np.abs(pa - qa).sum()))


def binary_entropy(p: float) -> float:
    p = check_probability(p, "p")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def binary_convolve(a: float, b: float) -> float:
    a = check_probability(a, "a")
    b = check_probability(b, "b")
    return a * (1 - b) + b * (1 - a)


def entropy_continuity_bound(v: float, alphabet_size: int) -> float:
    """Upper bound on |H(P)-H(Q)| for pmfs at variational distance v."""
    v = check_probability(v, "v")
    if alphabet_size < 2:
        raise ValueError("alphabet size must be at least 2")
    return binary_entropy(v) + v * float(np.log2(alphabet_size - 1))


def mi_continuity_bounds(v: float, alphabet_size: int) -> tuple[float, float]:
    """(pair, conditional) bounds on mutual-information differences at distance v."""
    v = check_probability(v, "v")
    if alphabet_size < 1:
        raise ValueError("alphabet size must be positive")
    base = binary_entropy(v) + v * float(np.log2(alphabet_size))
    return 4 * base, 8 * base


def product(*pmfs: np.ndarray) -> np.ndarray:
    """Outer product of independent pmfs."""
    out = np.asarray(pmfs[0], float)
    for p in pmfs[1:]:
        out = np.multiply.outer(out, np.asarray(p, float))
    return out
