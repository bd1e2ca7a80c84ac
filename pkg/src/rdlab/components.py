"""Common parts and epsilon-correlated component pairs of a distributed source."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._validation import check_map
from .info import Alphabet, JointDist, entropy
from .source import DistributedSource
from .textio import dump_kv, fmt_float, parse_kv

SUPPORT_THRESHOLD = 1e-15
ENUM_LIMIT = 10**6


@dataclass(frozen=True, eq=False)
class ComponentPair:
    """Maps f1: X1 -> S and f2: X2 -> S with mismatch probability ``epsilon``."""

    s_alphabet: Alphabet
    f1: np.ndarray
    f2: np.ndarray
    epsilon: float

    def __post_init__(self):
        k = self.s_alphabet.size
        f1 = np.asarray(self.f1, dtype=np.int64)
        f2 = np.asarray(self.f2, dtype=np.int64)
        object.__setattr__(self, "f1", check_map(f1, f1.size, k, "f1"))
        object.__setattr__(self, "f2", check_map(f2, f2.size, k, "f2"))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    @property
    def s_size(self) -> int:
        return self.s_alphabet.size

    def key(self) -> tuple:
        return (self.s_size, tuple(self.f1.tolist()), tuple(self.f2.tolist()))

    def __eq__(self, other):
        return isinstance(other, ComponentPair) and self.key() == other.key() \
            and self.epsilon == other.epsilon

    def __hash__(self):
        return hash(self.key())

    def validate(self, src: DistributedSource, tol: float = 1e-12) -> None:
        if self.f1.size != src.sizes[0] or self.f2.size != src.sizes[1]:
            raise ValueError("component maps do not match the source alphabets")
        eps = epsilon_of(src, self.f1, self.f2, self.s_size)
        if abs(eps - self.epsilon) > tol:
            raise ValueError(f"stored epsilon {self.epsilon} differs from recomputed {eps}")

    def joint_s(self, src: DistributedSource) -> np.ndarray:
        """P(S1 = a, S2 = b)."""
        k = self.s_size
        out = np.zeros((k, k))
        np.add.at(out, (self.f1[:, None], self.f2[None, :]), src.pmf.probs)
        return out

    def to_text(self) -> str:
        return dump_kv([
            ("kind", "component-pair"),
            ("s_size", self.s_size),
            ("f1", " ".join(map(str, self.f1.tolist()))),
            ("f2", " ".join(map(str, self.f2.tolist()))),
            ("epsilon", fmt_float(self.epsilon)),
        ])

    @classmethod
    def from_text(cls, text: str) -> "ComponentPair":
        kv = parse_kv(text)
        if kv.get_str("kind") != "component-pair":
            raise ValueError("not a component-pair document")
        return cls(Alphabet(kv.get_int("s_size")), kv.get_ints("f1"), kv.get_ints("f2"),
                   kv.get_float("epsilon"))


def _agreement(pmf: np.ndarray, f1: np.ndarray, f2: np.ndarray) -> float:
    return float(pmf[f1[:, None] == f2[None, :]].sum())


def epsilon_of(src: DistributedSource, f1, f2, s_size: int | None = None) -> float:
    """Exact P(f1(X1) != f2(X2))."""
    k1, k2 = src.sizes
    f1 = np.asarray(f1, dtype=np.int64)
    f2 = np.asarray(f2, dtype=np.int64)
    if s_size is None:
        s_size = int(max(f1.max(), f2.max())) + 1
    f1 = check_map(f1, k1, s_size, "f1")
    f2 = check_map(f2, k2, s_size, "f2")
    return max(0.0, 1.0 - _agreement(src.pmf.probs, f1, f2))


def canonical_labels(f1, f2) -> tuple[np.ndarray, np.ndarray, int]:
    """Relabel S by first occurrence in f1, then in f2."""
    order: dict[int, int] = {}
    for v in itertools.chain(np.asarray(f1).tolist(), np.asarray(f2).tolist()):
        if v not in order:
            order[v] = len(order)
    g1 = np.array([order[v] for v in np.asarray(f1).tolist()], dtype=np.int64)
    g2 = np.array([order[v] for v in np.asarray(f2).tolist()], dtype=np.int64)
    return g1, g2, len(order)


def make_pair(src: DistributedSource, f1, f2) -> ComponentPair:
    g1, g2, k = canonical_labels(f1, f2)
    return ComponentPair(Alphabet(k), g1, g2, epsilon_of(src, g1, g2, k))


def gk_common_part(src: DistributedSource,
                   threshold: float = SUPPORT_THRESHOLD) -> tuple[ComponentPair, float]:
    """Maximal common function of (X1, X2) and its entropy K.

    Classes are the connected components of the bipartite support graph.
    Symbols of zero marginal probability join class 0.
    """
    probs = src.pmf.probs
    k1, k2 = probs.shape
    rows, cols = np.nonzero(probs >= threshold)
    graph = coo_matrix((np.ones(rows.size), (rows, cols + k1)), shape=(k1 + k2, k1 + k2))
    _, labels = connected_components(graph, directed=False)
    live = np.zeros(k1 + k2, bool)
    live[rows] = True
    live[cols + k1] = True
    names: dict[int, int] = {}
    for node in range(k1 + k2):
        if live[node] and labels[node] not in names:
            names[labels[node]] = len(names)
    mapped = np.array([names[labels[i]] if live[i] else 0 for i in range(k1 + k2)], dtype=np.int64)
    f1, f2 = mapped[:k1], mapped[k1:]
    k = max(len(names), 1)
    pv = np.zeros(k)
    np.add.at(pv, f1, probs.sum(axis=1))
    pair = ComponentPair(Alphabet(k), f1, f2, epsilon_of(src, f1, f2, k))
    return pair, entropy(JointDist(pv / pv.sum()))


def _restricted_growth(length: int, k: int):
    """Maps {0..length-1} -> {0..k-1} whose labels first appear in increasing order."""
    def rec(prefix, top):
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for v in range(min(top + 2, k)):
            yield from rec(prefix + [v], max(top, v))
    yield from rec([], -1)


def enumerate_component_pairs(src: DistributedSource, max_s: int, max_eps: float,
                              limit: int = ENUM_LIMIT) -> list[ComponentPair]:
    """All component pairs with |S| <= max_s and epsilon <= max_eps, up to relabeling."""
    if max_s < 1:
        raise ValueError("max_s must be at least 1")
    k1, k2 = src.sizes
    if max_s**k1 * max_s**k2 > limit:
        raise ValueError(f"enumeration of {max_s}^{k1} x {max_s}^{k2} maps exceeds {limit}")
    probs = src.pmf.probs
    f2_all = np.array(list(itertools.product(range(max_s), repeat=k2)), dtype=np.int64)
    found: dict[tuple, ComponentPair] = {}
    for f1 in _restricted_growth(k1, max_s):
        onehot = np.eye(max_s)[list(f1)]
        agree_by_label = probs.T @ onehot
        agree = agree_by_label[np.arange(k2)[None, :], f2_all].sum(axis=1)
        for f2 in f2_all[1.0 - agree <= max_eps + 1e-12]:
            pair = make_pair(src, f1, f2)
            if pair.epsilon <= max_eps + 1e-12:
                found.setdefault(pair.key(), pair)
    return [found[key] for key in sorted(found)]
