"""Distributed source instances and their text format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .info import JointDist
from .textio import KeyValues, ParseError, dump_kv, fmt_float, parse_kv


def _table(d, rows: int, name: str) -> np.ndarray:
    arr = np.asarray(d, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != rows:
        raise ValueError(f"{name} must be a ({rows}, k) table, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"{name} must be finite and non-negative")
    return arr


@dataclass(frozen=True, eq=False)
class DistributedSource:
    """Joint pmf P(x1, x2) with per-encoder distortion tables d_i(x_i, xhat_i)."""

    pmf: JointDist
    d1: np.ndarray
    d2: np.ndarray
    name: str = "source"

    def __post_init__(self):
        pmf = self.pmf if isinstance(self.pmf, JointDist) else JointDist(self.pmf)
        if pmf.ndim != 2:
            raise ValueError("a distributed source pmf has exactly two axes")
        pmf = JointDist(pmf.probs, pmf.axes, names=("X1", "X2"))
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "d1", _table(self.d1, pmf.shape[0], "d1"))
        object.__setattr__(self, "d2", _table(self.d2, pmf.shape[1], "d2"))

    @property
    def sizes(self) -> tuple[int, int]:
        return self.pmf.shape

    @property
    def recon_sizes(self) -> tuple[int, int]:
        return self.d1.shape[1], self.d2.shape[1]

    @property
    def dmax(self) -> tuple[float, float]:
        return float(self.d1.max()), float(self.d2.max())

    def swapped(self) -> "DistributedSource":
        """Same problem with the encoder indices exchanged."""
        return DistributedSource(JointDist(self.pmf.probs.T), self.d2, self.d1, self.name + "-swapped")

    def to_text(self) -> str:
        k1, k2 = self.sizes
        r1, r2 = self.recon_sizes
        return dump_kv([
            ("kind", "distributed-source"),
            ("name", self.name),
            ("x1_size", k1),
            ("x2_size", k2),
            ("xhat1_size", r1),
            ("xhat2_size", r2),
            ("pmf", " ".join(fmt_float(v) for v in self.pmf.probs.ravel())),
            ("d1", " ".join(fmt_float(v) for v in self.d1.ravel())),
            ("d2", " ".join(fmt_float(v) for v in self.d2.ravel())),
        ])

    @classmethod
    def from_kv(cls, kv: KeyValues) -> "DistributedSource":
        kind = kv.get_str("kind", "distributed-source")
        if kind != "distributed-source":
            raise kv._error("kind", f"expected distributed-source, got {kind!r}")
        k1, k2 = kv.get_int("x1_size"), kv.get_int("x2_size")
        r1, r2 = kv.get_int("xhat1_size", k1), kv.get_int("xhat2_size", k2)
        pmf = np.array(kv.get_floats("pmf"))
        d1 = np.array(kv.get_floats("d1"))
        d2 = np.array(kv.get_floats("d2"))
        for key, arr, size in (("pmf", pmf, k1 * k2), ("d1", d1, k1 * r1), ("d2", d2, k2 * r2)):
            if arr.size != size:
                raise ParseError(f"{key}: expected {size} entries, got {arr.size}",
                                 kv.entries[key].line, kv.source)
        try:
            return cls(JointDist(pmf.reshape(k1, k2)), d1.reshape(k1, r1), d2.reshape(k2, r2),
                       kv.get_str("name", "source"))
        except ValueError as exc:
            raise ParseError(f"pmf: {exc}", kv.entries["pmf"].line, kv.source) from None

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "DistributedSource":
        return cls.from_kv(parse_kv(text, source))


@dataclass(frozen=True, eq=False)
class SideInfoSource:
    """Sources (X1, X2) with side information (Y1, Y2) known at the decoder.

    ``pmf`` is indexed (x1, x2, y1, y2).
    """

    pmf: JointDist
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        pmf = self.pmf if isinstance(self.pmf, JointDist) else JointDist(self.pmf)
        if pmf.ndim != 4:
            raise ValueError("side-information source pmf has axes (X1, X2, Y1, Y2)")
        object.__setattr__(self, "pmf", JointDist(pmf.probs, names=("X1", "X2", "Y1", "Y2")))
        object.__setattr__(self, "d1", _table(self.d1, pmf.shape[0], "d1"))
        object.__setattr__(self, "d2", _table(self.d2, pmf.shape[1], "d2"))

    @property
    def dmax(self) -> tuple[float, float]:
        return float(self.d1.max()), float(self.d2.max())

    def to_text(self) -> str:
        k1, k2, y1, y2 = self.pmf.shape
        return dump_kv([
            ("kind", "side-info-source"),
            ("x1_size", k1), ("x2_size", k2), ("y1_size", y1), ("y2_size", y2),
            ("xhat1_size", self.d1.shape[1]), ("xhat2_size", self.d2.shape[1]),
            ("pmf", " ".join(fmt_float(v) for v in self.pmf.probs.ravel())),
            ("d1", " ".join(fmt_float(v) for v in self.d1.ravel())),
            ("d2", " ".join(fmt_float(v) for v in self.d2.ravel())),
        ])

    @classmethod
    def from_kv(cls, kv: KeyValues) -> "SideInfoSource":
        kind = kv.get_str("kind", "side-info-source")
        if kind != "side-info-source":
            raise kv._error("kind", f"expected side-info-source, got {kind!r}")
        k1, k2 = kv.get_int("x1_size"), kv.get_int("x2_size")
        y1, y2 = kv.get_int("y1_size"), kv.get_int("y2_size")
        r1, r2 = kv.get_int("xhat1_size", k1), kv.get_int("xhat2_size", k2)
        arrs = {key: np.array(kv.get_floats(key)) for key in ("pmf", "d1", "d2")}
        sizes = {"pmf": k1 * k2 * y1 * y2, "d1": k1 * r1, "d2": k2 * r2}
        for key, arr in arrs.items():
            if arr.size != sizes[key]:
                raise ParseError(f"{key}: expected {sizes[key]} entries, got {arr.size}",
                                 kv.entries[key].line, kv.source)
        try:
            return cls(JointDist(arrs["pmf"].reshape(k1, k2, y1, y2)), arrs["d1"].reshape(k1, r1),
                       arrs["d2"].reshape(k2, r2))
        except ValueError as exc:
            raise ParseError(f"pmf: {exc}", kv.entries["pmf"].line, kv.source) from None

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "SideInfoSource":
        return cls.from_kv(parse_kv(text, source))


def boho_spec_params(spec: str) -> dict[str, float]:
    """Parameters of a built-in ``boho:p=...,eps=...`` source name."""
    if not spec.startswith("boho:"):
        raise ParseError(f"{spec!r} is not a built-in boho source")
    params = {}
    for part in spec[5:].split(","):
        if "=" not in part:
            raise ParseError(f"built-in source parameter {part!r} is not key=value")
        key, val = part.split("=", 1)
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ParseError(f"built-in source parameter {key!r} is not a number") from None
    unknown = set(params) - {"p", "eps"}
    if unknown or "p" not in params or "eps" not in params:
        raise ParseError("built-in boho source needs exactly p=... and eps=...")
    return params


def load_source(spec: str) -> DistributedSource:
    """Read a source file or resolve a built-in name such as ``boho:p=0.3,eps=1e-4``."""
    if spec.startswith("boho:"):
        from .boho import boho_source

        params = boho_spec_params(spec)
        return boho_source(params["p"], params["eps"])
    path = Path(spec)
    return DistributedSource.from_text(path.read_text(encoding="utf-8"), str(path))


def load_side_info_source(path: str) -> SideInfoSource:
    p = Path(path)
    return SideInfoSource.from_text(p.read_text(encoding="utf-8"), str(p))
