"""Simulation configs and reports in key-value text plus per-trial CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from ..textio import KeyValues, ParseError, dump_kv, fmt_value, parse_kv

KINDS = ("quantizer", "correction", "interleave", "boho")
MODES = ("exact", "sampled")

# key -> (type, default); None default means required
_COMMON = {
    "kind": (str, None),
    "seed": (int, 0),
    "trials": (int, 1),
    "n": (int, None),
    "m": (int, 1),
    "source": (str, None),
    "rule": (str, "typical"),
}
_EXTRA = {
    "quantizer": {"f1": (list, None), "f2": (list, None), "p_w": (list, None),
                  "tau": (float, None), "mode": (str, "exact"), "samples": (int, 10_000),
                  "nested": (int, 12)},
    "correction": {"f1": (list, None), "f2": (list, None), "p_w": (list, None),
                   "tau": (float, None), "mode": (str, "exact"), "samples": (int, 100_000)},
    "interleave": {"f1": (list, None), "f2": (list, None), "p_w": (list, None),
                   "tau": (float, None)},
    "boho": {"delta": (float, 0.25), "delta1": (float, 0.05), "codebook_size": (int, 6),
             "draws": (int, 64)},
}


def _read(kv: KeyValues, key: str, typ, default):
    if key not in kv and default is None:
        raise ParseError(f"missing required key '{key}'", None, kv.source)
    if key == "seed":
        text = kv.raw(key, str(default))
        if not text.isdigit():
            raise kv._error(key, f"expected a non-negative integer, got {text!r}")
        return int(text)
    if typ is int:
        return kv.get_int(key, default)
    if typ is float:
        return kv.get_float(key, default)
    if typ is list:
        return kv.get_floats(key) if key == "p_w" else kv.get_ints(key)
    return kv.get_str(key, default)


@dataclass(frozen=True)
class SimConfig:
    """Every setting of one simulation run; equal configs give equal report bytes."""

    kind: str
    seed: int
    trials: int
    n: int
    m: int
    source: str
    rule: str
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.extra.get("mode", "exact") not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def get(self, key: str):
        return self.extra[key]

    def items(self) -> list[tuple[str, object]]:
        out = [("kind", self.kind), ("seed", self.seed), ("trials", self.trials), ("n", self.n),
               ("m", self.m), ("source", self.source), ("rule", self.rule)]
        return out + [(k, self.extra[k]) for k in sorted(self.extra)]

    def to_text(self) -> str:
        return dump_kv(self.items())

    def with_seed(self, seed: int) -> "SimConfig":
        return SimConfig(self.kind, seed, self.trials, self.n, self.m, self.source, self.rule,
                         dict(self.extra))

    @classmethod
    def from_kv(cls, kv: KeyValues) -> "SimConfig":
        kind = kv.get_str("kind")
        if kind not in KINDS:
            raise kv._error("kind", f"must be one of {KINDS}")
        vals = {key: _read(kv, key, typ, default)
                for key, (typ, default) in {**_COMMON, **_EXTRA[kind]}.items()}
        if kind == "boho" and "rule" not in kv:
            vals["rule"] = "min-hamming"
        left = kv.unused()
        if left:
            raise kv._error(left[0], f"unknown key for kind {kind}")
        common = {k: vals.pop(k) for k in list(_COMMON)}
        try:
            return cls(extra=vals, **common)
        except ValueError as exc:
            raise ParseError(str(exc), source=kv.source) from None

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "SimConfig":
        return cls.from_kv(parse_kv(text, source))


@dataclass
class SimReport:
    """Aggregated metrics, gates and per-trial rows of one run."""

    config: SimConfig
    metrics: list[tuple[str, object]] = field(default_factory=list)
    gates: list[tuple[str, bool, float]] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    rows: list[list[object]] = field(default_factory=list)
    notes: list[tuple[str, str]] = field(default_factory=list)

    def metric(self, key: str, value) -> None:
        self.metrics.append((key, value))

    def gate(self, name: str, passed: bool, margin: float) -> None:
        self.gates.append((name, bool(passed), float(margin)))

    def note(self, key: str, text: str) -> None:
        self.notes.append((key, text))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.gates)

    def failures(self) -> list[str]:
        return [name for name, ok, _ in self.gates if not ok]

    def to_text(self, manifest: str | None = None) -> str:
        items: list[tuple[str, object]] = []
        if manifest:
            items.append(("manifest", manifest))
        items += [(f"config.{k}", v) for k, v in self.config.items()]
        items += self.metrics
        for name, ok, margin in self.gates:
            items.append((f"gate.{name}", "pass" if ok else "fail"))
            items.append((f"gate.{name}.margin", margin))
        items += [(f"note.{k}", v) for k, v in self.notes]
        items.append(("passed", self.passed))
        return dump_kv(items)

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows([[fmt_value(v) for v in row] for row in self.rows])
        return buf.getvalue()
