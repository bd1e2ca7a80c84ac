"""Key-value structured text used for sources, configs, reports and pmfs.

One ``key = value`` pair per line, ``#`` starts a comment, keys are unique.
List values are whitespace or comma separated tokens.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line


@dataclass(frozen=True)
class Entry:
    value: str
    line: int


class KeyValues:
    """Parsed key-value document with typed accessors that report line numbers."""

    def __init__(self, entries: dict[str, Entry], source: str | None = None):
        self.entries = entries
        self.source = source
        self._used: set[str] = set()

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def keys(self):
        return self.entries.keys()

    def _error(self, key: str, msg: str) -> ParseError:
        e = self.entries.get(key)
        return ParseError(f"{key}: {msg}", e.line if e else None, self.source)

    def raw(self, key: str, default=None) -> str | None:
        if key not in self.entries:
            if default is None:
                raise ParseError(f"missing required key '{key}'", None, self.source)
            return default
        self._used.add(key)
        return self.entries[key].value

    def get_str(self, key: str, default: str | None = None) -> str:
        return self.raw(key, default)

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.entries and default is not None:
            return float(default)
        try:
            return float(self.raw(key))
        except ValueError:
            raise self._error(key, f"expected a number, got {self.entries[key].value!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.entries and default is not None:
            return int(default)
        text = self.raw(key)
        try:
            val = float(text)
        except ValueError:
            raise self._error(key, f"expected an integer, got {text!r}") from None
        if not math.isfinite(val) or val != int(val):
            raise self._error(key, f"expected an integer, got {text!r}")
        return int(val)

    def get_floats(self, key: str, default: list[float] | None = None) -> list[float]:
        if key not in self.entries and default is not None:
            return list(default)
        toks = split_tokens(self.raw(key))
        try:
            return [float(t) for t in toks]
        except ValueError:
            raise self._error(key, "expected a list of numbers") from None

    def get_ints(self, key: str, default: list[int] | None = None) -> list[int]:
        vals = self.get_floats(key, default)
        if any(v != int(v) for v in vals):
            raise self._error(key, "expected a list of integers")
        return [int(v) for v in vals]

    def get_bool(self, key: str, default: bool | None = None) -> bool:
        if key not in self.entries and default is not None:
            return default
        text = self.raw(key).lower()
        if text in ("true", "yes", "1", "on"):
            return True
        if text in ("false", "no", "0", "off"):
            return False
        raise self._error(key, f"expected a boolean, got {text!r}")

    def unused(self) -> list[str]:
        return [k for k in self.entries if k not in self._used]


def split_tokens(text: str) -> list[str]:
    return [t for t in re.split(r"[\s,]+", text.strip().strip("[]")) if t]


def parse_kv(text: str, source: str | None = None) -> KeyValues:
    entries: dict[str, Entry] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", lineno, source)
        key, value = (part.strip() for part in body.split("=", 1))
        if not _KEY.match(key):
            raise ParseError(f"invalid key {key!r}", lineno, source)
        if key in entries:
            raise ParseError(f"duplicate key {key!r} (first on line {entries[key].line})", lineno, source)
        if not value:
            raise ParseError(f"empty value for {key!r}", lineno, source)
        entries[key] = Entry(value, lineno)
    return KeyValues(entries, source)


def read_kv(path: str) -> KeyValues:
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read(), source=str(path))


def fmt_float(x: float) -> str:
    """Shortest text that round-trips the double exactly; platform independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(fmt_value(x) for x in v)
    return str(v)


def dump_kv(pairs) -> str:
    """Render an iterable of (key, value) pairs, preserving order."""
    items = pairs.items() if hasattr(pairs, "items") else pairs
    return "".join(f"{k} = {fmt_value(v)}\n" for k, v in items)
