"""Run manifests: what produced an output file, with input digests."""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .textio import dump_kv


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def timestamp() -> str:
    """UTC time of the run; SOURCE_DATE_EPOCH pins it for reproducible builds."""
    raw = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(raw) if raw and raw.strip().isdigit() else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class RunManifest:
    command: list[str]
    config: list[tuple[str, object]] = field(default_factory=list)
    seed: int | None = None
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    time: str = field(default_factory=timestamp)

    def to_text(self) -> str:
        items: list[tuple[str, object]] = [
            ("tool", "rdlab"),
            ("version", self.version),
            ("command", " ".join(self.command)),
            ("timestamp", self.time),
        ]
        if self.seed is not None:
            items.append(("seed", self.seed))
        items += [(f"config.{k}", v) for k, v in self.config]
        for path in self.inputs:
            if Path(path).is_file():
                items.append((f"input.{Path(path).name}.sha256", file_digest(path)))
            else:
                items.append((f"input.{path.replace(':', '_').replace(',', '_')}", "builtin"))
        items += [(f"output.{i}", Path(p).name) for i, p in enumerate(self.outputs)]
        return dump_kv(items)

    def write(self, path: str) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")
