"""Region boundaries: dominance filtering, convex closure, containment, CSV export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..textio import fmt_float
from .schemes import RDTuple

DIST_TOL = 1e-12
BASE_COLUMNS = ["r1_bits", "r2_bits", "d1", "d2", "scheme", "n", "tau", "provenance_id"]


@dataclass(frozen=True)
class Corner:
    """An RD tuple with the parameters that produced it."""

    rd: RDTuple
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class RegionBoundary:
    fixed: tuple[float, float]
    corners: tuple[Corner, ...]
    hulled: bool

    @property
    def points(self) -> np.ndarray:
        return np.array([[c.rd.r1, c.rd.r2] for c in self.corners]).reshape(-1, 2)

    def __len__(self):
        return len(self.corners)

    def envelope(self, r1) -> np.ndarray:
        return lower_envelope(self.points, r1)


def _as_corner(c) -> Corner:
    if isinstance(c, Corner):
        return c
    if isinstance(c, RDTuple):
        return Corner(c)
    rd, prov = c
    return Corner(rd, dict(prov))


def pareto_filter(corners: Sequence[Corner]) -> list[Corner]:
    """Mutually non-dominated corners in (r1, r2), sorted by r1."""
    order = sorted(range(len(corners)),
                   key=lambda i: (corners[i].rd.r1, corners[i].rd.r2, i))
    out: list[Corner] = []
    best = math.inf
    for i in order:
        c = corners[i]
        if c.rd.r2 < best:
            if out and out[-1].rd.r1 == c.rd.r1:
                continue
            out.append(c)
            best = c.rd.r2
    return out


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def lower_hull(corners: Sequence[Corner]) -> list[Corner]:
    """Vertices of the lower-left convex boundary of the up-closed hull."""
    pts = pareto_filter(corners)
    hull: list[Corner] = []
    for c in pts:
        p = (c.rd.r1, c.rd.r2)
        while len(hull) >= 2:
            o = (hull[-2].rd.r1, hull[-2].rd.r2)
            a = (hull[-1].rd.r1, hull[-1].rd.r2)
            if _cross(o, a, p) <= 0:
                hull.pop()
            else:
                break
        hull.append(c)
    return hull


def assemble_region(corners: Iterable, fixed: tuple[float, float], hull: bool = True,
                    swapped: Iterable | None = None) -> RegionBoundary:
    """Boundary of the union of corners meeting the distortion targets.

    ``swapped`` holds corners computed with the encoders exchanged; their
    rate coordinates are swapped back and merged before hulling.
    """
    pool = [_as_corner(c) for c in corners]
    if swapped is not None:
        for c in map(_as_corner, swapped):
            rd = RDTuple(c.rd.r2, c.rd.r1, c.rd.d2, c.rd.d1)
            pool.append(Corner(rd, {**c.provenance, "swapped": True}))
    if not pool:
        raise ValueError("no corners to assemble")
    d1, d2 = fixed
    ok = [c for c in pool if c.rd.d1 <= d1 + DIST_TOL and c.rd.d2 <= d2 + DIST_TOL]
    if not ok:
        best = min(pool, key=lambda c: max(c.rd.d1 - d1, c.rd.d2 - d2))
        raise ValueError(f"no corner meets distortions ({d1}, {d2}); closest has "
                         f"({best.rd.d1:.6g}, {best.rd.d2:.6g})")
    kept = lower_hull(ok) if hull else pareto_filter(ok)
    return RegionBoundary((float(d1), float(d2)), tuple(kept), hull)


def lower_envelope(points: np.ndarray, r1) -> np.ndarray:
    """Smallest R2 achievable at each R1 by time-sharing between ``points``.

    +inf left of the smallest R1; constant right of the largest.
    """
    hull = lower_hull([Corner(RDTuple(float(a), float(b), 0.0, 0.0)) for a, b in points])
    xs = np.array([c.rd.r1 for c in hull])
    ys = np.array([c.rd.r2 for c in hull])
    r = np.atleast_1d(np.asarray(r1, dtype=float))
    out = np.interp(r, xs, ys)
    out[r < xs[0]] = np.inf
    return out if np.ndim(r1) else out[0]


def _diagonal_gap(points: np.ndarray, a: float, b: float) -> float:
    """L-infinity distance from (a, b) to the up-closed hull, along the diagonal."""
    def g(t):
        return lower_envelope(points, a + t) - (b + t)

    if g(0.0) <= 0:
        return 0.0
    hi = max(1.0, float(points[:, 0].min() - a), float(points[:, 1].min() - b))
    while g(hi) > 0:
        hi *= 2
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def region_contains(outer: RegionBoundary, inner: RegionBoundary,
                    slack: float = 0.0) -> tuple[bool, float]:
    """Whether every inner point lies in outer's up-closed hull within ``slack``.

    Returns the verdict and the largest violation beyond the slack.
    """
    if not np.allclose(outer.fixed, inner.fixed, rtol=0, atol=1e-12):
        raise ValueError(f"distortion mismatch: {outer.fixed} vs {inner.fixed}")
    pts = outer.points
    worst = 0.0
    for a, b in inner.points:
        worst = max(worst, _diagonal_gap(pts, a + slack, b + slack))
    return worst == 0.0, worst


def envelope_sup_gap(a: RegionBoundary, b: RegionBoundary, grid: np.ndarray) -> float:
    """max over the grid of |env_a - env_b| where both are finite."""
    ea, eb = a.envelope(grid), b.envelope(grid)
    ok = np.isfinite(ea) & np.isfinite(eb)
    if not ok.any():
        return math.inf
    return float(np.abs(ea[ok] - eb[ok]).max())


def boundary_distance(inner: RegionBoundary, outer: RegionBoundary) -> float:
    """Largest Euclidean distance from an inner boundary point to outer's up-closed hull."""
    hull = lower_hull(outer.corners)
    xs = np.array([c.rd.r1 for c in hull])
    ys = np.array([c.rd.r2 for c in hull])
    worst = 0.0
    for a, b in inner.points:
        if a >= xs[0] and lower_envelope(outer.points, a) <= b:
            continue
        # vertical ray above the first vertex, the hull edges, horizontal ray after the last
        cand = [math.hypot(xs[0] - a, max(0.0, ys[0] - b)),
                math.hypot(max(0.0, xs[-1] - a), ys[-1] - b)]
        q = np.array([a, b])
        for i in range(len(xs) - 1):
            p0 = np.array([xs[i], ys[i]])
            d = np.array([xs[i + 1], ys[i + 1]]) - p0
            t = float(np.clip(np.dot(q - p0, d) / np.dot(d, d), 0, 1))
            cand.append(float(np.hypot(*(p0 + t * d - q))))
        worst = max(worst, min(cand))
    return worst


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def boundary_rows(boundary: RegionBoundary, scheme: str, start_id: int = 1,
                  extra: Sequence[str] = ()) -> tuple[list[list[str]], dict[str, dict]]:
    rows, prov = [], {}
    for k, c in enumerate(boundary.corners):
        pid = f"p{start_id + k:05d}"
        p = c.provenance
        row = [_fmt(float(c.rd.r1)), _fmt(float(c.rd.r2)), _fmt(float(c.rd.d1)),
               _fmt(float(c.rd.d2)), p.get("scheme", scheme), _fmt(p.get("n")),
               _fmt(p.get("tau")), pid]
        row += [_fmt(p.get(col)) for col in extra]
        rows.append(row)
        prov[pid] = {"scheme": p.get("scheme", scheme), **p}
    return rows, prov


def render_csv(rows: Sequence[Sequence[str]], extra: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BASE_COLUMNS + list(extra))
    w.writerows(rows)
    return buf.getvalue()


def render_provenance(prov: dict[str, dict], manifest_name: str | None = None) -> str:
    lines = []
    if manifest_name:
        lines.append(f"manifest = {manifest_name}")
    for pid, rec in prov.items():
        for key in sorted(rec):
            val = rec[key]
            lines.append(f"{pid}.{key} = {_fmt(val) if not isinstance(val, (list, tuple)) else ' '.join(map(_fmt, val))}")
    return "\n".join(lines) + "\n"


def read_region_csv(path: str) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
