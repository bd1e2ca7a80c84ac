"""Invariant suites: continuity bounds, typicality bounds, region containment.

Each check enumerates or samples cases, counts violations and keeps the
smallest slack seen, so a table of margins can be printed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .info import JointDist, entropy_continuity_bound, mi_continuity_bounds
from .source import DistributedSource
from .typicality import (
    _compositions,
    _multinomial,
    cond_typical_count,
    conditional_typical_count_lower_bound,
    is_cond_typical,
    is_typical,
    typicality_bounds,
)

SUITES = ("continuity", "typicality", "containment")
BOUND_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    cases: int = 0
    violations: int = 0
    margin: float = math.inf

    def record(self, slack: float, tol: float = BOUND_TOL) -> None:
        self.cases += 1
        self.margin = min(self.margin, slack)
        if slack < -tol:
            self.violations += 1

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.violations == 0


# --- continuity ----------------------------------------------------------------

def _h(p: np.ndarray, axes) -> np.ndarray:
    """Entropy in bits of each pmf in a batch, over ``axes``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return t.sum(axis=axes)


def _batch_pairs(rng: np.random.Generator, count: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs of pmfs on k x k x k: half independent draws, half mixtures toward
    a third pmf so small distances are well covered."""
    size = k**3
    conc = rng.choice([0.2, 1.0, 5.0], size=count)[:, None]
    p = rng.gamma(np.broadcast_to(conc, (count, size)))
    r = rng.gamma(np.broadcast_to(conc, (count, size)))
    p /= p.sum(axis=1, keepdims=True)
    r /= r.sum(axis=1, keepdims=True)
    lam = np.where(np.arange(count) % 2 == 0, 1.0, rng.uniform(0, 0.2, count) ** 2)[:, None]
    q = (1 - lam) * p + lam * r
    return p.reshape(count, k, k, k), q.reshape(count, k, k, k)


def continuity_checks(pairs: int = 10_000, sizes=(2, 4, 8), seed: int = 0) -> list[CheckResult]:
    """Entropy and mutual-information continuity bounds on random pmf pairs."""
    out = []
    for k in sizes:
        rng = np.random.default_rng([seed, k])
        p, q = _batch_pairs(rng, pairs, k)
        v = np.minimum(1.0, 0.5 * np.abs(p - q).sum(axis=(1, 2, 3)))
        vxy = 0.5 * np.abs(p.sum(axis=3) - q.sum(axis=3)).sum(axis=(1, 2))
        px, qx = p.sum(axis=(2, 3)), q.sum(axis=(2, 3))
        vx = np.minimum(1.0, 0.5 * np.abs(px - qx).sum(axis=1))

        def mi(a):
            return _h(a.sum(axis=(2, 3)), 1) + _h(a.sum(axis=(1, 3)), 1) - _h(a.sum(axis=3), (1, 2))

        def cmi(a):
            return (_h(a.sum(axis=2), (1, 2)) + _h(a.sum(axis=1), (1, 2)) - _h(a, (1, 2, 3))
                    - _h(a.sum(axis=(1, 2)), 1))

        d_h = np.abs(_h(px, 1) - _h(qx, 1))
        d_hj = np.abs(_h(p, (1, 2, 3)) - _h(q, (1, 2, 3)))
        d_i = np.abs(mi(p) - mi(q))
        d_ci = np.abs(cmi(p) - cmi(q))
        ent = CheckResult(f"continuity.entropy.k{k}")
        ent_joint = CheckResult(f"continuity.entropy_joint.k{k}")
        marg = CheckResult(f"continuity.marginal_distance.k{k}")
        pair = CheckResult(f"continuity.mutual_info.k{k}")
        cond = CheckResult(f"continuity.cond_mutual_info.k{k}")
        for i in range(pairs):
            ent.record(entropy_continuity_bound(vx[i], k) - d_h[i])
            ent_joint.record(entropy_continuity_bound(v[i], k**3) - d_hj[i])
            marg.record(v[i] - vxy[i])
            b_pair, b_cond = mi_continuity_bounds(v[i], k)
            pair.record(b_pair - d_i[i])
            cond.record(b_cond - d_ci[i])
        out += [ent, ent_joint, marg, pair, cond]
    return out


# --- typicality -------------------------------------------------------------------

def typicality_settings() -> list[tuple[np.ndarray, float, float]]:
    """27 (P(x, y), zeta, delta) settings on binary axes."""
    pmfs = [np.array([[0.35, 0.15], [0.1, 0.4]]),
            np.array([[0.45, 0.05], [0.25, 0.25]]),
            np.array([[0.2, 0.1], [0.3, 0.4]])]
    out = []
    for p in pmfs:
        pmax = p.sum(axis=1).max()
        for zf in (0.1, 0.4, 0.9):
            for delta in (0.2, 0.5, 1.0):
                out.append((p, zf * 2 * pmax, delta))
    return out


def _seqs_from_type(counts: np.ndarray) -> tuple[list[int], list[int]]:
    """One (x, y) pair of binary sequences with the given 2 x 2 joint counts."""
    x, y = [], []
    for a, b in itertools.product(range(2), range(2)):
        x += [a] * int(counts[a, b])
        y += [b] * int(counts[a, b])
    return x, y


def typicality_checks(max_n: int = 12) -> list[CheckResult]:
    """Typical-set size and mass bounds, composition, and the conditional
    count lower bound, over every type class at each n <= max_n.

    Membership depends only on the (joint) type, so sweeping type classes
    with their multinomial weights covers every sequence.
    """
    card = CheckResult("typicality.cardinality")
    comp = CheckResult("typicality.complement_mass")
    compo = CheckResult("typicality.composition")
    lower = CheckResult("typicality.cond_count_lower")
    for p, zeta, delta in typicality_settings():
        pxy = JointDist(p)
        px = JointDist(p.sum(axis=1))
        joint_zeta = zeta * 4  # zeta (|X| + |Y|) with binary axes
        for n in range(1, max_n + 1):
            count, mass = 0, 0.0
            for c in _compositions(n, 2):
                x = [0] * c[0] + [1] * c[1]
                if is_typical(x, px, zeta):
                    w = _multinomial(c)
                    count += w
                    mass += w * float(np.prod(px.probs ** np.array(c)))
                    res = conditional_typical_count_lower_bound(pxy, x, n, zeta, delta)
                    lower.record(cond_typical_count(pxy, x, delta) - res.bound,
                                 tol=1e-9 * max(res.bound, 1.0))
            cb, mb = typicality_bounds(px, n, zeta)
            card.record(cb - count, tol=1e-9 * cb)
            comp.record(mb - (1 - mass))
            for c in _compositions(n, 4):
                counts = np.array(c).reshape(2, 2)
                x, y = _seqs_from_type(counts)
                if is_typical(x, px, zeta) and is_cond_typical(y, x, pxy, zeta):
                    compo.record(0.0 if is_typical([x, y], pxy, joint_zeta) else -1.0)
    return [card, comp, compo, lower]


# --- containment ------------------------------------------------------------------

def containment_source() -> DistributedSource:
    """3 x 3 source with a two-block common part."""
    p = np.array([[0.3, 0.1, 0.0], [0.1, 0.2, 0.0], [0.0, 0.0, 0.3]])
    return DistributedSource(JointDist(p), 1 - np.eye(3), 1 - np.eye(3), "block3")


def containment_checks(n_specs: int = 200, n_values=(1e6, 1e20), slack: float = 1e-3,
                       distortions=(0.7, 0.7), seed: int = 0,
                       threads: int | None = None) -> list[CheckResult]:
    """CC region inside FLMC(eps = 0, n, tau = n^-0.4) on a shared spec grid."""
    from .regions.boundary import region_contains
    from .regions.estimators import CCRegion, FLMCRegion

    src = containment_source()
    d1, d2 = distortions
    cc = CCRegion(d1=d1, d2=d2, n_specs=n_specs, seed=seed, threads=threads).fit(src)
    out = []
    for n in n_values:
        fl = FLMCRegion(d1=d1, d2=d2, n_values=(n,), specs=cc.specs_, enforce_ranges=False,
                        threads=threads).fit(src)
        _, worst = region_contains(fl.boundary_, cc.boundary_, slack)
        res = CheckResult(f"containment.n{n:.0e}")
        res.record(0.0 - worst, tol=0.0)
        out.append(res)
    return out


def run_suite(name: str, threads: int | None = None) -> list[CheckResult]:
    if name == "continuity":
        return continuity_checks()
    if name == "typicality":
        return typicality_checks()
    if name == "containment":
        return containment_checks(threads=threads)
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, threads)]
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")


def render_table(results: list[CheckResult]) -> str:
    from .textio import fmt_value

    lines = ["check,cases,violations,min_margin,status"]
    for r in results:
        lines.append(f"{r.name},{r.cases},{r.violations},{fmt_value(float(r.margin))},"
                     f"{'pass' if r.passed else 'fail'}")
    return "\n".join(lines) + "\n"
