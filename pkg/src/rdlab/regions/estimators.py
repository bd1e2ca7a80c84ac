"""Region sweepers with an estimator-style interface.

Each sweeper is configured by constructor parameters, ``fit`` evaluates
its corner grid on a source, and the assembled boundary is left in
``boundary_``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .._parallel import pmap
from .._validation import InfeasibleError
from ..components import ComponentPair, enumerate_component_pairs, gk_common_part, make_pair
from ..info import Alphabet
from ..source import DistributedSource, SideInfoSource
from .boundary import Corner, RegionBoundary, assemble_region
from .corrections import flmc_corrections, min_tau_for_theta
from .schemes import (StructureViolation, FlmcCodingSpec, RatePolytope, btsi_alpha, cc_alpha,
                      flmc_alpha, mcml_alpha, random_spec)


def trivial_pair(src: DistributedSource) -> ComponentPair:
    """Constant components; epsilon is zero."""
    k1, k2 = src.sizes
    return ComponentPair(Alphabet(1), np.zeros(k1, np.int64), np.zeros(k2, np.int64), 0.0)


def spec_grid(src: DistributedSource, components: ComponentPair, n_specs: int, seed: int,
              w_size: int | None = None, u_sizes: tuple[int, int] | None = None) -> list[FlmcCodingSpec]:
    """Reproducible random coding specs within the cardinality caps."""
    rng = np.random.default_rng([int(seed), components.s_size, n_specs])
    return [random_spec(src, components, rng, w_size, u_sizes) for _ in range(n_specs)]


def _polytope_corners(poly: RatePolytope, prov: dict) -> list[Corner]:
    out = []
    cs = poly.corners()
    for k, rd in enumerate(cs):
        tag = "single" if len(cs) == 1 else ("sum-on-r2", "sum-on-r1")[k]
        out.append(Corner(rd, {**prov, "corner": tag}))
    return out


class _SweepBase(BaseEstimator):
    def _assemble(self, corners, swapped=None) -> RegionBoundary:
        self.corners_ = corners
        self.boundary_ = assemble_region(corners, (self.d1, self.d2), hull=self.hull,
                                         swapped=swapped)
        return self.boundary_


class CCRegion(_SweepBase):
    """Common-component region from random specs on the Gacs-Korner part."""

    scheme = "cc"

    def __init__(self, d1=1.0, d2=1.0, n_specs=200, w_size=None, u_sizes=None, seed=0,
                 hull=True, swap=False, specs=None, threads=None):
        self.d1 = d1
        self.d2 = d2
        self.n_specs = n_specs
        self.w_size = w_size
        self.u_sizes = u_sizes
        self.seed = seed
        self.hull = hull
        self.swap = swap
        self.specs = specs
        self.threads = threads

    def _components(self, src):
        return gk_common_part(src)[0]

    def _specs(self, src):
        if self.specs is not None:
            return list(self.specs)
        return spec_grid(src, self._components(src), self.n_specs, self.seed, self.w_size,
                         self.u_sizes)

    def _corners(self, src, specs):
        def one(args):
            i, spec = args
            return _polytope_corners(cc_alpha(src, spec), {"scheme": self.scheme, "spec": i})
        return [c for cs in pmap(one, enumerate(specs), self.threads) for c in cs]

    def fit(self, source: DistributedSource, y=None):
        self.specs_ = self._specs(source)
        corners = self._corners(source, self.specs_)
        swapped = None
        if self.swap:
            twin = source.swapped()
            swapped = self._corners(twin, spec_grid(twin, self._components(twin), self.n_specs,
                                                    self.seed, self.w_size, self.u_sizes))
        self._assemble(corners, swapped)
        return self


class BTRegion(CCRegion):
    """Berger-Tung region: the CC sweep with constant components and trivial W."""

    scheme = "bt"

    def _components(self, src):
        return trivial_pair(src)

    def _specs(self, src):
        if self.specs is not None:
            return list(self.specs)
        return spec_grid(src, trivial_pair(src), self.n_specs, self.seed, 1, self.u_sizes)


@dataclass(frozen=True)
class SkippedPoint:
    spec: int
    n: float
    tau: float
    reason: str


class FLMCRegion(_SweepBase):
    """Finite-length region over component pairs, specs and (n, tau).

    ``taus`` lists tau values per n; when None, tau = n ** tau_exponent.
    """

    scheme = "flmc"

    def __init__(self, d1=1.0, d2=1.0, n_values=(10**6,), taus=None, tau_exponent=-0.4,
                 components=None, max_eps=0.0, max_s=None, n_specs=200, w_size=None,
                 u_sizes=None, seed=0, enforce_ranges=True, hull=True, swap=False, specs=None,
                 threads=None):
        self.d1 = d1
        self.d2 = d2
        self.n_values = n_values
        self.taus = taus
        self.tau_exponent = tau_exponent
        self.components = components
        self.max_eps = max_eps
        self.max_s = max_s
        self.n_specs = n_specs
        self.w_size = w_size
        self.u_sizes = u_sizes
        self.seed = seed
        self.enforce_ranges = enforce_ranges
        self.hull = hull
        self.swap = swap
        self.specs = specs
        self.threads = threads

    def _pairs(self, src) -> list[ComponentPair]:
        if self.components is not None:
            return [self.components]
        gk = gk_common_part(src)[0]
        if self.max_s is None:
            return [gk]
        found = {gk.key(): gk}
        for pair in enumerate_component_pairs(src, self.max_s, self.max_eps):
            found.setdefault(pair.key(), pair)
        return [found[k] for k in sorted(found)]

    def _nt_grid(self) -> list[tuple[float, float]]:
        out = []
        for n in self.n_values:
            taus = self.taus if self.taus is not None else [float(n) ** self.tau_exponent]
            out += [(float(n), float(t)) for t in taus]
        return out

    def _corners(self, src, specs_by_pair):
        jobs = [(pi, si, spec, n, tau) for pi, specs in enumerate(specs_by_pair)
                for si, spec in enumerate(specs) for n, tau in self._nt_grid()]

        def one(job):
            pi, si, spec, n, tau = job
            try:
                poly = flmc_alpha(src, spec, n, tau, enforce_ranges=self.enforce_ranges)
            except ValueError as exc:
                return SkippedPoint(si, n, tau, str(exc))
            t = poly.params["terms"]
            prov = {"scheme": self.scheme, "pair": pi, "spec": si, "n": int(n), "tau": tau,
                    "epsilon": t.epsilon, "in_range": t.in_range}
            return _polytope_corners(poly, prov)

        corners, skipped = [], []
        for res in pmap(one, jobs, self.threads):
            (skipped.append if isinstance(res, SkippedPoint) else corners.extend)(res)
        return corners, skipped

    def _spec_sets(self, src, pairs):
        if self.specs is not None:
            return [list(self.specs)]
        return [spec_grid(src, pair, self.n_specs, self.seed, self.w_size, self.u_sizes)
                for pair in pairs]

    def fit(self, source: DistributedSource, y=None):
        self.pairs_ = self._pairs(source) if self.specs is None else [self.specs[0].components]
        corners, self.skipped_ = self._corners(source, self._spec_sets(source, self.pairs_))
        if not corners:
            reason = self.skipped_[0].reason if self.skipped_ else "empty sweep"
            raise InfeasibleError(f"no admissible FLMC point: {reason}")
        swapped = None
        if self.swap:
            twin = source.swapped()
            pairs = [make_pair(twin, p.f2, p.f1) for p in self.pairs_]
            swapped, _ = self._corners(twin, self._spec_sets(twin, pairs) if self.specs is None
                                       else [[_swap_spec(s) for s in self.specs]])
        self._assemble(corners, swapped)
        return self


class MCMLRegion(_SweepBase):
    """Multi-letter region at a desk-scale blocklength.

    For each spec the induced joint of (X1, X2, W1', W2, U1, U2) is built
    by exact enumeration of a random quantizer plus exact correction; specs
    whose joint breaks a structural condition are skipped. ``tau`` defaults
    to 1.05 times the smallest value at which theta_n is defined.
    """

    scheme = "mcml"

    def __init__(self, d1=1.0, d2=1.0, n=6, tau=None, components=None, n_specs=50,
                 w_size=None, u_sizes=None, seed=0, hull=True, specs=None, threads=None):
        self.d1 = d1
        self.d2 = d2
        self.n = n
        self.tau = tau
        self.components = components
        self.n_specs = n_specs
        self.w_size = w_size
        self.u_sizes = u_sizes
        self.seed = seed
        self.hull = hull
        self.specs = specs
        self.threads = threads

    def _tau(self, s_size: int) -> float:
        return self.tau if self.tau is not None else 1.05 * min_tau_for_theta(s_size, self.n)

    def fit(self, source: DistributedSource, y=None):
        from ..info import JointDist
        from ..sim.interleave import induced_joint

        if self.specs is not None:
            specs = list(self.specs)
        else:
            pair = self.components if self.components is not None else gk_common_part(source)[0]
            specs = spec_grid(source, pair, self.n_specs, self.seed, self.w_size, self.u_sizes)
        self.specs_ = specs

        def one(args):
            i, spec = args
            tau = self._tau(spec.components.s_size)
            try:
                p6 = induced_joint(source, spec, self.n, tau, seed=int(self.seed) + i)
                terms = flmc_corrections(spec.components, spec.p_sw(source), self.n, tau,
                                         source.dmax, spec.joint_card(), enforce_ranges=False)
                poly = mcml_alpha(source, spec, JointDist(p6, tol=1e-9), terms)
            except (StructureViolation, ValueError) as exc:
                return SkippedPoint(i, float(self.n), tau, str(exc))
            return _polytope_corners(poly, {"scheme": self.scheme, "spec": i, "n": int(self.n),
                                            "tau": tau, "epsilon": terms.epsilon})

        corners, self.skipped_ = [], []
        for res in pmap(one, enumerate(specs), self.threads):
            (self.skipped_.append if isinstance(res, SkippedPoint) else corners.extend)(res)
        if not corners:
            reason = self.skipped_[0].reason if self.skipped_ else "empty sweep"
            raise InfeasibleError(f"no admissible MCML point: {reason}")
        self._assemble(corners)
        return self


def _swap_spec(spec: FlmcCodingSpec) -> FlmcCodingSpec:
    """The same design with encoders exchanged; W is still generated from S."""
    c = spec.components
    pair = ComponentPair(c.s_alphabet, c.f2, c.f1, c.epsilon)
    return FlmcCodingSpec(pair, spec.p_w, spec.p_u2, spec.p_u1,
                          np.transpose(spec.g2, (0, 2, 1)), np.transpose(spec.g1, (0, 2, 1)))


def _btsi_bayes(src: SideInfoSource, k1, k2):
    full = np.einsum("abyz,ayu,bzv->abyzuv", src.pmf.probs, k1, k2)
    c1 = np.einsum("abyzuv,ar->uvyzr", full, src.d1)
    c2 = np.einsum("abyzuv,br->uvyzr", full, src.d2)
    return c1.argmin(-1), c2.argmin(-1)


class BTSIRegion(_SweepBase):
    """Berger-Tung region with decoder side information; time sharing via the hull."""

    scheme = "btsi"

    def __init__(self, d1=1.0, d2=1.0, n_specs=200, u_sizes=(2, 2), seed=0, hull=True,
                 threads=None):
        self.d1 = d1
        self.d2 = d2
        self.n_specs = n_specs
        self.u_sizes = u_sizes
        self.seed = seed
        self.hull = hull
        self.threads = threads

    def fit(self, source: SideInfoSource, y=None):
        k1, k2, ky1, ky2 = source.pmf.shape
        rng = np.random.default_rng([int(self.seed), 7, self.n_specs])
        draws = [(rng.dirichlet(np.ones(self.u_sizes[0]), size=(k1, ky1)),
                  rng.dirichlet(np.ones(self.u_sizes[1]), size=(k2, ky2)))
                 for _ in range(self.n_specs)]

        def one(args):
            i, (p1, p2) = args
            g1, g2 = _btsi_bayes(source, p1, p2)
            return _polytope_corners(btsi_alpha(source, p1, p2, g1, g2),
                                     {"scheme": self.scheme, "spec": i})

        self._assemble([c for cs in pmap(one, enumerate(draws), self.threads) for c in cs])
        return self


class BohoRegion(_SweepBase):
    """Closed-form BOHO region at one epsilon; eps = 0 gives the CC curve."""

    def __init__(self, p=0.3, epsilon=0.0, d2max=0.15, delta_count=64, delta_range=(0.01, 0.49),
                 n_count=32, tau_count=16, delta1_count=64, n_values=None, hull=True):
        self.p = p
        self.epsilon = epsilon
        self.d2max = d2max
        self.delta_count = delta_count
        self.delta_range = delta_range
        self.n_count = n_count
        self.tau_count = tau_count
        self.delta1_count = delta1_count
        self.n_values = n_values
        self.hull = hull

    def grid(self):
        from ..boho import BohoGrid

        return BohoGrid(self.delta_count, tuple(self.delta_range), self.n_count, self.tau_count,
                        self.delta1_count,
                        None if self.n_values is None else tuple(int(v) for v in self.n_values))

    def fit(self, source=None, y=None):
        from ..boho import boho_region_sweep

        self.boundary_ = boho_region_sweep(self.p, self.epsilon, self.d2max, self.grid(),
                                           hull=self.hull)
        self.corners_ = list(self.boundary_.corners)
        return self


def max_coordinate_gap(a: RatePolytope, b: RatePolytope) -> float:
    """Largest |difference| across r1, r2, rsum, d1, d2."""
    return max(abs(getattr(a, k) - getattr(b, k)) for k in ("r1", "r2", "rsum", "d1", "d2"))


def convergence_gap(src: DistributedSource, spec: FlmcCodingSpec, n: float,
                    tau_exponent: float = -0.4) -> float:
    """Coordinate gap between the FLMC bounds at tau = n^a and the CC bounds of ``spec``."""
    tau = n ** tau_exponent
    flmc = flmc_alpha(src, spec, n, tau, enforce_ranges=False)
    return max_coordinate_gap(flmc, cc_alpha(src, spec))


__all__ = ["CCRegion", "BTRegion", "FLMCRegion", "MCMLRegion", "BTSIRegion", "BohoRegion", "spec_grid",
           "trivial_pair", "convergence_gap", "max_coordinate_gap"]
