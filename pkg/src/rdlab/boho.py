"""Binary one-help-one example: source, closed-form corners, gap and region sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import InfeasibleError, check_open_interval
from .info import JointDist, binary_convolve, binary_entropy
from .regions.boundary import Corner, RegionBoundary, assemble_region
from .regions.corrections import b_upper, delta_k
from .regions.schemes import RDTuple
from .source import DistributedSource

EPS_MAX = 1 / 3


def boho_source(p: float, epsilon: float) -> DistributedSource:
    """X1 = X + E, X2 = (X, Z) with X ~ Bern(1/2), Z ~ Bern(p), E ~ Bern(eps).

    X2 is indexed 2x + z. d1 is identically zero; d2 is the Hamming
    distance between x + z and xhat + zhat.
    """
    if not 0 <= p < 0.5 or not 0 <= epsilon < 0.5:
        raise ValueError("p and epsilon must lie in [0, 1/2)")
    pz = np.array([1 - p, p])
    pe = np.array([1 - epsilon, epsilon])
    probs = np.zeros((2, 4))
    for x in range(2):
        for z in range(2):
            for e in range(2):
                probs[x ^ e, 2 * x + z] += 0.5 * pz[z] * pe[e]
    parity = np.array([0, 1, 1, 0])  # x + z for index 2x + z
    d2 = (parity[:, None] != parity[None, :]).astype(float)
    return DistributedSource(JointDist(probs), np.zeros((2, 2)), d2, f"boho-p{p:g}-eps{epsilon:g}")


def _hb(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x <= 0) | (x >= 1), 0.0, h)


def _conv(a, b):
    return a * (1 - b) + b * (1 - a)


def n_bounds(delta: float, epsilon: float) -> tuple[float, float]:
    """Open interval of admissible first-layer blocklengths."""
    return 64 / delta**2 * math.log(32 / delta), b_upper(epsilon)


def tau_bounds(delta: float, n: float) -> tuple[float, float]:
    return 2 * math.sqrt(math.log(32 / delta) / n), delta / 4


@dataclass(frozen=True)
class BohoParams:
    p: float
    epsilon: float
    delta: float
    delta1: float
    n: int
    tau: float

    def validate(self) -> None:
        check_open_interval(self.p, 0.0, 0.5, "p")
        if not 0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon={self.epsilon} outside [0, 1/2)")
        check_open_interval(self.delta, 0.0, 0.5, "delta")
        if self.n != int(self.n) or self.n < 1:
            raise ValueError(f"n={self.n} must be a positive integer")
        lo, hi = n_bounds(self.delta, self.epsilon)
        if not lo < self.n < hi:
            raise ValueError(f"n={self.n} outside ({lo:.6g}, {hi:.6g}) for delta={self.delta}, "
                             f"epsilon={self.epsilon}")
        check_open_interval(self.tau, *tau_bounds(self.delta, self.n), "tau")
        dp = _delta_prime(self.delta, self.n, self.tau)
        check_open_interval(self.delta1, 0.0, binary_convolve(self.p, dp), "delta1")


def _delta_prime(delta, n, tau):
    return np.minimum(1.0, delta + tau + 8 * np.exp(-2 * n * tau**2 / 4))


def _theta_prime(delta, n, tau):
    return (np.log2(n * tau**2 / 4 - math.log(4)) / n
            + tau * (4 + _hb(delta) - np.log2(delta * (1 - delta))) + 3 / n)


def _loss(epsilon, dn, dprime):
    """delta_n (delta' + (eps/delta_n) * delta'), the block-mismatch distortion."""
    if epsilon == 0:
        return np.zeros_like(np.asarray(dprime, dtype=float))
    return dn * (dprime + _conv(epsilon / dn, dprime))


@dataclass(frozen=True)
class BohoDerived:
    delta_prime: float
    delta_n: float
    theta_prime: float


def boho_derived(params: BohoParams) -> BohoDerived:
    params.validate()
    dn = delta_k(params.epsilon, params.n)
    if params.epsilon > dn:
        raise ValueError("epsilon exceeds delta_n")
    return BohoDerived(float(_delta_prime(params.delta, params.n, params.tau)), dn,
                       float(_theta_prime(params.delta, params.n, params.tau)))


def generic_theta_for_bsc(delta: float, n: float, tau: float) -> float:
    """The general-scheme theta_n evaluated at uniform S through BSC(delta)."""
    from .regions.corrections import theta_n

    p_sw = 0.5 * np.array([[1 - delta, delta], [delta, 1 - delta]])
    return theta_n(p_sw, n, tau)


def _boho_corner(p, delta, delta1, delta_prime, theta, loss) -> tuple[float, float, float]:
    r1 = 1 - binary_entropy(delta) + theta
    r2 = max(0.0, binary_entropy(binary_convolve(p, delta_prime)) - binary_entropy(delta1))
    return r1, r2, delta1 + loss


def boho_flmc_corner(params: BohoParams) -> RDTuple:
    d = boho_derived(params)
    loss = float(_loss(params.epsilon, d.delta_n, d.delta_prime))
    r1, r2, d2 = _boho_corner(params.p, params.delta, params.delta1, d.delta_prime,
                              d.theta_prime, loss)
    return RDTuple(r1, r2, 0.0, d2)


def boho_cc_corner(p: float, delta: float, delta1: float) -> RDTuple:
    """Common-component corner; delta1 may exceed delta (see the sweep)."""
    if not 0 <= p <= 1 or not 0 <= delta <= 1 or not 0 <= delta1 <= 0.5:
        raise ValueError("need p, delta in [0, 1] and delta1 in [0, 1/2]")
    r1, r2, d2 = _boho_corner(p, delta, delta1, delta, 0.0, 0.0)
    return RDTuple(r1, r2, 0.0, d2)


def boho_gap(p: float, epsilon: float, delta: float, delta1: float, n: int, tau: float) -> float:
    """Euclidean distance from the FLMC corner to the CC corner, summand by summand."""
    d = boho_derived(BohoParams(p, epsilon, delta, delta1, n, tau))
    rate_gap = binary_entropy(binary_convolve(p, d.delta_prime)) - binary_entropy(binary_convolve(p, delta))
    loss = float(_loss(epsilon, d.delta_n, d.delta_prime))
    return math.sqrt(d.theta_prime**2 + rate_gap**2 + loss**2)


def boho_gap_direct(p: float, epsilon: float, delta: float, delta1: float, n: int,
                    tau: float) -> float:
    """Same gap from the two corner tuples, R2 unclamped."""
    d = boho_derived(BohoParams(p, epsilon, delta, delta1, n, tau))
    hb = binary_entropy
    flmc = np.array([1 - hb(delta) + d.theta_prime,
                     hb(binary_convolve(p, d.delta_prime)) - hb(delta1),
                     delta1 + d.delta_n * (d.delta_prime + binary_convolve(epsilon / d.delta_n,
                                                                           d.delta_prime))
                     if epsilon else delta1])
    cc = np.array([1 - hb(delta), hb(binary_convolve(p, delta)) - hb(delta1), delta1])
    return float(np.linalg.norm(flmc - cc))


@dataclass(frozen=True)
class BohoGrid:
    delta_count: int = 64
    delta_range: tuple[float, float] = (0.01, 0.49)
    n_count: int = 32
    tau_count: int = 16
    delta1_count: int = 64
    n_values: tuple[int, ...] | None = field(default=None)

    def deltas(self) -> np.ndarray:
        lo, hi = self.delta_range
        if not 0 < lo < hi < 0.5:
            raise ValueError("delta range must satisfy 0 < lo < hi < 1/2")
        return np.geomspace(lo, hi, self.delta_count)

    def delta1s(self) -> np.ndarray:
        return np.linspace(0, 0.5, self.delta1_count + 2)[1:-1]

    def n_grid(self, epsilon: float) -> np.ndarray:
        if self.n_values is not None:
            return np.array(sorted(set(int(v) for v in self.n_values)), dtype=float)
        lo = min(n_bounds(d, epsilon)[0] for d in self.deltas())
        hi = b_upper(epsilon)
        if not hi > lo + 1:
            return np.empty(0)
        vals = np.unique(np.round(np.geomspace(math.floor(lo) + 1, math.ceil(hi) - 1, self.n_count)))
        return vals[(vals > lo) & (vals < hi)]

    def with_shared_n(self, epsilons) -> "BohoGrid":
        """Grid whose n values are the union of each epsilon's own grid."""
        vals = set()
        for eps in epsilons:
            if 0 < eps <= EPS_MAX:
                vals.update(int(v) for v in self.n_grid(eps))
        return BohoGrid(self.delta_count, self.delta_range, self.n_count, self.tau_count,
                        self.delta1_count, tuple(sorted(vals)))


def _pick_delta1(grid1: np.ndarray, tight: np.ndarray, ceiling: np.ndarray) -> np.ndarray:
    """Largest delta1 from grid1 plus the tight value, below ``ceiling`` and at most ``tight``."""
    cap = np.minimum(tight, ceiling)
    idx = np.searchsorted(grid1, cap, side="right") - 1
    from_grid = np.where(idx >= 0, grid1[np.clip(idx, 0, None)], np.nan)
    # grid values equal to the open upper end are not admissible
    from_grid = np.where(from_grid >= ceiling, np.nan, from_grid)
    use_tight = (tight < ceiling) & (tight > 0)
    return np.where(use_tight, tight, from_grid)


def _pareto_mask(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    order = np.lexsort((r2, r1))
    best = np.minimum.accumulate(r2[order])
    prev = np.concatenate([[np.inf], best[:-1]])
    keep = np.zeros(r1.size, bool)
    keep[order[r2[order] < prev]] = True
    return keep


def _flmc_points(p, epsilon, d2max, grid: BohoGrid):
    deltas = grid.deltas()
    ns = grid.n_grid(epsilon)
    if ns.size == 0:
        raise InfeasibleError(f"B(eps) empty for eps={epsilon}: no admissible n")
    D, N = np.meshgrid(deltas, ns, indexing="ij")
    n_lo = 64 / D**2 * np.log(32 / D)
    n_ok = (N > n_lo) & (N < b_upper(epsilon))
    if not n_ok.any():
        raise InfeasibleError(f"no n on the grid satisfies 64/delta^2 ln(32/delta) < n < "
                              f"log(2 eps)/log(1-eps) for eps={epsilon}")
    t_lo = 2 * np.sqrt(np.log(32 / D) / N)
    t_hi = D / 4
    frac = (np.arange(grid.tau_count) + 1) / (grid.tau_count + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        T = t_lo[..., None] * (t_hi / t_lo)[..., None] ** frac
    ok = n_ok[..., None] & (t_lo < t_hi)[..., None] & np.ones_like(T, bool)
    D = np.broadcast_to(D[..., None], T.shape)[ok]
    N = np.broadcast_to(N[..., None], T.shape)[ok]
    T = T[ok]
    if D.size == 0:
        raise InfeasibleError(f"tau interval empty at every admissible (delta, n) for eps={epsilon}")
    dprime = _delta_prime(D, N, T)
    theta = _theta_prime(D, N, T)
    dn = np.array([delta_k(epsilon, n) for n in N])
    loss = _loss(epsilon, dn, dprime)
    ceiling = _conv(p, dprime)
    d1 = _pick_delta1(grid.delta1s(), d2max - loss, ceiling)
    live = np.isfinite(d1)
    if not live.any():
        raise InfeasibleError(f"block-mismatch distortion exceeds d2max={d2max} at every grid point")
    D, N, T, dprime, theta, loss, ceiling, d1 = (a[live] for a in (D, N, T, dprime, theta, loss, ceiling, d1))
    r1 = 1 - _hb(D) + theta
    r2 = np.maximum(0.0, _hb(ceiling) - _hb(d1))
    return r1, r2, d1 + loss, {"delta": D, "n": N, "tau": T, "delta1": d1}


def _cc_points(p, d2max, grid: BohoGrid):
    deltas = grid.deltas()
    if d2max <= 0:
        raise InfeasibleError("d2max must be positive")
    d1 = _pick_delta1(grid.delta1s(), np.full(deltas.shape, min(d2max, 0.5)), np.full(deltas.shape, 0.5 + 1e-12))
    r1 = 1 - _hb(deltas)
    r2 = np.maximum(0.0, _hb(_conv(p, deltas)) - _hb(d1))
    return r1, r2, d1, {"delta": deltas, "delta1": d1}


def boho_region_sweep(p: float, epsilon: float, d2max: float, grid: BohoGrid | None = None,
                      hull: bool = True) -> RegionBoundary:
    """Boundary of the union of BOHO corners with D2 <= d2max.

    eps = 0 sweeps the common-component corners; otherwise the
    finite-length corners over (delta, n, tau, delta1).
    """
    grid = grid or BohoGrid()
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 1/2)")
    if not 0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 1/2)")
    if epsilon > EPS_MAX:
        raise InfeasibleError(f"B(eps) empty for eps={epsilon} > 1/3")
    if epsilon == 0:
        r1, r2, d2, cols = _cc_points(p, d2max, grid)
        scheme = "boho-cc"
    else:
        r1, r2, d2, cols = _flmc_points(p, epsilon, d2max, grid)
        scheme = "boho-flmc"
    keep = np.flatnonzero(_pareto_mask(r1, r2))
    corners = []
    for i in keep:
        prov = {"scheme": scheme, "p": float(p), "epsilon": float(epsilon), "d2max": float(d2max)}
        for key, col in cols.items():
            prov[key] = int(col[i]) if key == "n" else float(col[i])
        corners.append(Corner(RDTuple(float(r1[i]), float(r2[i]), 0.0, float(d2[i])), prov))
    return assemble_region(corners, (0.0, float(d2max)), hull=hull)
