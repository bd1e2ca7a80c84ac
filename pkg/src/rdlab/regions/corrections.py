"""Finite-blocklength correction terms of the FLMC bound set."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._validation import check_open_interval, check_pmf
from ..info import binary_entropy


def delta_k(epsilon: float, k: float) -> float:
    """1 - (1 - epsilon)^k, accurate for tiny epsilon."""
    if epsilon == 0:
        return 0.0
    if epsilon >= 1:
        return 1.0
    return -math.expm1(k * math.log1p(-epsilon))


@dataclass(frozen=True)
class BSet:
    """Integer interval [lo, hi] of admissible first-layer blocklengths."""

    lo: int
    hi: float  # math.inf when unbounded
    ratio: float  # (sigma / sigma')^2
    upper: float  # log(2 eps) / log(1 - eps) before flooring

    @property
    def empty(self) -> bool:
        return self.hi < self.lo

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.hi)

    def __contains__(self, n) -> bool:
        return not self.empty and self.lo <= n <= self.hi

    def describe(self) -> str:
        if self.empty:
            return (f"B(eps) empty: need (sigma/sigma')^2 = {self.ratio:.6g} <= n <= "
                    f"log(2 eps)/log(1-eps) = {self.upper:.6g}")
        hi = "inf" if self.unbounded else str(int(self.hi))
        return f"B(eps) = [{self.lo}, {hi}]"


def b_upper(epsilon: float) -> float:
    """log(2 eps) / log(1 - eps); +inf at eps = 0."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon == 0:
        return math.inf
    if epsilon >= 0.5:
        return -math.inf
    return math.log(2 * epsilon) / math.log1p(-epsilon)


def b_set(epsilon: float, sigma: float, sigma_prime: float) -> BSet:
    ratio = (sigma / sigma_prime) ** 2
    upper = b_upper(epsilon)
    lo = max(1, math.ceil(ratio))
    if epsilon > 1 / 3:
        hi = -math.inf
    elif math.isinf(upper):
        hi = upper
    else:
        hi = math.floor(upper)
    return BSet(lo, hi, ratio, upper)


def _sw_stats(p_sw: np.ndarray):
    p = check_pmf(p_sw, "P(S,W)", tol=1e-9)
    if p.ndim != 2:
        raise ValueError("P(S,W) must be a 2-axis pmf")
    pmin = float(p.min())
    if pmin <= 0:
        raise ValueError("P(S,W) has a zero cell; sigma, sigma' and p(tau) need every cell positive")
    return p, pmin


def sigma_pair(p_sw: np.ndarray) -> tuple[float, float]:
    p, pmin = _sw_stats(p_sw)
    ks, kw = p.shape
    big = max(ks, kw)
    sigma = big * math.sqrt(math.log(8 * big / pmin))
    sigma_prime = ks * kw / (2 * (ks + kw)) * pmin
    return sigma, sigma_prime


def covering_terms(p_sw: np.ndarray, n: float, tau: float) -> tuple[float, float, float]:
    """(phi, phi', p(tau)) of the finite-length quantizer at (n, tau)."""
    p, pmin = _sw_stats(p_sw)
    ks, kw = p.shape
    phi = tau * (1 / ks + 1 / kw)
    phi_prime = 4 * ks * math.exp(-2 * n * tau**2 / ks**2)
    return phi, phi_prime, pmin / (pmin + phi_prime + phi)


def theta_coefficient(p_sw: np.ndarray) -> float:
    """Multiplier of tau in theta_n(tau)."""
    p, _ = _sw_stats(p_sw)
    ks, kw = p.shape
    ps = p.sum(axis=1)
    cond = p / ps[:, None]
    t1 = float(-np.log2(cond).sum()) / kw
    t2 = float(-(cond * np.log2(cond)).sum()) / ks
    t3 = (ks + kw) / ks * float(-np.log2(ps).sum())
    return t1 + t2 + t3


def theta_n(p_sw: np.ndarray, n: float, tau: float) -> float:
    """Finite-blocklength quantization rate loss.

    The outer log is base 2 and the inner ln(2|S|) natural.
    """
    ks = np.shape(p_sw)[0]
    arg = 2 * n * tau**2 / ks**2 - math.log(2 * ks)
    if arg <= 0:
        raise ValueError(f"theta_n undefined: 2 n tau^2/|S|^2 - ln(2|S|) = {arg:.4g} <= 0 "
                         f"(n={n}, tau={tau})")
    return math.log2(arg) / n + tau * theta_coefficient(p_sw) + (ks + 1) / n


def min_tau_for_theta(s_size: int, n: float) -> float:
    """Smallest tau for which theta_n is defined."""
    return s_size * math.sqrt(math.log(2 * s_size) / (2 * n))


@dataclass(frozen=True)
class FlmcCorrectionTerms:
    n: float
    tau: float
    epsilon: float
    s_size: int
    w_size: int
    sigma: float
    sigma_prime: float
    delta_n: float
    p_tau: float
    phi: float
    phi_prime: float
    x: float
    theta_n: float
    gamma_n: float
    lambda_n: float
    e_n: float
    dmax1: float
    dmax2: float
    in_range: bool


def flmc_corrections(epsilon: float, p_sw, n: float, tau: float, dmax: tuple[float, float],
                     joint_card: int, enforce_ranges: bool = True) -> FlmcCorrectionTerms:
    """Every correction term for given components, P(S,W), n and tau.

    ``epsilon`` may also be a ComponentPair. ``joint_card`` is
    |X1||X2||U1||U2||W|, the product alphabet inside Gamma. With
    ``enforce_ranges`` off, desk-scale blocklengths outside B(eps) and
    the tau interval are allowed.
    """
    epsilon = float(getattr(epsilon, "epsilon", epsilon))
    p = np.asarray(getattr(p_sw, "probs", p_sw), dtype=float)
    sigma, sigma_prime = sigma_pair(p)
    ks, kw = p.shape
    bset = b_set(epsilon, sigma, sigma_prime)
    in_range = n in bset and sigma / math.sqrt(n) < tau < sigma_prime
    if enforce_ranges:
        if n != int(n) or n not in bset:
            raise ValueError(f"n={n} not in {bset.describe()}")
        check_open_interval(tau, sigma / math.sqrt(n), sigma_prime, "tau")
    phi, phi_prime, p_tau = covering_terms(p, n, tau)
    dn = delta_k(epsilon, n)
    x = 1 - p_tau + p_tau * dn + epsilon
    if x > 1:
        raise ValueError(f"x = 1 - p(tau) + p(tau) delta_n + eps = {x} exceeds 1")
    theta = theta_n(p, n, tau)
    gamma = 8 * binary_entropy(x) + 8 * x * math.log2(joint_card)
    lam = binary_entropy(p_tau) + (1 - p_tau) * math.log2(kw)
    e_n = binary_entropy(dn) / n + dn * math.log2(kw)
    return FlmcCorrectionTerms(
        n=n, tau=tau, epsilon=epsilon, s_size=ks, w_size=kw, sigma=sigma,
        sigma_prime=sigma_prime, delta_n=dn, p_tau=p_tau, phi=phi, phi_prime=phi_prime, x=x,
        theta_n=theta, gamma_n=gamma, lambda_n=lam, e_n=e_n,
        dmax1=float(dmax[0]), dmax2=float(dmax[1]), in_range=bool(in_range),
    )
