"""Single-letter bound sets of the CC, BT, BTSI, FLMC and MCML schemes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._validation import check_kernel
from ..components import ComponentPair
from ..info import CondDist, JointDist, cond_mutual_info, mutual_info
from ..source import DistributedSource, SideInfoSource
from .corrections import FlmcCorrectionTerms, flmc_corrections

STRUCTURE_TOL = 1e-9


@dataclass(frozen=True)
class RDTuple:
    r1: float
    r2: float
    d1: float
    d2: float

    def __post_init__(self):
        for name in ("r1", "r2", "d1", "d2"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.d1, self.d2])


@dataclass(frozen=True)
class RatePolytope:
    """Rate bounds R1 >= r1, R2 >= r2, R1 + R2 >= rsum at distortions (d1, d2)."""

    r1: float
    r2: float
    rsum: float
    d1: float
    d2: float
    scheme: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def corners(self) -> list[RDTuple]:
        """Vertices of the rate polyhedron; two when the sum bound is active."""
        a, b = max(self.r1, 0.0), max(self.r2, 0.0)
        if a + b >= self.rsum:
            return [RDTuple(a, b, self.d1, self.d2)]
        return [RDTuple(a, self.rsum - a, self.d1, self.d2),
                RDTuple(self.rsum - b, b, self.d1, self.d2)]

    @property
    def corner(self) -> RDTuple:
        """Corner with the sum-rate excess placed on R1."""
        return self.corners()[-1]


def _kernel(k, n_from: int, name: str) -> np.ndarray:
    if isinstance(k, CondDist):
        return np.asarray(k.kernel)
    return check_kernel(k, n_from, name)


@dataclass(frozen=True, eq=False)
class FlmcCodingSpec:
    """Test channels and reconstruction maps of one FLMC/CC design point.

    Kernels: ``p_w`` is (|S|, |W|), ``p_u1`` is (|X1|, |W|, |U1|), ``p_u2``
    is (|X2|, |W|, |U2|). Maps ``g1``, ``g2`` are integer tables of shape
    (|W|, |U1|, |U2|) into the reconstruction alphabets.
    """

    components: ComponentPair
    p_w: np.ndarray
    p_u1: np.ndarray
    p_u2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        p_w = _kernel(self.p_w, 1, "P(W|S)")
        p_u1 = _kernel(self.p_u1, 2, "P(U1|X1,W)")
        p_u2 = _kernel(self.p_u2, 2, "P(U2|X2,W)")
        ks = self.components.s_size
        if p_w.shape[0] != ks or p_w.ndim != 2:
            raise ValueError(f"P(W|S) must have shape ({ks}, |W|)")
        kw = p_w.shape[1]
        if kw > ks + 1:
            raise ValueError(f"|W|={kw} exceeds the cap |S|+1={ks + 1}")
        k1, k2 = self.components.f1.size, self.components.f2.size
        for name, ker, kx in (("U1", p_u1, k1), ("U2", p_u2, k2)):
            if ker.ndim != 3 or ker.shape[:2] != (kx, kw):
                raise ValueError(f"P({name}|X,W) must have shape ({kx}, {kw}, |{name}|)")
            if ker.shape[2] > kx * kw + 1:
                raise ValueError(f"|{name}|={ker.shape[2]} exceeds the cap {kx * kw + 1}")
        shape = (kw, p_u1.shape[2], p_u2.shape[2])
        g1, g2 = np.asarray(self.g1, dtype=np.int64), np.asarray(self.g2, dtype=np.int64)
        if g1.shape != shape or g2.shape != shape:
            raise ValueError(f"reconstruction maps must have shape {shape}")
        object.__setattr__(self, "p_w", p_w)
        object.__setattr__(self, "p_u1", p_u1)
        object.__setattr__(self, "p_u2", p_u2)
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)

    @property
    def w_size(self) -> int:
        return self.p_w.shape[1]

    @property
    def u_sizes(self) -> tuple[int, int]:
        return self.p_u1.shape[2], self.p_u2.shape[2]

    def joint_card(self) -> int:
        k1, k2 = self.components.f1.size, self.components.f2.size
        u1, u2 = self.u_sizes
        return k1 * k2 * u1 * u2 * self.w_size

    def p_sw(self, src: DistributedSource) -> np.ndarray:
        ps = np.zeros(self.components.s_size)
        np.add.at(ps, self.components.f1, src.pmf.probs.sum(axis=1))
        return ps[:, None] * self.p_w


def _check_recon(src: DistributedSource, g1: np.ndarray, g2: np.ndarray) -> None:
    r1, r2 = src.recon_sizes
    if g1.min() < 0 or g1.max() >= r1 or g2.min() < 0 or g2.max() >= r2:
        raise ValueError("reconstruction maps leave the reconstruction alphabets")


def flmc_joint(src: DistributedSource, spec: FlmcCodingSpec) -> JointDist:
    """P(x1, x2) P(w | f1(x1)) P(u1 | x1, w) P(u2 | x2, w) over (X1, X2, W, U1, U2)."""
    if (spec.components.f1.size, spec.components.f2.size) != src.sizes:
        raise ValueError("coding spec does not match the source alphabets")
    p = np.einsum("ab,aw,awu,bwv->abwuv", src.pmf.probs, spec.p_w[spec.components.f1],
                  spec.p_u1, spec.p_u2)
    return JointDist(p, names=("X1", "X2", "W", "U1", "U2"), tol=1e-9)


def _expected_distortions(src, joint: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> tuple[float, float]:
    # joint is indexed (x1, x2, w, u1, u2)
    d1 = src.d1[:, g1]  # (x1, w, u1, u2)
    d2 = src.d2[:, g2]  # (x2, w, u1, u2)
    e1 = float(np.einsum("abwuv,awuv->", joint, d1))
    e2 = float(np.einsum("abwuv,bwuv->", joint, d2))
    return e1, e2


def _base_bounds(joint: JointDist) -> tuple[float, float, float]:
    r1 = cond_mutual_info(joint, "X1", "U1", ["U2", "W"])
    r2 = cond_mutual_info(joint, "X2", "U2", ["U1", "W"])
    rs = mutual_info(joint, ["X1", "X2"], ["U1", "U2", "W"])
    return r1, r2, rs


def cc_alpha(src: DistributedSource, spec: FlmcCodingSpec) -> RatePolytope:
    """Common-component bounds; ``spec.components`` must be an exact common part."""
    if spec.components.epsilon != 0:
        raise ValueError("the CC scheme needs components with epsilon = 0")
    _check_recon(src, spec.g1, spec.g2)
    joint = flmc_joint(src, spec)
    r1, r2, rs = _base_bounds(joint)
    e1, e2 = _expected_distortions(src, joint.probs, spec.g1, spec.g2)
    return RatePolytope(r1, r2, rs, e1, e2, "cc")


def flmc_alpha(src: DistributedSource, spec: FlmcCodingSpec, n: float, tau: float,
               enforce_ranges: bool = True) -> RatePolytope:
    _check_recon(src, spec.g1, spec.g2)
    joint = flmc_joint(src, spec)
    t = flmc_corrections(spec.components, spec.p_sw(src), n, tau, src.dmax,
                         spec.joint_card(), enforce_ranges=enforce_ranges)
    r1, r2, rs = _base_bounds(joint)
    e1, e2 = _expected_distortions(src, joint.probs, spec.g1, spec.g2)
    return RatePolytope(
        r1 + t.e_n + t.gamma_n + t.lambda_n,
        r2 + t.e_n + t.gamma_n,
        rs + t.e_n + t.gamma_n + t.lambda_n + t.theta_n,
        e1 + 2 * t.x * t.dmax1,
        e2 + 2 * t.x * t.dmax2,
        "flmc",
        {"n": n, "tau": tau, "terms": t},
    )


def btsi_alpha(src: SideInfoSource, p_u1, p_u2, g1, g2) -> RatePolytope:
    """Berger-Tung bounds with decoder side information (Y1, Y2).

    ``p_u1`` is (|X1|, |Y1|, |U1|), ``p_u2`` is (|X2|, |Y2|, |U2|); ``g_i``
    are tables of shape (|U1|, |U2|, |Y1|, |Y2|).
    """
    p = src.pmf.probs
    k1 = _kernel(p_u1, 2, "P(U1|X1,Y1)")
    k2 = _kernel(p_u2, 2, "P(U2|X2,Y2)")
    if k1.shape[:2] != (p.shape[0], p.shape[2]) or k2.shape[:2] != (p.shape[1], p.shape[3]):
        raise ValueError("side-information kernels do not match the source alphabets")
    g1 = np.asarray(g1, dtype=np.int64)
    g2 = np.asarray(g2, dtype=np.int64)
    shape = (k1.shape[2], k2.shape[2], p.shape[2], p.shape[3])
    if g1.shape != shape or g2.shape != shape:
        raise ValueError(f"reconstruction maps must have shape {shape}")
    full = np.einsum("abyz,ayu,bzv->abyzuv", p, k1, k2)
    joint = JointDist(full, names=("X1", "X2", "Y1", "Y2", "U1", "U2"), tol=1e-9)
    r1 = cond_mutual_info(joint, "X1", "U1", ["U2", "Y1", "Y2"])
    r2 = cond_mutual_info(joint, "X2", "U2", ["U1", "Y1", "Y2"])
    rs = cond_mutual_info(joint, ["X1", "X2"], ["U1", "U2"], ["Y1", "Y2"])
    d1 = src.d1[:, np.transpose(g1, (2, 3, 0, 1))]  # (x1, y1, y2, u1, u2)
    d2 = src.d2[:, np.transpose(g2, (2, 3, 0, 1))]
    e1 = float(np.einsum("abyzuv,ayzuv->", full, d1))
    e2 = float(np.einsum("abyzuv,byzuv->", full, d2))
    return RatePolytope(r1, r2, rs, e1, e2, "btsi")


@dataclass(frozen=True)
class StructureReport:
    residuals: dict
    ok: dict

    @property
    def passed(self) -> bool:
        return all(self.ok.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.ok.items() if not v]


def _cond(p: np.ndarray, axes_given: tuple[int, ...]) -> np.ndarray:
    """P(rest | given) broadcast to the shape of p; zero where the condition is null."""
    drop = tuple(i for i in range(p.ndim) if i not in axes_given)
    m = p.sum(axis=drop, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(m > 0, p / np.where(m > 0, m, 1.0), 0.0)


def structural_conditions(src: DistributedSource, spec: FlmcCodingSpec, p_prime: JointDist,
                      terms: FlmcCorrectionTerms, tol: float = STRUCTURE_TOL) -> StructureReport:
    """Residuals of the five structural conditions on the induced joint.

    ``p_prime`` is indexed (X1, X2, W1', W2, U1, U2).
    """
    P = p_prime.probs
    f1, f2 = spec.components.f1, spec.components.f2
    src_p = src.pmf.probs
    # 1: P'(x1, x2, w1, u1) = P(x1, x2) P(w1 | f1(x1)) P(u1 | x1, w1)
    m1 = P.sum(axis=(3, 5))
    ref1 = np.einsum("ab,aw,awu->abwu", src_p, spec.p_w[f1], spec.p_u1)
    r1 = float(np.abs(m1 - ref1).max())
    # 2: P'(u2 | x2, w2) = P(u2 | x2, w2)
    m2 = P.sum(axis=(0, 2, 4))  # (x2, w2, u2)
    ref2 = m2.sum(axis=2, keepdims=True) * spec.p_u2
    r2 = float(np.abs(m2 - ref2).max())
    # 3: P'(W1' = W2, S1 = S2) >= p(tau)(1 - delta_n)
    same_s = (f1[:, None] == f2[None, :])
    pw = P.sum(axis=(4, 5))
    agree = float(sum(pw[:, :, w, w][same_s].sum() for w in range(pw.shape[2])))
    need = terms.p_tau * (1 - terms.delta_n)
    r3 = need - agree
    # 4: U1 - (X1, W1') - (X2, W2) - U2
    base = P.sum(axis=(4, 5))
    cu1 = _cond(P.sum(axis=(1, 3, 5)), (0, 1))  # P(u1 | x1, w1) on (x1, w1, u1)
    cu2 = _cond(P.sum(axis=(0, 2, 4)), (0, 1))  # P(u2 | x2, w2) on (x2, w2, u2)
    ref4 = np.einsum("abwz,awu,bzv->abwzuv", base, cu1, cu2)
    r4 = float(np.abs(P - ref4).max())
    # 5: (W1', W2) - (S1, S2) - (X1, X2)
    ks = spec.components.s_size
    ps = np.zeros((ks, ks) + base.shape[2:])
    np.add.at(ps, (f1[:, None], f2[None, :]), base)
    cw = _cond(ps, (0, 1))
    ref5 = src_p[:, :, None, None] * cw[f1[:, None], f2[None, :]]
    r5 = float(np.abs(base - ref5).max())
    residuals = {"marginal_match": r1, "u2_kernel": r2, "agreement_deficit": r3,
                 "u_markov": r4, "w_markov": r5}
    ok = {k: v <= tol for k, v in residuals.items()}
    return StructureReport(residuals, ok)


class StructureViolation(ValueError):
    pass


def mcml_alpha(src: DistributedSource, spec: FlmcCodingSpec, p_prime: JointDist,
               terms: FlmcCorrectionTerms, g1=None, g2=None) -> RatePolytope:
    """Multi-letter bounds evaluated on the induced joint ``p_prime``.

    ``g1``, ``g2`` map (W1', W2, U1, U2) to reconstructions; by default the
    spec's maps are applied to (W1', U1, U2).
    """
    report = structural_conditions(src, spec, p_prime, terms)
    if not report.passed:
        detail = ", ".join(f"{k}={report.residuals[k]:.3g}" for k in report.failures())
        raise StructureViolation(f"induced joint violates structural conditions: {detail}")
    P = p_prime.probs
    kw = spec.w_size
    if g1 is None:
        g1 = np.broadcast_to(spec.g1[:, None], (kw,) + spec.g1.shape)
    if g2 is None:
        g2 = np.broadcast_to(spec.g2[:, None], (kw,) + spec.g2.shape)
    g1 = np.asarray(g1, dtype=np.int64)
    g2 = np.asarray(g2, dtype=np.int64)
    joint = JointDist(P, names=("X1", "X2", "W1", "W2", "U1", "U2"), tol=1e-9)
    f1 = spec.components.f1
    p_s1w = np.zeros((spec.components.s_size, kw))
    np.add.at(p_s1w, f1, P.sum(axis=(1, 3, 4, 5)))
    i_ws = mutual_info(JointDist(p_s1w, tol=1e-9), 0, 1)
    w = ["W1", "W2"]
    r1 = cond_mutual_info(joint, "X1", "U1", ["U2"] + w)
    r2 = cond_mutual_info(joint, "X2", "U2", ["U1"] + w)
    rs = (i_ws + cond_mutual_info(joint, "X1", "U1", w) + cond_mutual_info(joint, "X2", "U2", w)
          - cond_mutual_info(joint, "U1", "U2", w))
    e1 = float(np.einsum("abwzuv,awzuv->", P, src.d1[:, g1]))
    e2 = float(np.einsum("abwzuv,bwzuv->", P, src.d2[:, g2]))
    t = terms
    return RatePolytope(r1 + t.e_n + t.lambda_n, r2 + t.e_n,
                        rs + t.e_n + t.lambda_n + t.theta_n, e1, e2, "mcml",
                        {"n": t.n, "tau": t.tau, "terms": t, "structure": report})


def optimal_reconstruction(src: DistributedSource, joint: JointDist) -> tuple[np.ndarray, np.ndarray]:
    """Bayes reconstruction maps for a (X1, X2, W, U1, U2) joint."""
    P = joint.probs
    post1 = P.sum(axis=1)  # (x1, w, u1, u2)
    post2 = P.sum(axis=0)
    cost1 = np.einsum("awuv,ar->wuvr", post1, src.d1)
    cost2 = np.einsum("bwuv,br->wuvr", post2, src.d2)
    return cost1.argmin(axis=-1), cost2.argmin(axis=-1)


def random_spec(src: DistributedSource, components: ComponentPair, rng: np.random.Generator,
                w_size: int | None = None, u_sizes: tuple[int, int] | None = None,
                concentration: float = 1.0) -> FlmcCodingSpec:
    """Draw kernels uniformly-ish from the simplex; reconstructions are Bayes optimal."""
    ks = components.s_size
    k1, k2 = src.sizes
    kw = w_size if w_size is not None else int(rng.integers(1, ks + 2))
    if u_sizes is None:
        u_sizes = (int(rng.integers(1, min(k1 * kw + 1, 4) + 1)),
                   int(rng.integers(1, min(k2 * kw + 1, 4) + 1)))
    p_w = rng.dirichlet(np.full(kw, concentration), size=ks)
    p_u1 = rng.dirichlet(np.full(u_sizes[0], concentration), size=(k1, kw))
    p_u2 = rng.dirichlet(np.full(u_sizes[1], concentration), size=(k2, kw))
    shape = (kw, u_sizes[0], u_sizes[1])
    zeros = np.zeros(shape, dtype=np.int64)
    draft = FlmcCodingSpec(components, p_w, p_u1, p_u2, zeros, zeros)
    g1, g2 = optimal_reconstruction(src, flmc_joint(src, draft))
    return FlmcCodingSpec(components, p_w, p_u1, p_u2, g1, g2)

