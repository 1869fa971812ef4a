"""Piecewise-constant scalar coefficients that may change sign: resolvent
solves and norms, critical-contrast conditioning and regularity ratios."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import Polynomial

from .coefficients import CoefficientField
from .domain import BC, DecomposedInterval
from .errors import SingularSystem
from .fem import BrokenFemFunction, Mesh, build_mesh, factor, gram_matrices, stiffness_matrix, volume_load
from .functions import PiecewisePoly, as_broken
from .norms import broken_hk_norm, check_in_vk


@dataclass(frozen=True)
class PiecewiseScalarField:
    """A = a_j on U_j acting on u' only (a11 = a_j, all other entries zero);
    Dirichlet conditions at both ends."""

    dom: DecomposedInterval
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != self.dom.n_pieces:
            raise ValueError(f"need {self.dom.n_pieces} values")
        if any(v == 0 for v in self.values):
            raise ValueError("coefficients must be nonzero")
        if self.dom.bc_left is not BC.DIRICHLET or self.dom.bc_right is not BC.DIRICHLET:
            raise ValueError("sign-changing problems are posed with Dirichlet conditions at both ends")

    @classmethod
    def on_unit_interval(cls, values: Sequence[float], gamma: Sequence[float] | None = None) -> PiecewiseScalarField:
        n = len(values)
        if gamma is None:
            gamma = tuple(np.arange(1, n) / n)
        return cls(DecomposedInterval(0.0, 1.0, tuple(gamma)), tuple(values))

    @property
    def admissible(self) -> bool:
        """a_i + a_j != 0 for every pair of adjacent subdomains."""
        return all(a + b != 0 for a, b in zip(self.values, self.values[1:]))

    @property
    def contrasts(self) -> list[float]:
        return [b / a for a, b in zip(self.values, self.values[1:])]

    def to_coefficients(self) -> CoefficientField:
        return CoefficientField.from_entries(self.dom, a11=[[v] for v in self.values])

    def scaled(self, c: float) -> PiecewiseScalarField:
        return PiecewiseScalarField(self.dom, tuple(c * v for v in self.values))


@dataclass
class ResolventSolution:
    u: BrokenFemFunction
    flux_jump: np.ndarray
    rcond: float


def _free(mesh: Mesh, M) -> np.ndarray:
    Z = mesh.Z
    return (Z.T @ M @ Z).tocsr()


def resolvent_solve(a: PiecewiseScalarField, t: float, f, mesh: Mesh) -> ResolventSolution:
    """Solve (K_a + i t M0) u = M0 f on S_N; ``flux_jump`` is the residual flux
    jump at each interface point, which vanishes up to round-off."""
    K = stiffness_matrix(a.to_coefficients(), mesh)
    M0 = gram_matrices(mesh).M0
    Kt = (K + 1j * t * M0).tocsr() if t != 0 else K
    fb = as_broken(a.dom, f) if not hasattr(f, "eval") else f
    b = volume_load(fb, mesh)
    lu = factor(_free(mesh, Kt))
    Z = mesh.Z
    u = Z @ lu.solve(Z.T @ b)
    r = Kt @ u - b
    o = a.dom.orientation
    jumps = np.array([o * (r[mesh.left_copy(i)] + r[mesh.right_copy(i)]) for i in range(len(a.dom.gamma))])
    return ResolventSolution(BrokenFemFunction(mesh, u), jumps, lu.rcond)


def _m0_reduced(a: PiecewiseScalarField, mesh: Mesh) -> np.ndarray:
    """L^-1 K_a L^-T with M0 = L L^T on S_N (real symmetric)."""
    K = _free(mesh, stiffness_matrix(a.to_coefficients(), mesh)).toarray()
    L = sla.cholesky(_free(mesh, gram_matrices(mesh).M0).toarray(), lower=True)
    X = sla.solve_triangular(L, K, lower=True)
    return sla.solve_triangular(L, X.T, lower=True).T


def resolvent_norm(a: PiecewiseScalarField, t: float, mesh: Mesh) -> float:
    """L2 -> L2 norm of (K_a + i t M0)^-1 M0 on S_N."""
    C = _m0_reduced(a, mesh)
    T = C + 1j * t * np.eye(C.shape[0])
    s = sla.svdvals(T)
    if s[-1] <= 10 * np.finfo(float).eps * s[0]:
        raise SingularSystem("resolvent system is singular", rcond=float(s[-1] / s[0]))
    return float(1.0 / s[-1])


def condition_number(a: PiecewiseScalarField, mesh: Mesh, t: float = 0.0) -> float:
    """2-norm condition number of the free-dof matrix K_a + i t M0."""
    C = _free(mesh, stiffness_matrix(a.to_coefficients(), mesh)).toarray()
    if t:
        C = C + 1j * t * _free(mesh, gram_matrices(mesh).M0).toarray()
    return float(np.linalg.cond(C))


@dataclass
class ContrastSweep:
    eps: list
    cond: list
    slope: float  # fitted d log(cond) / d log(1/eps)


def critical_contrast_sweep(eps: Sequence[float], mesh_n: int = 16, degree: int = 1,
                            gamma: float = 0.5) -> ContrastSweep:
    """Condition numbers for a = (1, -1 + eps) as eps -> 0."""
    conds = []
    for e in eps:
        a = PiecewiseScalarField.on_unit_interval((1.0, -1.0 + e), (gamma,))
        conds.append(condition_number(a, build_mesh(a.dom, mesh_n, degree)))
    slope = float(np.polyfit(np.log(1 / np.asarray(eps)), np.log(conds), 1)[0]) if len(eps) > 1 else float("nan")
    return ContrastSweep(list(eps), conds, slope)


# ----------------------------------------------------------------------------
# regularity probe


def kink_solution(a: PiecewiseScalarField, v: Polynomial | None = None) -> PiecewisePoly:
    """u_j = v / a_j with v vanishing at every break point: u is continuous
    (zero on Gamma and at both ends) and the flux a u' = v' is continuous."""
    dom = a.dom
    if v is None:
        v = Polynomial([1.0])
        for x in dom.breaks:
            v = v * Polynomial([-x, 1.0])
    return PiecewisePoly(dom, [v / aj for aj in a.values])


@dataclass
class ProbeRow:
    values: tuple
    u_norm: float  # ||u||_{H^{k+1} broken}
    nnw: float  # nnW_{k-1}(1/a11) = max 1/|a_j|
    norm_a: float  # ||A||_{W^{k,oo}} = max |a_j|
    data: float  # ||P u||_{V_k^-} + ||u||_{H1}

    def rho(self, p: int, q: int) -> float:
        return self.u_norm / (self.nnw ** p * self.norm_a ** q * self.data)


@dataclass
class ProbeReport:
    k: int
    rows: list
    sup_rho: dict = field(default_factory=dict)  # (p, q) -> sup over the corpus
    growth: dict = field(default_factory=dict)  # (p, q) -> sup / sup over moderate contrasts
    bounded: list = field(default_factory=list)
    smallest: tuple | None = None


def _probe_row(a: PiecewiseScalarField, u: PiecewisePoly, k: int) -> ProbeRow:
    check_in_vk(u)
    A = a.to_coefficients()
    sig = A.a11 * u.deriv()
    f = -sig.deriv()
    o = a.dom.orientation
    h = [o * (sig.pieces[i](x) - sig.pieces[i + 1](x)) for i, x in enumerate(a.dom.gamma)]
    data = broken_hk_norm(f, k - 1) + float(np.linalg.norm(h)) + broken_hk_norm(u, 1)
    vals = np.abs(a.values)
    return ProbeRow(a.values, broken_hk_norm(u, k + 1), float(1 / vals.min()), float(vals.max()), data)


def param_regularity_probe(fields: Sequence[PiecewiseScalarField], k: int = 1, u_for=kink_solution,
                           max_exponent: int = 6, growth_tol: float = 10.0,
                           moderate: tuple[float, float] = (0.5, 2.0)) -> ProbeReport:
    """rho(p, q) = ||u||_{H^{k+1}} / (nnW^p ||A||^q (||P u||_{V_k^-} + ||u||_{H1}))
    over a corpus of coefficients.

    A pair (p, q) counts as bounded when sup rho over the corpus is at most
    ``growth_tol`` times sup rho over the moderate-contrast cases (every
    |a_{j+1}/a_j| in ``moderate``).  ``smallest`` is the bounded pair with the
    least p + q (ties broken by p).
    """
    if k < 1:
        raise ValueError("k >= 1 required")
    rows = []
    for a in fields:
        rows.append(_probe_row(a, u_for(a), k))
    is_mod = [all(moderate[0] <= abs(c) <= moderate[1] for c in a.contrasts) for a in fields]
    rep = ProbeReport(k, rows)
    for p, q in itertools.product(range(max_exponent + 1), repeat=2):
        rhos = np.array([r.rho(p, q) for r in rows])
        sup = float(rhos.max())
        mod = float(rhos[np.array(is_mod)].max()) if any(is_mod) else float(rhos.min())
        rep.sup_rho[(p, q)] = sup
        rep.growth[(p, q)] = sup / mod if mod > 0 else float("inf")
        if rep.growth[(p, q)] <= growth_tol:
            rep.bounded.append((p, q))
    if rep.bounded:
        rep.smallest = min(rep.bounded, key=lambda pq: (pq[0] + pq[1], pq[0]))
    return rep
