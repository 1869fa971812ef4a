"""Both sides of the polynomial a-priori estimates, evaluated on manufactured
solutions, plus the random corpora used to estimate their constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .coefficients import (CoefficientField, amm_inverse_norm, coercivity_constant,
                           matrix_winf_norm)
from .domain import BC, DecomposedInterval
from .errors import NotCoercive
from .fem import Mesh, TransmissionData, build_mesh
from .functions import PiecewisePoly
from .norms import broken_hk_norm, check_in_vk, discrete_inverse_norm, vk_minus_norm


def envelope_exponent(k: int) -> int:
    """K = (k + 2)(k^2 + k + 1) + k."""
    return (k + 2) * (k * k + k + 1) + k


# ----------------------------------------------------------------------------
# manufactured data


def flux_poly(A: CoefficientField, u: PiecewisePoly) -> PiecewisePoly:
    """sigma = a11 u' + a10 u."""
    return A.a11 * u.deriv() + A.a10 * u


def operator_poly(A: CoefficientField, u: PiecewisePoly) -> PiecewisePoly:
    """P u = -(a11 u' + a10 u)' + a01 u' + a00 u, exactly."""
    return -flux_poly(A, u).deriv() + A.a01 * u.deriv() + A.a00 * u


def manufactured_data(A: CoefficientField, u: PiecewisePoly) -> TransmissionData:
    """F = (P u, u on the Dirichlet ends, D_nu u on the Neumann ends, [[u]], [[D_nu u]])."""
    dom = A.dom
    sig = flux_poly(A, u)
    last = dom.n_pieces - 1
    piece = {"left": 0, "right": last}
    g_tilde = {e: float(u.pieces[piece[e]](dom.endpoint(e))) for e in dom.dirichlet_ends}
    g = {e: float(dom.outward_normal(e) * sig.pieces[piece[e]](dom.endpoint(e))) for e in dom.neumann_ends}
    o = dom.orientation
    h_tilde = [o * float(u.pieces[i](x) - u.pieces[i + 1](x)) for i, x in enumerate(dom.gamma)]
    h = [o * float(sig.pieces[i](x) - sig.pieces[i + 1](x)) for i, x in enumerate(dom.gamma)]
    return TransmissionData.build(dom, operator_poly(A, u), g_tilde, g, h_tilde, h)


# ----------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    lhs: float
    rhs_terms: list
    inputs: dict = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms))

    @property
    def ratio(self) -> float:
        rhs = self.rhs
        if rhs > 0:
            return self.lhs / rhs
        return 0.0 if self.lhs == 0 else float("inf")


def _rhs_terms(inv: float, nnw: float, norm_a: float, k: int, data_norms: Sequence[float]) -> list[float]:
    # data_norms[q] is the data norm at level k + 1 - q
    return [inv ** (q + 1) * nnw ** ((q + 1) * k + 1) * norm_a ** ((q + 1) * (k + 1)) * data_norms[q]
            for q in range(k + 2)]


def _common_inputs(A: CoefficientField, k: int, mesh: Mesh, inv_norm: float | None):
    inv = discrete_inverse_norm(A, mesh, 0) if inv_norm is None else inv_norm
    return inv, amm_inverse_norm(A, k), matrix_winf_norm(A, k + 1).value


def apriori_report(A: CoefficientField, u: PiecewisePoly, k: int, mesh: Mesh,
                   inv_norm: float | None = None) -> BoundReport:
    """||u||_{V_{k+1}} against
    sum_q |||P0^-1|||^(q+1) nnW_k^((q+1)k+1) ||A||_{k+1}^((q+1)(k+1)) ||F||_{V^-_{k+1-q}}.
    """
    check_in_vk(u)
    F = manufactured_data(A, u)
    lhs = broken_hk_norm(u, k + 2)
    inv, nnw, norm_a = _common_inputs(A, k, mesh, inv_norm)
    data = [vk_minus_norm(F, k + 1 - q, mesh) for q in range(k + 2)]
    return BoundReport(lhs, _rhs_terms(inv, nnw, norm_a, k, data),
                       {"k": k, "inverse_norm": inv, "nnW": nnw, "norm_A": norm_a, "data_norms": data,
                        "dim": mesh.dim, "degree": mesh.p})


def composite_data_norm(F: TransmissionData, j: int, mesh: Mesh) -> float:
    """V_j^- norm of (f, g, h) plus |g_tilde|_2 + |h_tilde|_2."""
    return (vk_minus_norm(F, j, mesh) + float(np.linalg.norm(list(F.g_tilde.values())))
            + float(np.linalg.norm(F.h_tilde)))


def lifted_apriori_report(A: CoefficientField, u: PiecewisePoly, k: int, mesh: Mesh,
                          inv_norm: float | None = None) -> BoundReport:
    """Like :func:`apriori_report` for u with nonzero Dirichlet trace and jumps, with the
    lifted data g_tilde, h_tilde added to every data norm."""
    F = manufactured_data(A, u)
    lhs = broken_hk_norm(u, k + 2)
    inv, nnw, norm_a = _common_inputs(A, k, mesh, inv_norm)
    data = [composite_data_norm(F, k + 1 - q, mesh) for q in range(k + 2)]
    return BoundReport(lhs, _rhs_terms(inv, nnw, norm_a, k, data),
                       {"k": k, "inverse_norm": inv, "nnW": nnw, "norm_A": norm_a, "data_norms": data,
                        "dim": mesh.dim, "degree": mesh.p})


@dataclass(frozen=True)
class EnvelopeReport:
    k: int
    K: int
    gamma: float
    norm_A: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def inverse_norm_envelope(A: CoefficientField, k: int, mesh: Mesh) -> EnvelopeReport:
    """lhs = discrete |||P_{k+1}^-1|||, rhs = gamma^(-K-1) ||A||_{W^{k+1,oo}}^K, k in {-1, 0}."""
    if k not in (-1, 0):
        raise ValueError("k must be -1 or 0")
    gamma = coercivity_constant(A).full
    if gamma <= 0:
        raise NotCoercive(f"gamma_full = {gamma:.3g} <= 0")
    K = envelope_exponent(k)
    norm_a = matrix_winf_norm(A, k + 1).value
    lhs = discrete_inverse_norm(A, mesh, k + 1)
    return EnvelopeReport(k, K, gamma, norm_a, lhs, gamma ** (-K - 1) * norm_a ** K)


# ----------------------------------------------------------------------------
# random corpora


DOMAIN_CONFIGS = (
    DecomposedInterval(0.0, 1.0, (0.5,), BC.DIRICHLET, BC.DIRICHLET),
    DecomposedInterval(0.0, 1.0, (0.3, 0.7), BC.DIRICHLET, BC.NEUMANN),
    DecomposedInterval(-1.0, 1.0, (0.2,), BC.NEUMANN, BC.DIRICHLET),
    DecomposedInterval(0.0, 2.0, (0.5, 1.0, 1.6), BC.DIRICHLET, BC.DIRICHLET, -1),
)


def _random_poly(rng: np.random.Generator, degree: int, lo: float, hi: float, scale: float = 1.0) -> Polynomial:
    # coefficients in the local variable t in [-1, 1] keep the size under control
    c = rng.uniform(-scale, scale, degree + 1)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return Polynomial(c)(Polynomial([-mid / half, 1.0 / half]))


def random_coefficient(dom: DecomposedInterval, rng: np.random.Generator, degree: int = 2,
                       gamma_min: float = 0.1, symmetric: bool = False, diagonal: bool = False) -> CoefficientField:
    """Random piecewise-polynomial A with gamma_full in [gamma_min, gamma_min + 1]."""
    parts = {}
    for name, scale in (("a00", 1.0), ("a11", 1.0), ("a01", 0.3), ("a10", 0.3)):
        if diagonal and name in ("a01", "a10"):
            parts[name] = PiecewisePoly.zero(dom)
            continue
        parts[name] = PiecewisePoly(dom, [_random_poly(rng, degree, *dom.piece_bounds(j), scale)
                                          for j in range(dom.n_pieces)])
    if symmetric:
        parts["a10"] = parts["a01"]
    A = CoefficientField(dom, **parts)
    shift = gamma_min + rng.uniform(0.0, 1.0) - coercivity_constant(A).full
    return CoefficientField(dom, A.a00 + shift, A.a01, A.a10, A.a11 + shift)


def random_diagonal_coefficient(dom: DecomposedInterval, rng: np.random.Generator, degree: int = 2,
                                gamma_min: float = 0.1, zero_a00: bool = False) -> CoefficientField:
    """Random A with a01 = a10 = 0, inf a11 in [gamma_min, gamma_min + 1] and
    a00 >= 0 (identically zero with ``zero_a00``)."""
    a11 = PiecewisePoly(dom, [_random_poly(rng, degree, *dom.piece_bounds(j)) for j in range(dom.n_pieces)])
    a11 = a11 + (gamma_min + rng.uniform(0.0, 1.0) - a11.inf())
    if zero_a00:
        a00 = PiecewisePoly.zero(dom)
    else:
        a00 = PiecewisePoly(dom, [_random_poly(rng, degree, *dom.piece_bounds(j)) for j in range(dom.n_pieces)])
        a00 = a00 + (rng.uniform(0.0, 1.0) - a00.inf())
    zero = PiecewisePoly.zero(dom)
    return CoefficientField(dom, a00, zero, zero, a11)


def random_solution(dom: DecomposedInterval, rng: np.random.Generator, degree: int = 4,
                    in_vk: bool = True) -> PiecewisePoly:
    """Random piecewise polynomial; with ``in_vk`` it is continuous and zero at
    the Dirichlet ends, otherwise it gets random jumps and traces."""
    br = dom.breaks
    left_vals = rng.uniform(-1, 1, br.size)
    if in_vk:
        for e in dom.dirichlet_ends:
            left_vals[0 if e == "left" else -1] = 0.0
        right_vals = left_vals
    else:
        right_vals = left_vals + rng.uniform(-1, 1, br.size)
    pieces = []
    for j in range(dom.n_pieces):
        lo, hi = br[j], br[j + 1]
        ul, ur = right_vals[j], left_vals[j + 1]
        lin = Polynomial([ul - (ur - ul) / (hi - lo) * lo, (ur - ul) / (hi - lo)])
        bubble = Polynomial([-lo, 1.0]) * Polynomial([hi, -1.0])
        pieces.append(lin + bubble * _random_poly(rng, max(degree - 2, 0), lo, hi, 2.0))
    return PiecewisePoly(dom, pieces)


@dataclass(frozen=True)
class CorpusCase:
    A: CoefficientField
    u: PiecewisePoly
    n_per: int


def apriori_corpus(n_cases: int, seed: int = 0, coef_degree: int = 2, u_degree: int = 5,
                   n_per: int = 16) -> list[CorpusCase]:
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        dom = DOMAIN_CONFIGS[i % len(DOMAIN_CONFIGS)]
        cases.append(CorpusCase(random_coefficient(dom, rng, coef_degree),
                                random_solution(dom, rng, u_degree), n_per))
    return cases


@dataclass
class CorpusSummary:
    ratios: list
    max_ratio: float
    reports: list


def corpus_constant(cases: Sequence[CorpusCase], k: int, degree: int = 2, refine: int = 1,
                    report=apriori_report) -> CorpusSummary:
    """Max lhs/rhs over the corpus, with every mesh refined ``refine`` times."""
    reps = []
    for c in cases:
        mesh = build_mesh(c.A.dom, c.n_per * refine, degree)
        reps.append(report(c.A, c.u, k, mesh))
    ratios = [r.ratio for r in reps]
    return CorpusSummary(ratios, float(max(ratios)), reps)
