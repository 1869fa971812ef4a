"""Coefficient matrices A = [a_ij] (i, j in {0, 1}; index 0 is the identity,
index 1 is d/dx) with piecewise-polynomial entries, their broken W^{k,oo}
norms and coercivity constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from .domain import DecomposedInterval
from .errors import InterfaceAmbiguity, NonInvertible
from .functions import PiecewisePoly, as_broken, poly_inf, poly_vanishes_on, real_roots_in

DEFAULT_SAMPLES = 2048
_NAMES = ("a00", "a01", "a10", "a11")


@dataclass(frozen=True)
class CoefficientField:
    dom: DecomposedInterval
    a00: PiecewisePoly
    a01: PiecewisePoly
    a10: PiecewisePoly
    a11: PiecewisePoly

    @classmethod
    def from_entries(cls, dom: DecomposedInterval, **entries) -> CoefficientField:
        """Missing entries are zero; values go through :func:`as_broken`."""
        unknown = set(entries) - set(_NAMES)
        if unknown:
            raise ValueError(f"unknown coefficient entries {sorted(unknown)}")
        parts = {}
        for name in _NAMES:
            spec = entries.get(name, 0.0)
            f = as_broken(dom, spec)
            if not isinstance(f, PiecewisePoly):
                raise ValueError(f"{name} must be piecewise polynomial")
            parts[name] = f
        return cls(dom, **parts)

    @classmethod
    def identity(cls, dom: DecomposedInterval, c: float = 1.0) -> CoefficientField:
        return cls.from_entries(dom, a00=c, a11=c)

    @property
    def matrix(self) -> tuple[tuple[PiecewisePoly, PiecewisePoly], tuple[PiecewisePoly, PiecewisePoly]]:
        return ((self.a00, self.a01), (self.a10, self.a11))

    def evaluate(self, x: float, d: int = 0, side: str | None = None) -> np.ndarray:
        if x in self.dom.gamma and side is None:
            raise InterfaceAmbiguity(f"x={x} lies on the interface; pass side")
        j = self.dom.piece_of(x, side)
        return np.array([[self.a00.eval(j, x, d), self.a01.eval(j, x, d)],
                         [self.a10.eval(j, x, d), self.a11.eval(j, x, d)]], dtype=float)

    def entry_values(self, j: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return tuple(getattr(self, n).eval(j, x) for n in _NAMES)

    @property
    def degree(self) -> int:
        return max(getattr(self, n).degree for n in _NAMES)

    def scaled(self, c: float) -> CoefficientField:
        return CoefficientField(self.dom, *(getattr(self, n) * c for n in _NAMES))

    def __add__(self, other: CoefficientField) -> CoefficientField:
        return CoefficientField(self.dom, *(getattr(self, n) + getattr(other, n) for n in _NAMES))

    def is_symmetric(self) -> bool:
        return (self.a01 - self.a10).trim().is_zero()

    def has_first_order_terms(self) -> bool:
        return not (self.a01.is_zero() and self.a10.is_zero())

    def to_spec(self) -> dict:
        return {n: getattr(self, n).to_coeff_lists() for n in _NAMES}


def combine(weights: Sequence[float], fields: Sequence[CoefficientField]) -> CoefficientField:
    """Exact polynomial combination sum_l w_l A_l."""
    out = fields[0].scaled(weights[0])
    for w, f in zip(weights[1:], fields[1:]):
        out = out + f.scaled(w)
    return out


def broken_winf_norm(f: PiecewisePoly, k: int) -> float:
    """max over pieces and derivative orders d <= k of sup |f^(d)| (exact)."""
    return max(f.sup_abs(d) for d in range(k + 1))


@dataclass(frozen=True)
class MatrixNormReport:
    k: int
    value: float
    per_subdomain: list[float] = field(default_factory=list)


def _matrix_norm(norms: np.ndarray) -> float:
    return float(max(np.max(norms.sum(axis=1)), np.max(norms.sum(axis=0))))


def matrix_winf_norm(A: CoefficientField, k: int) -> MatrixNormReport:
    """max over rows/columns of summed entry norms ||a_ij||_{W^{k,oo}}."""
    norms = np.array([[broken_winf_norm(a, k) for a in row] for row in A.matrix])
    per = []
    for j in range(A.dom.n_pieces):
        nj = np.array([[max(a.sup_abs(d, j) for d in range(k + 1)) for a in row] for row in A.matrix])
        per.append(_matrix_norm(nj))
    return MatrixNormReport(k, _matrix_norm(norms), per)


def reciprocal_numerators(b: Polynomial, k: int) -> list[Polynomial]:
    """Polynomials N_d with (1/b)^(d) = N_d / b^(d+1), d = 0..k+1.

    N_0 = 1 and N_{d+1} = N_d' b - (d+1) N_d b'.
    """
    nums = [Polynomial([1.0])]
    db = b.deriv()
    for d in range(k + 1):
        n = nums[-1]
        nums.append(n.deriv() * b - (d + 1) * n * db)
    return nums


def _reciprocal_sup(b: Polynomial, d: int, nums: list[Polynomial], lo: float, hi: float,
                    n_samples: int) -> float:
    def g(x):
        return nums[d](x) / b(x) ** (d + 1)

    cand = [lo, hi]
    crit = nums[d + 1]
    cand.extend(real_roots_in(crit, lo, hi))
    xs = np.concatenate([np.asarray(cand), np.linspace(lo, hi, n_samples)])
    vals = np.abs(g(xs))
    best = float(np.max(vals))
    # one refinement pass around the best sampled point
    i = int(np.argmax(vals[len(cand):]))
    step = (hi - lo) / max(n_samples - 1, 1)
    x0 = lo + i * step
    lo_r, hi_r = max(lo, x0 - step), min(hi, x0 + step)
    if hi_r > lo_r:
        res = minimize_scalar(lambda x: -abs(g(x)), bounds=(lo_r, hi_r), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(x0))})
        best = max(best, -float(res.fun))
    return best


def reciprocal_winf_norm(b: PiecewisePoly, k: int, n_samples: int = DEFAULT_SAMPLES) -> float:
    """||1/b||_{W^{k,oo}} over the pieces; +inf if b vanishes on a piece closure."""
    if b.vanishes():
        return float("inf")
    out = 0.0
    for j, p in enumerate(b.pieces):
        lo, hi = b.dom.piece_bounds(j)
        nums = reciprocal_numerators(p, k)
        for d in range(k + 1):
            out = max(out, _reciprocal_sup(p, d, nums, lo, hi, n_samples))
    return out


def amm_inverse_norm(A: CoefficientField, k: int, n_samples: int = DEFAULT_SAMPLES) -> float:
    """W^{k,oo} norm of 1/a11 (in 1D the global coordinate is the only chart)."""
    return reciprocal_winf_norm(A.a11, k, n_samples)


@dataclass(frozen=True)
class InverseCheck:
    lhs: float
    rhs_factor: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs_factor


def inverse_winf_check(b: PiecewisePoly, k: int, n_samples: int = DEFAULT_SAMPLES) -> InverseCheck:
    """Both sides of ||1/b||_{W^k} <= c3 ||1/b||_oo^{k+1} ||b||_{W^k}^k."""
    if b.vanishes():
        raise NonInvertible("b has a zero on the closure of a subdomain")
    lhs = reciprocal_winf_norm(b, k, n_samples)
    inv_sup = reciprocal_winf_norm(b, 0, n_samples)
    return InverseCheck(lhs, inv_sup ** (k + 1) * broken_winf_norm(b, k) ** k)


@dataclass(frozen=True)
class Coercivity:
    """``full``: inf of the smallest eigenvalue of Re A(x);
    ``se``: inf of Re a11(x) (strong ellipticity, 1D)."""

    full: float
    se: float


def _lambda_min(s00, s01, s11):
    m = 0.5 * (s00 + s11)
    dd = 0.5 * (s00 - s11)
    return m - np.sqrt(dd * dd + s01 * s01)


def _min_eig_on_piece(A: CoefficientField, j: int, n_samples: int) -> float:
    lo, hi = A.dom.piece_bounds(j)
    s00 = A.a00.pieces[j]
    s11 = A.a11.pieces[j]
    s01 = 0.5 * (A.a01.pieces[j] + A.a10.pieces[j])

    def lam(x):
        return _lambda_min(s00(x), s01(x), s11(x))

    m = 0.5 * (s00 + s11)
    dd = 0.5 * (s00 - s11)
    # stationary points of m - sqrt(dd^2 + o^2), squared form, plus kinks (dd = o = 0)
    stat = m.deriv() ** 2 * (dd * dd + s01 * s01) - (dd * dd.deriv() + s01 * s01.deriv()) ** 2
    cand = [lo, hi]
    for poly in (stat, dd):
        cand.extend(real_roots_in(poly, lo, hi))
    grid = np.linspace(lo, hi, n_samples)
    vals_grid = lam(grid)
    best = min(float(np.min(lam(np.asarray(cand)))), float(np.min(vals_grid)))
    i = int(np.argmin(vals_grid))
    step = (hi - lo) / max(n_samples - 1, 1)
    lo_r, hi_r = max(lo, grid[i] - step), min(hi, grid[i] + step)
    if hi_r > lo_r:
        res = minimize_scalar(lam, bounds=(lo_r, hi_r), method="bounded", options={"xatol": 1e-13})
        best = min(best, float(res.fun))
    return best


def coercivity_constant(A: CoefficientField, n_samples: int = DEFAULT_SAMPLES) -> Coercivity:
    full = min(_min_eig_on_piece(A, j, n_samples) for j in range(A.dom.n_pieces))
    return Coercivity(full=full, se=A.a11.inf())


def a11_vanishes(A: CoefficientField) -> bool:
    return any(poly_vanishes_on(p, *A.dom.piece_bounds(j)) for j, p in enumerate(A.a11.pieces))


def random_nonvanishing_poly(dom: DecomposedInterval, rng: np.random.Generator, max_degree: int = 4) -> PiecewisePoly:
    """Random piecewise polynomial of degree <= ``max_degree`` bounded away from zero:
    each piece is shifted so that min |b| is a random fraction of its range."""
    pieces = []
    for j in range(dom.n_pieces):
        lo, hi = dom.piece_bounds(j)
        deg = int(rng.integers(0, max_degree + 1))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        q = Polynomial(rng.uniform(-1, 1, deg + 1))(Polynomial([-mid / half, 1.0 / half]))
        xs = np.linspace(lo, hi, 257)
        vals = q(xs)
        spread = float(vals.max() - vals.min()) or 1.0
        gap = spread * 10 ** rng.uniform(-3, 0)
        sign = rng.choice([-1.0, 1.0])
        shifted = q - float(vals.min()) + gap
        lo_exact = min(poly_inf(shifted, lo, hi), float(shifted(xs).min()))
        if lo_exact <= 0:
            shifted = shifted + (gap - lo_exact)
        pieces.append(sign * shifted)
    return PiecewisePoly(dom, pieces)


@dataclass
class InverseCorpus:
    k: int
    ratios: list
    max_ratio: float


def inverse_check_corpus(n_cases: int, k: int, seed: int = 0, max_degree: int = 4,
                         dom: DecomposedInterval | None = None) -> InverseCorpus:
    """Ratios lhs / rhs_factor of :func:`inverse_winf_check` over random
    nonvanishing polynomials; case i is the same for every ``n_cases``."""
    dom = dom or DecomposedInterval(0.0, 1.0, (0.5,))
    ratios = []
    for i in range(n_cases):
        rng = np.random.default_rng([seed, i])
        ratios.append(inverse_winf_check(random_nonvanishing_poly(dom, rng, max_degree), k).ratio)
    return InverseCorpus(k, ratios, float(max(ratios)))
