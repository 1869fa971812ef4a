"""Broken (piecewise) functions on a decomposed interval.

Every broken function exposes the same small protocol used by the norm and
projection code:

* ``dom`` -- the :class:`DecomposedInterval`;
* ``eval(j, x, d=0)`` -- ``d``-th derivative on piece ``j`` (0-based) at
  points ``x`` inside the closure of that piece;
* ``cell_breaks(j)`` -- breakpoints inside piece ``j`` at which the function
  may lose smoothness (always including both piece ends);
* ``poly_degree(j)`` -- polynomial degree on each cell, or ``None``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy as sp
from numpy.polynomial import Polynomial

from .domain import DecomposedInterval
from .errors import QuadratureOrderOverflow

MAX_GAUSS_POINTS = 256
_X = sp.Symbol("x", real=True)


@lru_cache(maxsize=None)
def gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if n > MAX_GAUSS_POINTS:
        raise QuadratureOrderOverflow(f"{n} Gauss points requested (max {MAX_GAUSS_POINTS})")
    return np.polynomial.legendre.leggauss(max(int(n), 1))


def real_roots_in(p: Polynomial, lo: float, hi: float, imag_tol: float = 1e-6) -> np.ndarray:
    """Real parts of the (nearly) real roots of ``p`` lying in [lo, hi].

    Leading coefficients negligible on [lo, hi] are dropped first so that
    subnormal or round-off terms cannot blow up the companion matrix.
    """
    c = np.array(p.coef, dtype=float)
    R = max(abs(lo), abs(hi), 1.0)
    size = np.abs(c) * R ** np.arange(c.size)
    if not np.all(np.isfinite(size)) or size.max() == 0:
        return np.empty(0)
    keep = np.nonzero(size > 1e-14 * size.max())[0]
    c = c[: keep[-1] + 1]
    if c.size < 2:
        return np.empty(0)
    r = Polynomial(c).roots()
    r = r[np.isfinite(r)]
    r = np.real(r[np.abs(np.imag(r)) <= imag_tol * (1 + np.abs(r))])
    return r[(r >= lo) & (r <= hi)]


def _interval_candidates(p: Polynomial, lo: float, hi: float) -> np.ndarray:
    """Endpoints plus every critical point of ``p`` projected into [lo, hi].

    Extra candidates cannot spoil a supremum, so the real parts of all roots
    of ``p'`` are kept, not only the numerically real ones.
    """
    pts = [lo, hi]
    if p.degree() >= 2:
        pts.extend(real_roots_in(p.deriv(), lo, hi))
    return np.asarray(pts, dtype=float)


def poly_sup_abs(p: Polynomial, lo: float, hi: float) -> float:
    """Exact sup of |p| on [lo, hi] by critical-point enumeration."""
    return float(np.max(np.abs(p(_interval_candidates(p, lo, hi)))))


def poly_inf(p: Polynomial, lo: float, hi: float) -> float:
    """Exact inf of p on [lo, hi]."""
    return float(np.min(p(_interval_candidates(p, lo, hi))))


def poly_vanishes_on(p: Polynomial, lo: float, hi: float, rtol: float = 1e-12) -> bool:
    """True if ``p`` has a zero in the closed interval [lo, hi]."""
    scale = max(poly_sup_abs(p, lo, hi), np.finfo(float).tiny)
    if np.all(p.coef == 0):
        return True
    cand = list(_interval_candidates(p, lo, hi))
    if p.degree() >= 1:
        cand.extend(real_roots_in(p, lo, hi))
    vals = p(np.asarray(cand))
    if np.min(np.abs(vals)) <= rtol * scale:
        return True
    return bool(np.min(vals) < 0 < np.max(vals))


class PiecewisePoly:
    """One numpy ``Polynomial`` per subdomain, in the global variable x."""

    def __init__(self, dom: DecomposedInterval, pieces: Sequence):
        if len(pieces) != dom.n_pieces:
            raise ValueError(f"need {dom.n_pieces} pieces, got {len(pieces)}")
        self.dom = dom
        self.pieces = tuple(p if isinstance(p, Polynomial) else Polynomial(np.atleast_1d(np.asarray(p, float)))
                            for p in pieces)

    @classmethod
    def constant(cls, dom: DecomposedInterval, c: float | Sequence[float]) -> PiecewisePoly:
        vals = np.broadcast_to(np.asarray(c, dtype=float), (dom.n_pieces,))
        return cls(dom, [Polynomial([v]) for v in vals])

    @classmethod
    def zero(cls, dom: DecomposedInterval) -> PiecewisePoly:
        return cls.constant(dom, 0.0)

    def eval(self, j: int, x, d: int = 0):
        p = self.pieces[j]
        return (p.deriv(d) if d else p)(x)

    def __call__(self, x: float, side: str | None = None) -> float:
        return float(self.pieces[self.dom.piece_of(x, side)](x))

    def cell_breaks(self, j: int) -> np.ndarray:
        return np.array(self.dom.piece_bounds(j))

    def poly_degree(self, j: int) -> int:
        return max(self.pieces[j].degree(), 0)

    @property
    def degree(self) -> int:
        return max(self.poly_degree(j) for j in range(self.dom.n_pieces))

    def deriv(self, d: int = 1) -> PiecewisePoly:
        return PiecewisePoly(self.dom, [p.deriv(d) if d else p for p in self.pieces])

    def sup_abs(self, d: int = 0, j: int | None = None) -> float:
        pieces = range(self.dom.n_pieces) if j is None else [j]
        return max(poly_sup_abs(self.pieces[i].deriv(d) if d else self.pieces[i],
                                *self.dom.piece_bounds(i)) for i in pieces)

    def inf(self, j: int | None = None) -> float:
        pieces = range(self.dom.n_pieces) if j is None else [j]
        return min(poly_inf(self.pieces[i], *self.dom.piece_bounds(i)) for i in pieces)

    def vanishes(self) -> bool:
        return any(poly_vanishes_on(p, *self.dom.piece_bounds(j)) for j, p in enumerate(self.pieces))

    def is_zero(self) -> bool:
        return all(np.all(p.coef == 0) for p in self.pieces)

    def trim(self) -> PiecewisePoly:
        return PiecewisePoly(self.dom, [p.trim() if np.any(p.coef) else Polynomial([0.0]) for p in self.pieces])

    def _other(self, other) -> tuple:
        if isinstance(other, PiecewisePoly):
            return other.pieces
        return (Polynomial([float(other)]),) * self.dom.n_pieces

    def __add__(self, other):
        return PiecewisePoly(self.dom, [p + q for p, q in zip(self.pieces, self._other(other))])

    __radd__ = __add__

    def __sub__(self, other):
        return PiecewisePoly(self.dom, [p - q for p, q in zip(self.pieces, self._other(other))])

    def __rsub__(self, other):
        return PiecewisePoly(self.dom, [q - p for p, q in zip(self.pieces, self._other(other))])

    def __mul__(self, other):
        return PiecewisePoly(self.dom, [p * q for p, q in zip(self.pieces, self._other(other))])

    __rmul__ = __mul__

    def __neg__(self):
        return PiecewisePoly(self.dom, [-p for p in self.pieces])

    def one_sided(self, x: float, side: str, d: int = 0) -> float:
        return float(self.eval(self.dom.piece_of(x, side), x, d))

    def to_coeff_lists(self) -> list[list[float]]:
        return [p.coef.tolist() for p in self.pieces]

    def __repr__(self):
        return f"PiecewisePoly({self.to_coeff_lists()})"


class PiecewiseExpr:
    """Closed-form broken function given by one sympy expression in ``x`` per piece."""

    def __init__(self, dom: DecomposedInterval, exprs: Sequence):
        if len(exprs) != dom.n_pieces:
            raise ValueError(f"need {dom.n_pieces} expressions, got {len(exprs)}")
        self.dom = dom
        self.exprs = tuple(sp.sympify(e, locals={"x": _X}) for e in exprs)
        self._fns = {}

    def _fn(self, j: int, d: int):
        key = (j, d)
        if key not in self._fns:
            expr = sp.diff(self.exprs[j], _X, d) if d else self.exprs[j]
            f = sp.lambdify(_X, expr, "numpy")
            self._fns[key] = f
        return self._fns[key]

    def eval(self, j: int, x, d: int = 0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self._fn(j, d)(x), dtype=float), x.shape).copy()

    def __call__(self, x: float, side: str | None = None) -> float:
        return float(self.eval(self.dom.piece_of(x, side), x))

    def cell_breaks(self, j: int) -> np.ndarray:
        return np.array(self.dom.piece_bounds(j))

    def poly_degree(self, j: int) -> int | None:
        e = self.exprs[j]
        return int(sp.Poly(e, _X).degree()) if e.is_polynomial(_X) else None


class LinearCombination:
    """``sum_i c_i f_i`` of broken functions; used for error functions."""

    def __init__(self, terms: Sequence[tuple[float, object]]):
        self.terms = tuple(terms)
        self.dom = self.terms[0][1].dom

    def eval(self, j: int, x, d: int = 0):
        return sum(c * f.eval(j, x, d) for c, f in self.terms)

    def cell_breaks(self, j: int) -> np.ndarray:
        return np.unique(np.concatenate([f.cell_breaks(j) for _, f in self.terms]))

    def poly_degree(self, j: int) -> int | None:
        degs = [f.poly_degree(j) for _, f in self.terms]
        return None if any(dg is None for dg in degs) else max(degs)


def difference(u, v) -> LinearCombination:
    return LinearCombination([(1.0, u), (-1.0, v)])


def as_broken(dom: DecomposedInterval, spec) -> PiecewisePoly | PiecewiseExpr:
    """Build a broken function from numbers, coefficient lists or expression strings.

    ``spec`` is either one item (reused on every piece) or one item per piece;
    an item is a number, a list of ascending polynomial coefficients, or a
    string parsed by sympy in the variable ``x``.
    """
    if isinstance(spec, (PiecewisePoly, PiecewiseExpr)) or hasattr(spec, "cell_breaks"):
        return spec
    if isinstance(spec, (int, float)):
        return PiecewisePoly.constant(dom, float(spec))
    if isinstance(spec, str):
        spec = [spec] * dom.n_pieces
    spec = list(spec)
    if spec and all(isinstance(s, (int, float)) for s in spec):
        # a bare coefficient list shared by every piece
        spec = [spec] * dom.n_pieces
    if len(spec) != dom.n_pieces:
        raise ValueError(f"expected {dom.n_pieces} pieces, got {len(spec)}")
    if any(isinstance(s, str) for s in spec):
        exprs = [s if isinstance(s, str) else _coeffs_to_expr(s) for s in spec]
        parsed = [sp.sympify(e, locals={"x": _X}) for e in exprs]
        if all(e.is_polynomial(_X) for e in parsed):
            return PiecewisePoly(dom, [Polynomial([float(c) for c in reversed(sp.Poly(e, _X).all_coeffs())])
                                       for e in parsed])
        return PiecewiseExpr(dom, parsed)
    return PiecewisePoly(dom, [np.atleast_1d(np.asarray(s, dtype=float)) for s in spec])


def _coeffs_to_expr(c) -> sp.Expr:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return sum(sp.Float(ci) * _X**i for i, ci in enumerate(c))


def quadrature_cells(funcs: Sequence, j: int, min_cells: int = 1) -> np.ndarray:
    """Union of the cell breakpoints of ``funcs`` on piece ``j``, subdivided
    uniformly into at least ``min_cells`` cells when nothing is polynomial."""
    br = np.unique(np.concatenate([f.cell_breaks(j) for f in funcs]))
    if len(br) - 1 < min_cells:
        lo, hi = br[0], br[-1]
        br = np.unique(np.concatenate([br, np.linspace(lo, hi, min_cells + 1)]))
    return br


def gauss_count(funcs: Sequence, j: int, power: int = 2, default: int = 16) -> int:
    """Points per cell integrating products of ``power`` factors exactly when all
    factors are polynomial, else ``default``."""
    degs = [f.poly_degree(j) for f in funcs]
    if any(dg is None for dg in degs):
        return default
    return max(degs) * power // 2 + 1
