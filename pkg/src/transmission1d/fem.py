"""Lagrange P1/P2 finite elements on a mesh that conforms to the interface.

Degrees of freedom are *broken*: each subdomain owns a contiguous block of
``n_j * p + 1`` dofs ordered by x, so every interface point carries a left
and a right copy.  The conforming space S_N (continuous, zero on the
Dirichlet ends) is the range of the sparse prolongation ``Z`` that glues the
two copies into one free dof and drops Dirichlet dofs.  Free dofs stay
ordered by x, so every free-dof matrix is banded with bandwidth ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sps
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, onenormest

from .coefficients import CoefficientField, coercivity_constant
from .domain import DecomposedInterval
from .errors import NotCoercive, NotSymmetric, SingularSystem
from .functions import PiecewisePoly, as_broken, gauss

NONPOLY_GAUSS = 12
RCOND_TOL = 10 * np.finfo(float).eps


# ----------------------------------------------------------------------------
# reference element


def shape(p: int, xi: np.ndarray, d: int = 0) -> np.ndarray:
    """Lagrange shape functions (nodes -1, [0,] 1) and their xi-derivatives,
    shape ``(p + 1, len(xi))``."""
    xi = np.asarray(xi, dtype=float)
    one, zero = np.ones_like(xi), np.zeros_like(xi)
    if p == 1:
        table = {0: [(1 - xi) / 2, (1 + xi) / 2], 1: [-0.5 * one, 0.5 * one], 2: [zero, zero]}
    elif p == 2:
        table = {
            0: [xi * (xi - 1) / 2, 1 - xi * xi, xi * (xi + 1) / 2],
            1: [xi - 0.5, -2 * xi, xi + 0.5],
            2: [one, -2 * one, one],
        }
    else:
        raise ValueError(f"degree must be 1 or 2, got {p}")
    if d not in table:
        return np.zeros((p + 1, xi.size))
    return np.array(table[d])


# ----------------------------------------------------------------------------
# mesh


@dataclass(frozen=True)
class Mesh:
    dom: DecomposedInterval
    n_per: tuple[int, ...]
    degree: int = 1

    def __post_init__(self):
        if len(self.n_per) != self.dom.n_pieces:
            raise ValueError("need one element count per subdomain")
        if any(n < 1 for n in self.n_per):
            raise ValueError("n_per_subdomain must be >= 1")
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")

    @property
    def p(self) -> int:
        return self.degree

    @cached_property
    def piece_vertices(self) -> list[np.ndarray]:
        return [np.linspace(*self.dom.piece_bounds(j), n + 1) for j, n in enumerate(self.n_per)]

    @property
    def nodes(self) -> np.ndarray:
        """Element vertices; interface points appear twice (left and right copy)."""
        return np.concatenate(self.piece_vertices)

    @property
    def n_elements(self) -> int:
        return int(sum(self.n_per))

    @cached_property
    def block_start(self) -> np.ndarray:
        sizes = [n * self.p + 1 for n in self.n_per]
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def n_broken(self) -> int:
        return int(self.block_start[-1])

    @cached_property
    def dof_x(self) -> np.ndarray:
        out = []
        for j, v in enumerate(self.piece_vertices):
            if self.p == 1:
                out.append(v)
            else:
                x = np.empty(2 * len(v) - 1)
                x[0::2] = v
                x[1::2] = 0.5 * (v[:-1] + v[1:])
                out.append(x)
        return np.concatenate(out)

    def dof_piece(self) -> np.ndarray:
        return np.repeat(np.arange(self.dom.n_pieces), np.diff(self.block_start))

    def element_dofs(self, j: int) -> np.ndarray:
        """(n_j, p + 1) broken dof indices of the elements of piece ``j``."""
        n = self.n_per[j]
        return self.block_start[j] + self.p * np.arange(n)[:, None] + np.arange(self.p + 1)[None, :]

    def left_copy(self, i: int) -> int:
        """Broken dof of interface point ``i`` seen from the left piece."""
        return int(self.block_start[i + 1] - 1)

    def right_copy(self, i: int) -> int:
        return int(self.block_start[i + 1])

    def end_dof(self, end: str) -> int:
        return 0 if end == "left" else self.n_broken - 1

    @cached_property
    def dirichlet_dofs(self) -> list[int]:
        return [self.end_dof(e) for e in self.dom.dirichlet_ends]

    @cached_property
    def free_index(self) -> np.ndarray:
        """Free dof number of each broken dof, -1 for Dirichlet dofs."""
        idx = np.empty(self.n_broken, dtype=int)
        k = 0
        for j in range(self.dom.n_pieces):
            lo, hi = self.block_start[j], self.block_start[j + 1]
            start = lo
            if j > 0:
                idx[lo] = idx[lo - 1]
                start = lo + 1
            m = hi - start
            idx[start:hi] = np.arange(k, k + m)
            k += m
        out = idx.copy()
        for dof in self.dirichlet_dofs:
            out[dof] = -1
        # renumber consecutively after dropping Dirichlet dofs
        kept = np.unique(out[out >= 0])
        remap = -np.ones(k, dtype=int)
        remap[kept] = np.arange(kept.size)
        return np.where(out >= 0, remap[np.maximum(out, 0)], -1)

    @property
    def n_free(self) -> int:
        """dim S_N."""
        return int(self.free_index.max()) + 1 if np.any(self.free_index >= 0) else 0

    @property
    def dim(self) -> int:
        return self.n_free

    @cached_property
    def Z(self) -> sps.csr_matrix:
        rows = np.flatnonzero(self.free_index >= 0)
        return sps.csr_matrix((np.ones(rows.size), (rows, self.free_index[rows])),
                              shape=(self.n_broken, self.n_free))

    def refined(self, factor: int = 2, degree: int | None = None) -> Mesh:
        return Mesh(self.dom, tuple(n * factor for n in self.n_per), degree or self.degree)

    @property
    def h_max(self) -> float:
        return max((b - a) / n for (a, b), n in zip(map(self.dom.piece_bounds, range(self.dom.n_pieces)), self.n_per))

    def locate(self, j: int, x) -> tuple[np.ndarray, np.ndarray]:
        """Element number inside piece ``j`` and reference coordinate of ``x``."""
        v = self.piece_vertices[j]
        x = np.asarray(x, dtype=float)
        e = np.clip(np.searchsorted(v, x, side="right") - 1, 0, len(v) - 2)
        xi = 2 * (x - v[e]) / (v[e + 1] - v[e]) - 1
        return e, xi


def build_mesh(dom: DecomposedInterval, n_per_subdomain: int | Sequence[int], degree: int = 1) -> Mesh:
    if isinstance(n_per_subdomain, (int, np.integer)):
        n_per = (int(n_per_subdomain),) * dom.n_pieces
    else:
        n_per = tuple(int(n) for n in n_per_subdomain)
    return Mesh(dom, n_per, degree)


# ----------------------------------------------------------------------------
# finite element functions


class BrokenFemFunction:
    """Finite element function given by its broken dof vector."""

    def __init__(self, mesh: Mesh, coef: np.ndarray):
        self.mesh = mesh
        self.dom = mesh.dom
        self.coef = np.asarray(coef)
        if self.coef.shape != (mesh.n_broken,):
            raise ValueError(f"expected {mesh.n_broken} coefficients, got {self.coef.shape}")

    def eval(self, j: int, x, d: int = 0):
        m = self.mesh
        e, xi = m.locate(j, x)
        v = m.piece_vertices[j]
        h = v[e + 1] - v[e]
        dofs = m.element_dofs(j)[e]  # (..., p+1)
        phi = shape(m.p, np.ravel(xi), d).T.reshape(*np.shape(xi), m.p + 1)
        return np.sum(self.coef[dofs] * phi, axis=-1) * (2.0 / h) ** d

    def __call__(self, x: float, side: str | None = None):
        return self.eval(self.dom.piece_of(x, side), x)[()]

    def one_sided(self, x: float, side: str, d: int = 0):
        return self.eval(self.dom.piece_of(x, side), x, d)[()]

    def cell_breaks(self, j: int) -> np.ndarray:
        return self.mesh.piece_vertices[j]

    def poly_degree(self, j: int) -> int:
        return self.mesh.p

    def jumps(self) -> np.ndarray:
        """[[u]] = orientation * (u(gamma-) - u(gamma+)) at each interface point."""
        m = self.mesh
        return np.array([self.dom.orientation * (self.coef[m.left_copy(i)] - self.coef[m.right_copy(i)])
                         for i in range(len(self.dom.gamma))])

    def __add__(self, other: BrokenFemFunction) -> BrokenFemFunction:
        return BrokenFemFunction(self.mesh, self.coef + other.coef)

    def __sub__(self, other: BrokenFemFunction) -> BrokenFemFunction:
        return BrokenFemFunction(self.mesh, self.coef - other.coef)

    def __mul__(self, c) -> BrokenFemFunction:
        return BrokenFemFunction(self.mesh, self.coef * c)

    __rmul__ = __mul__


def interpolate(u, mesh: Mesh) -> BrokenFemFunction:
    """Nodal interpolant of a broken function (one-sided values at interfaces)."""
    coef = np.empty(mesh.n_broken, dtype=float)
    for j in range(mesh.dom.n_pieces):
        lo, hi = mesh.block_start[j], mesh.block_start[j + 1]
        coef[lo:hi] = u.eval(j, mesh.dof_x[lo:hi])
    return BrokenFemFunction(mesh, coef)


# ----------------------------------------------------------------------------
# assembly


def _quad_points(mesh: Mesh, j: int, nq: int):
    v = mesh.piece_vertices[j]
    xi, w = gauss(nq)
    jac = 0.5 * (v[1:] - v[:-1])  # (n_e,)
    x = 0.5 * (v[1:] + v[:-1])[:, None] + jac[:, None] * xi[None, :]
    return xi, w, jac, x


def _assemble_terms(mesh: Mesh, terms: Sequence[tuple[int, int, object]], nq_for_piece) -> sps.csr_matrix:
    """Sum over ``(dv, du, c)`` of the matrix ``M[r, s] = int c phi_s^(du) phi_r^(dv)``.

    ``c`` is a broken function (protocol ``eval``) or a float.
    """
    p = mesh.p
    rows, cols, vals = [], [], []
    for j in range(mesh.dom.n_pieces):
        xi, w, jac, x = _quad_points(mesh, j, nq_for_piece(j))
        Ke = np.zeros((mesh.n_per[j], p + 1, p + 1))
        for dv, du, c in terms:
            cv = np.full(x.shape, float(c)) if np.isscalar(c) else c.eval(j, x)
            if not np.any(cv):
                continue
            scale = jac ** (1 - dv - du)
            Bv, Bu = shape(p, xi, dv), shape(p, xi, du)
            Ke += np.einsum("eq,q,rq,sq->ers", cv * scale[:, None], w, Bv, Bu)
        dofs = mesh.element_dofs(j)
        rows.append(np.repeat(dofs, p + 1, axis=1).ravel())
        cols.append(np.tile(dofs, (1, p + 1)).ravel())
        vals.append(Ke.ravel())
    n = mesh.n_broken
    return sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _nq_exact(mesh: Mesh, coef_degree: int) -> int:
    # integrand degree <= coef_degree + 2p
    return math.ceil((coef_degree + 2 * mesh.p) / 2) + 1


def bilinear_terms(A: CoefficientField) -> list[tuple[int, int, PiecewisePoly]]:
    """(dv, du, coefficient) triples of B^A(u, v)."""
    return [(1, 1, A.a11), (0, 1, A.a01), (1, 0, A.a10), (0, 0, A.a00)]


def stiffness_matrix(A: CoefficientField, mesh: Mesh) -> sps.csr_matrix:
    nq = _nq_exact(mesh, A.degree)
    return _assemble_terms(mesh, bilinear_terms(A), lambda j: nq)


@dataclass(frozen=True)
class GramMatrices:
    M0: sps.csr_matrix  # L2
    S1: sps.csr_matrix  # H1 seminorm
    M1: sps.csr_matrix  # full H1
    S2: sps.csr_matrix  # element-wise H2 seminorm (zero for p = 1)


@lru_cache(maxsize=64)
def gram_matrices(mesh: Mesh) -> GramMatrices:
    nq = lambda j: mesh.p + 1
    M0 = _assemble_terms(mesh, [(0, 0, 1.0)], nq)
    S1 = _assemble_terms(mesh, [(1, 1, 1.0)], nq)
    S2 = _assemble_terms(mesh, [(2, 2, 1.0)], nq)
    return GramMatrices(M0, S1, (M0 + S1).tocsr(), S2)


@dataclass(frozen=True)
class FemSystem:
    """Matrices of one (A, mesh) pair on the broken dofs; see ``restrict``."""

    A: CoefficientField
    mesh: Mesh
    K: sps.csr_matrix
    M0: sps.csr_matrix
    M1: sps.csr_matrix

    @property
    def Z(self) -> sps.csr_matrix:
        return self.mesh.Z

    def restrict(self, M: sps.spmatrix) -> sps.csr_matrix:
        """Matrix on the free dofs, Z^T M Z."""
        Z = self.mesh.Z
        return (Z.T @ M @ Z).tocsr()

    @cached_property
    def K_free(self) -> sps.csr_matrix:
        return self.restrict(self.K)

    @cached_property
    def M1_free(self) -> sps.csr_matrix:
        return self.restrict(self.M1)

    @cached_property
    def M0_free(self) -> sps.csr_matrix:
        return self.restrict(self.M0)


def assemble(A: CoefficientField, mesh: Mesh) -> FemSystem:
    g = gram_matrices(mesh)
    return FemSystem(A, mesh, stiffness_matrix(A, mesh), g.M0, g.M1)


# ----------------------------------------------------------------------------
# banded direct solver


class BandedLU:
    """LU factorization of a banded (sparse) square matrix via LAPACK ``?gbtrf``."""

    def __init__(self, M: sps.spmatrix):
        M = sps.coo_matrix(M)
        n = M.shape[0]
        self.n = n
        self.complex = np.iscomplexobj(M.data)
        dtype = complex if self.complex else float
        off = M.row - M.col
        self.kl = int(max(off.max(initial=0), 0))
        self.ku = int(max((-off).max(initial=0), 0))
        kl, ku = self.kl, self.ku
        ab = np.zeros((2 * kl + ku + 1, n), dtype=dtype)
        np.add.at(ab, (kl + ku + M.row - M.col, M.col), M.data)
        self.norm1 = float(np.max(np.abs(sps.csc_matrix(M)).sum(axis=0))) if n else 0.0
        trf = lapack.zgbtrf if self.complex else lapack.dgbtrf
        self._trs = lapack.zgbtrs if self.complex else lapack.dgbtrs
        self.lu, self.piv, info = trf(ab, kl, ku)
        if info < 0:
            raise ValueError(f"illegal argument {-info} to gbtrf")
        if info > 0:
            raise SingularSystem(f"exactly singular pivot at position {info}", rcond=0.0)
        self._rcond = None

    def solve(self, b: np.ndarray, trans: int = 0) -> np.ndarray:
        b = np.asarray(b)
        if self.complex or np.iscomplexobj(b):
            if not self.complex:
                return self.solve(b.real, trans) + 1j * self.solve(b.imag, trans)
            b = b.astype(complex)
        else:
            b = b.astype(float)
        x, info = self._trs(self.lu, self.kl, self.ku, b, self.piv, trans=trans)
        if info != 0:
            raise SingularSystem(f"gbtrs failed with info={info}")
        return x

    @property
    def rcond(self) -> float:
        """Reciprocal 1-norm condition estimate."""
        if self._rcond is None:
            if self.n == 0:
                self._rcond = 1.0
            else:
                dtype = complex if self.complex else float
                op = LinearOperator((self.n, self.n), dtype=dtype,
                                    matvec=lambda v: self.solve(v),
                                    rmatvec=lambda v: self.solve(v, trans=2 if self.complex else 1))
                inv_norm = onenormest(op) if self.n > 4 else np.max(np.abs(self.solve(np.eye(self.n))).sum(axis=0))
                self._rcond = 1.0 / (self.norm1 * inv_norm) if inv_norm > 0 and self.norm1 > 0 else 0.0
        return self._rcond

    def check(self, tol: float = RCOND_TOL) -> BandedLU:
        rc = self.rcond
        if not np.isfinite(rc) or rc < tol:
            raise SingularSystem(f"numerically singular system (rcond ~ {rc:.3e})", rcond=rc)
        return self


def factor(M: sps.spmatrix, check: bool = True) -> BandedLU:
    lu = BandedLU(M)
    return lu.check() if check else lu


# ----------------------------------------------------------------------------
# data, lifting, load, solve


@dataclass(frozen=True)
class TransmissionData:
    """F = (f, g_tilde, g, h_tilde, h).

    ``g_tilde`` maps Dirichlet ends and ``g`` maps Neumann ends ("left"/"right")
    to values; ``h_tilde`` (solution jumps) and ``h`` (flux jumps) have one
    entry per interface point.
    """

    f: object
    g_tilde: dict = field(default_factory=dict)
    g: dict = field(default_factory=dict)
    h_tilde: tuple = ()
    h: tuple = ()

    @classmethod
    def build(cls, dom: DecomposedInterval, f=0.0, g_tilde=None, g=None, h_tilde=None, h=None) -> TransmissionData:
        g_tilde = dict(g_tilde or {})
        g = dict(g or {})
        bad = set(g_tilde) - set(dom.dirichlet_ends)
        if bad:
            raise ValueError(f"g_tilde given on non-Dirichlet ends {sorted(bad)}")
        bad = set(g) - set(dom.neumann_ends)
        if bad:
            raise ValueError(f"g given on non-Neumann ends {sorted(bad)}")
        g_tilde = {e: float(g_tilde.get(e, 0.0)) for e in dom.dirichlet_ends}
        g = {e: float(g.get(e, 0.0)) for e in dom.neumann_ends}
        n_g = len(dom.gamma)

        def per_interface(v, name):
            if v is None:
                return (0.0,) * n_g
            v = tuple(float(x) for x in np.atleast_1d(v))
            if len(v) != n_g:
                raise ValueError(f"{name} needs {n_g} values, got {len(v)}")
            return v

        return cls(as_broken(dom, f), g_tilde, g, per_interface(h_tilde, "h_tilde"), per_interface(h, "h"))

    @classmethod
    def zero(cls, dom: DecomposedInterval) -> TransmissionData:
        return cls.build(dom)

    @property
    def is_homogeneous(self) -> bool:
        return not (any(self.g_tilde.values()) or any(self.h_tilde))


def lift_data(g_tilde: dict, h_tilde: Sequence[float], mesh: Mesh) -> BrokenFemFunction:
    """Broken FE function carrying the Dirichlet values and the solution jumps.

    The jump is put entirely on the left copy, so
    orientation * (u0(gamma-) - u0(gamma+)) = h_tilde.
    """
    coef = np.zeros(mesh.n_broken)
    for end, val in (g_tilde or {}).items():
        coef[mesh.end_dof(end)] = val
    for i, ht in enumerate(h_tilde or ()):
        coef[mesh.left_copy(i)] = mesh.dom.orientation * ht
    return BrokenFemFunction(mesh, coef)


def _nq_for(f, mesh: Mesh, j: int, extra: int = 0) -> int:
    dg = f.poly_degree(j)
    if dg is None:
        return mesh.p + NONPOLY_GAUSS
    return math.ceil((dg + mesh.p + extra + 1) / 2)


def volume_load(f, mesh: Mesh) -> np.ndarray:
    """Broken vector of int f phi_r."""
    b = np.zeros(mesh.n_broken, dtype=complex if _is_complex(f) else float)
    for j in range(mesh.dom.n_pieces):
        xi, w, jac, x = _quad_points(mesh, j, _nq_for(f, mesh, j))
        fx = f.eval(j, x)
        phi = shape(mesh.p, xi)
        be = np.einsum("eq,q,rq->er", fx * jac[:, None], w, phi)
        np.add.at(b, mesh.element_dofs(j), be)
    return b


def _is_complex(f) -> bool:
    return isinstance(f, BrokenFemFunction) and np.iscomplexobj(f.coef)


def load_vector(F: TransmissionData, mesh: Mesh) -> np.ndarray:
    """Broken vector of (f, v) + sum_N g v + sum_Gamma h v.

    The interface term is placed on the left copy (times the orientation);
    after restriction to the free dofs it becomes h * v(gamma).
    """
    b = volume_load(F.f, mesh)
    for end, val in F.g.items():
        b[mesh.end_dof(end)] += val
    for i, hv in enumerate(F.h):
        b[mesh.left_copy(i)] += mesh.dom.orientation * hv
    return b


def solve_system(system: FemSystem, F: TransmissionData) -> BrokenFemFunction:
    mesh = system.mesh
    u0 = lift_data(F.g_tilde, F.h_tilde, mesh)
    rhs = load_vector(F, mesh) - system.K @ u0.coef
    Z = mesh.Z
    w = factor(system.K_free).solve(Z.T @ rhs)
    return BrokenFemFunction(mesh, u0.coef + Z @ w)


def solve_transmission(A: CoefficientField, F: TransmissionData, mesh: Mesh) -> BrokenFemFunction:
    """Galerkin solution u_h = u0 + w, w in S_N, of the transmission problem."""
    return solve_system(assemble(A, mesh), F)


# ----------------------------------------------------------------------------
# conormal derivatives


@dataclass(frozen=True)
class ConormalReport:
    neumann: dict  # end -> D_nu u
    interface: np.ndarray  # [[D_nu u]] per interface point


def flux(A: CoefficientField, u, j: int, x) -> np.ndarray:
    """sigma = a11 u' + a10 u on piece ``j``."""
    return A.a11.eval(j, x) * u.eval(j, x, 1) + A.a10.eval(j, x) * u.eval(j, x)


def conormal_jump(A: CoefficientField, u_h, mesh: Mesh | None = None, f=None,
                  method: str = "pointwise") -> ConormalReport:
    """Conormal derivatives at the Neumann ends and their jumps across Gamma.

    ``method="pointwise"`` evaluates one-sided fluxes of ``u_h``.
    ``method="residual"`` (FE input only) uses the variationally consistent
    flux (K u - F_f) at the boundary dofs of each piece; for a Galerkin
    solution it reproduces the prescribed g and h up to round-off.
    """
    dom = A.dom
    if method == "residual":
        mesh = mesh or u_h.mesh
        r = stiffness_matrix(A, mesh) @ u_h.coef
        if f is not None:
            r = r - volume_load(as_broken(dom, f) if not hasattr(f, "eval") else f, mesh)
        neu = {e: r[mesh.end_dof(e)] for e in dom.neumann_ends}
        jumps = np.array([dom.orientation * (r[mesh.left_copy(i)] + r[mesh.right_copy(i)])
                          for i in range(len(dom.gamma))])
        return ConormalReport(neu, jumps)
    if method != "pointwise":
        raise ValueError(f"unknown method {method!r}")
    neu = {}
    for e in dom.neumann_ends:
        x = dom.endpoint(e)
        j = 0 if e == "left" else dom.n_pieces - 1
        neu[e] = float(dom.outward_normal(e) * flux(A, u_h, j, x))
    jumps = np.array([dom.orientation * (flux(A, u_h, i, g) - flux(A, u_h, i + 1, g))
                      for i, g in enumerate(dom.gamma)], dtype=float)
    return ConormalReport(neu, jumps)


# ----------------------------------------------------------------------------
# projections onto S_N


def mixed_load(mesh: Mesh, u, terms: Sequence[tuple[int, int, object]], coef_degree: int = 0) -> np.ndarray:
    """Broken vector ``r_i = sum int c u^(du) phi_i^(dv)`` for a broken function ``u``.

    Integration runs over the common refinement of the mesh and the cells of
    ``u`` so that a function from a nested (finer) mesh is integrated exactly.
    """
    p = mesh.p
    out = np.zeros(mesh.n_broken, dtype=complex if _is_complex(u) else float)
    for j in range(mesh.dom.n_pieces):
        br = np.unique(np.concatenate([mesh.piece_vertices[j], u.cell_breaks(j)]))
        mid = 0.5 * (br[1:] + br[:-1])
        half = 0.5 * (br[1:] - br[:-1])
        dg = u.poly_degree(j)
        nq = mesh.p + NONPOLY_GAUSS if dg is None else math.ceil((dg + p + coef_degree + 1) / 2)
        xi, w = gauss(nq)
        x = mid[:, None] + half[:, None] * xi[None, :]
        e, xi_c = mesh.locate(j, x)
        v = mesh.piece_vertices[j]
        jac_e = 0.5 * (v[e + 1] - v[e])
        vals = np.zeros(x.shape + (p + 1,), dtype=out.dtype)
        for dv, du, c in terms:
            cv = c if np.isscalar(c) else c.eval(j, x)
            ux = u.eval(j, x, du)
            phi = shape(p, xi_c.ravel(), dv).T.reshape(x.shape + (p + 1,)) / jac_e[..., None] ** dv
            vals += (cv * ux * half[:, None] * w[None, :])[..., None] * phi
        np.add.at(out, mesh.element_dofs(j)[e], vals)
    return out


def _project(mesh: Mesh, G_broken: sps.spmatrix, rhs_broken: np.ndarray) -> BrokenFemFunction:
    Z = mesh.Z
    c = factor((Z.T @ G_broken @ Z).tocsr()).solve(Z.T @ rhs_broken)
    return BrokenFemFunction(mesh, Z @ c)


def h1_projection(u, mesh: Mesh) -> BrokenFemFunction:
    """H1-orthogonal projection Q_N u onto S_N."""
    rhs = mixed_load(mesh, u, [(0, 0, 1.0), (1, 1, 1.0)])
    return _project(mesh, gram_matrices(mesh).M1, rhs)


def check_energy_projection(A: CoefficientField) -> None:
    if not A.is_symmetric():
        raise NotSymmetric("energy projection needs a01 == a10")
    if A.has_first_order_terms():
        if coercivity_constant(A).full <= 0:
            raise NotCoercive("Re A is not uniformly positive definite")
        return
    if A.a11.inf() <= 0:
        raise NotCoercive("a11 is not uniformly positive")
    a00_min = A.a00.inf()
    if a00_min < 0 or (a00_min == 0 and not A.dom.dirichlet_ends):
        raise NotCoercive("B^A is not positive definite on H_D^1")


def energy_projection(A: CoefficientField, u, mesh: Mesh, system: FemSystem | None = None,
                      checked: bool = False) -> BrokenFemFunction:
    """B^A-orthogonal projection Q_N^A u onto S_N."""
    if not checked:
        check_energy_projection(A)
    K = system.K if system is not None else stiffness_matrix(A, mesh)
    rhs = mixed_load(mesh, u, bilinear_terms(A), coef_degree=A.degree)
    return _project(mesh, K, rhs)


# ----------------------------------------------------------------------------
# export


def solution_rows(A: CoefficientField, u: BrokenFemFunction, points_per_element: int = 1) -> list[dict]:
    """Rows (piece, x, u, du, flux) at element vertices (and interior samples),
    with interface points listed once per side."""
    rows = []
    m = u.mesh
    for j in range(m.dom.n_pieces):
        v = m.piece_vertices[j]
        if points_per_element > 1:
            t = np.linspace(0, 1, points_per_element + 1)[:-1]
            x = np.concatenate([(v[:-1, None] + (v[1:] - v[:-1])[:, None] * t[None, :]).ravel(), v[-1:]])
        else:
            x = v
        uu, du, fl = u.eval(j, x), u.eval(j, x, 1), flux(A, u, j, x)
        for xi, a, b, c in zip(x, uu, du, fl):
            rows.append({"piece": j + 1, "x": float(xi), "u": float(np.real(a)), "du": float(np.real(b)),
                         "flux": float(np.real(c))})
    return rows
