"""Broken Sobolev norms, V_k / V_k^- norms, dual norms, Poincare constant and
discrete operator-inverse norms.

Point data on the finite sets Gamma and the Neumann ends are measured with
unweighted Euclidean norms.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .coefficients import CoefficientField
from .errors import (InsufficientRegularity, NoDirichletBoundary, NotInVk, RequiresP2,
                     SingularGram, SingularSystem)
from .fem import (BrokenFemFunction, Mesh, TransmissionData, gram_matrices, load_vector,
                  stiffness_matrix)
from .functions import gauss, gauss_count, quadrature_cells

NONPOLY_CELLS = 16
NONPOLY_POINTS = 16


def _piece_integrals(u, j: int, k: int) -> np.ndarray:
    """int_{U_j} |u^(d)|^2 for d = 0..k."""
    dg = u.poly_degree(j)
    cells = quadrature_cells([u], j, 1 if dg is not None else NONPOLY_CELLS)
    nq = gauss_count([u], j, default=NONPOLY_POINTS)
    xi, w = gauss(nq)
    mid = 0.5 * (cells[1:] + cells[:-1])
    half = 0.5 * (cells[1:] - cells[:-1])
    x = mid[:, None] + half[:, None] * xi[None, :]
    wx = half[:, None] * w[None, :]
    return np.array([float(np.sum(np.abs(u.eval(j, x, d)) ** 2 * wx)) for d in range(k + 1)])


def broken_hk_norm(u, k: int, seminorm: bool = False) -> float:
    """(sum_j ||u||^2_{H^k(U_j)})^(1/2); with ``seminorm`` only order k enters."""
    if isinstance(u, BrokenFemFunction) and k > u.mesh.p:
        raise InsufficientRegularity(f"P{u.mesh.p} function has no broken H^{k} norm")
    total = 0.0
    for j in range(u.dom.n_pieces):
        parts = _piece_integrals(u, j, k)
        total += parts[-1] if seminorm else parts.sum()
    return float(np.sqrt(total))


def broken_hk_parts(u, k: int) -> np.ndarray:
    """Squared L2 norms of u^(d), d = 0..k, summed over pieces."""
    return sum(_piece_integrals(u, j, k) for j in range(u.dom.n_pieces))


def _dense(M) -> np.ndarray:
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M)


def _cholesky(M) -> np.ndarray:
    try:
        return sla.cholesky(_dense(M), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"Gram matrix is not positive definite: {exc}") from exc


def dual_norm(F_vec: np.ndarray, M1) -> float:
    """sqrt(F^T M1^{-1} F): norm of the functional F in the dual of (R^n, M1)."""
    F_vec = np.asarray(F_vec)
    if not np.any(F_vec):
        return 0.0
    L = _cholesky(M1)
    y = sla.solve_triangular(L, F_vec, lower=True)
    return float(np.linalg.norm(y))


def poincare_constant(mesh: Mesh) -> float:
    """Best discrete eta with |u|_{H1} >= eta ||u||_{H1} on S_N."""
    if not mesh.dom.dirichlet_ends:
        raise NoDirichletBoundary("no Dirichlet end: constants have zero H1 seminorm")
    g = gram_matrices(mesh)
    Z = mesh.Z
    S = _dense(Z.T @ g.S1 @ Z)
    M = _dense(Z.T @ g.M1 @ Z)
    lam = sla.eigh(S, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(np.sqrt(max(lam, 0.0)))


def reduced_operator(A: CoefficientField, mesh: Mesh, L: np.ndarray | None = None) -> np.ndarray:
    """L^{-1} K L^{-T} on S_N, where M1 = L L^T; its singular values are those
    of the discrete operator between (H_D^1)^* and H_D^1."""
    Z = mesh.Z
    if L is None:
        L = h1_cholesky(mesh)
    K = _dense(Z.T @ stiffness_matrix(A, mesh) @ Z)
    X = sla.solve_triangular(L, K, lower=True)
    return sla.solve_triangular(L, X.T, lower=True).T


def h1_cholesky(mesh: Mesh) -> np.ndarray:
    Z = mesh.Z
    return _cholesky(Z.T @ gram_matrices(mesh).M1 @ Z)


def inverse_norm_of_reduced(C: np.ndarray) -> float:
    s = sla.svdvals(C)
    if s.size == 0:
        return 0.0
    if s[-1] <= 10 * np.finfo(float).eps * s[0]:
        raise SingularSystem("discrete operator is singular", rcond=float(s[-1] / s[0]) if s[0] else 0.0)
    return float(1.0 / s[-1])


def discrete_inverse_norm(A: CoefficientField, mesh: Mesh, k: int = 0) -> float:
    """Norm of the inverse of the discrete operator V_k -> V_k^-.

    k = 0: between the dual H1 norm and the H1 norm on S_N.
    k = 1 (P2 only): data (f, g, h) with f a broken P2 function, measured by
    (||f||^2 + |g|^2 + |h|^2)^(1/2); solution measured in the broken H2 norm.
    """
    if k == 0:
        return inverse_norm_of_reduced(reduced_operator(A, mesh))
    if k != 1:
        raise ValueError("discrete inverse norms are available for k in {0, 1}")
    if mesh.p != 2:
        raise RequiresP2("the k = 1 norm needs broken H2 solutions (p = 2)")
    dom = mesh.dom
    Z = mesh.Z
    g = gram_matrices(mesh)
    K = _dense(Z.T @ stiffness_matrix(A, mesh) @ Z)
    # input: broken P2 volume data, Neumann values, flux jumps
    cols = [_dense(g.M0)]
    for e in dom.neumann_ends:
        c = np.zeros((mesh.n_broken, 1))
        c[mesh.end_dof(e)] = 1.0
        cols.append(c)
    for i in range(len(dom.gamma)):
        c = np.zeros((mesh.n_broken, 1))
        c[mesh.left_copy(i)] = dom.orientation
        cols.append(c)
    B = Z.T @ np.hstack(cols)
    n_pt = B.shape[1] - mesh.n_broken
    G_in = sla.block_diag(_dense(g.M0), np.eye(n_pt))
    R_in = _cholesky(G_in).T
    R_out = _cholesky(Z.T @ (g.M1 + g.S2) @ Z).T
    try:
        lu = sla.lu_factor(K, check_finite=True)
    except sla.LinAlgError as exc:  # pragma: no cover - lu_factor only warns
        raise SingularSystem(str(exc)) from exc
    if np.min(np.abs(np.diag(lu[0]))) <= 10 * np.finfo(float).eps * np.max(np.abs(np.diag(lu[0]))):
        raise SingularSystem("discrete operator is singular")
    X = sla.lu_solve(lu, B)
    T = R_out @ X
    T = sla.solve_triangular(R_in, T.T, trans="T", lower=False).T
    return float(sla.svdvals(T)[0])


def vk_minus_norm(F: TransmissionData, k: int, mesh: Mesh | None = None) -> float:
    """||f||_{H^(k-1) broken} + |g|_2 + |h|_2 for k >= 1, dual H1 norm for k = 0."""
    if k == 0:
        if mesh is None:
            raise ValueError("k = 0 needs a mesh for the dual norm")
        Z = mesh.Z
        return dual_norm(Z.T @ load_vector(F, mesh), Z.T @ gram_matrices(mesh).M1 @ Z)
    fn = broken_hk_norm(F.f, k - 1)
    return float(fn + np.linalg.norm(list(F.g.values())) + np.linalg.norm(F.h))


def check_in_vk(u, tol: float = 1e-10) -> None:
    """Raise NotInVk unless [[u]] = 0 on Gamma and u = 0 on the Dirichlet ends."""
    dom = u.dom
    scale = max(1.0, broken_hk_norm(u, 0)) if not isinstance(u, BrokenFemFunction) else max(1.0, np.max(np.abs(u.coef)))
    for i, gpt in enumerate(dom.gamma):
        jump = u.eval(i, gpt) - u.eval(i + 1, gpt)
        if abs(jump) > tol * scale:
            raise NotInVk(f"jump {jump:.3e} at interface point {gpt}")
    for e in dom.dirichlet_ends:
        j = 0 if e == "left" else dom.n_pieces - 1
        val = u.eval(j, dom.endpoint(e))
        if abs(val) > tol * scale:
            raise NotInVk(f"nonzero Dirichlet trace {val:.3e} at the {e} end")


def vk_norm(u, k: int, tol: float = 1e-10) -> float:
    """||u||_{V_k} = broken H^(k+1) norm, after checking the V_k constraints."""
    check_in_vk(u, tol)
    return broken_hk_norm(u, k + 1)
