"""Monte Carlo moment estimators and FE convergence studies."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coefficients import combine, matrix_winf_norm
from .errors import DegenerateFit, NotSymmetric, SingularSystem
from .fem import Mesh, TransmissionData, energy_projection, h1_projection, solve_transmission
from .functions import difference
from .norms import (broken_hk_norm, discrete_inverse_norm, h1_cholesky, inverse_norm_of_reduced,
                    poincare_constant, reduced_operator)
from .parametric import LogNormalModel, sample

MAX_EXCLUDED_FRACTION = 1e-3
HEAVY_TAIL_SE = 4.0


@dataclass
class McReport:
    label: dict
    seed: int
    n_samples: int
    mean: float
    stderr: float
    batches: list = field(default_factory=list)  # (n, mean, stderr) over doubling prefixes
    n_excluded: int = 0
    heavy_tail: bool = False

    @property
    def ok(self) -> bool:
        return self.n_excluded <= MAX_EXCLUDED_FRACTION * (self.n_samples + self.n_excluded)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.sum(v) / v.size), se


def summarize(values: np.ndarray, label: dict, seed: int, n_excluded: int = 0, first_batch: int = 1000) -> McReport:
    """Mean, standard error and doubling-batch diagnostics of per-sample values."""
    v = np.asarray(values, dtype=float)
    mean, se = _mean_se(v)
    batches = []
    m = min(first_batch, v.size)
    while m > 0:
        batches.append((m,) + _mean_se(v[:m]))
        if m == v.size:
            break
        m = min(2 * m, v.size)
    # a late outlier inflates its own batch's stderr, so compare against the earlier batch
    heavy = any(abs(b[1] - a[1]) > HEAVY_TAIL_SE * a[2] for a, b in zip(batches, batches[1:]))
    return McReport(label, seed, int(v.size), mean, se, batches, n_excluded, heavy)


def _parallel_map(fn, chunks: list, threads: int) -> list:
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, chunks))


def _chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def mc_moment(model: LogNormalModel, p: float, r: float, s: float, k: int, n: int, mesh: Mesh,
              level: int | None = None, threads: int = 1, chunk: int = 4096) -> McReport:
    """Estimate E[gamma^-s ||A||^r_{W^{k+1,oo}} |||P^-1|||^p] over ``n`` samples.

    The inverse norm is the discrete one at ``level`` in {0, 1}; by default
    ``min(k, 1)``.  Samples whose discrete operator is singular are excluded
    and counted.
    """
    if level is None:
        level = min(k, 1)
    label = {"p": p, "r": r, "s": s, "k": k, "level": level}
    if n <= 0:
        return McReport(label, model.gauss.seed, 0, float("nan"), float("nan"))
    X_all = model.gauss.draw_many(0, n)
    weights = np.exp(X_all)

    reduced = None
    if p != 0 and level == 0:
        L = h1_cholesky(mesh)
        reduced = np.array([reduced_operator(A, mesh, L) for A in model.bases])

    def work(rng: tuple[int, int]) -> np.ndarray:
        lo, hi = rng
        out = np.empty(hi - lo)
        for i in range(lo, hi):
            w = weights[i]
            val = 1.0
            try:
                if p != 0:
                    if reduced is not None:
                        inv = inverse_norm_of_reduced(np.tensordot(w, reduced, axes=1))
                    else:
                        inv = discrete_inverse_norm(combine(w, model.bases), mesh, level)
                    val *= inv ** p
                if r != 0 or s != 0:
                    A = combine(w, model.bases)
                    if r != 0:
                        val *= matrix_winf_norm(A, k + 1).value ** r
                    if s != 0:
                        val *= model.gamma_of(A) ** (-s)
            except SingularSystem:
                val = np.nan
            out[i - lo] = val
        return out

    values = np.concatenate(_parallel_map(work, _chunks(n, chunk), threads))
    bad = ~np.isfinite(values)
    return summarize(values[~bad], label, model.gauss.seed, int(bad.sum()))


def fit_rate(dims: Sequence[float], errors: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit log e = log C - mu log dim; returns (C, mu, residual)."""
    d = np.log(np.asarray(dims, dtype=float))
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0) or np.any(~np.isfinite(e)):
        raise DegenerateFit("errors must be positive and finite")
    y = np.log(e)
    if d.size < 2:
        raise DegenerateFit("need at least two meshes")
    coef, res, *_ = np.polyfit(d, y, 1, full=True)
    resid = float(np.sqrt(res[0] / d.size)) if res.size else 0.0
    return float(np.exp(coef[1])), float(-coef[0]), resid


@dataclass
class ConvergenceReport:
    dims: list
    errors: list
    C_rate: float
    mu: float
    residual: float


def convergence_study(A, F: TransmissionData | None, meshes: Sequence[Mesh], u_exact=None,
                      ref_factor: int = 8, degenerate_tol: float = 1e-12) -> ConvergenceReport:
    """Fit ||u - Q_N u||_{H1} = C dim^-mu over ``meshes``.

    ``u_exact`` is a closed-form broken function; without it the reference is
    a P2 solve on the finest mesh refined ``ref_factor`` times.
    """
    if u_exact is None:
        fine = meshes[-1].refined(ref_factor, degree=2)
        u_exact = solve_transmission(A, F, fine)
    scale = max(broken_hk_norm(u_exact, 1), 1.0)
    dims, errs = [], []
    for m in meshes:
        q = h1_projection(u_exact, m)
        dims.append(m.dim)
        errs.append(broken_hk_norm(difference(u_exact, q), 1))
    if max(errs) <= degenerate_tol * scale:
        raise DegenerateFit(f"errors at round-off level (max {max(errs):.2e}); u is reproduced exactly")
    C, mu, res = fit_rate(dims, errs)
    return ConvergenceReport(dims, errs, C, mu, res)


@dataclass
class FemErrorTable:
    projection: str
    p: float
    dims: list
    moments: list
    stderrs: list
    slope: float
    chain_checked: int = 0
    chain_violations: int = 0
    chain_max_ratio: float = 0.0  # max of error / chain bound
    n_excluded: int = 0


def mc_fem_error_moment(model: LogNormalModel, F: TransmissionData, p: float, meshes: Sequence[Mesh], n: int,
                        projection: str = "h1", ref_factor: int = 8, threads: int = 1) -> FemErrorTable:
    """Estimate E ||u(omega) - Q u(omega)||^p_{H1} on each mesh and fit the slope
    against dim(S_N).

    ``projection`` is ``"h1"`` (Q_N) or ``"energy"`` (Q_N^{A(omega)}).  With
    the energy projection every sample also checks
    ||u - Q^A u|| <= (gamma eta)^(-1/2) ||A||_oo^(1/2) ||u - Q_N u||.
    """
    if projection not in ("h1", "energy"):
        raise ValueError("projection must be 'h1' or 'energy'")
    if not F.is_homogeneous:
        raise ValueError("FE error moments need u in H_D^1 (g_tilde = 0, h_tilde = 0)")
    fine = meshes[-1].refined(ref_factor, degree=2)
    eta = poincare_constant(fine) if projection == "energy" else None
    if projection == "energy" and not all(A.is_symmetric() for A in model.bases):
        raise NotSymmetric("energy projection needs symmetric base matrices")

    def one(i: int):
        smp = sample(model, i)
        try:
            u = solve_transmission(smp.A, F, fine)
        except SingularSystem:
            return None
        errs, chain = [], []
        for m in meshes:
            qn = h1_projection(u, m)
            e_h1 = broken_hk_norm(difference(u, qn), 1)
            if projection == "h1":
                errs.append(e_h1)
                continue
            qa = energy_projection(smp.A, u, m)
            e_a = broken_hk_norm(difference(u, qa), 1)
            errs.append(e_a)
            a_inf = matrix_winf_norm(smp.A, 0).value
            gamma_se = smp.A.a11.inf()
            bound = (gamma_se * eta) ** -0.5 * np.sqrt(a_inf) * e_h1
            chain.append(e_a / bound if bound > 0 else (0.0 if e_a == 0 else np.inf))
        return errs, chain

    def work(rng):
        return [one(i) for i in range(*rng)]

    results = [r for part in _parallel_map(work, _chunks(n, max(1, n // max(threads, 1))), threads) for r in part]
    kept = [r for r in results if r is not None]
    E = np.array([r[0] for r in kept]).reshape(len(kept), len(meshes))
    mom = np.power(E, p)
    means = mom.mean(axis=0) if len(kept) else np.full(len(meshes), np.nan)
    ses = mom.std(axis=0, ddof=1) / np.sqrt(len(kept)) if len(kept) > 1 else np.zeros(len(meshes))
    dims = [m.dim for m in meshes]
    if np.all(means == 0):
        slope = float("nan")
    else:
        slope = -fit_rate(dims, means)[1]
    chain = np.array([c for r in kept for c in r[1]])
    return FemErrorTable(projection, p, dims, means.tolist(), ses.tolist(), slope,
                         int(chain.size), int(np.sum(chain > 1 + 1e-9)),
                         float(chain.max()) if chain.size else 0.0, len(results) - len(kept))
