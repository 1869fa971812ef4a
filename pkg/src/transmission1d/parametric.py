"""Gaussian parameter vectors and the log-normal coefficient family
A(omega) = sum_l exp(X_l(omega)) A_l."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coefficients import DEFAULT_SAMPLES, CoefficientField, coercivity_constant, combine

VARIANTS = ("full", "strong")


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for one Monte Carlo sample."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


class GaussianVector:
    """Centered Gaussian vector with covariance ``sigma``; sample ``index`` of
    seed ``seed`` is ``L z`` with ``z`` read from :func:`sample_stream`."""

    def __init__(self, sigma, seed: int = 0):
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        if sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-14 * max(1.0, np.abs(sigma).max())):
            raise ValueError("covariance must be symmetric")
        try:
            self.L = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        self.sigma = sigma
        self.seed = int(seed)

    @property
    def q(self) -> int:
        return self.sigma.shape[0]

    def draw(self, index: int) -> np.ndarray:
        z = sample_stream(self.seed, index).standard_normal(self.q)
        return self.L @ z

    def draw_many(self, start: int, stop: int) -> np.ndarray:
        return np.array([self.draw(i) for i in range(start, stop)]).reshape(-1, self.q)


@dataclass
class LogNormalModel:
    bases: Sequence[CoefficientField]
    gauss: GaussianVector
    gamma_floor: float = 1.0
    variant: str = "full"  # "full": Re A >= gamma I; "strong": a11 >= gamma
    n_grid: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if len(self.bases) != self.gauss.q:
            raise ValueError(f"{len(self.bases)} base matrices but q = {self.gauss.q}")

    @property
    def dom(self):
        return self.bases[0].dom

    def gamma_of(self, A: CoefficientField) -> float:
        c = coercivity_constant(A, self.n_grid)
        return c.full if self.variant == "full" else c.se


@dataclass(frozen=True)
class Sample:
    index: int
    X: np.ndarray
    A: CoefficientField
    gamma: float


def sample(model: LogNormalModel, index: int, X=None) -> Sample:
    """Realization ``index`` (or the forced parameter ``X``) of the model."""
    X = model.gauss.draw(index) if X is None else np.atleast_1d(np.asarray(X, dtype=float))
    A = combine(np.exp(X), model.bases)
    return Sample(index, X, A, model.gamma_of(A))


@dataclass
class HypothesisReport:
    checks: list = field(default_factory=list)  # (name, ok, detail)

    @property
    def ok(self) -> bool:
        return all(c[1] for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c[1]]

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, bool(ok), detail))

    def __str__(self):
        return "\n".join(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in self.checks)


def validate_hypotheses(model: LogNormalModel, n_grid: int = 512, tol: float = 1e-12) -> HypothesisReport:
    """Check the model hypotheses on a grid.

    decoupled: a01 = a10 = 0, required by the strong-ellipticity variant only;
    nonnegative: Re A_l >= 0 for every l;
    coverage: at each grid point some A_l has a11 >= gamma_floor
        (strong variant) or Re A_l >= gamma_floor I (full variant).
    """
    rep = HypothesisReport()
    if model.variant == "strong":
        bad = [i + 1 for i, A in enumerate(model.bases) if A.has_first_order_terms()]
        rep.add("decoupled: a01 = a10 = 0", not bad, f"violated by A_{bad}" if bad else "")
    neg = []
    for i, A in enumerate(model.bases):
        g = coercivity_constant(A, n_grid).full
        if g < -tol:
            neg.append(f"A_{i + 1} (min eigenvalue {g:.3g})")
    rep.add("nonnegative: Re A_l >= 0", not neg, "; ".join(neg))
    if not model.gamma_floor > 0:
        rep.add("coverage: gamma_floor > 0 reached", False, f"gamma_floor must be > 0, got {model.gamma_floor}")
        return rep
    dom = model.dom
    uncovered = []
    for j in range(dom.n_pieces):
        x = np.linspace(*dom.piece_bounds(j), n_grid)
        best = np.full(x.shape, -np.inf)
        for A in model.bases:
            if model.variant == "strong":
                val = A.a11.eval(j, x)
            else:
                a00, a01, a10, a11 = A.entry_values(j, x)
                o = 0.5 * (a01 + a10)
                val = 0.5 * (a00 + a11) - np.sqrt(0.25 * (a00 - a11) ** 2 + o * o)
            best = np.maximum(best, val)
        miss = best < model.gamma_floor - tol
        if np.any(miss):
            uncovered.append(f"U_{j + 1} near x = {x[np.argmax(miss)]:.6g}")
    rep.add("coverage: gamma_floor > 0 reached", not uncovered, "; ".join(uncovered))
    return rep


def gamma_lower_bound(model: LogNormalModel, X: np.ndarray) -> float:
    """gamma_floor * min_l exp(X_l), valid when coverage holds."""
    return float(model.gamma_floor * np.exp(np.min(X)))

