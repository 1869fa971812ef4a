"""Acceptance criteria 1-11; each test prints one PASS/FAIL line."""

import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from transmission1d.bounds import (DOMAIN_CONFIGS, corpus_constant, apriori_corpus, random_coefficient,
                                   random_diagonal_coefficient)
from transmission1d.cli import main
from transmission1d.coefficients import CoefficientField, coercivity_constant, inverse_check_corpus
from transmission1d.domain import BC, DecomposedInterval
from transmission1d.fem import TransmissionData, build_mesh, solve_transmission
from transmission1d.functions import as_broken, difference
from transmission1d.norms import broken_hk_norm, discrete_inverse_norm, poincare_constant
from transmission1d.parametric import GaussianVector, LogNormalModel
from transmission1d.signchanging import PiecewiseScalarField, critical_contrast_sweep, resolvent_norm
from transmission1d.uq import mc_fem_error_moment, mc_moment

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
HALF = DecomposedInterval(0.0, 1.0, (0.5,))
MESHES = (1, 2, 3, 8, [3, 5], [1, 7], [10, 4], 64)


def test_criterion_1_manufactured_solve(verdict):
    A = CoefficientField.from_entries(HALF, a11=[[1.0], [2.0]])
    F = TransmissionData.build(HALF, 0.0, {"right": 0.75})
    exact = as_broken(HALF, [[0.0, 1.0], [0.25, 0.5]])
    worst_err, worst_time = 0.0, 0.0
    for n in MESHES:
        t0 = time.perf_counter()
        u = solve_transmission(A, F, build_mesh(HALF, n, 1))
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_err = max(worst_err, broken_hk_norm(difference(u, exact), 1))
    ok = worst_err <= 1e-12 and worst_time < 1.0
    verdict(1, ok, f"max H1 error {worst_err:.2e} (tol 1e-12), max solve time {worst_time:.3f}s (< 1s)")
    assert ok


def _poincare_sequence(dom):
    return [poincare_constant(build_mesh(dom, n, 1)) for n in (8, 16, 32, 64, 128, 256, 512)]


def test_criterion_2_poincare(verdict):
    dd_exact = np.pi / np.sqrt(1 + np.pi**2)
    dn_exact = (np.pi / 2) / np.sqrt(1 + np.pi**2 / 4)
    dd = _poincare_sequence(DecomposedInterval(0.0, 1.0, ()))
    dn = _poincare_sequence(DecomposedInterval(0.0, 1.0, (), BC.DIRICHLET, BC.NEUMANN))
    ok = True
    for seq, exact in ((dd, dd_exact), (dn, dn_exact)):
        ok &= all(a >= b for a, b in zip(seq, seq[1:])) and seq[-1] >= exact and abs(seq[-1] - exact) <= 1e-4
    verdict(2, ok, f"D/D eta_512 = {dd[-1]:.7f} vs {dd_exact:.7f}, D/N eta_512 = {dn[-1]:.7f} vs {dn_exact:.7f}; "
                   "monotone from above, tol 1e-4")
    assert ok


def test_criterion_3_lax_milgram(verdict):
    rng = np.random.default_rng(3)
    worst = -np.inf
    for i in range(50):
        dom = DOMAIN_CONFIGS[i % len(DOMAIN_CONFIGS)]
        A = random_coefficient(dom, rng)
        g = coercivity_constant(A).full
        for n in (2, 8, 32):
            worst = max(worst, discrete_inverse_norm(A, build_mesh(dom, n, 1)) - 1 / g)
    ident = [discrete_inverse_norm(CoefficientField.identity(d), build_mesh(d, 8, p))
             for d in DOMAIN_CONFIGS for p in (1, 2)]
    dev = max(abs(v - 1) for v in ident)
    ok = worst <= 1e-9 and dev <= 1e-9
    verdict(3, ok, f"max(norm - 1/gamma_full) = {worst:.3e} (<= 1e-9) over 50 cases x 3 meshes; "
                   f"identity deviation {dev:.1e} (<= 1e-9)")
    assert ok


def _diagonal_corpus():
    """50 random diagonal cases (every fifth with a00 = 0) plus the constant
    members a00 = 0, a11 = c of the same class on every domain."""
    rng = np.random.default_rng(4)
    cases = []
    for i in range(50):
        dom = DOMAIN_CONFIGS[i % len(DOMAIN_CONFIGS)]
        cases.append(("random", random_diagonal_coefficient(dom, rng, zero_a00=(i % 5 == 0))))
    for dom in DOMAIN_CONFIGS:
        for c in (0.5, 2.0):
            cases.append(("constant", CoefficientField.from_entries(dom, a11=c)))
    for kind, A in cases:
        g = coercivity_constant(A).se
        for n in (4, 16, 64):
            m = build_mesh(A.dom, n, 1)
            yield kind, discrete_inverse_norm(A, m), poincare_constant(m), g


@pytest.mark.xfail(strict=True, reason="1/(eta gamma_se) is too small when a00 vanishes; "
                                       "a00 = 0, a11 = 1 gives exactly 1/eta^2")
def test_criterion_4_strong_ellipticity(verdict):
    gaps = {"random": -np.inf, "constant": -np.inf}
    for kind, v, eta, g in _diagonal_corpus():
        gaps[kind] = max(gaps[kind], v - 1 / (eta * g))
    worst = max(gaps.values())
    ok = worst <= 1e-9
    verdict(4, ok, f"max(norm - 1/(eta gamma_se)) = {worst:.3e} (<= 1e-9) over 58 diagonal cases x 3 meshes; "
                   f"random cases {gaps['random']:.3e}, constant a11 with a00 = 0 {gaps['constant']:.3e}")
    assert ok


def test_criterion_4_corrected_bound():
    # companion check: B(u, u) >= gamma_se |u|^2_H1 >= gamma_se eta^2 ||u||^2_H1 when a00 >= 0
    worst = max(v - 1 / (eta * eta * g) for _, v, eta, g in _diagonal_corpus())
    assert worst <= 1e-9


def test_criterion_5_scaling(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for dom in DOMAIN_CONFIGS:
        A = random_coefficient(dom, rng)
        m = build_mesh(dom, 8, 1)
        base = discrete_inverse_norm(A, m)
        for c in (0.1, 1.0, 10.0):
            worst = max(worst, abs(c * discrete_inverse_norm(A.scaled(c), m) - base))
    ok = worst <= 1e-10
    verdict(5, ok, f"max |c norm(cA) - norm(A)| = {worst:.2e} (<= 1e-10)")
    assert ok


def test_criterion_6_apriori_corpus(verdict):
    cases = apriori_corpus(100, seed=6)
    parts, ok = [], True
    for k in (0, 1):
        a = corpus_constant(cases, k)
        b = corpus_constant(cases, k, refine=2)
        drift = abs(b.max_ratio / a.max_ratio - 1)
        finite = np.isfinite(a.max_ratio) and np.isfinite(b.max_ratio)
        ok &= finite and drift < 0.05
        parts.append(f"k={k}: C={a.max_ratio:.4g} -> {b.max_ratio:.4g}, drift {100 * drift:.2f}%")
    verdict(6, ok, "; ".join(parts) + " (100 cases, drift < 5%)")
    assert ok


def test_criterion_7_lognormal_moment(verdict):
    model = LogNormalModel([CoefficientField.identity(HALF)], GaussianVector([[1.0]], seed=7))
    t0 = time.perf_counter()
    rep = mc_moment(model, 2, 0, 0, 0, 100_000, build_mesh(HALF, 2, 1))
    elapsed = time.perf_counter() - t0
    z = abs(rep.mean - np.e**2) / rep.stderr
    ok = z <= 3 and elapsed < 120 and rep.n_excluded == 0
    verdict(7, ok, f"mean {rep.mean:.5f} +- {rep.stderr:.5f} vs e^2 = {np.e**2:.6f}, {z:.2f} SE (<= 3), "
                   f"{elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_8_fem_error_moments(verdict):
    A1 = CoefficientField.from_entries(HALF, a00=[[1.0], [0.0]], a11=[[1.0], [0.0]])
    A2 = CoefficientField.from_entries(HALF, a00=[[0.0], [1.0]], a11=[[0.0], [1.0]])
    model = LogNormalModel([A1, A2], GaussianVector(np.eye(2), seed=8), 1.0, "strong")
    F = TransmissionData.build(HALF, 1.0)
    meshes = [build_mesh(HALF, n, 1) for n in (5, 10, 20)]
    parts, ok = [], True
    for p in (1, 2):
        for proj in ("h1", "energy"):
            t = mc_fem_error_moment(model, F, p, meshes, 40, proj)
            good = abs(t.slope + p) <= 0.15 and t.chain_violations == 0 and t.n_excluded == 0
            if proj == "energy":
                good &= t.chain_checked == 40 * len(meshes)
            ok &= good
            parts.append(f"{proj} p={p}: slope {t.slope:.3f}"
                         + (f", chain {t.chain_violations}/{t.chain_checked} violations" if proj == "energy" else ""))
    verdict(8, ok, "; ".join(parts) + " (target -p +- 0.15)")
    assert ok


def test_criterion_9_resolvent(verdict):
    a = PiecewiseScalarField.on_unit_interval((1.0, -2.0))
    m = build_mesh(a.dom, 32, 1)
    excess = max(resolvent_norm(a, t, m) - 1 / t for t in (0.5, 1.0, 2.0, 10.0))
    sweep = critical_contrast_sweep([1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    trend = min(c * e for c, e in zip(sweep.cond, sweep.eps))
    ok = excess <= 1e-10 and sweep.slope >= 0.95 and trend > 0
    verdict(9, ok, f"max(norm - 1/t) = {excess:.3e} (<= 1e-10); cond vs 1/eps slope {sweep.slope:.4f} (>= 0.95), "
                   f"min cond*eps {trend:.3g}")
    assert ok


def test_criterion_10_inverse_corpus(verdict):
    parts, ok = [], True
    for k in range(4):
        a = inverse_check_corpus(200, k, seed=10)
        b = inverse_check_corpus(400, k, seed=10)
        drift = abs(b.max_ratio / a.max_ratio - 1)
        ok &= np.isfinite(b.max_ratio) and drift < 0.05
        parts.append(f"k={k}: {a.max_ratio:.4f} -> {b.max_ratio:.4f} ({100 * drift:.2f}%)")
    verdict(10, ok, "; ".join(parts) + " (200 -> 400 cases, drift < 5%)")
    assert ok


def _run_all(tmp: Path, tag: str, threads: str) -> dict:
    out = {}
    for cfg in sorted(tmp.glob("*.toml")):
        sub = {"solve_manufactured": "solve", "mc_moments": "mc-moments", "mc_fem_error": "mc-fem-error",
               "inverse_norm": "inverse-norm", "sign_changing": "sign-changing"}.get(cfg.stem, cfg.stem)
        d = tmp / tag / cfg.stem
        assert main([sub, "--config", str(cfg), "--out", str(d), "--threads", threads]) == 0
        for f in sorted(d.glob("*.csv")):
            out[f"{cfg.stem}/{f.name}"] = [l for l in f.read_bytes().splitlines() if not l.startswith(b"#")]
    return out


def test_criterion_11_determinism(verdict, tmp_path):
    for cfg in CONFIGS.glob("*.toml"):
        text = cfg.read_text()
        if cfg.stem == "mc_moments":  # same code path, fewer samples
            text = text.replace("n = 100000", "n = 3000")
        (tmp_path / cfg.name).write_text(text)
    a = _run_all(tmp_path, "a", "1")
    b = _run_all(tmp_path, "b", "3")
    diff = [k for k in a if a[k] != b.get(k)]
    ok = bool(a) and not diff and set(a) == set(b)
    verdict(11, ok, f"{len(a)} CSV files from {len(list(tmp_path.glob('*.toml')))} configs byte-identical "
                    f"across reruns (1 vs 3 threads); differing: {diff or 'none'}")
    assert ok
    shutil.rmtree(tmp_path / "a", ignore_errors=True)
