import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transmission1d.bounds import (DOMAIN_CONFIGS, corpus_constant, envelope_exponent, inverse_norm_envelope,
                                   apriori_corpus, apriori_report, lifted_apriori_report, manufactured_data, random_coefficient,
                                   random_solution)
from transmission1d.coefficients import CoefficientField, coercivity_constant
from transmission1d.domain import DecomposedInterval
from transmission1d.fem import build_mesh, solve_transmission
from transmission1d.functions import PiecewisePoly, as_broken, difference
from transmission1d.norms import broken_hk_norm

UNIT = DecomposedInterval(0.0, 1.0, ())
HALF = DecomposedInterval(0.0, 1.0, (0.5,))


def test_envelope_exponents():
    assert [envelope_exponent(k) for k in (-1, 0, 1)] == [0, 2, 10]


def test_manufactured_data_reproduces_solution():
    for dom in DOMAIN_CONFIGS:
        rng = np.random.default_rng(4)
        A = random_coefficient(dom, rng)
        u = random_solution(dom, rng, 4, in_vk=False)
        F = manufactured_data(A, u)
        uh = solve_transmission(A, F, build_mesh(dom, 2, 2))
        # P2 Galerkin on a polynomial of degree 4: error shrinks at rate h^2 in H1
        e2 = broken_hk_norm(difference(uh, u), 1)
        e8 = broken_hk_norm(difference(solve_transmission(A, F, build_mesh(dom, 8, 2)), u), 1)
        assert e8 < e2 / 10


def test_manufactured_data_exact_polynomial():
    A = CoefficientField.from_entries(HALF, a11=[[1.0], [2.0]])
    u = as_broken(HALF, [[0.0, 1.0], [0.25, 0.5]])
    F = manufactured_data(A, u)
    assert F.f.is_zero() and F.g_tilde == {"left": 0.0, "right": 0.75}
    assert F.h_tilde == (0.0,) and F.h == (0.0,)


def test_apriori_report_identity():
    u = as_broken(UNIT, [0.0, 1.0, -1.0])
    r = apriori_report(CoefficientField.identity(UNIT), u, 0, build_mesh(UNIT, 8, 2))
    assert np.isfinite(r.ratio) and r.lhs == pytest.approx(np.sqrt(1 / 30 + 1 / 3 + 4), rel=1e-12)
    assert r.lhs <= r.rhs


def test_apriori_report_zero_solution():
    r = apriori_report(CoefficientField.identity(UNIT), PiecewisePoly.zero(UNIT), 1, build_mesh(UNIT, 4, 2))
    assert r.lhs == 0.0 and r.ratio == 0.0


def test_apriori_scaling_recomputation():
    rng = np.random.default_rng(2)
    A = random_coefficient(HALF, rng)
    u = random_solution(HALF, rng)
    m = build_mesh(HALF, 8, 2)
    base = apriori_report(A, u, 0, m)
    for c in (0.1, 10.0):
        r = apriori_report(A.scaled(c), u, 0, m)
        assert r.lhs == base.lhs
        assert r.inputs["inverse_norm"] == pytest.approx(base.inputs["inverse_norm"] / c, rel=1e-10)
        assert r.inputs["nnW"] == pytest.approx(base.inputs["nnW"] / c, rel=1e-10)
        assert r.lhs <= r.rhs


def test_lifted_reduces_to_apriori():
    rng = np.random.default_rng(5)
    A = random_coefficient(HALF, rng)
    u = random_solution(HALF, rng, in_vk=True)
    m = build_mesh(HALF, 8, 2)
    assert lifted_apriori_report(A, u, 1, m).rhs == pytest.approx(apriori_report(A, u, 1, m).rhs, rel=1e-13)


def test_lifted_unit_jump():
    A = CoefficientField.from_entries(HALF, a00=1.0, a11=[[1.0], [2.0]])
    u = as_broken(HALF, [[0.0, 1.0, -1.0], [-1.0, 2.0, -1.0]])
    ratios = [lifted_apriori_report(A, u, 0, build_mesh(HALF, n, 2)).ratio for n in (8, 16)]
    assert max(ratios) < np.inf and abs(ratios[1] / ratios[0] - 1) < 0.05


def test_envelope_examples():
    m = build_mesh(UNIT, 8, 2)
    r = inverse_norm_envelope(CoefficientField.identity(UNIT, 2.0), 0, m)
    assert (r.K, r.rhs) == (2, pytest.approx(0.5))
    assert 0 < r.ratio < np.inf
    ratios = [inverse_norm_envelope(CoefficientField.identity(UNIT, c), 0, m).ratio for c in range(1, 11)]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)


def test_envelope_k_minus_one_is_lax_milgram():
    rng = np.random.default_rng(8)
    for dom in DOMAIN_CONFIGS:
        A = random_coefficient(dom, rng)
        r = inverse_norm_envelope(A, -1, build_mesh(dom, 6, 1))
        assert r.lhs * r.gamma <= 1 + 1e-9
    for g in (0.3, 1.0, 4.0):
        r = inverse_norm_envelope(CoefficientField.identity(HALF, g), -1, build_mesh(HALF, 6, 1))
        assert r.lhs * r.gamma == pytest.approx(1.0, abs=1e-6)


def test_corpus_deterministic_and_stable():
    cases = apriori_corpus(8, seed=1)
    a = corpus_constant(cases, 0)
    assert a.ratios == corpus_constant(apriori_corpus(8, seed=1), 0).ratios
    b = corpus_constant(cases, 0, refine=2)
    assert abs(b.max_ratio / a.max_ratio - 1) < 0.05


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(range(len(DOMAIN_CONFIGS))))
def test_random_coefficient_coercivity_window(seed, i):
    A = random_coefficient(DOMAIN_CONFIGS[i], np.random.default_rng(seed))
    g = coercivity_constant(A).full
    assert 0.1 - 1e-9 <= g <= 1.1 + 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(range(len(DOMAIN_CONFIGS))))
def test_random_solution_in_vk(seed, i):
    from transmission1d.norms import check_in_vk
    check_in_vk(random_solution(DOMAIN_CONFIGS[i], np.random.default_rng(seed)))
