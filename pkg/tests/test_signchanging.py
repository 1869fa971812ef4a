import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from transmission1d.domain import BC, DecomposedInterval
from transmission1d.errors import SingularSystem
from transmission1d.fem import build_mesh, gram_matrices, stiffness_matrix, volume_load
from transmission1d.functions import as_broken
from transmission1d.norms import broken_hk_norm
from transmission1d.signchanging import (PiecewiseScalarField, condition_number, critical_contrast_sweep,
                                         kink_solution, param_regularity_probe, resolvent_norm, resolvent_solve)


def field(*vals):
    return PiecewiseScalarField.on_unit_interval(vals)


def test_field_validation():
    assert not field(1.0, -1.0).admissible and field(1.0, -2.0).admissible
    with pytest.raises(ValueError):
        PiecewiseScalarField(DecomposedInterval(0, 1, (0.5,), BC.DIRICHLET, BC.NEUMANN), (1.0, 2.0))
    with pytest.raises(ValueError):
        field(1.0, 0.0)


def test_resolvent_solve_matches_dense():
    a = field(1.0, 1.0)
    m = build_mesh(a.dom, 8, 1)
    sol = resolvent_solve(a, 1.0, 1.0, m)
    Z = m.Z
    K = (Z.T @ stiffness_matrix(a.to_coefficients(), m) @ Z).toarray()
    M0 = (Z.T @ gram_matrices(m).M0 @ Z).toarray()
    b = Z.T @ volume_load(as_broken(a.dom, 1.0), m)
    dense = np.linalg.solve(K + 1j * M0, b)
    np.testing.assert_allclose(sol.u.coef, Z @ dense, atol=1e-13)
    assert np.max(np.abs(sol.flux_jump)) < 1e-12


def test_resolvent_norm_spd_spectral_formula():
    a = field(1.0, 1.0)
    m = build_mesh(a.dom, 8, 1)
    Z = m.Z
    K = (Z.T @ stiffness_matrix(a.to_coefficients(), m) @ Z).toarray()
    M0 = (Z.T @ gram_matrices(m).M0 @ Z).toarray()
    lam = sla.eigh(K, M0, eigvals_only=True)
    assert resolvent_norm(a, 1.0, m) == pytest.approx(1 / np.sqrt(1 + lam.min() ** 2), rel=1e-10)
    assert resolvent_norm(a, 1.0, m) <= 1.0


def test_resolvent_bound_sign_changing():
    a = field(1.0, -2.0)
    m = build_mesh(a.dom, 16, 1)
    norms = [resolvent_norm(a, t, m) for t in (0.5, 1.0, 2.0, 10.0)]
    for t, v in zip((0.5, 1.0, 2.0, 10.0), norms):
        assert v <= 1 / t + 1e-10
    assert norms[-1] <= 0.1 and norms[-1] < norms[2]


def test_resolvent_l2_bound_on_solution():
    a = field(1.0, -2.0)
    m = build_mesh(a.dom, 16, 1)
    sol = resolvent_solve(a, 1.0, "sin(7*x)", m)
    # Galerkin data is the L2 projection of f, whose norm is at most ||f||
    assert broken_hk_norm(sol.u, 0) <= broken_hk_norm(as_broken(a.dom, "sin(7*x)"), 0) + 1e-12


def test_critical_contrast_singular():
    with pytest.raises(SingularSystem):
        resolvent_solve(field(1.0, -1.0), 0.0, 1.0, build_mesh(field(1.0, -1.0).dom, 8, 1))


def test_condition_blowup():
    sweep = critical_contrast_sweep([1e-1, 1e-2, 1e-3, 1e-4])
    assert sweep.slope >= 0.95
    assert all(c * e >= sweep.cond[0] * sweep.eps[0] * 0.5 for c, e in zip(sweep.cond, sweep.eps))


def test_kink_solution_continuous_flux():
    a = field(1.0, -3.0)
    u = kink_solution(a)
    A = a.to_coefficients()
    sig = A.a11 * u.deriv()
    assert sig.pieces[0](0.5) == pytest.approx(sig.pieces[1](0.5), abs=1e-14)
    assert u.pieces[0](0.5) == pytest.approx(u.pieces[1](0.5), abs=1e-14)


def test_probe_single_field_verdict_scale_invariant():
    for c in (0.01, 1.0, 100.0):
        rep = param_regularity_probe([field(c, 2 * c)], 1)
        assert rep.smallest == (0, 0) and np.isfinite(rep.rows[0].rho(0, 0))


def test_probe_growth_of_nnw_pair_scale_invariant():
    # the sup of rho(1, 0) sits on a moderate-contrast case at every scale
    fields = [field(1.0, c) for c in (2.0, -2.0, 10.0, -100.0, 0.01)]
    base = param_regularity_probe(fields, 1)
    assert base.smallest is not None
    for c in (0.1, 7.0):
        rep = param_regularity_probe([f.scaled(c) for f in fields], 1)
        assert rep.growth[(1, 0)] == pytest.approx(base.growth[(1, 0)], rel=1e-9)
        assert (1, 0) in rep.bounded


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5), st.booleans(), st.floats(0.3, 20))
def test_resolvent_bound_property(mag, neg, t):
    second = -mag if neg else mag
    if abs(1 + second) < 1e-2:
        second += 0.1
    a = field(1.0, second)
    assert resolvent_norm(a, t, build_mesh(a.dom, 6, 1)) <= 1 / t + 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.5, 5))
def test_resolvent_norm_homogeneity(c, t):
    # (cK + i c t M)^-1 = c^-1 (K + i t M)^-1
    a = field(1.0, -2.5)
    m = build_mesh(a.dom, 6, 1)
    assert c * resolvent_norm(a.scaled(c), c * t, m) == pytest.approx(resolvent_norm(a, t, m), rel=1e-9)
