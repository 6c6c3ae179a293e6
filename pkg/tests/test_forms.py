from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudospec.forms import (
    AssemblyError,
    BoundaryBasis,
    CoefficientSignError,
    EvaluationError,
    apply_B,
    apply_B_N,
    assemble_A,
    assemble_A_N,
    bubble_matrix,
    diff_matrix,
    project_A,
    weighted_grad,
)
from pseudospec.jacobi import JacobiBasis, gauss_lobatto, jacobi_deriv, jacobi_eval
from pseudospec.spaces import (
    BoundaryField,
    PreconditionError,
    SpectralField,
    error_norms,
    norm_sobolev,
    project_L2,
)

from conftest import MUS

one = lambda x: np.ones_like(np.asarray(x, dtype=float))  # noqa: E731


def coeffs(alpha=0.0, beta=0.0, gamma=0.0):
    def const(c):
        return lambda x, t, v: np.full_like(np.asarray(x, dtype=float), c)

    return SimpleNamespace(alpha=const(alpha), beta=const(beta), gamma=const(gamma))


def bubble_field(n, mu, q_modal):
    """(1 - x^2) q as a BoundaryField on (n, mu)."""
    return BoundaryField(n, mu, modal=bubble_matrix(n, mu) @ np.asarray(q_modal, dtype=float))


def test_boundary_basis_vanishes_and_spans():
    for mu in MUS:
        b = BoundaryBasis(10, mu)
        ends = JacobiBasis(mu).all_values(10, np.array([-1.0, 1.0])).T @ b.coeffs
        assert np.max(np.abs(ends)) == 0.0 or np.max(np.abs(ends)) < 1e-14
        assert np.linalg.matrix_rank(b.coeffs) == 9
        assert np.isfinite(np.linalg.cond(b.gram()))


def test_weighted_grad_legendre_is_derivative(rng):
    n = 9
    psi = bubble_field(n, 0.0, rng.standard_normal(n - 1))
    D = diff_matrix(gauss_lobatto(n, 0.0))
    np.testing.assert_allclose(weighted_grad(psi), D @ psi.values, atol=1e-12)


@pytest.mark.parametrize("mu", MUS + (-0.9, 0.7))
def test_weighted_grad_of_bubble(mu):
    psi = bubble_field(6, mu, [1.0, 0, 0, 0, 0])
    x = gauss_lobatto(6, mu).nodes
    np.testing.assert_allclose(weighted_grad(psi), -2 * (1 + mu) * x, atol=1e-13)


def test_weighted_grad_cubic_chebyshev():
    mu = -0.5
    q = np.zeros(4)
    q[1] = 1.0 / JacobiBasis(mu).all_values(1, np.array(1.0))[1]  # q = x
    psi = bubble_field(5, mu, q)
    x = gauss_lobatto(5, mu).nodes
    np.testing.assert_allclose(weighted_grad(psi), 1 - 2 * x**2, atol=1e-13)


def test_weighted_grad_needs_boundary_zeros():
    f = SpectralField(4, 0.0, modal=[1.0, 0, 0, 0, 0])
    with pytest.raises(PreconditionError):
        weighted_grad(f)


@pytest.mark.parametrize("mu", [-0.5, 0.25])
def test_weighted_grad_integral_identity(mu, rng):
    # (a phi_x, w^{-1}(psi w)_x)_{N,w} equals int a phi_x (psi w)_x dx when the integrand is low degree.
    n = 10
    phi = bubble_field(n, mu, np.r_[rng.standard_normal(4), np.zeros(n - 5)])
    psi = bubble_field(n, mu, np.r_[rng.standard_normal(4), np.zeros(n - 5)])
    r = gauss_lobatto(n, mu)
    a = 1 + r.nodes**2
    discrete = np.dot(r.weights, a * phi.derivative_values() * weighted_grad(psi))
    big = gauss_lobatto(60, mu)
    continuous = np.dot(big.weights, (1 + big.nodes**2) * phi.at_rule(60, 1) * weighted_grad(psi, 60))
    # Against the unweighted integral of a phi_x (psi w)_x computed by integration by parts:
    # int a phi_x (psi w)_x = -int (a phi_x)_x psi w.
    lhs = -np.dot(big.weights, (2 * big.nodes * phi.at_rule(60, 1) + (1 + big.nodes**2) * phi.at_rule(60, 2))
                  * psi.at_rule(60))
    assert discrete == pytest.approx(continuous, rel=1e-12, abs=1e-12)
    assert continuous == pytest.approx(lhs, rel=1e-11, abs=1e-12)


def test_assemble_A_hand_value():
    b = BoundaryBasis(2, 0.0)
    mats = assemble_A(one, one, b)
    # phi_0 = J_0 - J_2 = 1.5 (1 - x^2); A(1 - x^2, 1 - x^2) = 56/15
    assert mats.A_mat[0, 0] == pytest.approx(2.25 * 56 / 15, rel=1e-14)


def test_assemble_A_N_hand_value():
    b = BoundaryBasis(2, 0.0)
    mats = assemble_A_N(one, one, b)
    assert mats.A_N_mat[0, 0] == pytest.approx(2.25 * 4.0, rel=1e-14)


@pytest.mark.parametrize("n", [4, 9, 16])
def test_A_symmetric_self_adjoint_legendre(n):
    A = assemble_A(one, one, BoundaryBasis(n, 0.0)).A_mat
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))


@pytest.mark.parametrize("mu", MUS)
@pytest.mark.parametrize("n", [8, 32])
def test_coercivity(mu, n):
    a = lambda x: 1 + 0.5 * np.sin(3 * x)  # noqa: E731
    c = lambda x: 2 + np.cos(x)  # noqa: E731
    b = BoundaryBasis(n, mu)
    assert assemble_A(a, c, b).min_sym_eig() > 0
    assert assemble_A_N(a, c, b).min_sym_eig("A_N") > 0


def test_A_N_matches_A_for_polynomial_legendre(rng):
    n = 10
    b = BoundaryBasis(n, 0.0)
    a = lambda x: 1 + 0.0 * x  # noqa: E731
    A = assemble_A(a, a, b).A_mat
    AN = assemble_A_N(a, a, b).A_N_mat
    # Entries with total degree <= 2N-1 are integrated exactly by the N-point rule.
    for i in range(n - 1):
        for j in range(n - 1):
            if (i + 2) + (j + 2) <= 2 * n - 1:
                assert AN[i, j] == pytest.approx(A[i, j], rel=1e-12, abs=1e-12)


def test_continuity_constant_stable(rng):
    ks = []
    for n in (8, 16, 32, 48):
        b = BoundaryBasis(n, 0.25)
        mats = assemble_A(lambda x: 1 + x**2, lambda x: 2 + 0 * x, b)
        m = n + 2
        w = gauss_lobatto(m, 0.25).weights
        phi, dphi, _ = b.tables(m)
        H = phi.T @ (w[:, None] * phi) + dphi.T @ (w[:, None] * dphi)
        L = np.linalg.cholesky(H)
        Li = np.linalg.inv(L)
        K = np.linalg.norm(Li @ mats.A_mat @ Li.T, 2)
        for _ in range(50):
            u, v = rng.standard_normal(n - 1), rng.standard_normal(n - 1)
            ratio = abs(v @ mats.A_mat @ u) / (norm_sobolev(b.field(u), 1) * norm_sobolev(b.field(v), 1))
            assert ratio <= K * (1 + 1e-10)
        ks.append(K)
    assert max(ks) <= 2 * min(ks)


def test_coefficient_sign_error():
    b = BoundaryBasis(6, 0.0)
    with pytest.raises(CoefficientSignError):
        assemble_A(lambda x: x, one, b)
    with pytest.raises(CoefficientSignError):
        assemble_A_N(one, lambda x: 0 * x, b)


def test_apply_B_examples():
    b = BoundaryBasis(2, 0.0)
    v = bubble_field(2, 0.0, [1.0])
    np.testing.assert_array_equal(apply_B(v, 0.0, coeffs(), b), [0.0])
    assert apply_B(v, 0.0, coeffs(alpha=1.0), b)[0] == pytest.approx(1.5 * 8 / 3, rel=1e-14)
    assert apply_B(v, 0.0, coeffs(gamma=1.0), b)[0] == pytest.approx(1.5 * 4 / 3, rel=1e-14)


def test_apply_B_N_matches_apply_B_for_low_degree(rng):
    n = 8
    b = BoundaryBasis(n, 0.0)
    v = bubble_field(n, 0.0, np.r_[rng.standard_normal(2), np.zeros(n - 3)])
    spec = coeffs(alpha=-1.0, beta=0.5, gamma=0.0)
    exact = apply_B(v, 0.0, spec, b)
    disc = apply_B_N(v, 0.0, spec, b)
    # Integrands of degree <= 2N-1 for the first few test functions.
    np.testing.assert_allclose(disc[:3], exact[:3], atol=1e-12)


def test_apply_B_evaluation_error():
    b = BoundaryBasis(4, 0.0)
    v = bubble_field(4, 0.0, [1.0, 0, 0])
    spec = SimpleNamespace(alpha=lambda x, t, v: np.log(x), beta=coeffs().beta, gamma=coeffs().gamma)
    with pytest.raises(EvaluationError, match="alpha"):
        apply_B(v, 0.0, spec, b)


def test_project_A_idempotent(rng):
    n, mu = 12, 0.25
    b = BoundaryBasis(n, mu)
    mats = assemble_A(lambda x: 1 + x**2 / 4, lambda x: 2 + np.cos(x), b)
    f = b.field(rng.standard_normal(n - 1))
    r = project_A(f, mats, b, df=lambda x: f.evaluate(x, 1))
    np.testing.assert_allclose(r.coeffs, f.coeffs, atol=1e-11 * np.max(np.abs(f.coeffs)))


def test_project_A_spectral_accuracy_and_residual():
    g = lambda x: np.sin(np.pi * (x + 1))  # noqa: E731
    dg = lambda x: np.pi * np.cos(np.pi * (x + 1))  # noqa: E731
    b = BoundaryBasis(16, 0.0)
    mats = assemble_A(one, one, b)
    r = project_A(g, mats, b, df=dg)
    assert error_norms(r, g, dg)[1] <= 1e-7
    m = mats.m
    rule = gauss_lobatto(m, 0.0)
    phi, _, gr = b.tables(m)
    e, de = r.at_rule(m) - g(rule.nodes), r.at_rule(m, 1) - dg(rule.nodes)
    resid = phi.T @ (rule.weights * e) + gr.T @ (rule.weights * de)
    assert np.max(np.abs(resid)) <= 1e-10


def test_project_A_precondition():
    b = BoundaryBasis(4, 0.0)
    mats = assemble_A(one, one, b)
    with pytest.raises(PreconditionError):
        project_A(np.cos, mats, b)


def test_diff_matrix_examples():
    D = diff_matrix(gauss_lobatto(6, 0.25))
    np.testing.assert_allclose(D @ np.ones(7), 0.0, atol=1e-13)
    r = gauss_lobatto(4, 0.0)
    np.testing.assert_allclose(diff_matrix(r) @ r.nodes**2, 2 * r.nodes, atol=1e-12)
    r = gauss_lobatto(8, -0.5)
    b = JacobiBasis(-0.5)
    want = jacobi_deriv(b, 5, 1, r.nodes)
    got = diff_matrix(r) @ jacobi_eval(b, 5, r.nodes)
    assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))


@given(mu=st.sampled_from(MUS), n=st.integers(2, 48))
def test_diff_matrix_exact_on_basis(mu, n):
    r = gauss_lobatto(n, mu)
    b = JacobiBasis(mu)
    D = diff_matrix(r)
    V = b.all_values(n, r.nodes)
    dV = b.all_derivatives(n, 1, r.nodes)
    for k in range(n + 1):
        scale = max(1.0, np.max(np.abs(dV[k])))
        assert np.max(np.abs(D @ V[k] - dV[k])) <= 1e-11 * scale * max(1.0, n / 16) ** 2


def test_diff_matrix_large_n_finite():
    D = diff_matrix(gauss_lobatto(256, 0.0)).matrix
    assert np.all(np.isfinite(D))
    assert np.max(np.abs(D.sum(axis=1))) <= 1e-8


def test_form_matrices_immutable():
    mats = assemble_A(one, one, BoundaryBasis(4, 0.0))
    with pytest.raises(ValueError):
        mats.A_mat[0, 0] = 1.0


def test_singular_system_detected():
    from pseudospec.forms import FormMatrices

    with pytest.raises(AssemblyError):
        FormMatrices(np.zeros((2, 2)), one, one, 4)


def test_legendre_projection_residual_with_weighted_grad():
    # For mu = 0 the A-projection of a polynomial of degree N equals the same polynomial.
    f = project_L2(lambda x: (1 - x**2) * x**3, 5, 0.0)
    b = BoundaryBasis(5, 0.0)
    mats = assemble_A(one, one, b)
    r = project_A(lambda x: (1 - x**2) * x**3, mats, b, df=lambda x: 3 * x**2 - 5 * x**4)
    np.testing.assert_allclose(r.coeffs, f.coeffs, atol=1e-13)
