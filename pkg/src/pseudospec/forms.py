"""Boundary-adapted basis of P_N^0, the forms A, B, A_N, B_N and nodal differentiation.

The test-side operator w^{-1} (psi w)_x is evaluated as psi_x - 2 mu x q with
psi = (1 - x^2) q, where q is recovered by deflation in modal space. This keeps
it a polynomial and finite at the endpoint nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .jacobi import gauss_lobatto, recurrence_coefficients
from .spaces import (
    BoundaryField,
    PreconditionError,
    SpectralField,
    basis_matrix,
    boundary_coefficients,
    numeric_derivative,
    over_resolution,
)


class CoefficientSignError(ValueError):
    """a(x) or c(x) is not positive on the node set."""


class EvaluationError(ArithmeticError):
    """A coefficient function produced a non-finite value."""


class AssemblyError(RuntimeError):
    pass


def _times_x(n_in, mu):
    """Matrix of multiplication by x, P_{n_in} -> P_{n_in+1}, in the J^{(mu,mu)} basis."""
    rec = recurrence_coefficients(n_in + 1, mu)
    X = np.zeros((n_in + 2, n_in + 1))
    for k in range(n_in + 1):
        # x J_k = (J_{k+1} + c_{k+1} J_{k-1}) / a_{k+1}
        a_next, _, c_next = rec[k + 1]
        X[k + 1, k] = 1.0 / a_next
        if k >= 1:
            X[k - 1, k] = c_next / a_next
    return X


def bubble_matrix(n, mu):
    """Multiplication by (1 - x^2) as a map P_{N-2} -> P_N in the Jacobi basis."""
    X1 = _times_x(n - 2, mu)
    X2 = _times_x(n - 1, mu)
    E = -X2 @ X1
    E[: n - 1, :] += np.eye(n - 1)
    return E


def deflate(modal, n, mu):
    """Coefficients of q in P_{N-2} with (1 - x^2) q = psi; raises if psi(+-1) != 0."""
    modal = np.asarray(modal, dtype=float)
    E = bubble_matrix(n, mu)
    q, *_ = np.linalg.lstsq(E, modal, rcond=None)
    resid = np.linalg.norm(E @ q - modal, axis=0)
    scale = np.maximum(np.linalg.norm(modal, axis=0), 1e-300)
    if np.any(resid > 1e-10 * scale) and np.any(resid > 1e-14):
        raise PreconditionError(
            f"deflation residual {float(np.max(resid / scale)):.3e}: psi does not vanish at +-1"
        )
    return q


class BoundaryBasis:
    """phi_i = J_i + d_i J_{i+2}, i = 0..N-2, spanning P_N^0.

    Values, derivatives and weighted gradients at the nodes of any rule of the
    same mu are cached per rule resolution.
    """

    def __init__(self, n, mu):
        if n < 2:
            raise ValueError("P_N^0 needs N >= 2")
        self.n = int(n)
        self.mu = float(mu)
        self.coeffs = boundary_coefficients(self.n, self.mu)
        q = deflate(self.coeffs, self.n, self.mu)
        self.deflated = np.vstack([q, np.zeros((2, self.n - 1))])
        self._cache = {}

    @property
    def dim(self):
        return self.n - 1

    def tables(self, m):
        """(phi, phi_x, w^{-1}(phi w)_x) at the nodes of the resolution-m rule."""
        if m not in self._cache:
            x = gauss_lobatto(m, self.mu).nodes
            V0 = basis_matrix(self.n, self.mu, m)
            V1 = basis_matrix(self.n, self.mu, m, 1)
            phi = V0 @ self.coeffs
            dphi = V1 @ self.coeffs
            g = dphi - 2.0 * self.mu * x[:, None] * (V0 @ self.deflated)
            for arr in (phi, dphi, g):
                arr.setflags(write=False)
            self._cache[m] = (phi, dphi, g)
        return self._cache[m]

    def field(self, c):
        """BoundaryField with basis coordinates ``c``."""
        return BoundaryField(self.n, self.mu, modal=self.coeffs @ np.asarray(c, dtype=float))

    def coordinates(self, f):
        """Basis coordinates of a field in P_N^0 (least squares on the modal coefficients)."""
        c, *_ = np.linalg.lstsq(self.coeffs, np.asarray(f.coeffs), rcond=None)
        return c

    def gram(self, m=None):
        m = m or self.n + 1
        w = gauss_lobatto(m, self.mu).weights
        phi = self.tables(m)[0]
        return phi.T @ (w[:, None] * phi)


def weighted_grad(psi, m=None):
    """Values of w^{-1} (psi w)_x = psi_x - 2 mu x q at the rule of resolution m (default N)."""
    m = psi.n if m is None else m
    q = deflate(psi.coeffs, psi.n, psi.mu)
    x = gauss_lobatto(m, psi.mu).nodes
    qv = basis_matrix(psi.n - 2, psi.mu, m) @ q
    return psi.at_rule(m, 1) - 2.0 * psi.mu * x * qv


def _positive_on(fn, x, name):
    vals = np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)) or np.min(vals) <= 0.0:
        j = int(np.argmin(np.where(np.isfinite(vals), vals, -np.inf)))
        raise CoefficientSignError(f"{name}(x) must be positive; {name}({x[j]:.6g}) = {vals[j]:.6g}")
    return vals


@dataclass
class FormMatrices:
    """A(phi_k, phi_j) stored as A_mat[j, k] (row = test function) plus its LU factors."""

    A_mat: np.ndarray
    a_fn: object
    c_fn: object
    m: int
    lu: tuple = field(init=False, repr=False)
    A_N_mat: np.ndarray | None = None

    def __post_init__(self):
        self.A_mat.setflags(write=False)
        if not np.all(np.isfinite(self.A_mat)):
            raise AssemblyError("non-finite entries in A")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            self.lu = lu_factor(self.A_mat)
        if np.min(np.abs(np.diag(self.lu[0]))) <= 1e-14 * np.max(np.abs(self.A_mat)):
            raise AssemblyError("A is numerically singular")

    def solve(self, rhs):
        return lu_solve(self.lu, rhs)

    def min_sym_eig(self, which="A"):
        M = self.A_mat if which == "A" else self.A_N_mat
        return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def assemble_A(a_fn, c_fn, basis: BoundaryBasis, quad_over=None) -> FormMatrices:
    """Matrix of A(phi, psi) = (c phi, psi)_w + int a phi_x (psi w)_x dx, over-integrated."""
    m = over_resolution(basis.n) if quad_over is None else quad_over.n
    rule = gauss_lobatto(m, basis.mu)
    a = _positive_on(a_fn, rule.nodes, "a")
    c = _positive_on(c_fn, rule.nodes, "c")
    phi, dphi, g = basis.tables(m)
    w = rule.weights
    A = phi.T @ ((w * c)[:, None] * phi) + g.T @ ((w * a)[:, None] * dphi)
    return FormMatrices(A, a_fn, c_fn, m)


def assemble_A_N(a_fn, c_fn, basis: BoundaryBasis, quad=None) -> FormMatrices:
    """Discrete form A_N(phi, psi) = (c phi, psi)_{N,w} + (a phi_x, w^{-1}(psi w)_x)_{N,w}."""
    n = basis.n if quad is None else quad.n
    rule = gauss_lobatto(n, basis.mu)
    a = _positive_on(a_fn, rule.nodes, "a")
    c = _positive_on(c_fn, rule.nodes, "c")
    phi, dphi, g = basis.tables(n)
    w = rule.weights
    A = phi.T @ ((w * c)[:, None] * phi) + g.T @ ((w * a)[:, None] * dphi)
    mats = FormMatrices(A.copy(), a_fn, c_fn, n)
    mats.A_N_mat = A
    return mats


def _coefficient(fn, x, t, v, name):
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(fn(x, t, v), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)):
        j = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise EvaluationError(f"{name}(x={x[j]:.6g}, t={t:.6g}, v={v[j]:.6g}) is not finite")
    return vals


def _B_tables(v, t, spec, basis, m):
    rule = gauss_lobatto(m, basis.mu)
    x = rule.nodes
    vv = v.at_rule(m)
    dv = v.at_rule(m, 1)
    alpha = _coefficient(spec.alpha, x, t, vv, "alpha")
    beta = _coefficient(spec.beta, x, t, vv, "beta")
    gamma = _coefficient(spec.gamma, x, t, vv, "gamma")
    phi, _, g = basis.tables(m)
    w = rule.weights
    return g.T @ (w * alpha * dv) + phi.T @ (w * (beta * dv + gamma))


def apply_B(v: SpectralField, t, spec, basis: BoundaryBasis, quad_over=None):
    """Vector B(v, phi_j) = L_alpha(v, phi_j) + (beta v_x, phi_j)_w + (gamma, phi_j)_w."""
    m = over_resolution(basis.n) if quad_over is None else quad_over.n
    return _B_tables(v, t, spec, basis, m)


def apply_B_N(v: SpectralField, t, spec, basis: BoundaryBasis):
    """Discrete analogue B_N(v, phi_j) with all products taken at the N nodes."""
    return _B_tables(v, t, spec, basis, basis.n)


def project_A(f, mats: FormMatrices, basis: BoundaryBasis, quad_over=None, df=None):
    """A-orthogonal projection R_N f onto P_N^0: A(R_N f - f, psi) = 0 for psi in P_N^0."""
    ends = np.asarray(f(np.array([-1.0, 1.0])), dtype=float)
    if np.max(np.abs(ends)) > 1e-10:
        raise PreconditionError(f"f does not vanish at +-1: f(+-1) = {ends}")
    if df is None:
        df = numeric_derivative(f)
    m = mats.m if quad_over is None else quad_over.n
    rule = gauss_lobatto(m, basis.mu)
    x = rule.nodes
    fv = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    dfv = np.broadcast_to(np.asarray(df(x), dtype=float), x.shape)
    a = np.asarray(mats.a_fn(x), dtype=float)
    c = np.asarray(mats.c_fn(x), dtype=float)
    phi, _, g = basis.tables(m)
    w = rule.weights
    rhs = phi.T @ (w * c * fv) + g.T @ (w * a * dfv)
    coords = mats.solve(rhs)
    resid = mats.A_mat @ coords - rhs
    if np.max(np.abs(resid)) > 1e-10 * max(1.0, np.max(np.abs(rhs))):
        raise AssemblyError(f"A-projection residual {np.max(np.abs(resid)):.3e}")
    return basis.field(coords)


@dataclass(frozen=True)
class DiffMatrix:
    """Nodal differentiation matrix, exact on P_N."""

    matrix: np.ndarray

    def __matmul__(self, values):
        return self.matrix @ values


def diff_matrix(quad) -> DiffMatrix:
    """Barycentric Lagrange differentiation matrix on the nodes of ``quad``."""
    x = np.asarray(quad.nodes)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # Barycentric weights in log form; products of node gaps underflow for large N.
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    ratio = sign[None, :] * sign[:, None] * np.exp(logw[None, :] - logw[:, None])
    D = ratio / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -np.sum(D, axis=1))
    D.setflags(write=False)
    return DiffMatrix(D)
