"""Weighted inner products, Sobolev norms and the approximation operators.

Functions on [-1, 1] are held as :class:`SpectralField` objects carrying
modal coefficients in the J_k^{(mu,mu)} basis and/or values at the
Gauss-Lobatto nodes of matching resolution.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .jacobi import MAX_DEGREE, JacobiBasis, gauss_lobatto, norm_squared


class ShapeError(ValueError):
    """Array length or resolution does not match the quadrature rule."""


class InputError(ValueError):
    """Non-finite or otherwise unusable function samples."""


class PreconditionError(ValueError):
    pass


def over_resolution(n):
    """Resolution of the rule used for 'continuous' integrals at truncation N."""
    return min(max(2 * n, n + 32), MAX_DEGREE)


@lru_cache(maxsize=256)
def basis_matrix(n, mu, m, k=0):
    """Matrix of d^k/dx^k J_j(y_i): rows are nodes of the M=m rule, columns j=0..n."""
    rule = gauss_lobatto(m, mu)
    out = JacobiBasis(mu, max(n, 2)).all_derivatives(n, k, rule.nodes).T.copy()
    out.setflags(write=False)
    return out


@lru_cache(maxsize=128)
def _discrete_norms(n, mu):
    # (J_k, J_k)_{N,w}: exact for k < N, aliased for k = N.
    V = basis_matrix(n, mu, n)
    g = gauss_lobatto(n, mu).weights @ (V * V)
    g.setflags(write=False)
    return g


def synthesis(modal, n, mu):
    """Modal coefficients -> values at the N-resolution Gauss-Lobatto nodes."""
    modal = np.asarray(modal, dtype=float)
    if modal.shape[0] != n + 1:
        raise ShapeError(f"expected {n + 1} coefficients, got {modal.shape[0]}")
    return basis_matrix(n, mu, n) @ modal


def analysis(nodal, n, mu):
    """Node values -> modal coefficients of the interpolant (discrete transform)."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape[0] != n + 1:
        raise ShapeError(f"expected {n + 1} node values, got {nodal.shape[0]}")
    rule = gauss_lobatto(n, mu)
    V = basis_matrix(n, mu, n)
    return (V.T @ (rule.weights * nodal)) / _discrete_norms(n, mu)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A polynomial of degree <= n stored modally and/or nodally."""

    n: int
    mu: float
    modal: np.ndarray | None = None
    nodal: np.ndarray | None = None

    def __post_init__(self):
        if self.modal is None and self.nodal is None:
            raise ValueError("SpectralField needs a modal or nodal representation")
        for name in ("modal", "nodal"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                if arr.shape != (self.n + 1,):
                    raise ShapeError(f"{name} has shape {arr.shape}, expected ({self.n + 1},)")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def rule(self):
        return gauss_lobatto(self.n, self.mu)

    @cached_property
    def coeffs(self):
        if self.modal is not None:
            return self.modal
        c = analysis(self.nodal, self.n, self.mu)
        c.setflags(write=False)
        return c

    @cached_property
    def values(self):
        if self.nodal is not None:
            return self.nodal
        v = synthesis(self.modal, self.n, self.mu)
        v.setflags(write=False)
        return v

    def evaluate(self, x, k=0):
        """Value (k=0) or k-th derivative (k <= 2) of the polynomial at points x."""
        x = np.asarray(x, dtype=float)
        rows = JacobiBasis(self.mu, max(self.n, 2)).all_derivatives(self.n, k, x)
        return np.tensordot(self.coeffs, rows, axes=(0, 0))

    def at_rule(self, m, k=0):
        """Values of the k-th derivative at the nodes of the resolution-m rule."""
        return basis_matrix(self.n, self.mu, m, k) @ self.coeffs

    def derivative_values(self, k=1):
        return self.at_rule(self.n, k)

    def __call__(self, x):
        return self.evaluate(x)

    def __add__(self, other):
        return _combine(self, other, 1.0)

    def __sub__(self, other):
        return _combine(self, other, -1.0)

    def scaled(self, s):
        return SpectralField(self.n, self.mu, modal=s * np.asarray(self.coeffs))


def _combine(a, b, sign):
    if (a.n, a.mu) != (b.n, b.mu):
        raise ShapeError("fields live on different (N, mu)")
    return SpectralField(a.n, a.mu, modal=a.coeffs + sign * b.coeffs)


class BoundaryField(SpectralField):
    """A SpectralField vanishing at x = -1 and x = 1."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        scale = max(float(np.max(np.abs(v))), 1e-300)
        ends = max(abs(v[0]), abs(v[-1]))
        if self.modal is not None:
            ends = max(ends, abs(float(np.sum(self.modal * _endpoint_row(self.n, self.mu)))))
        if ends > 1e-12 * scale and ends > 1e-14:
            raise PreconditionError(f"boundary field does not vanish at +-1 (|v| = {ends:.3e})")


@lru_cache(maxsize=128)
def _endpoint_row(n, mu):
    return JacobiBasis(mu, max(n, 2)).all_values(n, np.array(1.0))


def as_boundary(field):
    if isinstance(field, BoundaryField):
        return field
    return BoundaryField(field.n, field.mu, modal=field.modal, nodal=field.nodal)


# ---------------------------------------------------------------------------
# inner products and norms


def _values_on(f, rule, strict):
    if isinstance(f, SpectralField):
        if f.mu != rule.mu:
            raise ShapeError(f"field has mu={f.mu}, rule has mu={rule.mu}")
        if f.n == rule.n:
            return np.asarray(f.values)
        if strict:
            raise ShapeError(f"field resolution {f.n} does not match rule resolution {rule.n}")
        if f.n < rule.n:
            return f.at_rule(rule.n)
        return f.evaluate(rule.nodes)
    if callable(f):
        vals = np.asarray(f(rule.nodes), dtype=float)
        return np.broadcast_to(vals, rule.nodes.shape)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(rule.n + 1, float(arr))
    if arr.shape != rule.nodes.shape:
        raise ShapeError(f"expected {rule.n + 1} values, got {arr.shape}")
    return arr


def inner_w(f, g, quad):
    """Quadrature value of the weighted integral of f*g on the nodes of ``quad``.

    Exact when f*g is a polynomial of degree <= 2N-1.
    """
    return float(np.dot(quad.weights, _values_on(f, quad, False) * _values_on(g, quad, False)))


def inner_N(f, g, quad):
    """Discrete Gauss-Lobatto inner product sum_j f(x_j) g(x_j) w_j."""
    return float(np.dot(quad.weights, _values_on(f, quad, True) * _values_on(g, quad, True)))


def norm_N(f, quad):
    return np.sqrt(inner_N(f, f, quad))


def norm_sobolev(f, k, quad=None):
    """Weighted H^k norm (k <= 2) of a SpectralField, derivatives taken modally.

    Each term is integrated on a rule of resolution at least N + max(k, 1),
    which is exact for the squared derivatives.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"Sobolev order k={k} unsupported (k in 0..2)")
    m = f.n + max(k, 1)
    if quad is not None:
        if quad.mu != f.mu:
            raise ShapeError("rule and field have different mu")
        m = max(m, quad.n)
    rule = gauss_lobatto(m, f.mu)
    total = 0.0
    for j in range(k + 1):
        d = f.at_rule(m, j)
        total += float(np.dot(rule.weights, d * d))
    return np.sqrt(total)


def error_norms(field, f, df=None, m=None):
    """(||field - f||_{0,w}, ||field - f||_{1,w}) by over-quadrature.

    ``f`` and ``df`` are vectorized callables (or SpectralFields); when ``df`` is
    omitted the derivative of ``f`` is approximated by central differences.
    """
    if m is None:
        m = over_resolution(field.n)
    rule = gauss_lobatto(m, field.mu)
    y = rule.nodes
    if isinstance(f, SpectralField):
        fv = f.evaluate(y)
        dfv = f.evaluate(y, 1)
    else:
        fv = np.broadcast_to(np.asarray(f(y), dtype=float), y.shape)
        dfv = np.broadcast_to(np.asarray((df or numeric_derivative(f))(y), dtype=float), y.shape)
    e0 = field.evaluate(y) - fv
    e1 = field.evaluate(y, 1) - dfv
    l2 = float(np.dot(rule.weights, e0 * e0))
    h1 = l2 + float(np.dot(rule.weights, e1 * e1))
    return np.sqrt(l2), np.sqrt(h1)


def numeric_derivative(f, h=1e-6):
    """Second-order central-difference derivative of a vectorized callable."""

    def df(x):
        x = np.asarray(x, dtype=float)
        return (np.asarray(f(x + h), dtype=float) - np.asarray(f(x - h), dtype=float)) / (2 * h)

    return df


def _samples(f, x):
    vals = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise InputError(f"non-finite function value at x={x[bad]!r}")
    return vals


# ---------------------------------------------------------------------------
# approximation operators


def project_L2(f, n, mu):
    """Weighted L2 orthogonal projection onto P_N.

    Integrals use the finest rule available so that kinks in f cost as
    little quadrature error as possible.
    """
    m = MAX_DEGREE
    rule = gauss_lobatto(m, mu)
    vals = _samples(f, rule.nodes)
    V = basis_matrix(n, mu, m)
    coeffs = (V.T @ (rule.weights * vals)) / norm_squared(np.arange(n + 1), mu)
    return SpectralField(n, mu, modal=coeffs)


@lru_cache(maxsize=128)
def boundary_coefficients(n, mu):
    """Modal coefficients (shape (N+1, N-1)) of phi_i = J_i + d_i J_{i+2}, i = 0..N-2.

    d_i = -J_i(1)/J_{i+2}(1); parity makes each phi_i vanish at -1 as well.
    """
    if n < 2:
        raise ValueError("boundary basis needs N >= 2")
    ends = _endpoint_row(n, mu)
    S = np.zeros((n + 1, n - 1))
    i = np.arange(n - 1)
    S[i, i] = 1.0
    S[i + 2, i] = -ends[i] / ends[i + 2]
    S.setflags(write=False)
    return S


def project_H10(f, n, mu, df=None):
    """Orthogonal projection onto P_N^0 under [u, v]_w = (u', v')_w."""
    f_ends = np.asarray(f(np.array([-1.0, 1.0])), dtype=float)
    if np.max(np.abs(f_ends)) > 1e-10:
        raise PreconditionError(f"f does not vanish at +-1: f(+-1) = {f_ends}")
    if df is None:
        df = numeric_derivative(f)
    m = over_resolution(n)
    rule = gauss_lobatto(m, mu)
    dfv = _samples(df, rule.nodes)
    S = boundary_coefficients(n, mu)
    dphi = basis_matrix(n, mu, m, 1) @ S
    wd = rule.weights[:, None] * dphi
    G = dphi.T @ wd
    rhs = wd.T @ dfv
    c = np.linalg.solve(G, rhs)
    return BoundaryField(n, mu, modal=S @ c)


def interpolate(f, quad):
    """Interpolant I_N f through the Gauss-Lobatto nodes of ``quad``."""
    vals = np.broadcast_to(np.asarray(f(quad.nodes), dtype=float), quad.nodes.shape)
    return SpectralField(quad.n, quad.mu, nodal=vals.copy())


def quadrature_gap(f, phi, quad):
    """|(f, phi)_w - (f, phi)_{N,w}| with the continuous product over-integrated."""
    over = gauss_lobatto(MAX_DEGREE, quad.mu)
    exact = inner_w(f, phi, over)
    discrete = inner_w(f, phi, quad)
    return abs(exact - discrete)
