"""Symmetric Jacobi polynomials J_n^{(mu,mu)} and Gauss-Lobatto-Jacobi rules.

Normalization is the classical one, J_n(1) = binom(n + mu, n), so mu = 0
gives the Legendre polynomials and mu = -1/2 gives scaled Chebyshev ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

MAX_DEGREE = 256


class DomainError(ValueError):
    """Argument outside the admissible domain (mu or x)."""


class DegreeError(ValueError):
    """Requested degree exceeds what the basis was built for."""


class NumericError(RuntimeError):
    pass


def _check_mu(mu):
    if not (-1.0 < mu < 1.0):
        raise DomainError(f"weight exponent mu={mu} must lie in (-1, 1)")


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14) or not np.all(np.isfinite(x)):
        raise DomainError("evaluation points must lie in [-1, 1]")
    return x


def recurrence_coefficients(n_max, alpha):
    """Coefficients of J_n = a_n x J_{n-1} - c_n J_{n-2} for the (alpha, alpha) family.

    Returns an (n_max + 1, 3) array of rows (a_n, b_n, c_n); b_n is zero by
    symmetry and rows 0 (and c of row 1) are unused placeholders.
    """
    rec = np.zeros((n_max + 1, 3))
    if n_max >= 1:
        rec[1] = (alpha + 1.0, 0.0, 0.0)
    for n in range(2, n_max + 1):
        s = 2.0 * n + 2.0 * alpha
        den = 2.0 * n * (n + 2.0 * alpha) * (s - 2.0)
        rec[n, 0] = (s - 1.0) * s * (s - 2.0) / den
        rec[n, 2] = 2.0 * (n + alpha - 1.0) ** 2 * s / den
    return rec


def _jacobi_all(n_max, alpha, x, rec=None):
    """Values of J_0..J_{n_max} of the (alpha, alpha) family; shape (n_max+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    if rec is None:
        rec = recurrence_coefficients(n_max, alpha)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = rec[1, 0] * x
    for n in range(2, n_max + 1):
        out[n] = rec[n, 0] * x * out[n - 1] - rec[n, 2] * out[n - 2]
    return out


def norm_squared(n, alpha):
    """Exact weighted L2 norm squared of J_n^{(alpha,alpha)} under (1-x^2)^alpha."""
    n = np.asarray(n)
    a = float(alpha)
    nf = n.astype(float)
    # n = 0 is split off because Gamma(2a+1) has a pole at a = -1/2.
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = (
            (2 * a + 1) * np.log(2.0)
            - np.log(2 * nf + 2 * a + 1)
            + 2 * gammaln(nf + a + 1)
            - gammaln(nf + 2 * a + 1)
            - gammaln(nf + 1)
        )
    lg0 = (2 * a + 1) * np.log(2.0) + 2 * gammaln(a + 1) - gammaln(2 * a + 2)
    return np.exp(np.where(n == 0, lg0, lg))


def weight_integral(mu):
    """Integral of (1 - x^2)^mu over (-1, 1)."""
    return float(norm_squared(np.array(0), mu))


def endpoint_value(n, mu):
    """J_n^{(mu,mu)}(1) = binom(n + mu, n)."""
    return float(np.exp(gammaln(n + mu + 1) - gammaln(n + 1) - gammaln(mu + 1)))


@dataclass(frozen=True)
class JacobiBasis:
    """The family J_0..J_{max_degree} for the weight (1 - x^2)^mu."""

    mu: float
    max_degree: int = MAX_DEGREE
    recurrence: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_mu(self.mu)
        if self.max_degree < 0:
            raise DegreeError("max_degree must be nonnegative")
        object.__setattr__(self, "recurrence", recurrence_coefficients(self.max_degree, self.mu))

    def _check_degree(self, n):
        if n < 0 or n > self.max_degree:
            raise DegreeError(f"degree {n} outside [0, {self.max_degree}]")

    def all_values(self, n, x):
        """Rows J_0(x)..J_n(x)."""
        self._check_degree(n)
        x = _check_x(x)
        return _jacobi_all(n, self.mu, x, self.recurrence)

    def all_derivatives(self, n, k, x):
        """Rows d^k/dx^k J_j(x) for j = 0..n, k in {0, 1, 2}."""
        self._check_degree(n)
        x = _check_x(x)
        if k == 0:
            return _jacobi_all(n, self.mu, x, self.recurrence)
        if k not in (1, 2):
            raise ValueError(f"derivative order k={k} unsupported (k in {{1, 2}})")
        out = np.zeros((n + 1,) + x.shape)
        if n < k:
            return out
        # d^k/dx^k J_j^{(m,m)} = prod_{i=1..k} (j + 2m + i)/2 * J_{j-k}^{(m+k,m+k)}
        shifted = _jacobi_all(n - k, self.mu + k, x)
        j = np.arange(k, n + 1, dtype=float)
        scale = np.ones_like(j)
        for i in range(1, k + 1):
            scale *= (j + 2 * self.mu + i) / 2.0
        out[k:] = scale.reshape((-1,) + (1,) * x.ndim) * shifted
        return out

    def norm_squared(self, n):
        return norm_squared(n, self.mu)


def jacobi_eval(basis: JacobiBasis, n: int, x):
    """J_n^{(mu,mu)}(x) by the upward three-term recurrence."""
    vals = basis.all_values(n, x)[n]
    return float(vals) if np.ndim(vals) == 0 else vals


def jacobi_deriv(basis: JacobiBasis, n: int, k: int, x):
    """k-th derivative (k = 1 or 2) of J_n^{(mu,mu)} at x."""
    if k not in (1, 2):
        raise ValueError(f"derivative order k={k} unsupported (k in {{1, 2}})")
    vals = basis.all_derivatives(n, k, x)[n]
    return float(vals) if np.ndim(vals) == 0 else vals


@dataclass(frozen=True)
class QuadratureRule:
    """(N+1)-point Gauss-Lobatto rule for the weight (1 - x^2)^mu."""

    nodes: np.ndarray
    weights: np.ndarray
    mu: float
    n: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    @property
    def basis(self):
        return JacobiBasis(self.mu, max(self.n, 2))

    def __hash__(self):
        return hash((self.n, self.mu))

    def __eq__(self, other):
        return isinstance(other, QuadratureRule) and (self.n, self.mu) == (other.n, other.mu)


def _interior_nodes(n, mu):
    # Roots of J_{N-1}^{(mu+1,mu+1)}, i.e. the zeros of d/dx J_N^{(mu,mu)}.
    m = n - 1
    a = mu + 1.0
    k = np.arange(1, m, dtype=float)
    s = 2 * k + 2 * a
    beta = 4 * k * (k + a) ** 2 * (k + 2 * a) / (s**2 * (s + 1) * (s - 1))
    if m == 1:
        return np.zeros(1)
    try:
        roots = eigh_tridiagonal(np.zeros(m), np.sqrt(beta), eigvals_only=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"tridiagonal eigensolve failed for N={n}, mu={mu}") from exc
    roots = np.sort(roots)
    # Symmetrize away eigensolver round-off.
    roots = 0.5 * (roots - roots[::-1])
    return roots


@lru_cache(maxsize=128)
def gauss_lobatto(n: int, mu: float) -> QuadratureRule:
    """Gauss-Lobatto-Jacobi nodes and weights, exact through degree 2N-1.

    Weights solve sum_j w_j p_k(x_j) = (p_k, 1)_w for the orthonormal
    Jacobi polynomials p_0..p_N.
    """
    _check_mu(mu)
    n = int(n)
    if n < 2:
        raise ValueError(f"Gauss-Lobatto rule needs N >= 2, got {n}")
    if n > MAX_DEGREE:
        raise DegreeError(f"N={n} exceeds the degree cap {MAX_DEGREE}")
    mu = float(mu)
    nodes = np.concatenate(([-1.0], _interior_nodes(n, mu), [1.0]))
    vals = _jacobi_all(n, mu, nodes)
    scale = 1.0 / np.sqrt(norm_squared(np.arange(n + 1), mu))
    V = vals * scale[:, None]
    rhs = np.zeros(n + 1)
    rhs[0] = np.sqrt(weight_integral(mu))
    weights = np.linalg.solve(V, rhs)
    weights = 0.5 * (weights + weights[::-1])
    if not np.all(weights > 0):
        raise NumericError(f"nonpositive Gauss-Lobatto weight for N={n}, mu={mu}")
    return QuadratureRule(nodes, weights, mu, n)
