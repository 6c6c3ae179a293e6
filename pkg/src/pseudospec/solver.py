"""Semidiscrete Galerkin and collocation schemes and method-of-lines stepping.

Problem::

    c v_t - (a v_xt)_x = -(alpha v_x)_x + beta v_x + gamma,   x in (-1, 1)
    v(+-1, t) = 0,  v(x, 0) = v0(x)

with a = a(x), c = c(x) and alpha, beta, gamma functions of (x, t, v).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import expr as ex
from .forms import (
    BoundaryBasis,
    EvaluationError,
    _coefficient,
    _positive_on,
    apply_B,
    assemble_A,
    diff_matrix,
    project_A,
)
from .jacobi import gauss_lobatto
from .spaces import BoundaryField, SpectralField, numeric_derivative, over_resolution

log = logging.getLogger(__name__)

BLOWUP = 1e12
SCHEMES = ("galerkin", "collocation")
INTEGRATORS = ("rk4", "implicit-trapezoid")


class DivergenceError(RuntimeError):
    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    a: ex.Expr
    c: ex.Expr
    alpha: ex.Expr
    beta: ex.Expr
    gamma: ex.Expr
    v0: ex.Expr
    mu: float = 0.0
    T: float = 1.0
    forcing: ex.Expr = ex.ZERO
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        for name in ("a", "c", "alpha", "beta", "gamma", "v0", "forcing"):
            object.__setattr__(self, name, ex.parse(getattr(self, name)))
        if not (-1.0 < self.mu < 1.0):
            raise ValueError(f"mu={self.mu} must lie in (-1, 1)")
        if not (self.T > 0):
            raise ValueError("T must be positive")
        for x in (-1.0, 1.0):
            if abs(ex.evaluate(self.v0, x, 0.0, 0.0)) > 1e-10:
                raise ValueError(f"v0 must vanish at x={x:+g}")

    def a_fn(self, x):
        return ex.evaluate(self.a, x, 0.0, 0.0)

    def c_fn(self, x):
        return ex.evaluate(self.c, x, 0.0, 0.0)

    def alpha_fn(self, x, t, v):
        return ex.evaluate(self.alpha, x, t, v)

    def beta_fn(self, x, t, v):
        return ex.evaluate(self.beta, x, t, v)

    def gamma_fn(self, x, t, v):
        """gamma(x, t, v) plus the v-independent forcing, memoized per (t, x)."""
        g = ex.evaluate(self.gamma, x, t, v)
        if self.forcing == ex.ZERO:
            return g
        xa = np.asarray(x, dtype=float)
        key = (float(t), xa.tobytes())
        f = self._memo.get(key)
        if f is None:
            f = ex.evaluate(self.forcing, xa, t, 0.0)
            if len(self._memo) > 16:
                self._memo.clear()
            self._memo[key] = f
        return g + f

    def v0_fn(self, x):
        return ex.evaluate(self.v0, x, 0.0, 0.0)

    def v0_dx(self):
        """Derivative of v0: symbolic when possible, central differences otherwise."""
        try:
            d = ex.diff(self.v0, "x")
        except ex.UnsupportedDerivativeError:
            return numeric_derivative(self.v0_fn)
        return lambda x: ex.evaluate(d, x, 0.0, 0.0)

    def with_forcing(self, g):
        """Copy of the problem with g(x, t) added to gamma."""
        g = ex.parse(g)
        if "v" in ex.free_vars(g):
            return replace(self, gamma=ex.add(self.gamma, g))
        return replace(self, forcing=ex.add(self.forcing, g))

    def gamma_total(self):
        return ex.add(self.gamma, self.forcing)


class _Coefficients:
    """Adapter exposing alpha/beta/gamma under the names the forms module expects."""

    def __init__(self, spec):
        self.alpha = spec.alpha_fn
        self.beta = spec.beta_fn
        self.gamma = spec.gamma_fn


@dataclass
class SolveConfig:
    scheme: str = "galerkin"
    n: int = 16
    dt: float = 1e-3
    integrator: str = "rk4"
    over_quadrature: int | None = None
    samples: int = 10
    store_all: bool = False

    def validate(self, T):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not (0 < self.dt <= T):
            raise ValueError("dt must satisfy 0 < dt <= T")


@dataclass
class Trajectory:
    times: list
    fields: list
    scheme: str
    n: int
    mu: float
    states: list = field(default_factory=list, repr=False)

    @property
    def final(self):
        return self.fields[-1]


# ---------------------------------------------------------------------------
# Galerkin


class GalerkinSystem:
    """v^N(t) = sum_i u_i(t) phi_i with A u' = B(v^N)."""

    scheme = "galerkin"

    def __init__(self, spec: ProblemSpec, n, over_quadrature=None):
        self.spec = spec
        self.n = n
        self.m = over_quadrature or over_resolution(n)
        self.basis = BoundaryBasis(n, spec.mu)
        self.mats = assemble_A(spec.a_fn, spec.c_fn, self.basis, gauss_lobatto(self.m, spec.mu))
        self.coef = _Coefficients(spec)

    def initial(self):
        return self.basis.coordinates(galerkin_initial(self.spec, self.n, self))

    def field(self, u):
        return self.basis.field(u)

    def nodal(self, u):
        return self.basis.tables(self.n)[0] @ u

    def rhs(self, t, u):
        v = SpectralField(self.n, self.spec.mu, modal=self.basis.coeffs @ u)
        return self.mats.solve(apply_B(v, t, self.coef, self.basis, gauss_lobatto(self.m, self.spec.mu)))

    def residual(self, t, u):
        """A(v_t, phi_j) - B(v, phi_j) with v_t recomputed from the state."""
        ut = self.rhs(t, u)
        v = SpectralField(self.n, self.spec.mu, modal=self.basis.coeffs @ u)
        b = apply_B(v, t, self.coef, self.basis, gauss_lobatto(self.m, self.spec.mu))
        return self.mats.A_mat @ ut - b


def galerkin_initial(spec: ProblemSpec, n, system=None):
    """R_N v0: the A-projection of the initial datum onto P_N^0."""
    if system is None:
        system = GalerkinSystem(spec, n)
    return project_A(spec.v0_fn, system.mats, system.basis,
                     gauss_lobatto(system.m, spec.mu), df=spec.v0_dx())


def galerkin_rhs(v, t, spec, mats, basis, quad_over=None):
    """The xi in P_N^0 with A(xi, psi) = B(v, psi) for all psi in P_N^0."""
    b = apply_B(v, t, _Coefficients(spec), basis, quad_over)
    return basis.field(mats.solve(b))


# ---------------------------------------------------------------------------
# collocation


class CollocationSystem:
    """Nodal unknowns; the strong equation at interior nodes, u(+-1) = 0."""

    scheme = "collocation"

    def __init__(self, spec: ProblemSpec, n):
        self.spec = spec
        self.n = n
        self.quad = gauss_lobatto(n, spec.mu)
        self.D = diff_matrix(self.quad).matrix
        self.x = self.quad.nodes
        self.a = _positive_on(spec.a_fn, self.x, "a")
        self.c = _positive_on(spec.c_fn, self.x, "c")
        M = np.diag(self.c) - self.D @ (self.a[:, None] * self.D)
        M[0, :] = 0.0
        M[-1, :] = 0.0
        M[0, 0] = M[-1, -1] = 1.0
        self.M = M
        self.lu = lu_factor(M)
        piv = np.abs(np.diag(self.lu[0]))
        if np.min(piv) <= 1e-14 * np.max(piv):
            log.error("singular collocation matrix: N=%d mu=%g", n, spec.mu)
            raise SingularSystemError(f"collocation matrix singular (N={n}, mu={spec.mu})")

    def initial(self):
        return np.asarray(collocation_initial(self.spec, self.quad).values, dtype=float).copy()

    def field(self, u):
        return BoundaryField(self.n, self.spec.mu, nodal=u)

    def nodal(self, u):
        return u

    def forcing(self, t, v):
        x = self.x
        dv = self.D @ v
        alpha = _coefficient(self.spec.alpha_fn, x, t, v, "alpha")
        beta = _coefficient(self.spec.beta_fn, x, t, v, "beta")
        gamma = _coefficient(self.spec.gamma_fn, x, t, v, "gamma")
        r = -self.D @ (alpha * dv) + beta * dv + gamma
        r[0] = r[-1] = 0.0
        return r

    def rhs(self, t, v):
        u = lu_solve(self.lu, self.forcing(t, v))
        # Pivoting leaves round-off in the boundary rows; the condition is exact.
        u[0] = u[-1] = 0.0
        return u

    def residual(self, t, v):
        """Strong-form residual at interior nodes with v_t recomputed from the state."""
        vt = self.rhs(t, v)
        lhs = self.c * vt - self.D @ (self.a * (self.D @ vt))
        return (lhs - self.forcing(t, v))[1:-1]


def collocation_initial(spec: ProblemSpec, quad):
    """I_N v0 with the endpoint values set to exactly zero."""
    vals = np.asarray(np.broadcast_to(spec.v0_fn(quad.nodes), quad.nodes.shape), dtype=float).copy()
    vals[0] = vals[-1] = 0.0
    return BoundaryField(quad.n, quad.mu, nodal=vals)


def collocation_rhs(v, t, spec, quad, D=None):
    """Nodal v_t^N solving the collocation system at time t."""
    system = _collocation_system(spec, quad.n)
    return system.field(system.rhs(t, np.asarray(v.values, dtype=float)))


@lru_cache(maxsize=32)
def _collocation_system(spec, n):
    return CollocationSystem(spec, n)


def make_system(spec, cfg: SolveConfig):
    if cfg.scheme == "galerkin":
        return GalerkinSystem(spec, cfg.n, cfg.over_quadrature)
    return CollocationSystem(spec, cfg.n)


# ---------------------------------------------------------------------------
# time stepping


def rk4_step(f, t, u, h):
    k1 = f(t, u)
    k2 = f(t + h / 2, u + h / 2 * k1)
    k3 = f(t + h / 2, u + h / 2 * k2)
    k4 = f(t + h, u + h * k3)
    return u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def trapezoid_step(f, t, u, h, tol=1e-13, maxiter=30):
    """Implicit trapezoid rule solved by simplified Newton with a difference Jacobian."""
    f0 = f(t, u)
    y = u + h * f0
    n = u.size
    J = np.empty((n, n))
    fy = f(t + h, y)
    eps = 1e-7 * max(1.0, float(np.max(np.abs(y))))
    for j in range(n):
        yp = y.copy()
        yp[j] += eps
        J[:, j] = (f(t + h, yp) - fy) / eps
    lu = lu_factor(np.eye(n) - h / 2 * J)
    for _ in range(maxiter):
        G = y - u - h / 2 * (f0 + fy)
        dy = lu_solve(lu, -G)
        y = y + dy
        fy = f(t + h, y)
        if np.max(np.abs(dy)) <= tol * max(1.0, float(np.max(np.abs(y)))):
            return y
    raise DivergenceError(f"trapezoid Newton iteration did not converge at t={t + h:.6g}", t + h)


def integrate(spec: ProblemSpec, cfg: SolveConfig, system=None) -> Trajectory:
    """Advance the scheme's initial condition to spec.T with a fixed step.

    The step is dt shrunk so that an integer number of steps lands on T.
    """
    cfg.validate(spec.T)
    if system is None:
        system = make_system(spec, cfg)
    n_steps = max(1, math.ceil(spec.T / cfg.dt - 1e-9))
    h = spec.T / n_steps
    stride = 1 if cfg.store_all else max(1, n_steps // max(cfg.samples, 1))
    step = rk4_step if cfg.integrator == "rk4" else trapezoid_step

    u = system.initial()
    t = 0.0
    traj = Trajectory([0.0], [system.field(u)], system.scheme, cfg.n, spec.mu, [u.copy()])
    for k in range(1, n_steps + 1):
        try:
            u = step(system.rhs, t, u, h)
        except (EvaluationError, ex.EvalDomainError) as exc:
            raise DivergenceError(f"coefficient evaluation failed at t={t:.6g}: {exc}", t) from exc
        t = k * h
        nodal = system.nodal(u)
        if not np.all(np.isfinite(nodal)) or np.max(np.abs(nodal)) > BLOWUP:
            raise DivergenceError(f"solution blew up at t={t:.6g}", t)
        if k % stride == 0 or k == n_steps:
            traj.times.append(t)
            traj.fields.append(system.field(u))
            traj.states.append(u.copy())
    return traj
