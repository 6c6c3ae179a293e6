"""Convergence studies: manufactured forcings, N sweeps, rate fits and CSV reports."""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import expr as ex
from .jacobi import MAX_DEGREE
from .solver import SCHEMES, DivergenceError, ProblemSpec, SolveConfig, integrate
from .spaces import error_norms, over_resolution

log = logging.getLogger(__name__)

NORMS = ("l2w", "h1w")
CONFIG_KEYS = (
    "mu", "T", "dt", "schemes", "n_list", "a", "c", "alpha", "beta", "gamma",
    "v0", "exact", "error_norms", "out",
)
OPTIONAL_KEYS = {"exact": None, "error_norms": list(NORMS), "out": ""}


class ConfigError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class StudyDivergenceError(RuntimeError):
    """Every run of a study diverged."""


def fit_rate(n_values, errors):
    """Least-squares slope of log(error) against log(N) over the usable points."""
    n = np.asarray(n_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e > 0) & np.isfinite(n) & (n > 0)
    if np.count_nonzero(ok) < 3:
        raise InsufficientDataError("rate fit needs at least 3 finite positive errors")
    slope, _ = np.polyfit(np.log(n[ok]), np.log(e[ok]), 1)
    return float(slope)


def manufacture_forcing(exact, spec: ProblemSpec) -> ex.Expr:
    """Forcing g(x, t) such that ``exact`` solves the problem with gamma + g.

    g = c v_t - (a v_xt)_x + (alpha~ v_x)_x - beta~ v_x - gamma~, where the
    tilde coefficients have v replaced by the exact solution before any
    differentiation.
    """
    v = ex.parse(exact)
    vt = ex.diff(v, "t")
    vx = ex.diff(v, "x")
    vxt = ex.diff(vx, "t")
    alpha = ex.substitute(spec.alpha, "v", v)
    beta = ex.substitute(spec.beta, "v", v)
    gamma = ex.substitute(spec.gamma, "v", v)
    g = ex.mul(spec.c, vt)
    g = ex.sub(g, ex.diff(ex.mul(spec.a, vxt), "x"))
    g = ex.add(g, ex.diff(ex.mul(alpha, vx), "x"))
    g = ex.sub(g, ex.mul(beta, vx))
    g = ex.sub(g, gamma)
    return ex.simplify(g)


@dataclass
class StudyConfig:
    mu: float
    T: float
    dt: float
    schemes: list
    n_list: list
    a: str
    c: str
    alpha: str
    beta: str
    gamma: str
    v0: str
    exact: str | None = None
    error_norms: list = field(default_factory=lambda: list(NORMS))
    out: str = ""

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = [k for k in CONFIG_KEYS if k not in data and k not in OPTIONAL_KEYS]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        merged = {k: data.get(k, OPTIONAL_KEYS.get(k)) for k in CONFIG_KEYS}
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self):
        try:
            self.mu = float(self.mu)
            self.T = float(self.T)
            self.dt = float(self.dt)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mu, T and dt must be numbers: {exc}") from exc
        if not (-1 < self.mu < 1):
            raise ConfigError("mu must lie in (-1, 1)")
        if not (self.T > 0 and 0 < self.dt <= self.T):
            raise ConfigError("need T > 0 and 0 < dt <= T")
        if not self.schemes or any(s not in SCHEMES for s in self.schemes):
            raise ConfigError(f"schemes must be a nonempty subset of {SCHEMES}")
        if not self.error_norms or any(s not in NORMS for s in self.error_norms):
            raise ConfigError(f"error_norms must be a nonempty subset of {NORMS}")
        if (not self.n_list or any(not isinstance(n, int) or isinstance(n, bool) or n < 2 for n in self.n_list)
                or list(self.n_list) != sorted(set(self.n_list))):
            raise ConfigError("n_list must be strictly ascending integers >= 2")
        if max(self.n_list) > MAX_DEGREE // 2:
            raise ConfigError(f"n_list entries must not exceed {MAX_DEGREE // 2}")
        for key in ("a", "c", "alpha", "beta", "gamma", "v0"):
            if not isinstance(getattr(self, key), str):
                raise ConfigError(f"{key} must be an expression string")
        try:
            self.problem()
            if self.exact is not None:
                e = ex.parse(self.exact)
                if ex.free_vars(e) - {"x", "t"}:
                    raise ConfigError("exact may only depend on x and t")
                for t in (0.0, self.T):
                    for x in (-1.0, 1.0):
                        if abs(ex.evaluate(e, x, t, 0.0)) > 1e-10:
                            raise ConfigError(f"exact does not vanish at x={x:+g}, t={t:g}")
        except ex.ExprError as exc:
            raise ConfigError(str(exc)) from exc
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def problem(self) -> ProblemSpec:
        return ProblemSpec(self.a, self.c, self.alpha, self.beta, self.gamma, self.v0, self.mu, self.T)

    def forced_problem(self) -> ProblemSpec:
        spec = self.problem()
        if self.exact is None:
            return spec
        return spec.with_forcing(manufacture_forcing(self.exact, spec))


@dataclass
class RunResult:
    scheme: str
    n: int
    err_l2w: float
    err_h1w: float
    seconds: float
    diverged: bool = False


@dataclass
class ConvergenceReport:
    rows: list
    rates: dict
    config: dict
    reference: bool = False

    def errors(self, scheme, norm="h1w"):
        rows = [r for r in self.rows if r.scheme == scheme]
        return [r.n for r in rows], [getattr(r, f"err_{norm}") for r in rows]

    def to_csv(self):
        lines = ["scheme,N,err_l2w,err_h1w,seconds"]
        for r in self.rows:
            lines.append(f"{r.scheme},{r.n},{_fmt(r.err_l2w)},{_fmt(r.err_h1w)},{_fmt(r.seconds)}")
        for scheme, rates in self.rates.items():
            lines.append(
                f"# rate_l2w={_fmt(rates.get('l2w'))} rate_h1w={_fmt(rates.get('h1w'))} scheme={scheme}"
            )
        return "\n".join(lines) + "\n"


def _fmt(val):
    if val is None:
        return "nan"
    return f"{val:.17g}"


def _exact_callables(exact, T):
    e = ex.parse(exact)
    dx = ex.diff(e, "x")
    return (lambda x: ex.evaluate(e, x, T, 0.0)), (lambda x: ex.evaluate(dx, x, T, 0.0))


def _sup_errors(traj, exact, m):
    e = ex.parse(exact)
    dx = ex.diff(e, "x")
    worst = (0.0, 0.0)
    for t, fld in zip(traj.times, traj.fields):
        errs = error_norms(fld, lambda x: ex.evaluate(e, x, t, 0.0),
                           lambda x: ex.evaluate(dx, x, t, 0.0), m)
        worst = (max(worst[0], errs[0]), max(worst[1], errs[1]))
    return worst


def run_study(cfg: StudyConfig, threads=1, reference=False, integrator="rk4", sup_time=False):
    """Integrate every (scheme, N) pair to T and measure errors at the final time.

    With ``reference`` errors are taken against a Galerkin run at twice the
    largest N with half the time step. The manufactured forcing is kept when
    ``exact`` is given, so both modes can be compared on one problem.
    """
    if cfg.exact is None and not reference:
        raise ConfigError("an exact solution or reference mode is required for error measurement")
    spec = cfg.forced_problem()
    n_ref = None
    ref_field = None
    use_reference = reference or cfg.exact is None
    if use_reference:
        n_ref = 2 * max(cfg.n_list)
        ref_cfg = SolveConfig("galerkin", n_ref, cfg.dt / 2, integrator)
        log.info("reference run: galerkin N=%d dt=%g", n_ref, cfg.dt / 2)
        try:
            ref_field = integrate(spec, ref_cfg).final
        except DivergenceError as exc:
            raise StudyDivergenceError(f"reference run diverged at t={exc.time:g}") from exc
        exact_f, exact_dx = ref_field, None
    else:
        exact_f, exact_dx = _exact_callables(cfg.exact, cfg.T)

    def job(scheme, n):
        t0 = time.perf_counter()
        try:
            traj = integrate(spec, SolveConfig(scheme, n, cfg.dt, integrator, samples=10))
        except DivergenceError as exc:
            log.warning("%s N=%d diverged at t=%g", scheme, n, exc.time)
            return RunResult(scheme, n, math.nan, math.nan, time.perf_counter() - t0, True)
        m = over_resolution(n) if n_ref is None else min(max(2 * n, n_ref), MAX_DEGREE)
        if sup_time and not use_reference:
            l2, h1 = _sup_errors(traj, cfg.exact, m)
        else:
            l2, h1 = error_norms(traj.final, exact_f, exact_dx, m)
        return RunResult(scheme, n, l2, h1, time.perf_counter() - t0)

    tasks = [(s, n) for s in cfg.schemes for n in cfg.n_list]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda sn: job(*sn), tasks))
    else:
        rows = [job(*sn) for sn in tasks]
    if all(r.diverged for r in rows):
        raise StudyDivergenceError("every run diverged")

    rates = {}
    for scheme in cfg.schemes:
        sub = [r for r in rows if r.scheme == scheme]
        rates[scheme] = {}
        for norm in cfg.error_norms:
            try:
                rates[scheme][norm] = fit_rate([r.n for r in sub], [getattr(r, f"err_{norm}") for r in sub])
            except InsufficientDataError:
                pass
    return ConvergenceReport(rows, rates, asdict(cfg), reference=use_reference)


def write_report(report: ConvergenceReport, path=None):
    text = report.to_csv()
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
