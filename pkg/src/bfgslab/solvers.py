"""Solver loops and sklearn-style estimator wrappers.

run_bfgs composes direction computation, the log-bisection Armijo-Wolfe
search, and the curvature-pair update, recording one IterRecord per
step; run_gd is the gradient-descent baseline with backtracking Armijo.
BfgsSolver / GradientDescentSolver wrap the loops behind the estimator
protocol (hyperparameters in __init__, get_params/set_params, fitted
attributes with trailing underscores) so runs compose with sklearn-style
grid tooling.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import bfgs as bfgs_core
from .exceptions import (ConfigError, CurvaturePairError, LineSearchError,
                         NonDescentError, SolverAbort, SpdViolationError)
from .linesearch import WolfeParams, backtracking, log_bisection
from .validation import check_vector

STATUS_GRAD = "converged_grad"
STATUS_GAP = "converged_gap"
STATUS_MAX_ITERS = "max_iters"


@dataclass
class SolverConfig:
    """One run's full configuration.

    stop_grad_tol = None resolves to the problem's reference tolerance
    at run time.  stop_gap_tol is a threshold on the suboptimality
    ratio (f_t - f*) / (f_0 - f*).  record_matrices snapshots the
    direct-form B_t every snapshot_stride iterations for the potential
    diagnostics.  store_vectors keeps the per-step s, y and gradient
    vectors on the records (required for weighted diagnostics; switched
    off for long gradient-descent baselines).
    """

    method: str = "bfgs"
    init_scheme: object = "mu_identity"
    wolfe: WolfeParams = field(default_factory=lambda: WolfeParams(0.1, 0.9))
    max_iters: int = 5000
    stop_grad_tol: float | None = None
    stop_gap_tol: float = 1e-12
    seed: int = 0
    record_matrices: bool = False
    snapshot_stride: int = 1
    x0: np.ndarray | None = None
    form: str = bfgs_core.INVERSE
    gd_shrink: float = 0.5
    store_vectors: bool = True

    def __post_init__(self):
        if self.method not in ("bfgs", "gd"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.stop_gap_tol <= 0:
            raise ConfigError("stop_gap_tol must be positive")
        if self.stop_grad_tol is not None and self.stop_grad_tol <= 0:
            raise ConfigError("stop_grad_tol must be positive")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")


@dataclass(slots=True)
class IterRecord:
    """Raw per-iteration quantities; one row of the trace.

    Records exist for every visited point t = 0..T.  All step fields
    describe the step leaving x_t and are None on the final record
    (no step was taken from the stopping point).
    """

    t: int
    f: float
    grad_norm: float
    f_gap: float
    eta: float | None = None
    loops: int | None = None
    evals: int | None = None
    unit_step: bool | None = None
    g_dot_d: float | None = None
    sy_dot: float | None = None
    s: np.ndarray | None = None
    y: np.ndarray | None = None
    g: np.ndarray | None = None

    @property
    def has_step(self):
        return self.eta is not None


@dataclass
class RunTrace:
    """Everything one run produced, for diagnostics and serialization."""

    problem: object
    config: SolverConfig
    records: list
    status: str
    x0: np.ndarray
    x_final: np.ndarray
    f_star: float
    gap0: float
    b0_scale: float | None = None  # c for (scaled-)identity schemes
    matrix_snapshots: dict | None = None  # t -> direct-form B_t

    @property
    def step_records(self):
        return [r for r in self.records if r.has_step]

    @property
    def n_steps(self):
        return len(self.records) - 1

    def gap_ratios(self):
        gap0 = self.gap0 if self.gap0 > 0 else 1.0
        return np.array([r.f_gap / gap0 for r in self.records])


def _resolve_x0(problem, config):
    if config.x0 is None:
        return np.zeros(problem.d)
    return check_vector(config.x0, problem.d, "x0").copy()


def _resolve_scheme(problem, config, x0, rng):
    """Pin down B_0 once so parallel direct/inverse states agree exactly."""
    scheme = config.init_scheme
    if isinstance(scheme, str):
        scheme = bfgs_core.InitScheme.from_name(scheme)
    if scheme.kind == "c_identity" and scheme.probe is None:
        u = rng.standard_normal(problem.d)
        u /= np.linalg.norm(u)
        scheme = bfgs_core.InitScheme(kind="c_identity", probe=(x0, x0 + u))
    return scheme


def _b0_scale(problem, scheme):
    if scheme.kind == "L_identity":
        return problem.L_bound
    if scheme.kind == "mu_identity":
        return problem.mu
    if scheme.kind == "identity":
        return 1.0
    if scheme.kind == "c_identity":
        return bfgs_core.probe_scale(problem, *scheme.probe)
    return None


def run_bfgs(problem, config):
    """Run the quasi-Newton loop; returns the RunTrace.

    Stops on the first satisfied criterion: gradient norm below
    stop_grad_tol, suboptimality ratio below stop_gap_tol, or the
    iteration budget.  Line-search or SPD failures abort with the
    partial trace attached to the SolverAbort.
    """
    if config.method != "bfgs":
        raise ConfigError("run_bfgs requires method='bfgs'")
    rng = np.random.default_rng(config.seed)
    x0 = _resolve_x0(problem, config)
    scheme = _resolve_scheme(problem, config, x0, rng)
    grad_tol = (config.stop_grad_tol if config.stop_grad_tol is not None
                else problem.reference_tol)

    f_star = problem.f_star
    x = x0.copy()
    f = problem.value(x)
    g = problem.gradient(x)
    gap0 = f - f_star

    state = bfgs_core.init_state(problem, scheme, form=config.form)
    snapshots = None
    bstate = None
    if config.record_matrices:
        bstate = (state if config.form == bfgs_core.DIRECT
                  else bfgs_core.init_state(problem, scheme,
                                            form=bfgs_core.DIRECT))
        snapshots = {0: bstate.matrix.copy()}

    records = []
    status = None
    t = 0
    try:
        while True:
            grad_norm = float(np.linalg.norm(g))
            gap = f - f_star
            if grad_norm <= grad_tol:
                status = STATUS_GRAD
            elif gap0 > 0 and gap <= config.stop_gap_tol * gap0:
                status = STATUS_GAP
            elif t >= config.max_iters:
                status = STATUS_MAX_ITERS
            if status is not None:
                records.append(IterRecord(t=t, f=f, grad_norm=grad_norm,
                                          f_gap=gap))
                break

            d = bfgs_core.direction(state, g)
            gd = float(np.dot(g, d))
            ls = log_bisection(problem, x, d, config.wolfe, f0=f, gd0=gd)
            s = ls.eta * d
            y = ls.g_new - g
            records.append(IterRecord(
                t=t, f=f, grad_norm=grad_norm, f_gap=gap,
                eta=ls.eta, loops=ls.loops, evals=ls.evals,
                unit_step=ls.unit_step_accepted,
                g_dot_d=gd, sy_dot=float(np.dot(s, y)),
                s=s if config.store_vectors else None,
                y=y if config.store_vectors else None,
                g=g if config.store_vectors else None))

            bfgs_core.update(state, s, y)
            if bstate is not None:
                if bstate is not state:
                    bfgs_core.update(bstate, s, y)
                if (t + 1) % config.snapshot_stride == 0:
                    snapshots[t + 1] = bstate.matrix.copy()
            x = x + s
            f = ls.f_new
            g = ls.g_new
            t += 1
    except (LineSearchError, SpdViolationError, CurvaturePairError,
            NonDescentError) as exc:
        records.append(IterRecord(t=t, f=f, grad_norm=float(np.linalg.norm(g)),
                                  f_gap=f - f_star))
        partial = RunTrace(problem=problem, config=config, records=records,
                           status="aborted", x0=x0, x_final=x, f_star=f_star,
                           gap0=gap0, b0_scale=_b0_scale(problem, scheme),
                           matrix_snapshots=snapshots)
        raise SolverAbort(f"bfgs run aborted at t={t}: {exc}",
                          trace=partial) from exc

    return RunTrace(problem=problem, config=config, records=records,
                    status=status, x0=x0, x_final=x, f_star=f_star,
                    gap0=gap0, b0_scale=_b0_scale(problem, scheme),
                    matrix_snapshots=snapshots)


def run_gd(problem, config):
    """Gradient-descent baseline with backtracking Armijo line search.

    Emits the same trace schema as run_bfgs; the loop count is the
    number of Armijo tests per iteration.  Per-step vectors are elided
    unless store_vectors is set (baseline runs can be very long).
    """
    if config.method != "gd":
        raise ConfigError("run_gd requires method='gd'")
    x0 = _resolve_x0(problem, config)
    grad_tol = (config.stop_grad_tol if config.stop_grad_tol is not None
                else problem.reference_tol)

    f_star = problem.f_star
    x = x0.copy()
    f = problem.value(x)
    g = problem.gradient(x)
    gap0 = f - f_star

    records = []
    status = None
    t = 0
    try:
        while True:
            grad_norm = float(np.linalg.norm(g))
            gap = f - f_star
            if grad_norm <= grad_tol:
                status = STATUS_GRAD
            elif gap0 > 0 and gap <= config.stop_gap_tol * gap0:
                status = STATUS_GAP
            elif t >= config.max_iters:
                status = STATUS_MAX_ITERS
            if status is not None:
                records.append(IterRecord(t=t, f=f, grad_norm=grad_norm,
                                          f_gap=gap))
                break

            d = -g
            gd = -float(np.dot(g, g))
            eta, k_trials, f_new = backtracking(
                problem, x, d, alpha=config.wolfe.alpha,
                shrink=config.gd_shrink, f0=f, gd0=gd)
            s = eta * d
            x_new = x + s
            g_new = problem.gradient(x_new)
            y = g_new - g
            records.append(IterRecord(
                t=t, f=f, grad_norm=grad_norm, f_gap=gap,
                eta=eta, loops=k_trials, evals=k_trials + 1,
                unit_step=(eta == 1.0),
                g_dot_d=gd, sy_dot=float(np.dot(s, y)),
                s=s if config.store_vectors else None,
                y=y if config.store_vectors else None,
                g=g if config.store_vectors else None))
            x, f, g = x_new, f_new, g_new
            t += 1
    except (LineSearchError, NonDescentError) as exc:
        records.append(IterRecord(t=t, f=f, grad_norm=float(np.linalg.norm(g)),
                                  f_gap=f - f_star))
        partial = RunTrace(problem=problem, config=config, records=records,
                           status="aborted", x0=x0, x_final=x,
                           f_star=f_star, gap0=gap0)
        raise SolverAbort(f"gd run aborted at t={t}: {exc}",
                          trace=partial) from exc

    return RunTrace(problem=problem, config=config, records=records,
                    status=status, x0=x0, x_final=x, f_star=f_star,
                    gap0=gap0)


def run(problem, config):
    """Dispatch on config.method."""
    if config.method == "bfgs":
        return run_bfgs(problem, config)
    return run_gd(problem, config)


class BfgsSolver(BaseEstimator):
    """Estimator-shaped front end for the quasi-Newton loop.

    Parameters mirror SolverConfig; fit(problem, x0=None) runs the
    solver and exposes x_, f_, status_, n_iter_ and the full trace_.
    """

    def __init__(self, init_scheme="mu_identity", alpha=0.1, beta=0.9,
                 max_iters=5000, grad_tol=None, gap_tol=1e-12, seed=0,
                 record_matrices=False, snapshot_stride=1,
                 form=bfgs_core.INVERSE, store_vectors=True):
        self.init_scheme = init_scheme
        self.alpha = alpha
        self.beta = beta
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.gap_tol = gap_tol
        self.seed = seed
        self.record_matrices = record_matrices
        self.snapshot_stride = snapshot_stride
        self.form = form
        self.store_vectors = store_vectors

    def _config(self, x0):
        return SolverConfig(
            method="bfgs", init_scheme=self.init_scheme,
            wolfe=WolfeParams(self.alpha, self.beta),
            max_iters=self.max_iters, stop_grad_tol=self.grad_tol,
            stop_gap_tol=self.gap_tol, seed=self.seed,
            record_matrices=self.record_matrices,
            snapshot_stride=self.snapshot_stride, x0=x0, form=self.form,
            store_vectors=self.store_vectors)

    def fit(self, problem, x0=None):
        self.trace_ = run_bfgs(problem, self._config(x0))
        self.x_ = self.trace_.x_final
        self.f_ = self.trace_.records[-1].f
        self.status_ = self.trace_.status
        self.n_iter_ = self.trace_.n_steps
        return self


class GradientDescentSolver(BaseEstimator):
    """Estimator-shaped gradient-descent baseline."""

    def __init__(self, alpha=0.1, shrink=0.5, max_iters=200000,
                 grad_tol=None, gap_tol=1e-12, store_vectors=False):
        self.alpha = alpha
        self.shrink = shrink
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.gap_tol = gap_tol
        self.store_vectors = store_vectors

    def fit(self, problem, x0=None):
        config = SolverConfig(
            method="gd", wolfe=WolfeParams(self.alpha, 0.9),
            max_iters=self.max_iters, stop_grad_tol=self.grad_tol,
            stop_gap_tol=self.gap_tol, x0=x0, gd_shrink=self.shrink,
            store_vectors=self.store_vectors)
        self.trace_ = run_gd(problem, config)
        self.x_ = self.trace_.x_final
        self.f_ = self.trace_.records[-1].f
        self.status_ = self.trace_.status
        self.n_iter_ = self.trace_.n_steps
        return self
