"""Strongly convex benchmark objectives with exact derivative oracles.

Two families are provided: diagonal quadratics (exact constants, exact
minimizer) and a chained piecewise-cubic objective whose curvature
varies along the path, giving a nonzero Hessian-Lipschitz constant.
Every problem carries certified constants mu <= lambda_min(H) and
L_bound >= lambda_max(H) valid over the whole space, plus an M_bound
on the Hessian's Lipschitz constant; the theory checks consume these.
"""

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, InputError, ReferenceSolveError
from .validation import check_positive, check_vector

_VALIDATION_SEED = 20240917
_VALIDATION_POINTS = 4


def cubic_g(w, Delta):
    """Piecewise cubic-to-quadratic scalar link function.

    g(w) = |w|^3/3 inside [-Delta, Delta] and continues quadratically as
    Delta*w^2 - Delta^2*|w| + Delta^3/3 outside, so that g, g' and g''
    are all continuous at |w| = Delta.

    Args:
        w: scalar or array of evaluation points.
        Delta: positive branch-switch radius.

    Returns:
        Tuple (value, first_deriv, second_deriv), each with the shape of w.
    """
    Delta = check_positive(Delta, "Delta")
    w = np.asarray(w, dtype=float)
    aw = np.abs(w)
    inner = aw <= Delta
    value = np.where(inner, aw**3 / 3.0,
                     Delta * w**2 - Delta**2 * aw + Delta**3 / 3.0)
    first = np.where(inner, w * aw, 2.0 * Delta * w - Delta**2 * np.sign(w))
    second = 2.0 * np.minimum(aw, Delta)
    if value.ndim == 0:
        return float(value), float(first), float(second)
    return value, first, second


class Problem:
    """Twice-differentiable strongly convex objective with certified constants.

    Attributes:
        d: dimension.
        kind: "quadratic" or "cubic_chain".
        mu: strong-convexity constant (> 0).
        L_bound: certified upper bound on the gradient Lipschitz constant.
        M_bound: certified upper bound on the Hessian Lipschitz constant.

    The reference minimizer is computed lazily by a damped Newton solve
    and cached; instances are immutable after construction and safe to
    share across threads.
    """

    kind = "abstract"

    def __init__(self, d, mu, L_bound, M_bound):
        self.d = int(d)
        self.mu = float(mu)
        self.L_bound = float(L_bound)
        self.M_bound = float(M_bound)
        if self.d < 1:
            raise ConfigError("dimension must be >= 1")
        if not self.mu > 0:
            raise ConfigError("mu must be positive")
        if self.L_bound < self.mu:
            raise ConfigError("L_bound must be >= mu")
        if self.M_bound < 0:
            raise ConfigError("M_bound must be >= 0")
        self._x_star = None
        self._f_star = None

    @property
    def kappa(self):
        return self.L_bound / self.mu

    @property
    def reference_tol(self):
        return 1e-12 * max(1.0, self.L_bound)

    @property
    def x_star(self):
        if self._x_star is None:
            reference_solution(self)
        return self._x_star

    @property
    def f_star(self):
        if self._f_star is None:
            reference_solution(self)
        return self._f_star

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def hessian_at_star(self):
        return self.hessian(self.x_star)


class QuadraticProblem(Problem):
    """f(x) = 1/2 sum_i lam_i x_i^2 with all lam_i > 0.

    Exact oracle problem: mu and L_bound are the extreme eigenvalues,
    M_bound = 0, and the minimizer is the origin.
    """

    kind = "quadratic"

    def __init__(self, eigenvalues):
        eigenvalues = check_vector(eigenvalues, name="eigenvalues")
        if np.any(eigenvalues <= 0):
            raise ConfigError("quadratic eigenvalues must all be positive")
        super().__init__(len(eigenvalues), eigenvalues.min(),
                         eigenvalues.max(), 0.0)
        self.eigenvalues = eigenvalues
        self._x_star = np.zeros(self.d)
        self._f_star = 0.0

    def value(self, x):
        x = check_vector(x, self.d)
        return float(0.5 * np.dot(self.eigenvalues, x * x))

    def gradient(self, x):
        x = check_vector(x, self.d)
        return self.eigenvalues * x

    def hessian(self, x):
        check_vector(x, self.d)
        return np.diag(self.eigenvalues)


class CubicChainProblem(Problem):
    """Chain-coupled piecewise-cubic objective.

    f(x) = (alpha_f/12) * (sum_i g(x_i - x_{i+1}) - beta_f * x_1)
           + (lam/2) * ||x||^2

    with g from :func:`cubic_g` over the canonical-basis chain
    differences.  Writing D for the (d-1) x d forward-difference
    operator, the Hessian is (alpha_f/12) D' diag(g''(Dx)) D + lam*I:
    tridiagonal plus identity, assembled symmetric by construction.

    Certified constants use ||D||^2 <= 4 and 0 <= g'' <= 2*Delta:
    mu = lam, L_bound = 2*alpha_f*Delta/3 + lam, and (g'' being
    2-Lipschitz) M_bound = 4*alpha_f/3.  They are spot-validated by
    eigenvalue sampling at construction.
    """

    kind = "cubic_chain"

    def __init__(self, d, alpha_f, beta_f, lam=1.0, Delta=1.0, validate=True):
        if d < 2:
            raise ConfigError("cubic chain needs d >= 2")
        alpha_f = check_positive(alpha_f, "alpha_f")
        lam = check_positive(lam, "lam")
        Delta = check_positive(Delta, "Delta")
        L_bound = 2.0 * alpha_f * Delta / 3.0 + lam
        M_bound = 4.0 * alpha_f / 3.0
        super().__init__(d, lam, L_bound, M_bound)
        self.alpha_f = alpha_f
        self.beta_f = float(beta_f)
        self.lam = lam
        self.Delta = Delta
        if validate:
            self._validate_constants()

    def _chain_diff(self, x):
        return x[:-1] - x[1:]

    def value(self, x):
        x = check_vector(x, self.d)
        gv, _, _ = cubic_g(self._chain_diff(x), self.Delta)
        return float(self.alpha_f / 12.0 * (gv.sum() - self.beta_f * x[0])
                     + 0.5 * self.lam * np.dot(x, x))

    def gradient(self, x):
        x = check_vector(x, self.d)
        _, gp, _ = cubic_g(self._chain_diff(x), self.Delta)
        out = np.zeros(self.d)
        out[:-1] += gp
        out[1:] -= gp
        out[0] -= self.beta_f
        return self.alpha_f / 12.0 * out + self.lam * x

    def hessian(self, x):
        x = check_vector(x, self.d)
        _, _, gpp = cubic_g(self._chain_diff(x), self.Delta)
        w = self.alpha_f / 12.0 * gpp
        H = np.zeros((self.d, self.d))
        idx = np.arange(self.d - 1)
        H[idx, idx] += w
        H[idx + 1, idx + 1] += w
        H[idx, idx + 1] -= w
        H[idx + 1, idx] -= w
        H[np.arange(self.d), np.arange(self.d)] += self.lam
        return H

    def _validate_constants(self):
        rng = np.random.default_rng(_VALIDATION_SEED)
        tol = 1e-9
        for scale in np.linspace(0.5, 3.0, _VALIDATION_POINTS):
            x = scale * self.Delta * rng.standard_normal(self.d)
            eigs = np.linalg.eigvalsh(self.hessian(x))
            if eigs.min() < self.mu - tol or eigs.max() > self.L_bound + tol:
                raise ConfigError(
                    "certified eigenvalue bounds violated: sampled spectrum "
                    f"[{eigs.min():.6g}, {eigs.max():.6g}] outside "
                    f"[{self.mu:.6g}, {self.L_bound:.6g}]")


def make_quadratic_problem(d, eigenvalues):
    """Diagonal quadratic with the given positive eigenvalues."""
    eigenvalues = check_vector(eigenvalues, name="eigenvalues")
    if len(eigenvalues) != d:
        raise ConfigError(f"expected {d} eigenvalues, got {len(eigenvalues)}")
    return QuadraticProblem(eigenvalues)


def make_cubic_problem(d, kappa_target, Delta=1.0, beta_f=1.0):
    """Cubic chain problem targeting a given condition number.

    Fixes lam = 1 (so mu = 1) and solves the certified L_bound formula
    for alpha_f:  alpha_f = 3 (kappa_target - 1) / (2 Delta), giving
    L_bound = kappa_target exactly.  The true condition number may be
    slightly smaller because the bounds are conservative.
    """
    if d < 2:
        raise ConfigError("cubic chain needs d >= 2")
    if not kappa_target > 1:
        raise ConfigError("kappa_target must exceed 1")
    Delta = check_positive(Delta, "Delta")
    alpha_f = 3.0 * (kappa_target - 1.0) / (2.0 * Delta)
    return CubicChainProblem(d, alpha_f, beta_f, lam=1.0, Delta=Delta)


def evaluate(problem, x, order="value"):
    """Functional dispatch over the oracle orders.

    order "value" returns a float, "gradient" a vector, "hessian" the
    dense symmetric matrix.
    """
    if order == "value":
        return problem.value(x)
    if order == "gradient":
        return problem.gradient(x)
    if order == "hessian":
        return problem.hessian(x)
    raise InputError(f"unknown evaluation order {order!r}")


def reference_solution(problem, tol=None, x0=None, max_steps=500):
    """High-accuracy minimizer via damped Newton; cached on the problem.

    The suboptimality diagnostics divide by f_t - f_star, so the
    reference must be far more accurate than the runs being measured:
    default tolerance is 1e-12 * max(1, L_bound) on the gradient norm.

    Returns:
        (x_star, f_star).

    Raises:
        ReferenceSolveError: no convergence within max_steps Newton steps.
    """
    if tol is None:
        tol = problem.reference_tol
    if x0 is None and problem._x_star is not None:
        return problem._x_star, problem._f_star

    x = np.zeros(problem.d) if x0 is None else check_vector(x0, problem.d)
    f = problem.value(x)
    # Near the minimizer the per-step decrease underflows the float
    # resolution of f, so the Armijo test gets a noise allowance; the
    # gradient check above still governs actual convergence.
    noise = 16.0 * np.finfo(float).eps
    for _ in range(max_steps):
        g = problem.gradient(x)
        if np.linalg.norm(g) <= tol:
            break
        H = problem.hessian(x)
        p = -scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)
        step = 1.0
        gp = np.dot(g, p)
        for _ in range(60):
            x_new = x + step * p
            f_new = problem.value(x_new)
            if f_new <= f + 1e-4 * step * gp + noise * abs(f):
                break
            step *= 0.5
        x, f = x_new, f_new
    else:
        raise ReferenceSolveError(
            f"Newton refinement stalled above tol={tol:.3g} after "
            f"{max_steps} steps (ill-configured problem?)")

    if x0 is None and problem._x_star is None:
        problem._x_star = x
        problem._f_star = f
    return x, f


def finite_diff_grad_check(problem, x, h=1e-6):
    """Max relative mismatch of central differences vs analytic gradient.

    Relative error uses a 1 + |analytic| denominator so the check stays
    well-defined at stationary points.
    """
    x = check_vector(x, problem.d)
    check_positive(h, "h")
    g = problem.gradient(x)
    worst = 0.0
    for i in range(problem.d):
        e = np.zeros(problem.d)
        e[i] = h
        fd = (problem.value(x + e) - problem.value(x - e)) / (2.0 * h)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst
