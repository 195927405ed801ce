"""Diagnostics and bound verification over solver traces.

Everything here is a pure computation over a finished RunTrace plus the
problem's certified constants: weighted per-iteration ratios, the
matrix-discrepancy potential, the scaled suboptimality coefficient C_t,
the Newton-alignment ratio rho_t, the delta constants driving the
unit-step window, and the linear/superlinear/loop-count envelopes.  All
certified constants enter conservatively (upper bounds on L and M), so
every inequality checked below keeps its proven direction.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bfgs import InitScheme
from .exceptions import ConfigError, InputError, ReferenceSolveError
from .validation import check_spd, check_square_matrix, check_vector

ENVELOPE_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Weighting
# ---------------------------------------------------------------------------

class WeightScheme:
    """SPD weight P with precomputed symmetric square roots.

    Vectors transform as g -> P^{-1/2} g, s -> P^{1/2} s, y -> P^{-1/2} y
    and operators as B -> P^{-1/2} B P^{-1/2}.  A scalar fast path
    covers P = c*I.
    """

    def __init__(self, kind, scale=None, matrix=None):
        self.kind = kind
        self.scale = scale
        if matrix is not None:
            matrix = check_square_matrix(matrix, name="P")
            vals, vecs = np.linalg.eigh(0.5 * (matrix + matrix.T))
            floor = 1e-14 * vals.max()
            if vals.max() <= 0:
                raise ConfigError("weight matrix must be positive definite")
            vals = np.maximum(vals, floor)
            self.eigenvalues = vals
            self._vecs = vecs
            self.sqrt = (vecs * np.sqrt(vals)) @ vecs.T
            self.inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
            self.matrix = (vecs * vals) @ vecs.T
        else:
            self.eigenvalues = None
            self.matrix = None
            self.sqrt = None
            self.inv_sqrt = None

    @classmethod
    def scaled_identity(cls, L):
        return cls("scaled_identity_L", scale=float(L))

    @classmethod
    def hessian_at_star(cls, problem):
        return cls("hessian_at_star", matrix=problem.hessian_at_star())

    @classmethod
    def custom(cls, P):
        return cls("custom", matrix=P)

    def apply_sqrt(self, v):
        """P^{1/2} v; v may be a vector or a stack of row vectors."""
        if self.scale is not None:
            return math.sqrt(self.scale) * np.asarray(v, dtype=float)
        return np.asarray(v, dtype=float) @ self.sqrt

    def apply_inv_sqrt(self, v):
        if self.scale is not None:
            return np.asarray(v, dtype=float) / math.sqrt(self.scale)
        return np.asarray(v, dtype=float) @ self.inv_sqrt

    def weighted_operator(self, B):
        """P^{-1/2} B P^{-1/2}."""
        if self.scale is not None:
            return np.asarray(B, dtype=float) / self.scale
        W = self.inv_sqrt @ B @ self.inv_sqrt
        return 0.5 * (W + W.T)

    def psi_of_scaled_identity(self, c, d):
        """psi of the weighted operator for B_0 = c*I."""
        if self.scale is not None:
            r = c / self.scale
            return d * (r - 1.0 - math.log(r))
        r = c / self.eigenvalues
        return float(np.sum(r - 1.0 - np.log(r)))


# ---------------------------------------------------------------------------
# Scalar diagnostics
# ---------------------------------------------------------------------------

def psi(A):
    """Matrix discrepancy potential Tr(A) - d - log det(A).

    Nonnegative on SPD matrices, zero exactly at the identity.  The log
    determinant comes from a Cholesky factorization, which doubles as
    the SPD domain check.
    """
    A = check_square_matrix(A, name="A")
    chol = check_spd(A, "A")
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return float(np.trace(A)) - A.shape[0] - logdet


def omega(x):
    """Gauge x - log(1 + x) on (-1, inf); zero at 0, positive elsewhere."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= -1.0):
        raise InputError("omega requires x > -1")
    out = x - np.log1p(x)
    return float(out) if out.ndim == 0 else out


def compute_Ct(f_t, f_star, mu, M_bound):
    """Scaled square-root suboptimality (M / mu^{3/2}) sqrt(2 (f_t - f*))."""
    gap = f_t - f_star
    if gap < -1e-12:
        raise ReferenceSolveError(
            f"f_t undershoots the reference optimum by {-gap:.3g}")
    return M_bound / mu**1.5 * math.sqrt(2.0 * max(gap, 0.0))


def compute_rho(g, d, H_star):
    """Newton-alignment ratio (-g'd) / (d' H* d).

    Equals 1 when d is the exact Newton direction in the optimum's
    metric; the superlinear phase is characterized by rho_t -> 1.
    """
    d = check_vector(d, name="d")
    if float(np.dot(d, d)) == 0.0:
        raise InputError("rho is undefined for a zero direction")
    g = check_vector(g, len(d), "g")
    quad = float(d @ H_star @ d)
    return float(-np.dot(g, d)) / quad


@dataclass
class DeltaConstants:
    """Line-search-parameter constants controlling the unit-step window
    [delta2, delta3], the suboptimality gate delta1, and the superlinear
    envelope coefficients delta4..delta8."""

    delta1: float
    delta2: float
    delta3: float
    delta4: float
    delta5: float
    delta6: float
    delta7: float
    delta8: float


def delta_constants(alpha, beta):
    """Evaluate the eight constants from the line search parameters.

    Requires 0 < alpha < 1/2 and alpha < beta < 1; always yields
    0 < delta1 < delta2 < 1 < delta3.
    """
    if not (0.0 < alpha < 0.5 and alpha < beta < 1.0):
        raise ConfigError(
            f"need 0 < alpha < 1/2 and alpha < beta < 1, got ({alpha}, {beta})")
    d1 = min(1.0 / 6.0, math.sqrt(2.0 * (1.0 - alpha)) - 1.0,
             1.0 / math.sqrt(1.0 - beta) - 1.0)
    d2 = max(7.0 / 8.0, 1.0 / math.sqrt(2.0 * (1.0 - alpha)))
    d3 = 1.0 / math.sqrt(1.0 - beta)
    d4 = 1.0 / min(omega(d2 - 1.0), omega(d3 - 1.0))
    d5 = max(2.0 + 2.0 / d2, 4.0 * d3) / (2.0 * d2 - 1.0 - d1)
    d6 = math.log(1.0 / (2.0 * alpha * (1.0 - beta)))
    d7 = 1.0 + d4 * d6 + d5
    d8 = 1.0 + 2.0 * d7 + (2.0 * d2 - d1 - math.log(d2)) / (2.0 * d2 - 1.0 - d1)
    return DeltaConstants(d1, d2, d3, d4, d5, d6, d7, d8)


def weighted_quantities(g, s, y, f_t, f_next, f_star, weight):
    """Per-step weighted ratios (p_hat, q_hat, m_hat, n_hat, cos_theta_hat).

    p_hat and n_hat are weight-invariant because g_hat's_hat = g's and
    y_hat's_hat = y's; q_hat, m_hat and the angle depend on the weight.

    Raises:
        InputError: zero step or zero gap (stationary point; callers
            omit such rows).
    """
    gs = float(np.dot(g, s))
    ys = float(np.dot(y, s))
    gap = f_t - f_star
    if gap <= 0.0 or gs == 0.0:
        raise InputError("weighted ratios are undefined at a stationary point")
    g_hat = weight.apply_inv_sqrt(g)
    s_hat = weight.apply_sqrt(s)
    gnorm2 = float(np.dot(g_hat, g_hat))
    snorm2 = float(np.dot(s_hat, s_hat))
    p_hat = (f_t - f_next) / (-gs)
    q_hat = gnorm2 / gap
    m_hat = ys / snorm2
    n_hat = ys / (-gs)
    cos_theta = min(-gs / math.sqrt(gnorm2 * snorm2), 1.0)
    return p_hat, q_hat, m_hat, n_hat, cos_theta


# ---------------------------------------------------------------------------
# Trace-level diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRow:
    """Weighted per-iteration ratios in the Hessian-at-optimum metric,
    plus the weight-independent C_t and rho_t."""

    t: int
    p_hat: float
    q_hat: float
    m_hat: float
    n_hat: float
    cos_theta_hat: float
    C_t: float
    rho_t: float
    contraction_factor: float
    psi_Bbar: float | None = None
    psi_Btilde: float | None = None


@dataclass
class TraceArrays:
    """Vectorized view of a trace's step records under one weight."""

    t: np.ndarray
    f: np.ndarray
    f_next: np.ndarray
    gap: np.ndarray
    eta: np.ndarray
    loops: np.ndarray
    unit: np.ndarray
    gs: np.ndarray          # g's per step
    ys: np.ndarray          # y's per step
    p_hat: np.ndarray
    q_hat: np.ndarray
    m_hat: np.ndarray
    n_hat: np.ndarray
    cos_theta: np.ndarray
    C: np.ndarray           # C_t per step record
    rho: np.ndarray | None
    yhat_sq_over_sy: np.ndarray


def _stacked_vectors(trace):
    steps = trace.step_records
    if not steps or steps[0].s is None:
        return None
    S = np.stack([r.s for r in steps])
    Y = np.stack([r.y for r in steps])
    G = np.stack([r.g for r in steps])
    return S, Y, G


def trace_arrays(trace, weight, star_weight=None):
    """Assemble vectorized diagnostics for the trace's step records.

    rho_t always uses the Hessian-at-optimum metric; pass star_weight
    when `weight` is a different scheme (it defaults to `weight` when
    that already is the hessian_at_star scheme).
    """
    steps = trace.step_records
    stacked = _stacked_vectors(trace)
    if stacked is None:
        raise InputError("trace has no stored step vectors")
    S, Y, G = stacked
    problem = trace.problem

    t = np.array([r.t for r in steps])
    f = np.array([r.f for r in steps])
    f_next = np.array([trace.records[i + 1].f for i in range(len(steps))])
    gap = f - trace.f_star
    eta = np.array([r.eta for r in steps])
    loops = np.array([r.loops for r in steps])
    unit = np.array([bool(r.unit_step) for r in steps])
    gs = np.einsum("ij,ij->i", G, S)
    ys = np.einsum("ij,ij->i", Y, S)

    G_hat = weight.apply_inv_sqrt(G)
    S_hat = weight.apply_sqrt(S)
    Y_hat = weight.apply_inv_sqrt(Y)
    gnorm2 = np.einsum("ij,ij->i", G_hat, G_hat)
    snorm2 = np.einsum("ij,ij->i", S_hat, S_hat)
    ynorm2 = np.einsum("ij,ij->i", Y_hat, Y_hat)

    p_hat = (f - f_next) / (-gs)
    q_hat = gnorm2 / gap
    m_hat = ys / snorm2
    n_hat = ys / (-gs)
    cos_theta = np.minimum(-gs / np.sqrt(gnorm2 * snorm2), 1.0)
    C = (problem.M_bound / problem.mu**1.5) * np.sqrt(2.0 * np.maximum(gap, 0.0))

    if star_weight is None and weight.kind == "hessian_at_star":
        star_weight = weight
    if star_weight is not None:
        S_star = (S_hat if star_weight is weight
                  else star_weight.apply_sqrt(S))
        snorm2_star = np.einsum("ij,ij->i", S_star, S_star)
        rho = eta * (-gs) / snorm2_star
    else:
        rho = None

    return TraceArrays(t=t, f=f, f_next=f_next, gap=gap, eta=eta, loops=loops,
                       unit=unit, gs=gs, ys=ys, p_hat=p_hat, q_hat=q_hat,
                       m_hat=m_hat, n_hat=n_hat, cos_theta=cos_theta, C=C,
                       rho=rho, yhat_sq_over_sy=ynorm2 / ys)


def trace_diagnostics(trace):
    """DiagnosticsRow list in the Hessian-at-optimum weight, with
    potential values attached where matrix snapshots exist."""
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    psi_bar, psi_tilde = snapshot_psis(trace, star)
    rows = []
    for i, ti in enumerate(arr.t):
        factor = (arr.p_hat[i] * arr.q_hat[i] * arr.n_hat[i]
                  * arr.cos_theta[i]**2 / arr.m_hat[i])
        rows.append(DiagnosticsRow(
            t=int(ti), p_hat=arr.p_hat[i], q_hat=arr.q_hat[i],
            m_hat=arr.m_hat[i], n_hat=arr.n_hat[i],
            cos_theta_hat=arr.cos_theta[i], C_t=arr.C[i], rho_t=arr.rho[i],
            contraction_factor=factor,
            psi_Bbar=psi_bar.get(int(ti)), psi_Btilde=psi_tilde.get(int(ti))))
    return rows


def snapshot_psis(trace, star_weight=None):
    """Potential values of the weighted snapshots, keyed by t.

    Returns (psi_Bbar, psi_Btilde): the L-scaled weighting B_t / L and
    the Hessian-at-optimum weighting.  Empty dicts when the run kept no
    snapshots.
    """
    if not trace.matrix_snapshots:
        return {}, {}
    if star_weight is None:
        star_weight = WeightScheme.hessian_at_star(trace.problem)
    L = trace.problem.L_bound
    psi_bar, psi_tilde = {}, {}
    for t, B in sorted(trace.matrix_snapshots.items()):
        psi_bar[t] = psi(B / L)
        psi_tilde[t] = psi(star_weight.weighted_operator(B))
    return psi_bar, psi_tilde


def initial_psis(trace):
    """(psi(B0/L), psi of the star-weighted B0) from the trace's B0."""
    problem = trace.problem
    star = WeightScheme.hessian_at_star(problem)
    if trace.b0_scale is not None:
        c = trace.b0_scale
        psi_bar = problem.d * (c / problem.L_bound - 1.0
                               - math.log(c / problem.L_bound))
        psi_tilde = star.psi_of_scaled_identity(c, problem.d)
        return psi_bar, psi_tilde
    if trace.matrix_snapshots and 0 in trace.matrix_snapshots:
        B0 = trace.matrix_snapshots[0]
    else:
        scheme = trace.config.init_scheme
        if isinstance(scheme, InitScheme) and scheme.matrix is not None:
            B0 = scheme.matrix
        else:
            raise InputError("cannot reconstruct B0 for this trace")
    return psi(B0 / problem.L_bound), psi(star.weighted_operator(B0))


# ---------------------------------------------------------------------------
# Theoretical envelopes
# ---------------------------------------------------------------------------

def linear_envelope_value(t, psi_bbar0, kappa, alpha, beta):
    """Global linear envelope (1 - e^{-psi/t} 2 alpha (1-beta) / kappa)^t."""
    if t < 1:
        raise InputError("the linear envelope starts at t = 1")
    rate = 1.0 - math.exp(-psi_bbar0 / t) * 2.0 * alpha * (1.0 - beta) / kappa
    return rate**t


def linear_envelope_value_LI(t, kappa, alpha, beta):
    """Linear envelope for B0 = L*I: (1 - 2 alpha (1-beta)/kappa)^t."""
    return (1.0 - 2.0 * alpha * (1.0 - beta) / kappa)**t


def linear_envelope_value_muI(t, d, kappa, alpha, beta):
    """Linear envelope for B0 = mu*I; after d log(kappa) iterations the
    condition-number factor degrades only by 3."""
    general = linear_envelope_value(t, d * math.log(kappa), kappa, alpha, beta)
    if t >= d * math.log(kappa):
        settled = (1.0 - 2.0 * alpha * (1.0 - beta) / (3.0 * kappa))**t
        return min(general, settled)
    return general


def free_rate_threshold(psi_btilde0, psi_bbar0, C0, kappa, alpha, beta):
    """Iteration count after which the condition-number-free linear rate
    is guaranteed."""
    return (psi_btilde0 + 3.0 * C0 * psi_bbar0
            + 9.0 * C0 * kappa / (alpha * (1.0 - beta)))


def free_rate_envelope_value(t, alpha, beta):
    """Condition-number-independent rate (1 - 2 alpha (1-beta)/3)^t."""
    return (1.0 - 2.0 * alpha * (1.0 - beta) / 3.0)**t


def free_rate_threshold_LI(d, kappa, C0, alpha, beta):
    return d * kappa + 9.0 * C0 * kappa / (alpha * (1.0 - beta))


def free_rate_threshold_muI(d, kappa, C0, alpha, beta):
    return ((1.0 + 3.0 * C0) * d * math.log(kappa)
            + 9.0 * C0 * kappa / (alpha * (1.0 - beta)))


def superlinear_constants(psi_btilde0, psi_bbar0, C0, kappa, alpha, beta, deltas=None):
    """Superlinear envelope constant K and validity threshold t0.

    The envelope is (K/t)^t for t > t0 with
        t0 = max(psi(Bbar0), 3 kappa/(alpha(1-beta)) * log(C0/delta1))
        K  = delta6 * t0 + delta7 * psi(Btilde0) + delta8 * S,
        S  = C0 * psi(Bbar0) + 3 C0 kappa / (alpha (1-beta)).
    The log term is clamped at zero: for C0 <= delta1 the suboptimality
    gate already holds at t = 0, which also covers the exact-Hessian
    case C0 = 0 where the literal logarithm diverges.
    """
    if deltas is None:
        deltas = delta_constants(alpha, beta)
    log_term = math.log(C0 / deltas.delta1) if C0 > deltas.delta1 else 0.0
    t0 = max(psi_bbar0, 3.0 * kappa / (alpha * (1.0 - beta)) * log_term)
    c_sum = C0 * psi_bbar0 + 3.0 * C0 * kappa / (alpha * (1.0 - beta))
    K = deltas.delta6 * t0 + deltas.delta7 * psi_btilde0 + deltas.delta8 * c_sum
    return K, t0


def superlinear_envelope_value(t, K):
    """Superlinear envelope value (K/t)^t, computed in log space.

    Values at or above 1 are vacuous; anything too large for a float
    is reported as inf so callers treat it the same way.
    """
    if t < 1:
        raise InputError("the superlinear envelope starts at t = 1")
    if K <= 0:
        return 0.0
    log_value = t * (math.log(K) - math.log(t))
    return math.exp(log_value) if log_value < 700.0 else math.inf


def loop_count_cap(C_t, rho_t, alpha, beta):
    """Per-iteration cap on the bracketing loop count."""
    a = 1.0 + (1.0 - beta) * (1.0 + 2.0 * C_t) / (beta - alpha)
    b = (1.0 + math.log2(2.0 * (1.0 - alpha) * (1.0 + C_t))
         + abs(math.log2(rho_t)))
    return 2.0 + math.log2(a) + 2.0 * math.log2(b)


def avg_loop_count_cap(t, sigma, psi_btilde0, alpha, beta):
    """Cap on the running-average loop count after t iterations."""
    if t < 1:
        raise InputError("the average loop bound starts at t = 1")
    first = math.log2(1.0 + (1.0 - beta) / (beta - alpha)
                      + 2.0 * (1.0 - beta) / (beta - alpha) * sigma / t)
    inner = (math.log2(16.0 * (1.0 - alpha)) + math.log2(1.0 + sigma / t)
             + (6.0 * psi_btilde0 + 12.0 * sigma) / t)
    return 2.0 + first + 2.0 * math.log2(inner)


def sigma_constant(psi_bbar0, C0, kappa, alpha, beta):
    """sigma = (psi(Bbar0) + 3 kappa / (alpha (1-beta))) * C0."""
    return (psi_bbar0 + 3.0 * kappa / (alpha * (1.0 - beta))) * C0


@dataclass
class ComplexityReport:
    """Three-way iteration-complexity estimate for one initialization."""

    scheme: str
    linear_kappa: float
    linear_free: float
    superlinear: float

    @property
    def best(self):
        values = {"linear_kappa": self.linear_kappa,
                  "linear_free": self.linear_free,
                  "superlinear": self.superlinear}
        return min(values, key=values.get)


def complexity_report(d, kappa, C0, epsilon, scheme, c_over_mu=None,
                      c_over_L=None):
    """Evaluate the three complexity branches for B0 in {L*I, mu*I, c*I}.

    Branches: the kappa-dependent linear phase, the burn-in plus
    condition-number-free linear phase, and the superlinear phase
    solved for (Omega/t)^t = epsilon.  Values are the budget estimates
    with absolute constants dropped.
    """
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0, 1)")
    log_eps = math.log(1.0 / epsilon)
    if isinstance(scheme, InitScheme):
        scheme = scheme.kind
    scheme = InitScheme.from_name(scheme).kind

    if scheme == "L_identity":
        burn = (d + C0) * kappa
        omega_c = d * kappa + C0 * kappa
        linear_kappa = kappa * log_eps
    elif scheme == "mu_identity":
        burn = C0 * (d * math.log(kappa) + kappa)
        omega_c = C0 * (d * math.log(kappa) + kappa)
        linear_kappa = d * math.log(kappa) + kappa * log_eps
    elif scheme == "c_identity":
        if c_over_mu is None or c_over_L is None:
            raise ConfigError("c_identity complexity needs c/mu and c/L")
        bar = d * (c_over_L - 1.0 - math.log(c_over_L))
        tilde = d * (c_over_mu - 1.0 + math.log(kappa / c_over_mu))
        burn = tilde + C0 * bar + C0 * kappa
        omega_c = burn
        linear_kappa = bar + kappa * log_eps
    else:
        raise ConfigError(f"complexity branches undefined for {scheme!r}")

    linear_free = burn + log_eps
    superlinear = log_eps / math.log(0.5 + math.sqrt(0.25 + log_eps / omega_c))
    return ComplexityReport(scheme=scheme, linear_kappa=linear_kappa,
                            linear_free=linear_free, superlinear=superlinear)


# ---------------------------------------------------------------------------
# Check results and verifiers
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    """Outcome of one verifier.

    passed is None when the check was not applicable (missing
    snapshots, method mismatch, or no iterations past a threshold).
    margin is the worst violation amount; passing checks report the
    (negative or zero) slack that remained.  first_fail_t locates the
    earliest violating iteration when the check fails.
    """

    name: str
    passed: bool | None
    margin: float = float("nan")
    n_checked: int = 0
    detail: str = ""
    first_fail_t: int | None = None

    @property
    def applicable(self):
        return self.passed is not None


@dataclass
class BoundReport:
    """Ordered collection of CheckResults with text/machine rendering."""

    checks: list = field(default_factory=list)

    def add(self, check):
        self.checks.append(check)

    @property
    def all_pass(self):
        return all(c.passed for c in self.checks if c.applicable)

    def first_failure(self):
        for c in self.checks:
            if c.applicable and not c.passed:
                return c
        return None

    def render(self):
        lines = ["bound verification report", "=" * 25]
        for c in self.checks:
            if not c.applicable:
                status = "not applicable"
            else:
                status = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.name:<32s} {status:<14s} "
                         f"margin={c.margin:.6g} n={c.n_checked}")
            if c.detail:
                lines.append(f"    {c.detail}")
        lines.append("")
        lines.append("machine-readable:")
        for c in self.checks:
            passed = "na" if not c.applicable else str(bool(c.passed)).lower()
            lines.append(f"check={c.name} pass={passed} margin={c.margin:.17g}")
        return "\n".join(lines)


def _result(name, violations, n, detail="", t_of=None):
    """Build a CheckResult from an array of violation amounts
    (positive = violated); t_of maps violation entries to iteration
    indices for failure localization."""
    if n == 0:
        return CheckResult(name, None, float("nan"), 0, detail or "no rows")
    violations = np.asarray(violations, dtype=float)
    worst = float(np.max(violations)) if len(violations) else float("-inf")
    first_fail = None
    if worst > 0.0 and t_of is not None:
        first_fail = int(np.asarray(t_of)[np.argmax(violations > 0.0)])
    return CheckResult(name, worst <= 0.0, worst, n, detail, first_fail)


def check_monotone_decrease(trace):
    f = np.array([r.f for r in trace.records])
    viol = f[1:] - f[:-1]
    ts = [r.t for r in trace.records[1:]]
    return _result("monotone_decrease", viol, len(viol), t_of=ts)


def check_armijo_ratio(trace):
    """Per-step decrease ratio (f_t - f_{t+1}) / (-g's) >= alpha."""
    alpha = trace.config.wolfe.alpha
    steps = trace.step_records
    f_next = np.array([trace.records[i + 1].f for i in range(len(steps))])
    f = np.array([r.f for r in steps])
    gs = np.array([r.g_dot_d * r.eta for r in steps])
    ratio = (f - f_next) / (-gs)
    viol = (alpha - 1e-12) - ratio
    return _result("armijo_decrease_ratio", viol, len(viol),
                   t_of=[r.t for r in steps])


def check_curvature_ratio(trace):
    """Per-step curvature gain y's / (-g's) >= 1 - beta."""
    if trace.config.method != "bfgs":
        return CheckResult("curvature_gain_ratio", None,
                           detail="curvature condition not enforced for gd")
    beta = trace.config.wolfe.beta
    steps = trace.step_records
    gs = np.array([r.g_dot_d * r.eta for r in steps])
    ys = np.array([r.sy_dot for r in steps])
    ratio = ys / (-gs)
    viol = (1.0 - beta - 1e-12) - ratio
    return _result("curvature_gain_ratio", viol, len(viol),
                   t_of=[r.t for r in steps])


def check_one_step_identity(trace, weight, name=None, floor=1e-14):
    """Residual of gap_{t+1} = (1 - p q n cos^2/m) gap_t, rows with
    gap_t >= floor * gap_0."""
    name = name or f"one_step_identity_{weight.kind}"
    arr = trace_arrays(trace, weight)
    keep = arr.gap >= floor * trace.gap0
    factor = (arr.p_hat * arr.q_hat * arr.n_hat * arr.cos_theta**2
              / arr.m_hat)[keep]
    gap = arr.gap[keep]
    gap_next = arr.f_next[keep] - trace.f_star
    residual = np.abs(gap_next - (1.0 - factor) * gap) / gap
    viol = residual - 1e-8
    detail = (f"max residual {residual.max():.3g}" if len(residual) else "")
    return _result(name, viol, int(keep.sum()), detail, t_of=arr.t[keep])


def check_yhat_cap(trace, weight, name=None):
    """Weighted curvature cap ||y_hat||^2 / y_hat's_hat <= 1 (+ C_t)."""
    name = name or f"yhat_cap_{weight.kind}"
    arr = trace_arrays(trace, weight)
    if weight.kind == "scaled_identity_L":
        cap = 1.0 + 1e-10
    else:
        cap = 1.0 + arr.C + 1e-8
    viol = arr.yhat_sq_over_sy - cap
    return _result(name, viol, len(viol), t_of=arr.t)


def check_q_lower_bound(trace, weight, name=None):
    """q_hat >= 2/kappa (L weight) or 2/(1+C_t)^2 (optimum weight)."""
    name = name or f"q_lower_bound_{weight.kind}"
    arr = trace_arrays(trace, weight)
    if weight.kind == "scaled_identity_L":
        floor = 2.0 / trace.problem.kappa - 1e-10
        floor = np.full(len(arr.q_hat), floor)
    else:
        floor = 2.0 / (1.0 + arr.C)**2 - 1e-8
    viol = floor - arr.q_hat
    return _result(name, viol, len(viol), t_of=arr.t)


def check_potential_recursion(trace, weight, name=None):
    """One-step potential recursion over consecutive snapshots:
    psi(B_{t+1}) <= psi(B_t) + ||y_hat||^2/y_hat's_hat - 1
    + log(cos^2 theta_hat / m_hat)."""
    name = name or f"potential_recursion_{weight.kind}"
    if not trace.matrix_snapshots:
        return CheckResult(name, None, detail="not evaluated (no snapshots)")
    arr = trace_arrays(trace, weight)
    psis = {t: psi(weight.weighted_operator(B))
            for t, B in trace.matrix_snapshots.items()}
    viols = []
    ts = []
    for i, t in enumerate(arr.t):
        t = int(t)
        if t not in psis or (t + 1) not in psis:
            continue
        rhs = (psis[t] + arr.yhat_sq_over_sy[i] - 1.0
               + math.log(arr.cos_theta[i]**2 / arr.m_hat[i]))
        slack = 1e-8 * (1.0 + abs(psis[t]))
        viols.append(psis[t + 1] - rhs - slack)
        ts.append(t)
    if not viols:
        return CheckResult(name, None, detail="no consecutive snapshots")
    return _result(name, np.array(viols), len(viols), t_of=ts)


def check_omega_sum(trace, name="omega_sum_prefix"):
    """Prefix sums of omega(rho_t - 1) stay below psi(Btilde0) + 2 sum C_i."""
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    _, psi_tilde0 = initial_psis(trace)
    lhs = np.cumsum(omega(arr.rho - 1.0))
    rhs = psi_tilde0 + 2.0 * np.cumsum(arr.C) + 1e-8
    viol = lhs - rhs
    detail = f"psi(Btilde0)={psi_tilde0:.6g}"
    return _result(name, viol, len(viol), detail, t_of=arr.t)


def check_unit_step_window(trace, name="unit_step_window_accepts"):
    """C_t <= delta1 and rho_t in [delta2, delta3] forces acceptance of
    the unit step on the first loop."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    deltas = delta_constants(trace.config.wolfe.alpha, trace.config.wolfe.beta)
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    in_window = ((arr.C <= deltas.delta1) & (arr.rho >= deltas.delta2)
                 & (arr.rho <= deltas.delta3))
    detail = f"{int(in_window.sum())} iterations inside the window"
    if not in_window.any():
        return CheckResult(name, None, detail=detail)
    # positive margin exactly when an in-window iteration needed > 1 loop
    viol = (arr.loops[in_window] != 1).astype(float) - 0.5
    return _result(name, viol, int(in_window.sum()), detail,
                   t_of=arr.t[in_window])


def p_hat_noise_allowance(f, f_next):
    """Quantization level of the measured decrease ratio.

    The stored objective values carry evaluation rounding of order
    ulp(|f|) (the objective is a d-term sum), so the measured
    p_hat = (f_t - f_{t+1}) / (-g's) wobbles by about that amount
    relative to the decrease.  Checks comparing p_hat against an
    independently computed floor must grant this allowance; identities
    evaluated on the stored values themselves need none.
    """
    decrease = np.maximum(np.asarray(f) - np.asarray(f_next), 1e-300)
    return 64.0 * np.finfo(float).eps * np.maximum(np.abs(f), 1.0) / decrease


def check_unit_step_ratio_bounds(trace, name="unit_step_ratio_bounds"):
    """Accepted unit steps obey p >= 1 - (1+C)/(2 rho) and
    n >= 1/((1+C) rho)."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    unit = arr.unit
    if not unit.any():
        return CheckResult(name, None, detail="no unit steps accepted")
    p_slack = 1e-8 + p_hat_noise_allowance(arr.f[unit], arr.f_next[unit])
    p_floor = 1.0 - (1.0 + arr.C[unit]) / (2.0 * arr.rho[unit]) - p_slack
    n_floor = 1.0 / ((1.0 + arr.C[unit]) * arr.rho[unit]) - 1e-8
    viol = np.concatenate([p_floor - arr.p_hat[unit],
                           n_floor - arr.n_hat[unit]])
    return _result(name, viol, int(unit.sum()),
                   t_of=np.concatenate([arr.t[unit], arr.t[unit]]))


def check_rho_window_exit_count(trace, name="rho_window_exit_count"):
    """Iterations with rho outside [delta2, delta3] are at most
    delta4 (psi(Btilde0) + 2 C0 psi(Bbar0) + 6 C0 kappa / (alpha(1-beta))).

    The theory bounds the infinite-horizon count, so the finite-run
    observation must also obey it.
    """
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    wolfe = trace.config.wolfe
    deltas = delta_constants(wolfe.alpha, wolfe.beta)
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    psi_bar0, psi_tilde0 = initial_psis(trace)
    C0 = arr.C[0] if len(arr.C) else 0.0
    cap = deltas.delta4 * (psi_tilde0 + 2.0 * C0 * psi_bar0
                           + 6.0 * C0 * trace.problem.kappa
                           / (wolfe.alpha * (1.0 - wolfe.beta)))
    count = int(np.sum((arr.rho < deltas.delta2) | (arr.rho > deltas.delta3)))
    detail = (f"observed {count} exits vs cap {cap:.4g} "
              "(finite-run observation of an infinite-horizon bound)")
    return _result(name, np.array([count - cap]), len(arr.t), detail)


def check_linear_envelope(trace, name="linear_envelope_general"):
    """Observed gap ratio under the general linear envelope at every t."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    psi_bar0, _ = initial_psis(trace)
    wolfe = trace.config.wolfe
    kappa = trace.problem.kappa
    ratios = trace.gap_ratios()
    viols = []
    for t in range(1, len(ratios)):
        env = linear_envelope_value(t, psi_bar0, kappa, wolfe.alpha, wolfe.beta)
        viols.append(ratios[t] - env - ENVELOPE_SLACK)
    return _result(name, np.array(viols), len(viols),
                   f"psi(Bbar0)={psi_bar0:.6g}",
                   t_of=np.arange(1, len(ratios)))


def check_free_rate_envelope(trace, name="linear_envelope_free"):
    """Condition-number-free envelope past its burn-in threshold."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    psi_bar0, psi_tilde0 = initial_psis(trace)
    wolfe = trace.config.wolfe
    problem = trace.problem
    C0 = compute_Ct(trace.records[0].f, trace.f_star, problem.mu,
                    problem.M_bound)
    threshold = free_rate_threshold(psi_tilde0, psi_bar0, C0, problem.kappa,
                               wolfe.alpha, wolfe.beta)
    ratios = trace.gap_ratios()
    start = max(1, math.ceil(threshold))
    viols = []
    for t in range(start, len(ratios)):
        env = free_rate_envelope_value(t, wolfe.alpha, wolfe.beta)
        viols.append(ratios[t] - env - ENVELOPE_SLACK)
    detail = f"threshold={threshold:.4g}"
    if not viols:
        return CheckResult(name, None,
                           detail=detail + " beyond the recorded horizon")
    return _result(name, np.array(viols), len(viols), detail,
                   t_of=np.arange(start, len(ratios)))


def check_superlinear_envelope(trace, name="superlinear_envelope"):
    """Superlinear envelope (K/t)^t past its threshold; values above 1
    are vacuous."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    psi_bar0, psi_tilde0 = initial_psis(trace)
    wolfe = trace.config.wolfe
    problem = trace.problem
    C0 = compute_Ct(trace.records[0].f, trace.f_star, problem.mu,
                    problem.M_bound)
    K, t0 = superlinear_constants(psi_tilde0, psi_bar0, C0, problem.kappa,
                           wolfe.alpha, wolfe.beta)
    ratios = trace.gap_ratios()
    viols = []
    ts = []
    first_inside = None
    for t in range(max(1, math.floor(t0) + 1), len(ratios)):
        env = superlinear_envelope_value(t, K)
        if env >= 1.0:
            continue  # vacuous at this t
        viols.append(ratios[t] - env - ENVELOPE_SLACK)
        ts.append(t)
        if first_inside is None and ratios[t] <= env:
            first_inside = t
    detail = f"K={K:.4g} t0={t0:.4g} first_t_inside={first_inside}"
    if not viols:
        return CheckResult(name, None,
                           detail=detail + " (envelope vacuous on horizon)")
    return _result(name, np.array(viols), len(viols), detail, t_of=ts)


def check_loop_bound(trace, name="linesearch_loop_bound"):
    """Observed bracketing loop counts under the per-iteration cap + 1."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    wolfe = trace.config.wolfe
    star = WeightScheme.hessian_at_star(trace.problem)
    arr = trace_arrays(trace, star)
    caps = np.array([loop_count_cap(arr.C[i], arr.rho[i], wolfe.alpha,
                                      wolfe.beta)
                     for i in range(len(arr.t))])
    viol = arr.loops - (caps + 1.0)
    return _result(name, viol, len(viol), t_of=arr.t)


def check_avg_loop_bound(trace, name="linesearch_avg_loop_bound"):
    """Running average of loop counts under the average cap + 0.5."""
    if trace.config.method != "bfgs":
        return CheckResult(name, None, detail="bfgs-specific")
    wolfe = trace.config.wolfe
    problem = trace.problem
    psi_bar0, psi_tilde0 = initial_psis(trace)
    C0 = compute_Ct(trace.records[0].f, trace.f_star, problem.mu,
                    problem.M_bound)
    sigma = sigma_constant(psi_bar0, C0, problem.kappa, wolfe.alpha,
                           wolfe.beta)
    loops = np.array([r.loops for r in trace.step_records], dtype=float)
    running = np.cumsum(loops) / np.arange(1, len(loops) + 1)
    viols = []
    for i in range(len(loops)):
        cap = avg_loop_count_cap(i + 1, sigma, psi_tilde0, wolfe.alpha,
                                      wolfe.beta)
        viols.append(running[i] - cap - 0.5)
    return _result(name, np.array(viols), len(viols),
                   f"sigma={sigma:.4g}",
                   t_of=[r.t for r in trace.step_records])


def hessian_sandwich_holds(problem, x, C_t, tol=1e-8):
    """Point check: spectrum of H*^{-1/2} H(x) H*^{-1/2} inside
    [1/(1+C_t) - tol, (1+C_t) + tol]."""
    eigs = scipy.linalg.eigh(problem.hessian(x), problem.hessian_at_star(),
                             eigvals_only=True)
    return bool(eigs.min() >= 1.0 / (1.0 + C_t) - tol
                and eigs.max() <= (1.0 + C_t) + tol)


def superlinear_constant_LI(d, kappa, C0, alpha, beta, deltas=None):
    """Superlinear envelope constant for B0 = L*I (psi bounds
    psi(Bbar0) = 0, psi(Btilde0) <= d*kappa)."""
    return superlinear_constants(d * kappa, 0.0, C0, kappa, alpha, beta, deltas)[0]


def superlinear_constant_muI(d, kappa, C0, alpha, beta, deltas=None):
    """Superlinear envelope constant for B0 = mu*I (both psi bounds
    <= d log kappa)."""
    bound = d * math.log(kappa)
    return superlinear_constants(bound, bound, C0, kappa, alpha, beta, deltas)[0]


def check_hessian_sandwich(trace, max_points=25, name="hessian_sandwich"):
    """Eigenvalues of H*^{-1/2} H(x_t) H*^{-1/2} inside
    [1/(1+C_t), 1+C_t] at sampled iterates."""
    stacked = _stacked_vectors(trace)
    if stacked is None:
        return CheckResult(name, None, detail="no stored step vectors")
    S, _, _ = stacked
    problem = trace.problem
    H_star = problem.hessian_at_star()
    xs = trace.x0 + np.vstack([np.zeros(problem.d), np.cumsum(S, axis=0)])
    n = len(trace.records)
    idx = np.unique(np.linspace(0, n - 1, min(max_points, n)).astype(int))
    viols = []
    for i in idx:
        C_t = compute_Ct(trace.records[i].f, trace.f_star, problem.mu,
                         problem.M_bound)
        eigs = scipy.linalg.eigh(problem.hessian(xs[i]), H_star,
                                 eigvals_only=True)
        lo, hi = 1.0 / (1.0 + C_t) - 1e-8, (1.0 + C_t) + 1e-8
        viols.append(max(lo - eigs.min(), eigs.max() - hi))
    return _result(name, np.array(viols), len(idx), t_of=idx)


def first_unit_window(trace, k=10):
    """First t opening a run of k consecutive accepted unit steps."""
    streak = 0
    for i, r in enumerate(trace.step_records):
        streak = streak + 1 if r.unit_step else 0
        if streak >= k:
            return i - k + 1
    return None


def superlinear_onset(ratios, window=20, collapse=1e-6):
    """First t whose gap ratio collapses by `collapse` within `window`
    iterations; a curve-based marker of the superlinear knee."""
    ratios = np.asarray(ratios, dtype=float)
    for t in range(len(ratios) - window):
        if ratios[t] > 0 and ratios[t + window] <= collapse * ratios[t]:
            return t
    return None


def full_verification(trace, include_snapshots=True, include_sandwich=True):
    """Run every applicable verifier over the trace."""
    report = BoundReport()
    report.add(check_monotone_decrease(trace))
    report.add(check_armijo_ratio(trace))
    report.add(check_curvature_ratio(trace))
    if trace.config.method == "bfgs" and trace.step_records \
            and trace.step_records[0].s is not None:
        star = WeightScheme.hessian_at_star(trace.problem)
        weight_L = WeightScheme.scaled_identity(trace.problem.L_bound)
        report.add(check_one_step_identity(trace, star))
        report.add(check_one_step_identity(trace, weight_L))
        report.add(check_yhat_cap(trace, star))
        report.add(check_yhat_cap(trace, weight_L))
        report.add(check_q_lower_bound(trace, star))
        report.add(check_q_lower_bound(trace, weight_L))
        report.add(check_omega_sum(trace))
        report.add(check_unit_step_window(trace))
        report.add(check_unit_step_ratio_bounds(trace))
        report.add(check_rho_window_exit_count(trace))
        report.add(check_loop_bound(trace))
        report.add(check_avg_loop_bound(trace))
        if include_snapshots:
            report.add(check_potential_recursion(trace, star))
            report.add(check_potential_recursion(trace, weight_L))
        if include_sandwich:
            report.add(check_hessian_sandwich(trace))
    report.add(check_linear_envelope(trace))
    report.add(check_free_rate_envelope(trace))
    report.add(check_superlinear_envelope(trace))
    return report
