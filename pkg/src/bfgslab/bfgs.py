"""BFGS Hessian-approximation state: initialization, directions, updates.

The state can be kept in direct form (the approximation B itself, with
directions obtained through a Cholesky solve) or inverse form (H = B^-1,
with directions obtained by a single matrix-vector product).  Both forms
consume the same (s, y) curvature-pair stream and stay mutually
consistent; the solver loop runs the inverse form by default and keeps a
parallel direct form only when potential-function diagnostics need B_t.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConfigError, CurvaturePairError, SpdViolationError
from .validation import check_spd, check_vector

DIRECT = "direct_B"
INVERSE = "inverse_H"

_SCHEME_ALIASES = {
    "LI": "L_identity", "L_identity": "L_identity",
    "muI": "mu_identity", "mu_identity": "mu_identity",
    "I": "identity", "identity": "identity",
    "cI": "c_identity", "c_identity": "c_identity",
    "custom": "custom",
}

SCHEME_LABELS = {
    "L_identity": "LI", "mu_identity": "muI",
    "identity": "I", "c_identity": "cI", "custom": "custom",
}


@dataclass
class InitScheme:
    """Choice of initial Hessian approximation B_0.

    kind one of L_identity (B_0 = L*I), mu_identity (mu*I), identity,
    c_identity (c*I with c = s'y/||s||^2 from a probe pair), or custom
    (an explicit SPD matrix).  For c_identity the probe points may be
    supplied; otherwise the solver derives them from its seeded
    generator as x0 and x0 + u for a random unit vector u.
    """

    kind: str
    matrix: np.ndarray | None = None
    probe: tuple | None = None

    def __post_init__(self):
        if self.kind not in _SCHEME_ALIASES:
            raise ConfigError(f"unknown init scheme {self.kind!r}")
        self.kind = _SCHEME_ALIASES[self.kind]
        if self.kind == "custom":
            if self.matrix is None:
                raise ConfigError("custom init scheme needs a matrix")
            check_spd(self.matrix, "custom B_0")

    @classmethod
    def from_name(cls, name):
        return cls(kind=name)

    @classmethod
    def custom(cls, matrix):
        return cls(kind="custom", matrix=np.asarray(matrix, dtype=float))

    @property
    def label(self):
        return SCHEME_LABELS[self.kind]


@dataclass
class BfgsState:
    """Dense symmetric approximation operator plus bookkeeping.

    matrix holds B_t in direct form or H_t = B_t^-1 in inverse form.
    last_pair_dot records the most recent s'y accepted by update().
    """

    d: int
    form: str
    matrix: np.ndarray
    update_count: int = 0
    last_pair_dot: float = field(default=np.nan)

    def copy(self):
        return BfgsState(self.d, self.form, self.matrix.copy(),
                         self.update_count, self.last_pair_dot)

    def b_matrix(self):
        """Return B_t regardless of the stored form."""
        if self.form == DIRECT:
            return self.matrix.copy()
        cho = check_spd(self.matrix, "H_t")
        ident = np.eye(self.d)
        B = scipy.linalg.cho_solve((cho, True), ident)
        return 0.5 * (B + B.T)


def probe_scale(problem, x1, x2):
    """Curvature estimate c = s'y / ||s||^2 from a probe pair.

    Lies in [mu, L] for any distinct probes, by convexity and gradient
    smoothness.
    """
    x1 = check_vector(x1, problem.d, "x1")
    x2 = check_vector(x2, problem.d, "x2")
    s = x2 - x1
    ss = float(np.dot(s, s))
    if ss == 0.0:
        raise ConfigError("c_identity probe points must be distinct")
    y = problem.gradient(x2) - problem.gradient(x1)
    return float(np.dot(s, y) / ss)


def init_state(problem, scheme, form=INVERSE, rng=None, x0=None):
    """Build the initial state for a problem under the given scheme.

    Args:
        problem: supplies d and the constants for L/mu-scaled identities.
        scheme: InitScheme or a scheme name.
        form: DIRECT or INVERSE.
        rng: generator used only to draw the default c_identity probe.
        x0: anchor for the default probe pair (x0, x0 + u).
    """
    if isinstance(scheme, str):
        scheme = InitScheme.from_name(scheme)
    if form not in (DIRECT, INVERSE):
        raise ConfigError(f"unknown state form {form!r}")
    d = problem.d

    if scheme.kind == "custom":
        B0 = np.asarray(scheme.matrix, dtype=float)
        check_spd(B0, "custom B_0")
        matrix = B0 if form == DIRECT else _spd_inverse(B0)
        return BfgsState(d=d, form=form, matrix=matrix)

    if scheme.kind == "L_identity":
        c = problem.L_bound
    elif scheme.kind == "mu_identity":
        c = problem.mu
    elif scheme.kind == "identity":
        c = 1.0
    else:
        if scheme.probe is not None:
            x1, x2 = scheme.probe
        else:
            if rng is None:
                rng = np.random.default_rng(0)
            anchor = np.zeros(d) if x0 is None else check_vector(x0, d)
            u = rng.standard_normal(d)
            u /= np.linalg.norm(u)
            x1, x2 = anchor, anchor + u
        c = probe_scale(problem, x1, x2)

    scale = c if form == DIRECT else 1.0 / c
    return BfgsState(d=d, form=form, matrix=scale * np.eye(d))


def _spd_inverse(A):
    cho = check_spd(A, "B_0")
    inv = scipy.linalg.cho_solve((cho, True), np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def direction(state, g):
    """Descent direction d = -B^-1 g.

    Direct form solves through a fresh Cholesky factorization (failure
    means an s'y <= 0 pair slipped through and is raised as an SPD
    violation); inverse form is a single product -H g.
    """
    g = check_vector(g, state.d, "g")
    if state.form == INVERSE:
        return -(state.matrix @ g)
    try:
        cho = scipy.linalg.cho_factor(state.matrix)
    except scipy.linalg.LinAlgError as exc:
        raise SpdViolationError("B_t lost positive definiteness") from exc
    return -scipy.linalg.cho_solve(cho, g)


def update(state, s, y):
    """Apply the rank-two curvature-pair update in the stored form.

    Direct form:   B+ = B - (Bs)(Bs)'/(s'Bs) + yy'/(s'y)
    Inverse form:  H+ = (I - sy'/(s'y)) H (I - ys'/(s'y)) + ss'/(s'y)

    The secant equation B+ s = y holds in both forms.  The matrix is
    re-symmetrized after the update so roundoff cannot accumulate into
    asymmetry over long runs.

    Raises:
        CurvaturePairError: s'y <= 0, which the curvature condition
            rules out; treated as a hard failure, not a skip.
    """
    s = check_vector(s, state.d, "s")
    y = check_vector(y, state.d, "y")
    sy = float(np.dot(s, y))
    if sy <= 0.0:
        raise CurvaturePairError(f"curvature pair has s'y = {sy:.6g} <= 0")

    if state.form == DIRECT:
        B = state.matrix
        Bs = B @ s
        sBs = float(np.dot(s, Bs))
        if sBs <= 0.0:
            raise SpdViolationError("s'Bs <= 0: state is not positive definite")
        B -= np.outer(Bs, Bs) / sBs
        B += np.outer(y, y) / sy
        state.matrix = 0.5 * (B + B.T)
    else:
        H = state.matrix
        Hy = H @ y
        yHy = float(np.dot(y, Hy))
        Hys = np.outer(Hy, s)
        H -= (Hys + Hys.T) / sy
        H += ((1.0 + yHy / sy) / sy) * np.outer(s, s)
        state.matrix = 0.5 * (H + H.T)

    state.update_count += 1
    state.last_pair_dot = sy
    return state
