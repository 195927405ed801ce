"""Acceptance battery: one test per shipped criterion, at its stated
tolerance, over the standard benchmark runs and the six-panel sweep.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL
line per criterion.

Benchmark set: quadratics d in {2, 50} and cubic chains
d in {100, 300} x kappa in {100, 1000}, all four initialization
schemes, seeded starts, suboptimality-ratio stop at 1e-14.  Matrix
snapshots are kept on the quadratic d=50 and cubic d=100 runs.  The
sweep reuses the CLI defaults (d in {100, 300, 600} x kappa in
{100, 1000}, four schemes plus gradient descent).

Two criteria encode asymptotic claims that double precision cannot
reach on this benchmark family; they are implemented exactly as stated
and are expected to fail (see the acceptance notes in README.md):
  - the <0.01 terminal contraction signature (superlinear depth),
  - the panel-ordering clause comparing unit-step onsets across
    condition numbers.
"""

import math
import time

import numpy as np
import pytest

from bfgslab import (SolverConfig, WeightScheme, WolfeParams,
                     delta_constants, finite_diff_grad_check,
                     make_cubic_problem, make_quadratic_problem, omega, psi,
                     run_bfgs)
from bfgslab import analysis
from bfgslab.analysis import (check_armijo_ratio, check_avg_loop_bound,
                              check_curvature_ratio, check_loop_bound,
                              check_monotone_decrease, check_omega_sum,
                              check_one_step_identity,
                              check_potential_recursion,
                              check_linear_envelope,
                              check_superlinear_envelope,
                              check_unit_step_ratio_bounds,
                              check_unit_step_window, check_yhat_cap,
                              first_unit_window)
from bfgslab.bfgs import DIRECT, BfgsState, update
from bfgslab.cli import main as cli_main
from bfgslab.cli import resolve_x0
from bfgslab.traceio import load_trace, read_manifest

WOLFE = WolfeParams(0.1, 0.9)
GAP_TOL = 1e-14
SMALL_SET_BUDGET_S = 60.0
FULL_SET_BUDGET_S = 600.0


def _quadratic(d):
    eigs = [1.0, 4.0] if d == 2 else np.geomspace(1.0, 100.0, d)
    return make_quadratic_problem(d, eigs)


def _x0_quadratic(d):
    return np.random.default_rng(97 + d).standard_normal(d)


def announce(name, ok, detail=""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


@pytest.fixture(scope="module")
def benchmarks():
    """The shipped benchmark runs, keyed by (kind, d, kappa, scheme)."""
    t_start = time.time()
    runs = {}
    schemes = ["L_identity", "mu_identity", "identity", "c_identity"]
    for d in (2, 50):
        problem = _quadratic(d)
        for scheme in schemes:
            cfg = SolverConfig(init_scheme=scheme, wolfe=WOLFE,
                               x0=_x0_quadratic(d), stop_gap_tol=GAP_TOL,
                               record_matrices=(d == 50), seed=0)
            runs[("quadratic", d, problem.kappa, scheme)] = run_bfgs(problem,
                                                                     cfg)
    small_elapsed_quads = time.time() - t_start
    for d in (100, 300):
        for kappa in (100.0, 1000.0):
            problem = make_cubic_problem(d, kappa)
            for scheme in schemes:
                cfg = SolverConfig(init_scheme=scheme, wolfe=WOLFE,
                                   x0=resolve_x0("randn", d),
                                   stop_gap_tol=GAP_TOL,
                                   record_matrices=(d == 100), seed=0)
                runs[("cubic", d, kappa, scheme)] = run_bfgs(problem, cfg)
    elapsed = time.time() - t_start
    print(f"[ACCEPTANCE] benchmark build: {len(runs)} runs in "
          f"{elapsed:.1f}s (quadratics {small_elapsed_quads:.1f}s)")
    assert elapsed < SMALL_SET_BUDGET_S
    return runs


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    """The six-panel Figure-style sweep, via the CLI."""
    out = str(tmp_path_factory.mktemp("acceptance_sweep"))
    t_start = time.time()
    code = cli_main(["sweep", "--outdir", out])
    elapsed = time.time() - t_start
    assert code == 0
    rows = read_manifest(f"{out}/sweep_index.csv")
    assert len(rows) == 30
    traces = {}
    for row in rows:
        ct = load_trace(f"{out}/{row['runid']}_trace.csv")
        traces[(int(row["d"]), float(row["kappa"]), row["init"])] = ct
    print(f"[ACCEPTANCE] sweep build: 30 runs in {elapsed:.1f}s")
    assert elapsed < FULL_SET_BUDGET_S
    return {"rows": rows, "traces": traces, "dir": out}


def _bad(results):
    return [key for key, ok in results if not ok]


class TestDecreaseAndCurvatureRatios:
    def test_decrease_and_ratio_floors(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            ok = (check_monotone_decrease(tr).passed
                  and check_armijo_ratio(tr).passed
                  and check_curvature_ratio(tr).passed)
            results.append((key, bool(ok)))
        bad = _bad(results)
        assert announce("decrease_and_curvature_ratios", not bad,
                        f"{len(results)} runs"), bad


class TestOneStepIdentity:
    def test_residual_under_1e8_both_weights(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            star = WeightScheme.hessian_at_star(tr.problem)
            weight_L = WeightScheme.scaled_identity(tr.problem.L_bound)
            ok = (check_one_step_identity(tr, star).passed
                  and check_one_step_identity(tr, weight_L).passed)
            results.append((key, bool(ok)))
        bad = _bad(results)
        assert announce("one_step_identity", not bad,
                        f"{len(results)} runs x 2 weights"), bad


class TestLinearEnvelope:
    def test_envelope_every_t_every_run(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            res = check_linear_envelope(tr)
            results.append((key, bool(res.passed)))
        bad = _bad(results)
        assert announce("linear_envelope", not bad,
                        f"{len(results)} runs"), bad


class TestPotentialRecursion:
    def test_recursion_and_caps_on_snapshot_runs(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            star = WeightScheme.hessian_at_star(tr.problem)
            weight_L = WeightScheme.scaled_identity(tr.problem.L_bound)
            cap_ok = (check_yhat_cap(tr, star).passed
                      and check_yhat_cap(tr, weight_L).passed)
            results.append((key + ("caps",), bool(cap_ok)))
            if tr.matrix_snapshots:
                rec_star = check_potential_recursion(tr, star)
                rec_L = check_potential_recursion(tr, weight_L)
                results.append((key + ("recursion",),
                                bool(rec_star.passed and rec_L.passed)))
        n_rec = sum(1 for k, _ in results if k[-1] == "recursion")
        assert n_rec >= 12  # quadratic d=50 and cubic d=100 runs
        bad = _bad(results)
        assert announce("potential_recursion_and_caps", not bad,
                        f"{n_rec} snapshot runs"), bad


class TestOmegaSum:
    def test_prefix_inequality_cubic_d100(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            if key[0] == "cubic" and key[1] == 100:
                results.append((key, bool(check_omega_sum(tr).passed)))
        assert len(results) == 8
        bad = _bad(results)
        assert announce("omega_sum_prefix", not bad, f"{len(results)} runs"), bad


class TestUnitStepImplications:
    def test_window_and_ratio_bounds(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            win = check_unit_step_window(tr)
            ratios = check_unit_step_ratio_bounds(tr)
            ok = (win.passed is not False) and (ratios.passed is not False)
            results.append((key, bool(ok)))
        bad = _bad(results)
        assert announce("unit_step_implications", not bad,
                        f"{len(results)} runs"), bad


class TestSuperlinearPhase:
    """Terminal-phase signature, exactly as specified.

    The <0.01 contraction clause asks for depths the float64 horizon
    does not contain on d >= 50 runs (README, acceptance notes); it
    is asserted as stated and expected to fail there.
    """

    def test_terminal_unit_steps_and_contraction(self, benchmarks):
        unit_results, dive_results, env_results = [], [], []
        for key, tr in benchmarks.items():
            steps = tr.step_records
            cut = len(steps) - max(1, math.ceil(0.25 * len(steps)))
            unit_ok = all(r.unit_step for r in steps[cut:])
            ratios = tr.gap_ratios()
            per_step = ratios[1:] / np.maximum(ratios[:-1], 1e-300)
            dive_ok = bool(per_step[-10:].min() < 0.01)
            env = check_superlinear_envelope(tr)
            env_ok = env.passed is not False
            unit_results.append((key, unit_ok))
            dive_results.append((key, dive_ok))
            env_results.append((key, env_ok))
        ok_units = not _bad(unit_results)
        ok_dive = not _bad(dive_results)
        ok_env = not _bad(env_results)
        announce("superlinear_terminal_units", ok_units,
                 f"failing: {_bad(unit_results)}")
        announce("superlinear_contraction_lt_0.01", ok_dive,
                 f"failing: {len(_bad(dive_results))} of "
                 f"{len(dive_results)} runs")
        announce("superlinear_envelope_past_threshold", ok_env, "")
        assert ok_units and ok_dive and ok_env


class TestLineSearchLoopBounds:
    def test_per_iteration_and_average_caps_quadratics(self, benchmarks):
        results = []
        for key, tr in benchmarks.items():
            if key[0] != "quadratic":
                continue
            per = check_loop_bound(tr)
            avg = check_avg_loop_bound(tr)
            results.append((key, bool(per.passed and avg.passed)))
        assert len(results) == 8
        bad = _bad(results)
        assert announce("linesearch_loop_bounds", not bad,
                        f"{len(results)} quadratic runs"), bad


class TestDeltaTable:
    def test_reference_values_within_tolerance(self):
        d = delta_constants(0.25, 0.75)
        exact = {
            "delta1": 1.0 / 6.0, "delta2": 7.0 / 8.0, "delta3": 2.0,
            "delta6": math.log(8.0),
        }
        for name, val in exact.items():
            assert getattr(d, name) == pytest.approx(val, rel=1e-12)
        table = {"delta4": 118.0, "delta5": 14.0, "delta7": 260.0,
                 "delta8": 524.0}
        ok = True
        for name, listed in table.items():
            got = getattr(d, name)
            within = abs(got - listed) / listed <= 0.02
            rounded_up = math.ceil(got) == listed
            ok = ok and (within or rounded_up)
        assert announce("delta_table", ok,
                        f"d4={d.delta4:.2f} d5={d.delta5:.2f} "
                        f"d7={d.delta7:.1f} d8={d.delta8:.1f}")


def _first_unit_window_cols(ct, k=10):
    mask = ct.step_mask()
    units = (ct.col("unit_step")[mask] == 1.0).tolist()
    streak = 0
    for i, u in enumerate(units):
        streak = streak + 1 if u else 0
        if streak >= k:
            return i - k + 1
    return None


def _t_reach(ct, level):
    ratios = ct.col("f_gap_ratio")
    hits = np.where(ratios <= level)[0]
    return int(hits[0]) if len(hits) else None


class TestFigureOrderings:
    """Qualitative panel orderings from the sweep grid.

    Clause (iii) compares unit-step onsets across condition numbers;
    under this problem family both halves fail (the certified-kappa
    normalization makes every length scale O(sqrt(kappa)); README,
    acceptance notes).  It is asserted as stated.
    """

    def test_i_early_advantage_of_L_scaling(self, sweep):
        wins = 0
        for d in (100, 300, 600):
            for kappa in (100.0, 1000.0):
                li = sweep["traces"][(d, kappa, "LI")].col("f_gap_ratio")
                mi = sweep["traces"][(d, kappa, "muI")].col("f_gap_ratio")
                n = min(21, len(li), len(mi))
                if all(li[t] < mi[t] for t in range(1, n)):
                    wins += 1
        assert announce("ordering_i_LI_leads_early", wins >= 5,
                        f"{wins}/6 panels")

    def test_ii_muI_unit_phase_within_2d(self, sweep):
        bad = []
        for d in (100, 300, 600):
            for kappa in (100.0, 1000.0):
                onset = _first_unit_window_cols(
                    sweep["traces"][(d, kappa, "muI")])
                if onset is None or onset > 2 * d:
                    bad.append((d, kappa, onset))
        assert announce("ordering_ii_muI_onset_2d", not bad, f"bad={bad}")

    def test_iii_onset_sensitivity_at_d600(self, sweep):
        li_100 = _first_unit_window_cols(sweep["traces"][(600, 100.0, "LI")])
        li_1000 = _first_unit_window_cols(sweep["traces"][(600, 1000.0, "LI")])
        mi_100 = _first_unit_window_cols(sweep["traces"][(600, 100.0, "muI")])
        mi_1000 = _first_unit_window_cols(
            sweep["traces"][(600, 1000.0, "muI")])
        li_ok = (li_100 is not None and li_1000 is not None
                 and li_1000 > li_100)
        mi_ok = (mi_100 is not None and mi_1000 is not None
                 and abs(mi_1000 - mi_100) / max(min(mi_100, mi_1000), 1)
                 < 0.5)
        t_li = (_t_reach(sweep["traces"][(600, 100.0, "LI")], 1e-10),
                _t_reach(sweep["traces"][(600, 1000.0, "LI")], 1e-10))
        assert announce(
            "ordering_iii_onset_kappa_sensitivity", li_ok and mi_ok,
            f"LI onsets {li_100}->{li_1000}, muI onsets {mi_100}->{mi_1000} "
            f"(LI t_1e-10 {t_li[0]}->{t_li[1]})")

    def test_iv_every_variant_beats_gd(self, sweep):
        bad = []
        for d in (100, 300, 600):
            for kappa in (100.0, 1000.0):
                gd_t = _t_reach(sweep["traces"][(d, kappa, "gd")], 1e-10)
                for init in ("LI", "muI", "I", "cI"):
                    qn_t = _t_reach(sweep["traces"][(d, kappa, init)], 1e-10)
                    if qn_t is None or (gd_t is not None and qn_t >= gd_t):
                        bad.append((d, kappa, init, qn_t, gd_t))
        assert announce("ordering_iv_beats_gd", not bad, f"bad={bad}")


class TestCoreNumerics:
    def test_secant_residual_replayed_both_forms(self, benchmarks):
        tr = benchmarks[("cubic", 100, 100.0, "mu_identity")]
        problem = tr.problem
        B = BfgsState(d=problem.d, form=DIRECT,
                      matrix=problem.mu * np.eye(problem.d))
        H = BfgsState(d=problem.d, form="inverse_H",
                      matrix=np.eye(problem.d) / problem.mu)
        for r in tr.step_records:
            update(B, r.s, r.y)
            update(H, r.s, r.y)
            assert np.linalg.norm(B.matrix @ r.s - r.y) <= 1e-10 * (
                1.0 + np.linalg.norm(r.y))
            assert np.linalg.norm(H.matrix @ r.y - r.s) <= 1e-10 * (
                1.0 + np.linalg.norm(r.s))
        announce("secant_residual", True, f"{tr.n_steps} updates x 2 forms")

    def test_direct_inverse_iterate_agreement(self):
        problem = make_cubic_problem(100, 100.0)
        x0 = resolve_x0("randn", 100)
        tr_h = run_bfgs(problem, SolverConfig(
            init_scheme="mu_identity", wolfe=WOLFE, x0=x0,
            stop_gap_tol=GAP_TOL))
        tr_b = run_bfgs(problem, SolverConfig(
            init_scheme="mu_identity", wolfe=WOLFE, x0=x0,
            stop_gap_tol=GAP_TOL, form=DIRECT))
        assert tr_h.n_steps == tr_b.n_steps
        xs_h = tr_h.x0 + np.cumsum([r.s for r in tr_h.step_records], axis=0)
        xs_b = tr_b.x0 + np.cumsum([r.s for r in tr_b.step_records], axis=0)
        scale = np.maximum(1.0, np.linalg.norm(xs_h, axis=1))
        worst = (np.linalg.norm(xs_h - xs_b, axis=1) / scale).max()
        assert announce("cross_form_agreement", worst <= 1e-8,
                        f"worst relative drift {worst:.2e}")

    def test_gradient_consistency(self):
        rng = np.random.default_rng(55)
        worst = 0.0
        for problem in (make_cubic_problem(20, 50.0), _quadratic(50)):
            for _ in range(20):
                x = rng.standard_normal(problem.d)
                worst = max(worst, finite_diff_grad_check(problem, x))
        assert announce("finite_difference_gradients", worst <= 1e-5,
                        f"max relative error {worst:.2e}")

    def test_potential_and_gauge_property_suites(self):
        rng = np.random.default_rng(56)
        ok = True
        for _ in range(1000):
            A = rng.standard_normal((4, 4))
            Q, _ = np.linalg.qr(A)
            spd = (Q * np.exp(rng.uniform(-1.5, 1.5, 4))) @ Q.T
            ok = ok and psi(spd) >= -1e-10
        x = rng.uniform(-0.999, 10.0, size=1000)
        w = omega(x)
        ok = ok and bool(np.all(w >= 0.0))
        pos, neg = x >= 0, x <= 0
        ok = ok and bool(np.all(w[pos] >= x[pos]**2 / (2 * (1 + x[pos]))
                                - 1e-12))
        ok = ok and bool(np.all(w[neg] >= x[neg]**2 / (2 + x[neg]) - 1e-12))
        assert announce("psi_omega_property_suites", ok, "1000 samples each")
