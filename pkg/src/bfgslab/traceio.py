"""Trace serialization: per-run CSV + JSON sidecar, reports, manifests.

The CSV schema is fixed (column order below, floats at 17 significant
digits) so traces round-trip losslessly; quantities that need vectors
or matrix snapshots the run did not keep are left empty.  The sidecar
`<runid>_meta.json` carries the config echo, the problem's certified
constants, and auxiliary per-step arrays so a trace file can be
re-verified without re-running the solver.
"""

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .analysis import (BoundReport, CheckResult, WeightScheme, _result,
                       avg_loop_count_cap, linear_envelope_value, free_rate_envelope_value,
                       superlinear_envelope_value, delta_constants, loop_count_cap,
                       sigma_constant, free_rate_threshold, superlinear_constants)
from .exceptions import InputError

CSV_COLUMNS = ["t", "f", "f_gap_ratio", "grad_norm", "eta", "lambda_t",
               "evals", "unit_step", "p_hat", "q_hat", "m_hat", "n_hat",
               "cos_theta", "C_t", "rho_t", "psi_Bbar", "psi_Btilde"]

SCHEMA_VERSION = 1


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return ""
    return format(float(value), ".17g")


def trace_rows(trace):
    """Materialize the CSV rows (list of dicts keyed by CSV_COLUMNS)."""
    problem = trace.problem
    gap0 = trace.gap0 if trace.gap0 > 0 else None
    star = None
    arr = None
    if (trace.config.method == "bfgs" and trace.step_records
            and trace.step_records[0].s is not None):
        star = WeightScheme.hessian_at_star(problem)
        arr = analysis.trace_arrays(trace, star)
    psi_bar, psi_tilde = analysis.snapshot_psis(trace, star) \
        if trace.matrix_snapshots else ({}, {})

    rows = []
    for i, rec in enumerate(trace.records):
        row = {c: None for c in CSV_COLUMNS}
        row["t"] = rec.t
        row["f"] = rec.f
        row["f_gap_ratio"] = rec.f_gap / gap0 if gap0 else None
        row["grad_norm"] = rec.grad_norm
        row["C_t"] = analysis.compute_Ct(rec.f, trace.f_star, problem.mu,
                                         problem.M_bound)
        row["psi_Bbar"] = psi_bar.get(rec.t)
        row["psi_Btilde"] = psi_tilde.get(rec.t)
        if rec.has_step:
            row["eta"] = rec.eta
            row["lambda_t"] = rec.loops
            row["evals"] = rec.evals
            row["unit_step"] = rec.unit_step
            gs = rec.g_dot_d * rec.eta
            f_next = trace.records[i + 1].f
            row["p_hat"] = (rec.f - f_next) / (-gs)
            row["n_hat"] = rec.sy_dot / (-gs)
            if arr is not None:
                row["q_hat"] = arr.q_hat[i]
                row["m_hat"] = arr.m_hat[i]
                row["cos_theta"] = arr.cos_theta[i]
                row["rho_t"] = arr.rho[i]
        rows.append(row)
    return rows


def write_trace_csv(path, trace):
    rows = trace_rows(trace)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return path


def _problem_block(problem):
    block = {"kind": problem.kind, "d": problem.d}
    if problem.kind == "quadratic":
        block["eigenvalues"] = [float(v) for v in problem.eigenvalues]
    else:
        block.update(alpha_f=problem.alpha_f, beta_f=problem.beta_f,
                     lam=problem.lam, Delta=problem.Delta)
    return block


def write_meta_json(path, trace, runid=""):
    """Sidecar with config echo, certified constants, and aux arrays."""
    problem = trace.problem
    config = trace.config
    scheme = config.init_scheme
    scheme_kind = scheme if isinstance(scheme, str) else scheme.kind
    C0 = analysis.compute_Ct(trace.records[0].f, trace.f_star, problem.mu,
                             problem.M_bound)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "runid": runid,
        "status": trace.status,
        "problem": _problem_block(problem),
        "solver": {
            "method": config.method,
            "init_scheme": scheme_kind,
            "alpha": config.wolfe.alpha,
            "beta": config.wolfe.beta,
            "max_loops": config.wolfe.max_loops,
            "max_iters": config.max_iters,
            "stop_grad_tol": config.stop_grad_tol,
            "stop_gap_tol": config.stop_gap_tol,
            "seed": config.seed,
            "record_matrices": config.record_matrices,
            "snapshot_stride": config.snapshot_stride,
            "form": config.form,
            "gd_shrink": config.gd_shrink,
        },
        "x0": [float(v) for v in trace.x0],
        "constants": {
            "mu": problem.mu,
            "L_bound": problem.L_bound,
            "M_bound": problem.M_bound,
            "kappa": problem.kappa,
            "f_star": trace.f_star,
            "gap0": trace.gap0,
            "b0_scale": trace.b0_scale,
            "C0": C0,
        },
    }
    if config.method == "bfgs":
        try:
            psi_bar0, psi_tilde0 = analysis.initial_psis(trace)
            meta["constants"]["psi_Bbar0"] = psi_bar0
            meta["constants"]["psi_Btilde0"] = psi_tilde0
        except InputError:
            pass
    if (config.method == "bfgs" and trace.step_records
            and trace.step_records[0].s is not None):
        star = WeightScheme.hessian_at_star(problem)
        weight_L = WeightScheme.scaled_identity(problem.L_bound)
        arr_star = analysis.trace_arrays(trace, star)
        arr_L = analysis.trace_arrays(trace, weight_L, star_weight=star)
        meta["aux"] = {
            "yhat_sq_over_sy_star": arr_star.yhat_sq_over_sy.tolist(),
            "yhat_sq_over_sy_L": arr_L.yhat_sq_over_sy.tolist(),
            "q_hat_L": arr_L.q_hat.tolist(),
            "m_hat_L": arr_L.m_hat.tolist(),
            "cos_theta_L": arr_L.cos_theta.tolist(),
        }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=1)
    return path


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write(report.render())
        fh.write("\n")
    return path


@dataclass
class ColumnTrace:
    """A trace file re-read as column arrays plus its sidecar meta."""

    path: str
    meta: dict
    columns: dict = field(default_factory=dict)

    def col(self, name):
        return self.columns[name]

    @property
    def method(self):
        return self.meta["solver"]["method"]

    @property
    def constants(self):
        return self.meta["constants"]

    def step_mask(self):
        return ~np.isnan(self.columns["eta"])


def meta_path_for(trace_path):
    base = trace_path
    if base.endswith("_trace.csv"):
        return base[: -len("_trace.csv")] + "_meta.json"
    root, _ = os.path.splitext(base)
    return root + "_meta.json"


def load_trace(path, meta_path=None):
    """Read a trace CSV and its sidecar into a ColumnTrace.

    Raises:
        InputError: missing/malformed CSV or sidecar.
    """
    meta_path = meta_path or meta_path_for(path)
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"missing sidecar meta {meta_path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed sidecar meta {meta_path}: {exc}") from exc

    columns = {c: [] for c in CSV_COLUMNS}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_COLUMNS:
                raise InputError(
                    f"unexpected CSV header in {path}: {header}")
            for line in reader:
                if len(line) != len(CSV_COLUMNS):
                    raise InputError(f"ragged CSV row in {path}: {line}")
                for c, cell in zip(CSV_COLUMNS, line):
                    columns[c].append(float(cell) if cell != "" else np.nan)
    except FileNotFoundError as exc:
        raise InputError(f"missing trace file {path}") from exc
    except ValueError as exc:
        raise InputError(f"malformed CSV cell in {path}: {exc}") from exc

    arrays = {c: np.array(v, dtype=float) for c, v in columns.items()}
    if len(arrays["t"]) == 0:
        raise InputError(f"empty trace {path}")
    return ColumnTrace(path=path, meta=meta, columns=arrays)


def verify_columns(ct):
    """Column-based re-verification of a loaded trace file.

    Covers every check computable from the CSV schema plus sidecar
    constants; matrix-snapshot and Hessian-resampling checks are marked
    not applicable when their inputs were not serialized.
    """
    report = BoundReport()
    cons = ct.constants
    alpha = ct.meta["solver"]["alpha"]
    beta = ct.meta["solver"]["beta"]
    kappa = cons["kappa"]
    is_bfgs = ct.method == "bfgs"

    t_all = ct.col("t")
    f = ct.col("f")
    viol = f[1:] - f[:-1]
    report.add(_result("monotone_decrease", viol, len(viol),
                       t_of=t_all[1:].astype(int)))

    steps = ct.step_mask()
    ts = t_all[steps].astype(int)
    p_hat = ct.col("p_hat")[steps]
    n_hat = ct.col("n_hat")[steps]
    loops = ct.col("lambda_t")[steps]
    C = ct.col("C_t")[steps]
    report.add(_result("armijo_decrease_ratio", (alpha - 1e-12) - p_hat,
                       len(p_hat), t_of=ts))
    if is_bfgs:
        report.add(_result("curvature_gain_ratio",
                           (1.0 - beta - 1e-12) - n_hat, len(n_hat), t_of=ts))
    else:
        report.add(CheckResult("curvature_gain_ratio", None,
                               detail="curvature condition not enforced for gd"))

    has_weighted = is_bfgs and not np.all(np.isnan(ct.col("q_hat")[steps]))
    ratios = ct.col("f_gap_ratio")
    if has_weighted:
        q_hat = ct.col("q_hat")[steps]
        m_hat = ct.col("m_hat")[steps]
        cos_t = ct.col("cos_theta")[steps]
        rho = ct.col("rho_t")[steps]
        gap = ratios[steps] * cons["gap0"]
        gap_next = ratios[np.where(steps)[0] + 1] * cons["gap0"]
        factor = p_hat * q_hat * n_hat * cos_t**2 / m_hat
        keep = gap >= 1e-14 * cons["gap0"]
        residual = np.abs(gap_next[keep] - (1.0 - factor[keep]) * gap[keep]) \
            / gap[keep]
        report.add(_result("one_step_identity_hessian_at_star",
                           residual - 1e-8, int(keep.sum()),
                           t_of=ts[keep]))
        report.add(_result("q_lower_bound_hessian_at_star",
                           (2.0 / (1.0 + C)**2 - 1e-8) - q_hat,
                           len(q_hat), t_of=ts))
        q_hat_L = ct.col("grad_norm")[steps]**2 / (cons["L_bound"] * gap)
        report.add(_result("q_lower_bound_scaled_identity_L",
                           (2.0 / kappa - 1e-10) - q_hat_L,
                           len(q_hat_L), t_of=ts))
        aux = ct.meta.get("aux")
        if aux:
            y_star = np.array(aux["yhat_sq_over_sy_star"])
            y_L = np.array(aux["yhat_sq_over_sy_L"])
            report.add(_result("yhat_cap_hessian_at_star",
                               y_star - (1.0 + C + 1e-8), len(y_star),
                               t_of=ts))
            report.add(_result("yhat_cap_scaled_identity_L",
                               y_L - (1.0 + 1e-10), len(y_L), t_of=ts))
        psi_tilde0 = cons.get("psi_Btilde0")
        if psi_tilde0 is not None:
            lhs = np.cumsum(analysis.omega(rho - 1.0))
            rhs = psi_tilde0 + 2.0 * np.cumsum(C) + 1e-8
            report.add(_result("omega_sum_prefix", lhs - rhs, len(lhs),
                               t_of=ts))
        deltas = delta_constants(alpha, beta)
        in_window = ((C <= deltas.delta1) & (rho >= deltas.delta2)
                     & (rho <= deltas.delta3))
        if in_window.any():
            viol = (loops[in_window] != 1).astype(float) - 0.5
            report.add(_result("unit_step_window_accepts", viol,
                               int(in_window.sum()), t_of=ts[in_window]))
        else:
            report.add(CheckResult("unit_step_window_accepts", None,
                                   detail="no iterations inside the window"))
        unit = ct.col("unit_step")[steps] == 1.0
        if unit.any():
            f_steps = f[steps]
            f_next = f[np.where(steps)[0] + 1]
            p_slack = 1e-8 + analysis.p_hat_noise_allowance(
                f_steps[unit], f_next[unit])
            p_floor = 1.0 - (1.0 + C[unit]) / (2.0 * rho[unit]) - p_slack
            n_floor = 1.0 / ((1.0 + C[unit]) * rho[unit]) - 1e-8
            viol = np.concatenate([p_floor - p_hat[unit],
                                   n_floor - n_hat[unit]])
            report.add(_result("unit_step_ratio_bounds", viol,
                               int(unit.sum()),
                               t_of=np.concatenate([ts[unit], ts[unit]])))
        else:
            report.add(CheckResult("unit_step_ratio_bounds", None,
                                   detail="no unit steps accepted"))
        caps = np.array([loop_count_cap(C[i], rho[i], alpha, beta)
                         for i in range(len(ts))])
        report.add(_result("linesearch_loop_bound", loops - (caps + 1.0),
                           len(ts), t_of=ts))
        psi_bar0 = cons.get("psi_Bbar0")
        if psi_bar0 is not None and psi_tilde0 is not None:
            sigma = sigma_constant(psi_bar0, cons["C0"], kappa, alpha, beta)
            running = np.cumsum(loops) / np.arange(1, len(loops) + 1)
            viols = [running[i] - avg_loop_count_cap(
                i + 1, sigma, psi_tilde0, alpha, beta) - 0.5
                for i in range(len(loops))]
            report.add(_result("linesearch_avg_loop_bound", viols,
                               len(viols), f"sigma={sigma:.4g}", t_of=ts))
        psi_cols = ct.col("psi_Bbar"), ct.col("psi_Btilde")
        for col, nm in zip(psi_cols, ("potential_recursion_scaled_identity_L",
                                      "potential_recursion_hessian_at_star")):
            if np.all(np.isnan(col)) or not aux:
                report.add(CheckResult(nm, None,
                                       detail="not evaluated (no snapshots)"))
                continue
            which = ("yhat_sq_over_sy_L"
                     if nm.endswith("scaled_identity_L")
                     else "yhat_sq_over_sy_star")
            y_ratio = np.array(aux[which])
            if nm.endswith("scaled_identity_L"):
                cos2_over_m = (np.array(aux["cos_theta_L"])**2
                               / np.array(aux["m_hat_L"]))
            else:
                cos2_over_m = cos_t**2 / m_hat
            viols, tloc = [], []
            for i, t in enumerate(ts):
                pt, pt1 = col[t], col[t + 1] if t + 1 < len(col) else np.nan
                if np.isnan(pt) or np.isnan(pt1):
                    continue
                rhs = pt + y_ratio[i] - 1.0 + np.log(cos2_over_m[i])
                viols.append(pt1 - rhs - 1e-8 * (1.0 + abs(pt)))
                tloc.append(t)
            if viols:
                report.add(_result(nm, np.array(viols), len(viols),
                                   t_of=tloc))
            else:
                report.add(CheckResult(nm, None,
                                       detail="no consecutive snapshots"))

    if is_bfgs and cons.get("psi_Bbar0") is not None:
        psi_bar0 = cons["psi_Bbar0"]
        viols = [ratios[t] - linear_envelope_value(t, psi_bar0, kappa, alpha, beta)
                 - analysis.ENVELOPE_SLACK for t in range(1, len(ratios))]
        report.add(_result("linear_envelope_general", viols, len(viols),
                           t_of=np.arange(1, len(ratios))))
        psi_tilde0 = cons.get("psi_Btilde0")
        if psi_tilde0 is not None:
            thr = free_rate_threshold(psi_tilde0, psi_bar0, cons["C0"], kappa,
                                 alpha, beta)
            start = max(1, math.ceil(thr))
            viols = [ratios[t] - free_rate_envelope_value(t, alpha, beta)
                     - analysis.ENVELOPE_SLACK
                     for t in range(start, len(ratios))]
            if viols:
                report.add(_result("linear_envelope_free", viols, len(viols),
                                   f"threshold={thr:.4g}",
                                   t_of=np.arange(start, len(ratios))))
            else:
                report.add(CheckResult("linear_envelope_free", None,
                                       detail=f"threshold={thr:.4g} beyond "
                                              "the recorded horizon"))
            K, t0 = superlinear_constants(psi_tilde0, psi_bar0, cons["C0"], kappa,
                                   alpha, beta)
            viols, tloc = [], []
            for t in range(max(1, math.floor(t0) + 1), len(ratios)):
                env = superlinear_envelope_value(t, K)
                if env >= 1.0:
                    continue
                viols.append(ratios[t] - env - analysis.ENVELOPE_SLACK)
                tloc.append(t)
            if viols:
                report.add(_result("superlinear_envelope", viols, len(viols),
                                   f"K={K:.4g} t0={t0:.4g}", t_of=tloc))
            else:
                report.add(CheckResult(
                    "superlinear_envelope", None,
                    detail=f"K={K:.4g} t0={t0:.4g} (vacuous on horizon)"))
    return report


# ---------------------------------------------------------------------------
# Sweep manifest
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ["runid", "d", "kappa", "init", "method", "iters",
                    "final_gap_ratio", "T_unit", "max_lambda_t",
                    "mean_lambda_t", "status"]


def manifest_row(runid, trace, d, kappa, init_label, method):
    steps = trace.step_records
    loops = [r.loops for r in steps]
    ratios = trace.gap_ratios()
    t_unit = analysis.first_unit_window(trace) if method == "bfgs" else None
    return {
        "runid": runid,
        "d": d,
        "kappa": kappa,
        "init": init_label,
        "method": method,
        "iters": trace.n_steps,
        "final_gap_ratio": float(ratios[-1]) if len(ratios) else float("nan"),
        "T_unit": t_unit,
        "max_lambda_t": max(loops) if loops else None,
        "mean_lambda_t": float(np.mean(loops)) if loops else None,
        "status": trace.status,
    }


def write_manifest(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) if not isinstance(row.get(c), str)
                             else row.get(c) for c in MANIFEST_COLUMNS])
    return path


def read_manifest(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return list(reader)
