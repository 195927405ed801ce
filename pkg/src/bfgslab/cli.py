"""Experiment CLI: single runs, benchmark sweeps, and trace verification.

Subcommands:
    run     one (problem, method, init) solve; writes <runid>_trace.csv,
            <runid>_meta.json and <runid>_report.txt
    sweep   Cartesian grid over dimensions x condition numbers x init
            schemes x methods; one trace per run plus sweep_index.csv
    verify  re-check traces (or re-run a config in-process) against
            every applicable bound; exit 0 iff all applicable checks pass
    report  render the bound report for existing traces

Configuration is a flat key-value text file (`section.key = value`,
`#` comments); command-line flags override file values.  The x0 spec
`randn` draws a start fixed by the problem dimension only, so changing
the run seed re-randomizes nothing but the c*I probe pair.
"""

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from . import analysis, traceio
from .bfgs import SCHEME_LABELS, InitScheme
from .exceptions import BfgslabError, ConfigError, InputError, SolverAbort
from .linesearch import WolfeParams
from .problems import make_cubic_problem, make_quadratic_problem
from .solvers import SolverConfig, run_bfgs, run_gd

DEFAULTS = {
    "problem.kind": "cubic",
    "problem.d": 100,
    "problem.kappa": 100.0,
    "problem.eigs": None,
    "problem.delta": 1.0,
    "problem.beta_f": 1.0,
    "problem.x0": "randn",
    "solver.method": "bfgs",
    "solver.init": "muI",
    "solver.alpha": 0.1,
    "solver.beta": 0.9,
    "solver.max_loops": 100,
    "solver.max_iters": 5000,
    "solver.gd_max_iters": 200000,
    "solver.grad_tol": None,
    "solver.gap_tol": 1e-12,
    "solver.seed": 0,
    "solver.snapshots": False,
    "solver.stride": 1,
    "sweep.d": "100,300,600",
    "sweep.kappa": "100,1000",
    "sweep.init": "LI,muI,I,cI",
    "sweep.methods": "bfgs,gd",
    "output.dir": "out",
    "output.workers": 0,  # 0 = CPU count
}

_X0_SEED_BASE = 90210  # fixed: x0 must not move with the run seed


def parse_config_file(path):
    """Flat `section.key = value` parser; '#' starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'section.key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in DEFAULTS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return values


def _coerce(key, value):
    if value is None or isinstance(value, (int, float, bool)):
        return value
    value = str(value).strip()
    if value == "" or value.lower() == "none":
        return None
    default = DEFAULTS[key]
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


_FLAG_DESTS = {
    "problem.kind": "kind", "problem.d": "d", "problem.kappa": "kappa",
    "problem.eigs": "eigs", "problem.delta": "delta",
    "problem.beta_f": "beta_f", "problem.x0": "x0",
    "solver.method": "method", "solver.init": "init",
    "solver.alpha": "alpha", "solver.beta": "beta",
    "solver.max_loops": "max_loops", "solver.max_iters": "max_iters",
    "solver.gd_max_iters": "gd_max_iters", "solver.grad_tol": "grad_tol",
    "solver.gap_tol": "gap_tol", "solver.seed": "seed",
    "solver.snapshots": "snapshots", "solver.stride": "stride",
    "sweep.d": "d_list", "sweep.kappa": "kappa_list",
    "sweep.init": "init_list", "sweep.methods": "methods",
    "output.dir": "dir", "output.workers": "workers",
}


def build_settings(args):
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for key, dest in _FLAG_DESTS.items():
        override = getattr(args, dest, None)
        if override is not None:
            settings[key] = override
    return {k: _coerce(k, v) for k, v in settings.items()}


def resolve_x0(spec, d):
    if spec is None or spec == "zeros":
        return np.zeros(d)
    if spec == "ones":
        return np.ones(d)
    if isinstance(spec, str) and spec.startswith("randn"):
        scale = 1.0
        if ":" in spec:
            scale = float(spec.split(":", 1)[1])
        rng = np.random.default_rng(_X0_SEED_BASE + d)
        return scale * rng.standard_normal(d)
    if isinstance(spec, str):
        vec = np.array([float(v) for v in spec.split(",")])
        if len(vec) != d:
            raise ConfigError(f"x0 has {len(vec)} entries, expected {d}")
        return vec
    raise ConfigError(f"unrecognized x0 spec {spec!r}")


def build_problem(settings):
    kind = settings["problem.kind"]
    if kind == "quadratic":
        eigs = settings["problem.eigs"]
        if eigs:
            eigenvalues = [float(v) for v in str(eigs).split(",")]
        else:
            d = settings["problem.d"]
            eigenvalues = np.geomspace(1.0, settings["problem.kappa"], d)
        return make_quadratic_problem(len(eigenvalues), eigenvalues)
    if kind == "cubic":
        return make_cubic_problem(settings["problem.d"],
                                  settings["problem.kappa"],
                                  Delta=settings["problem.delta"],
                                  beta_f=settings["problem.beta_f"])
    raise ConfigError(f"unknown problem kind {kind!r}")


def build_solver_config(settings, method, init, problem, x0):
    wolfe = WolfeParams(settings["solver.alpha"], settings["solver.beta"],
                        settings["solver.max_loops"])
    if method == "gd":
        return SolverConfig(
            method="gd", wolfe=wolfe,
            max_iters=settings["solver.gd_max_iters"],
            stop_grad_tol=settings["solver.grad_tol"],
            stop_gap_tol=settings["solver.gap_tol"],
            seed=settings["solver.seed"], x0=x0, store_vectors=False)
    return SolverConfig(
        method="bfgs", init_scheme=InitScheme.from_name(init),
        wolfe=wolfe, max_iters=settings["solver.max_iters"],
        stop_grad_tol=settings["solver.grad_tol"],
        stop_gap_tol=settings["solver.gap_tol"],
        seed=settings["solver.seed"],
        record_matrices=settings["solver.snapshots"],
        snapshot_stride=settings["solver.stride"], x0=x0)


def make_runid(settings, method, init):
    kind = settings["problem.kind"]
    d = settings["problem.d"]
    if settings["problem.eigs"]:
        d = len(str(settings["problem.eigs"]).split(","))
    tag = f"{kind}_d{d}"
    if kind == "cubic":
        tag += f"_k{settings['problem.kappa']:g}"
    if method == "gd":
        return f"{tag}_gd"
    return f"{tag}_bfgs_{SCHEME_LABELS[InitScheme.from_name(init).kind]}"


def execute_run(settings, method, init, outdir):
    problem = build_problem(settings)
    x0 = resolve_x0(settings["problem.x0"], problem.d)
    config = build_solver_config(settings, method, init, problem, x0)
    runid = make_runid(settings, method, init)
    os.makedirs(outdir, exist_ok=True)
    paths = {kind: os.path.join(outdir, f"{runid}_{kind}")
             for kind in ("trace.csv", "meta.json", "report.txt")}
    try:
        trace = run_bfgs(problem, config) if method == "bfgs" \
            else run_gd(problem, config)
    except SolverAbort as exc:
        if exc.trace is not None:
            traceio.write_trace_csv(paths["trace.csv"], exc.trace)
            traceio.write_meta_json(paths["meta.json"], exc.trace, runid)
        raise
    traceio.write_trace_csv(paths["trace.csv"], trace)
    traceio.write_meta_json(paths["meta.json"], trace, runid)
    report = analysis.full_verification(trace)
    traceio.write_report(paths["report.txt"], report)
    return runid, trace, report, paths


def cmd_run(args):
    try:
        settings = build_settings(args)
        runid, trace, report, paths = execute_run(
            settings, settings["solver.method"], settings["solver.init"],
            settings["output.dir"])
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverAbort as exc:
        print(f"solver abort: {exc} (partial trace written)", file=sys.stderr)
        return 3
    ratios = trace.gap_ratios()
    print(f"{runid}: status={trace.status} iters={trace.n_steps} "
          f"final_gap_ratio={ratios[-1]:.3e}")
    print(f"wrote {paths['trace.csv']}")
    print(f"bound checks: {'all pass' if report.all_pass else 'FAILURES'}")
    return 0


def _sweep_one(job):
    """Worker for one sweep cell; returns a manifest row."""
    settings, method, init, outdir = job
    label = ("gd" if method == "gd"
             else SCHEME_LABELS[InitScheme.from_name(init).kind])
    try:
        runid, trace, _, _ = execute_run(settings, method, init, outdir)
        return traceio.manifest_row(runid, trace, settings["problem.d"],
                                    settings["problem.kappa"], label, method)
    except BfgslabError as exc:
        return {"runid": make_runid(settings, method, init),
                "d": settings["problem.d"],
                "kappa": settings["problem.kappa"], "init": label,
                "method": method, "status": f"failed: {exc}"}


def cmd_sweep(args):
    try:
        settings = build_settings(args)
        dims = [int(v) for v in str(settings["sweep.d"]).split(",") if v]
        kappas = [float(v) for v in str(settings["sweep.kappa"]).split(",")
                  if v]
        inits = [v for v in str(settings["sweep.init"]).split(",") if v]
        methods = [v for v in str(settings["sweep.methods"]).split(",") if v]
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    jobs = []
    for d in dims:
        for kappa in kappas:
            cell = dict(settings)
            cell["problem.d"] = d
            cell["problem.kappa"] = kappa
            for method in methods:
                if method == "bfgs":
                    jobs.extend((cell, "bfgs", init, settings["output.dir"])
                                for init in inits)
                else:
                    jobs.append((cell, "gd", None, settings["output.dir"]))
    if not jobs:
        print("config error: empty sweep grid", file=sys.stderr)
        return 2

    workers = settings["output.workers"] or os.cpu_count() or 1
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]

    os.makedirs(settings["output.dir"], exist_ok=True)
    manifest = os.path.join(settings["output.dir"], "sweep_index.csv")
    traceio.write_manifest(manifest, rows)
    good = sum(1 for r in rows if not str(r["status"]).startswith("failed"))
    print(f"sweep: {good}/{len(rows)} runs succeeded; manifest {manifest}")
    return 0 if good else 1


def _report_exit(report):
    failure = report.first_failure()
    if failure is None:
        return 0
    print(f"FIRST FAILURE: check={failure.name} t={failure.first_fail_t} "
          f"margin={failure.margin:.6g}", file=sys.stderr)
    return 1


def cmd_verify(args):
    if not args.traces:
        # config mode: run fresh (snapshots on) and verify in-process
        try:
            settings = build_settings(args)
            settings["solver.snapshots"] = True
            _, trace, _, _ = execute_run(
                settings, settings["solver.method"], settings["solver.init"],
                settings["output.dir"])
        except (ConfigError, InputError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except SolverAbort as exc:
            print(f"solver abort: {exc}", file=sys.stderr)
            return 3
        report = analysis.full_verification(trace)
        print(report.render())
        return _report_exit(report)

    worst = 0
    for path in args.traces:
        try:
            ct = traceio.load_trace(path)
        except InputError as exc:
            print(f"malformed trace: {exc}", file=sys.stderr)
            return 2
        report = traceio.verify_columns(ct)
        print(f"== {path}")
        print(report.render())
        worst = max(worst, _report_exit(report))
    return worst


def cmd_report(args):
    for path in args.traces:
        try:
            ct = traceio.load_trace(path)
        except InputError as exc:
            print(f"malformed trace: {exc}", file=sys.stderr)
            return 2
        print(f"== {path}")
        print(traceio.verify_columns(ct).render())
    return 0


def _add_common_flags(sub):
    sub.add_argument("--config", help="flat key-value config file")
    sub.add_argument("--problem", dest="kind",
                     choices=["cubic", "quadratic"])
    sub.add_argument("--d", type=int)
    sub.add_argument("--kappa", type=float)
    sub.add_argument("--eigs", help="comma-separated quadratic eigenvalues")
    sub.add_argument("--delta", type=float)
    sub.add_argument("--beta-f", dest="beta_f", type=float)
    sub.add_argument("--x0", help="zeros | ones | randn[:scale] | v1,v2,...")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--beta", type=float)
    sub.add_argument("--max-iters", dest="max_iters", type=int)
    sub.add_argument("--gd-max-iters", dest="gd_max_iters", type=int)
    sub.add_argument("--grad-tol", dest="grad_tol", type=float)
    sub.add_argument("--gap-tol", dest="gap_tol", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--snapshots", action="store_const", const=True,
                     default=None)
    sub.add_argument("--stride", type=int)
    sub.add_argument("--outdir", dest="dir")
    sub.add_argument("--workers", type=int)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bfgslab",
        description="BFGS benchmark runs with convergence-bound verification")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute one solve")
    _add_common_flags(p_run)
    p_run.add_argument("--method", choices=["bfgs", "gd"])
    p_run.add_argument("--init", help="LI | muI | I | cI")
    p_run.set_defaults(func=cmd_run)

    p_sweep = subs.add_parser("sweep", help="run a benchmark grid")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--sweep-d", dest="d_list")
    p_sweep.add_argument("--sweep-kappa", dest="kappa_list")
    p_sweep.add_argument("--sweep-init", dest="init_list")
    p_sweep.add_argument("--methods", dest="methods")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = subs.add_parser("verify", help="verify traces against bounds")
    _add_common_flags(p_verify)
    p_verify.add_argument("traces", nargs="*")
    p_verify.add_argument("--method", choices=["bfgs", "gd"])
    p_verify.add_argument("--init")
    p_verify.set_defaults(func=cmd_verify)

    p_report = subs.add_parser("report", help="render trace reports")
    p_report.add_argument("traces", nargs="+")
    p_report.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
