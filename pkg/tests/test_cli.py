"""CLI contracts: exit codes, file outputs, round-trips, determinism."""

import json
import os

import numpy as np
import pytest

from bfgslab.cli import main, parse_config_file, resolve_x0
from bfgslab.exceptions import ConfigError
from bfgslab.traceio import (CSV_COLUMNS, MANIFEST_COLUMNS, load_trace,
                             read_manifest, verify_columns)


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("runs"))
    code = run_cli("run", "--problem", "quadratic", "--eigs", "1,4",
                   "--x0", "1,1", "--init", "I", "--alpha", "0.25",
                   "--beta", "0.75", "--snapshots", "--outdir", out)
    assert code == 0
    return out


class TestRun:
    def test_outputs_exist(self, run_dir):
        base = os.path.join(run_dir, "quadratic_d2_bfgs_I")
        assert os.path.exists(base + "_trace.csv")
        assert os.path.exists(base + "_meta.json")
        assert os.path.exists(base + "_report.txt")

    def test_report_has_machine_block(self, run_dir):
        base = os.path.join(run_dir, "quadratic_d2_bfgs_I_report.txt")
        text = open(base).read()
        assert "machine-readable:" in text
        assert "check=monotone_decrease pass=true" in text

    def test_csv_schema(self, run_dir):
        path = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        header = open(path).readline().strip().split(",")
        assert header == CSV_COLUMNS

    def test_missing_required_value_exits_2(self, capsys, tmp_path):
        code = run_cli("run", "--problem", "cubic", "--kappa", "0.5",
                       "--outdir", str(tmp_path))
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_cubic_small_run(self, tmp_path):
        code = run_cli("run", "--problem", "cubic", "--d", "20",
                       "--kappa", "30", "--init", "muI",
                       "--outdir", str(tmp_path))
        assert code == 0
        ct = load_trace(str(tmp_path / "cubic_d20_k30_bfgs_muI_trace.csv"))
        assert ct.meta["status"] in ("converged_gap", "converged_grad")

    def test_solver_abort_exits_3_with_partial_trace(self, tmp_path, capsys):
        # a one-loop budget cannot bracket on an ill-scaled start, so
        # the run aborts after writing what it has
        cfg = tmp_path / "abort.cfg"
        cfg.write_text("""
problem.kind = quadratic
problem.eigs = 1,100
problem.x0 = ones
solver.init = muI
solver.max_loops = 1
""")
        out = tmp_path / "out"
        code = run_cli("run", "--config", str(cfg), "--outdir", str(out))
        assert code == 3
        assert "partial trace" in capsys.readouterr().err
        ct = load_trace(str(out / "quadratic_d2_bfgs_muI_trace.csv"))
        assert ct.meta["status"] == "aborted"
        assert len(ct.col("t")) >= 1

    def test_gd_run(self, tmp_path):
        code = run_cli("run", "--problem", "quadratic", "--eigs", "1,9",
                       "--x0", "1,1", "--method", "gd",
                       "--outdir", str(tmp_path))
        assert code == 0
        ct = load_trace(str(tmp_path / "quadratic_d2_gd_trace.csv"))
        report = verify_columns(ct)
        names = {c.name: c for c in report.checks}
        assert names["curvature_gain_ratio"].passed is None
        assert names["armijo_decrease_ratio"].passed


class TestConfigFile:
    def test_parse_and_flags_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("""
# comment line
problem.kind = quadratic
problem.eigs = 1,4
problem.x0 = 1,1
solver.init = I
solver.alpha = 0.25
solver.beta = 0.75
output.dir = IGNORED
""")
        out = tmp_path / "out"
        code = run_cli("run", "--config", str(cfg), "--outdir", str(out))
        assert code == 0
        assert (out / "quadratic_d2_bfgs_I_trace.csv").exists()

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("problem.shape = banana\n")
        with pytest.raises(ConfigError):
            parse_config_file(str(cfg))

    def test_x0_spec(self):
        np.testing.assert_array_equal(resolve_x0("zeros", 3), np.zeros(3))
        np.testing.assert_array_equal(resolve_x0("ones", 2), np.ones(2))
        a = resolve_x0("randn", 5)
        b = resolve_x0("randn", 5)
        np.testing.assert_array_equal(a, b)  # fixed by dimension
        assert resolve_x0("randn:3", 5)[0] == pytest.approx(3 * a[0])
        with pytest.raises(ConfigError):
            resolve_x0("1,2,3", 2)


class TestVerify:
    def test_verify_valid_trace_exit_0(self, run_dir, capsys):
        path = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        assert run_cli("verify", path) == 0
        out = capsys.readouterr().out
        assert "pass=true" in out

    def test_verify_corrupted_trace_exit_1(self, run_dir, tmp_path, capsys):
        src = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        lines = open(src).read().splitlines()
        # raise one recorded objective value above its predecessor
        cells = lines[2].split(",")
        cells[1] = format(float(lines[1].split(",")[1]) + 1.0, ".17g")
        lines[2] = ",".join(cells)
        bad = tmp_path / "bad_trace.csv"
        bad.write_text("\n".join(lines) + "\n")
        meta = open(os.path.join(
            run_dir, "quadratic_d2_bfgs_I_meta.json")).read()
        (tmp_path / "bad_meta.json").write_text(meta)
        code = run_cli("verify", str(bad))
        assert code == 1
        err = capsys.readouterr().err
        assert "monotone_decrease" in err and "t=" in err

    def test_verify_malformed_exit_2(self, tmp_path):
        junk = tmp_path / "junk_trace.csv"
        junk.write_text("not,a,real,header\n1,2,3,4\n")
        (tmp_path / "junk_meta.json").write_text("{}")
        assert run_cli("verify", str(junk)) == 2

    def test_verify_missing_sidecar_exit_2(self, run_dir, tmp_path):
        src = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        orphan = tmp_path / "orphan_trace.csv"
        orphan.write_text(open(src).read())
        assert run_cli("verify", str(orphan)) == 2

    def test_verify_from_config(self, tmp_path, capsys):
        code = run_cli("verify", "--problem", "quadratic", "--eigs", "1,4",
                       "--x0", "1,1", "--init", "I",
                       "--outdir", str(tmp_path))
        assert code == 0
        assert "potential_recursion" in capsys.readouterr().out

    def test_report_subcommand(self, run_dir, capsys):
        path = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        assert run_cli("report", path) == 0
        assert "bound verification report" in capsys.readouterr().out


class TestRoundTrip:
    def test_reverify_identical_report(self, run_dir):
        path = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        first = verify_columns(load_trace(path)).render()
        second = verify_columns(load_trace(path)).render()
        assert first == second

    def test_float_cells_roundtrip_exactly(self, run_dir):
        path = os.path.join(run_dir, "quadratic_d2_bfgs_I_trace.csv")
        ct = load_trace(path)
        reread = load_trace(path)
        for col in CSV_COLUMNS:
            np.testing.assert_array_equal(ct.col(col), reread.col(col))

    def test_meta_constants_present(self, run_dir):
        meta = json.load(open(os.path.join(
            run_dir, "quadratic_d2_bfgs_I_meta.json")))
        for key in ("mu", "L_bound", "M_bound", "kappa", "f_star", "gap0",
                    "psi_Bbar0", "psi_Btilde0", "C0"):
            assert key in meta["constants"]


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("sweep"))
    code = run_cli("sweep", "--sweep-d", "8,12", "--sweep-kappa", "20",
                   "--sweep-init", "LI,muI", "--methods", "bfgs,gd",
                   "--gd-max-iters", "50000", "--outdir", out,
                   "--workers", "1")
    assert code == 0
    return out


class TestSweep:
    def test_manifest_complete(self, sweep_dir):
        rows = read_manifest(os.path.join(sweep_dir, "sweep_index.csv"))
        assert len(rows) == 2 * 1 * 3  # {8,12} x {20} x {LI, muI, gd}
        assert set(rows[0].keys()) == set(MANIFEST_COLUMNS)
        assert all(r["status"] == "converged_gap" for r in rows)
        assert len({r["runid"] for r in rows}) == len(rows)

    def test_empty_grid_exit_2(self, tmp_path):
        code = run_cli("sweep", "--sweep-d", "", "--methods", "bfgs",
                       "--outdir", str(tmp_path))
        assert code == 2

    def test_seed_changes_only_probe_runs(self, sweep_dir, tmp_path):
        out2 = str(tmp_path / "seeded")
        code = run_cli("sweep", "--sweep-d", "8", "--sweep-kappa", "20",
                       "--sweep-init", "LI,muI,cI", "--methods", "bfgs",
                       "--seed", "123", "--outdir", out2, "--workers", "1")
        assert code == 0
        out3 = str(tmp_path / "seeded2")
        code = run_cli("sweep", "--sweep-d", "8", "--sweep-kappa", "20",
                       "--sweep-init", "LI,muI,cI", "--methods", "bfgs",
                       "--seed", "456", "--outdir", out3, "--workers", "1")
        assert code == 0
        for rid in ("cubic_d8_k20_bfgs_LI", "cubic_d8_k20_bfgs_muI"):
            a = open(os.path.join(out2, rid + "_trace.csv")).read()
            b = open(os.path.join(out3, rid + "_trace.csv")).read()
            assert a == b  # byte-identical despite the seed change
        a = open(os.path.join(out2, "cubic_d8_k20_bfgs_cI_trace.csv")).read()
        b = open(os.path.join(out3, "cubic_d8_k20_bfgs_cI_trace.csv")).read()
        assert a != b  # only the probe-pair runs move

    def test_parallel_matches_serial(self, sweep_dir, tmp_path):
        out2 = str(tmp_path / "par")
        code = run_cli("sweep", "--sweep-d", "8,12", "--sweep-kappa", "20",
                       "--sweep-init", "LI,muI", "--methods", "bfgs,gd",
                       "--gd-max-iters", "50000", "--outdir", out2,
                       "--workers", "3")
        assert code == 0
        for name in sorted(os.listdir(sweep_dir)):
            if name.endswith("_trace.csv"):
                a = open(os.path.join(sweep_dir, name)).read()
                b = open(os.path.join(out2, name)).read()
                assert a == b
