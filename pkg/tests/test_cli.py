import csv
import json
import math

import pytest

from symaccel.cli import (
    EXIT_CONFIG,
    EXIT_DIVERGED,
    EXIT_IO,
    EXIT_OK,
    EXIT_VERIFY,
    RunSpec,
    execute,
    main,
)
from symaccel.trace import TRACE_HEADER

SYNTH = ["--synthetic", "200,5,4", "--seed", "7", "--standardize"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_trace_and_summary(tmp_path):
    code = main(["run", "--scheme", "si2", "--sigma", "6", "--tau", "0.01", *SYNTH, "--out-dir", str(tmp_path),
                 "--name", "smoke", "--plot"])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "smoke.summary.json").read_text())
    assert set(summary) == {"scheme", "sigma", "tau", "iters", "grad_evals", "wall_ns", "final_f", "stop_reason"}
    assert summary["stop_reason"] == "rel_tol" and math.isfinite(summary["final_f"])
    first = (tmp_path / "smoke.trace.csv").read_text().splitlines()[0]
    assert first == "iter,t,f,grad_norm,grad_evals,elapsed_ns,tau" == ",".join(TRACE_HEADER)
    rows = read_csv(tmp_path / "smoke.trace.csv")
    assert len(rows) == summary["iters"] + 1
    assert (tmp_path / "smoke.svg").read_text().startswith("<svg")


def test_trace_time_column_is_cumulative_tau(tmp_path):
    main(["run", "--backtracking", *SYNTH, "--sigma", "6", "--out-dir", str(tmp_path), "--name", "bt"])
    rows = read_csv(tmp_path / "bt.trace.csv")
    total = 1.0
    for r in rows[1:]:
        total += float(r["tau"])
        assert abs(float(r["t"]) - total) <= 1e-12
    iters = [int(r["iter"]) for r in rows]
    assert iters == list(range(len(rows)))


def test_run_is_byte_identical_excluding_elapsed(tmp_path):
    def strip(path):
        return [line.split(",")[:5] + line.split(",")[6:] for line in path.read_text().splitlines()]

    for d in ("a", "b"):
        main(["run", *SYNTH, "--out-dir", str(tmp_path / d), "--name", "r"])
    assert strip(tmp_path / "a" / "r.trace.csv") == strip(tmp_path / "b" / "r.trace.csv")


def test_rk2_large_sigma_may_diverge(tmp_path):
    code = main(["run", "--scheme", "rk2", "--sigma", "12", *SYNTH, "--out-dir", str(tmp_path), "--name", "rk2"])
    summary = json.loads((tmp_path / "rk2.summary.json").read_text())
    assert code in (EXIT_OK, EXIT_DIVERGED)
    assert (code == EXIT_DIVERGED) == (summary["stop_reason"] == "diverged")


@pytest.mark.parametrize("argv", [
    ["run", "--sigma", "1"],
    ["run", "--tau", "0.7"],
    ["run", "--tau", "0"],
    ["run", "--rel-tol", "0"],
    ["run", "--scheme", "euler"],
    ["run", "--quadratic", "0:1", "--synthetic", "10,2,1"],
    ["run", "--quadratic", "0,0:1,1", "--x0", "1"],
    ["sweep", "--sigmas", "", "--quadratic", "0:1"],
    ["verify", "symplectic", "--scheme", "rk4"],
    [],
])
def test_config_errors(argv, tmp_path):
    assert main([*argv, "--out-dir", str(tmp_path)] if argv else argv) == EXIT_CONFIG


def test_data_errors_map_to_io(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\nnan,1\n")
    assert main(["run", "--data", str(bad), "--out-dir", str(tmp_path)]) == EXIT_IO
    assert main(["run", "--data", str(tmp_path / "missing.csv"), "--out-dir", str(tmp_path)]) == EXIT_IO


def test_csv_data_run(tmp_path):
    assert main(["gen-data", "--n", "60", "--d", "3", "--seed", "2", "--separation", "1", "--out", str(tmp_path / "g.csv")]) == EXIT_OK
    rows = read_csv(tmp_path / "g.csv")
    assert list(rows[0]) == ["x1", "x2", "x3", "label"] and len(rows) == 60
    assert main(["run", "--data", str(tmp_path / "g.csv"), "--label-col", "label", "--add-intercept",
                 "--out-dir", str(tmp_path), "--name", "csv"]) == EXIT_OK
    assert json.loads((tmp_path / "csv.summary.json").read_text())["stop_reason"] == "rel_tol"


def test_sweep_rows_and_monotone_final_f(tmp_path):
    code = main(["sweep", "--sigmas", "2,4,6", "--quadratic", "1,-1:1,2", "--x0", "0,0", "--horizon", "2",
                 "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "sweep.csv")
    assert [float(r["sigma"]) for r in rows] == [2.0, 4.0, 6.0]
    f = [float(r["final_f"]) for r in rows]
    assert f[0] > f[1] > f[2]
    assert (tmp_path / "sweep.svg").exists()


def test_sweep_isolates_failing_cell(tmp_path):
    code = main(["sweep", "--sigmas", "2,12", "--schemes", "si2", "--tau", "0.5", "--quadratic", "0:1", "--x0", "1",
                 "--max-iters", "1000", "--rel-tol", "1e-300", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 2 and rows[1]["stop_reason"] == "diverged"


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--sigmas", "2,4", "--schemes", "si2,rk4", "--quadratic", "0:1", "--x0", "1", "--horizon", "1.5"]
    main([*args, "--out-dir", str(tmp_path / "s")])
    main([*args, "--jobs", "2", "--out-dir", str(tmp_path / "p")])
    strip = [{k: v for k, v in r.items() if k != "wall_ns"} for r in read_csv(tmp_path / "s" / "sweep.csv")]
    assert strip == [{k: v for k, v in r.items() if k != "wall_ns"} for r in read_csv(tmp_path / "p" / "sweep.csv")]


def test_compare_nag_synthetic(tmp_path):
    assert main(["compare-nag", *SYNTH, "--out-dir", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "compare_nag.csv")
    assert [r["scheme"] for r in rows] == ["si2-bt", "nag-bt"]
    assert float(rows[0]["sigma"]) == 6.0
    assert all(r["stop_reason"] == "rel_tol" for r in rows)
    assert len(json.loads((tmp_path / "compare_nag.json").read_text())) == 2


def test_compare_nag_quadratic_reaches_optimum(tmp_path):
    main(["compare-nag", "--quadratic", "1:1", "--x0", "0", "--max-iters", "20000", "--out-dir", str(tmp_path)])
    rows = read_csv(tmp_path / "compare_nag.csv")
    assert all(abs(float(r["final_f"])) < 1e-6 for r in rows)


def test_verify_pass_and_fail(tmp_path):
    assert main(["verify", "order", "--out-dir", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "verify_order.json").read_text())
    assert report["passed"] and 1.7 <= report["fitted_order"] <= 2.3
    # the literal composition is first order, so the second-order band fails
    assert main(["verify", "order", "--scheme", "si2-literal", "--out-dir", str(tmp_path)]) == EXIT_VERIFY
    assert json.loads((tmp_path / "verify_order.json").read_text())["passed"] is False
    for which in ("gradcheck", "residual", "symplectic"):
        assert main(["verify", which, "--out-dir", str(tmp_path)]) == EXIT_OK


def test_out_dir_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SYMACCEL_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--quadratic", "0:1", "--x0", "1", "--name", "e"]) == EXIT_OK
    assert (tmp_path / "env" / "e.trace.csv").exists()


def test_execute_reports_divergence_in_summary():
    trace, summary = execute(RunSpec(scheme="si2", sigma=12.0, tau=0.5, quadratic=((0.0,), (1.0,)), x0=(1.0,),
                                     max_iters=1000, rel_tol=1e-300))
    assert summary["stop_reason"] == "diverged" == trace.stop_reason
