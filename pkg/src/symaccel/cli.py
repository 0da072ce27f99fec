"""Command-line harness: ``symaccel run|sweep|verify|compare-nag|gen-data``.

Exit codes: 0 ok, 1 configuration error, 2 divergence, 3 I/O or data
format error, 4 verification threshold not met.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from .errors import ConfigError, DataFormatError, DivergenceError, DomainError, StepFailure
from .integrators import MAX_TAU, Backtracking, Scheme, StepperConfig, StoppingRule, run
from .model import SigmaModel
from .nag import BacktrackParams, run_nag
from .objectives import (
    DEFAULT_LAMBDA_REG,
    LogisticRegressionObjective,
    QuadraticObjective,
    grad_check,
)
from .plotting import write_line_chart
from .trace import Trace, write_trace_csv

log = logging.getLogger("symaccel")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4
OUT_DIR_ENV = "SYMACCEL_OUT_DIR"

# thresholds used by ``verify`` (and by the acceptance tests)
NOMINAL_ORDER = {"si1": 1.0, "si2": 2.0, "si2-literal": 2.0, "si4": 4.0, "rk2": 2.0, "rk4": 4.0}
ORDER_BAND = {"si1": 0.3, "si2": 0.3, "si2-literal": 0.3, "si4": 0.5, "rk2": 0.3, "rk4": 0.5}
ORDER_TAUS = (0.04, 0.02, 0.01, 0.005)
SYMPLECTIC_TOL = 1e-6
GRADCHECK_TOL = 1e-6
RESIDUAL_RATIO_BAND = (3.0, 5.0)


@dataclass
class RunSpec:
    """Everything needed to reproduce one run."""

    scheme: str = "si2"
    sigma: float = 2.0
    tau: float = 0.01
    backtracking: bool = False
    tau_max: float | None = None
    rel_tol: float = 1e-6
    max_iters: int = 100_000
    horizon: float | None = None
    seed: int = 0
    p0_at_1: float = 1.0
    t0: float = 1.0
    # objective source: exactly one of data / idx / synthetic / quadratic
    data: str | None = None
    delimiter: str = ","
    has_header: bool = True
    label_col: str = "-1"
    positive_label: str = "1"
    idx_images: str | None = None
    idx_labels: str | None = None
    synthetic: tuple | None = None
    quadratic: tuple | None = None
    x0: tuple | None = None
    standardize: bool = False
    add_intercept: bool = False
    lambda_reg: float = DEFAULT_LAMBDA_REG
    out_dir: str | None = None
    name: str = ""
    plot: bool = False

    def validate(self) -> None:
        if not self.sigma >= 2:
            raise ConfigError(f"sigma must be >= 2, got {self.sigma}")
        if not 0 < self.tau <= MAX_TAU:
            raise ConfigError(f"tau must lie in (0, {MAX_TAU}], got {self.tau}")
        if not self.rel_tol > 0:
            raise ConfigError("rel-tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max-iters must be >= 1")
        sources = [self.data is not None, self.idx_images is not None, self.synthetic is not None,
                   self.quadratic is not None]
        if sum(sources) > 1:
            raise ConfigError("choose one objective source: --data, --idx-images, --synthetic or --quadratic")
        if (self.idx_images is None) != (self.idx_labels is None):
            raise ConfigError("--idx-images and --idx-labels go together")
        if self.horizon is not None and self.horizon <= self.t0:
            raise ConfigError("--horizon must exceed t0")
        try:
            Scheme(self.scheme)
        except ValueError:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from None

    def model(self) -> SigmaModel:
        return SigmaModel(self.sigma, self.p0_at_1, self.t0)

    def stepper_config(self) -> StepperConfig:
        adaptation = Backtracking(tau_max=self.tau_max if self.tau_max is not None else MAX_TAU) \
            if self.backtracking else None
        return StepperConfig(Scheme(self.scheme), self.tau, adaptation)

    def iterations_and_stop(self):
        if self.horizon is None:
            return self.max_iters, StoppingRule(self.rel_tol)
        n = round((self.horizon - self.t0) / self.tau)
        return max(n, 1), None


def build_problem(spec: RunSpec):
    """Return (objective, x0) for the run's objective source."""
    if spec.quadratic is not None:
        center, scales = spec.quadratic
        obj = QuadraticObjective(center, scales)
    else:
        if spec.data is not None:
            ds = data_mod.load_delimited(spec.data, spec.delimiter, spec.has_header, spec.label_col,
                                         spec.positive_label)
        elif spec.idx_images is not None:
            ds = data_mod.load_idx_pair(spec.idx_images, spec.idx_labels)
        else:
            n, d, sep = spec.synthetic if spec.synthetic is not None else (200, 5, 4.0)
            ds = data_mod.synth_logistic(spec.seed, int(n), int(d), float(sep))
        if spec.standardize:
            ds, _, _ = data_mod.standardize(ds)
        if spec.add_intercept:
            ds = ds.with_intercept()
        obj = LogisticRegressionObjective.from_dataset(ds, spec.lambda_reg)
    if spec.x0 is not None:
        x0 = np.array(spec.x0, dtype=float)
        if x0.shape != (obj.dim,):
            raise ConfigError(f"--x0 needs {obj.dim} values")
    else:
        x0 = np.zeros(obj.dim)
    return obj, x0


def summary_of(spec: RunSpec, trace: Trace) -> dict:
    return {
        "scheme": trace.scheme,
        "sigma": spec.sigma,
        "tau": spec.tau,
        "iters": trace.iterations,
        "grad_evals": trace.grad_evals,
        "wall_ns": trace.wall_ns,
        "final_f": trace.final_f,
        "stop_reason": trace.stop_reason,
    }


def execute(spec: RunSpec, objective=None, x0=None) -> tuple[Trace, dict]:
    """Run one spec; divergence is reported in the summary, not raised."""
    spec.validate()
    if objective is None:
        objective, x0 = build_problem(spec)
    n, stop = spec.iterations_and_stop()
    try:
        trace = run(spec.model(), objective, x0, spec.stepper_config(), stop=stop, max_iters=n)
    except DivergenceError as exc:
        trace = exc.trace
    return trace, summary_of(spec, trace)


def _out_dir(path: str | None) -> Path:
    out = Path(path or os.environ.get(OUT_DIR_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _stem(spec: RunSpec) -> str:
    return spec.name or f"{spec.scheme}{'-bt' if spec.backtracking else ''}_sigma{spec.sigma:g}_tau{spec.tau:g}"


def cmd_run(spec: RunSpec) -> int:
    out = _out_dir(spec.out_dir)
    trace, summary = execute(spec)
    stem = _stem(spec)
    write_trace_csv(trace, out / f"{stem}.trace.csv")
    _write_json(out / f"{stem}.summary.json", summary)
    if spec.plot:
        write_line_chart(out / f"{stem}.svg", [(stem, trace.column("iter"), trace.column("f"))],
                         title=f"{spec.scheme} sigma={spec.sigma:g}")
    log.info("%s: %s after %d iterations, f=%.10g", stem, summary["stop_reason"], summary["iters"],
             summary["final_f"])
    return EXIT_DIVERGED if summary["stop_reason"] == "diverged" else EXIT_OK


def _sweep_cell(spec: RunSpec):
    try:
        trace, summary = execute(spec)
        return summary, trace.column("iter"), trace.column("f"), trace
    except (StepFailure, ConfigError, DomainError) as exc:
        summary = {"scheme": spec.scheme, "sigma": spec.sigma, "tau": spec.tau, "iters": 0, "grad_evals": 0,
                   "wall_ns": 0, "final_f": math.nan, "stop_reason": f"error: {exc}"}
        return summary, [], [], None


SWEEP_COLUMNS = ("scheme", "sigma", "tau", "iters", "grad_evals", "wall_ns", "final_f", "stop_reason")


def cmd_sweep(spec: RunSpec, sigmas, schemes, jobs: int = 1) -> int:
    if not sigmas or not schemes:
        raise ConfigError("sweep needs non-empty sigma and scheme lists")
    out = _out_dir(spec.out_dir)
    cells = [replace(spec, scheme=sc, sigma=float(sg), name="") for sc in schemes for sg in sigmas]
    for c in cells:
        c.validate()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    series = []
    warn = False
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for cell, (summary, iters, fs, trace) in zip(cells, results):
            writer.writerow([summary[k] if not isinstance(summary[k], float) else repr(summary[k])
                             for k in SWEEP_COLUMNS])
            if summary["stop_reason"] not in ("rel_tol", "max_iters"):
                warn = True
                log.warning("cell %s sigma=%g ended with %s", cell.scheme, cell.sigma, summary["stop_reason"])
            if trace is not None:
                write_trace_csv(trace, out / f"{_stem(cell)}.trace.csv")
            series.append((f"{cell.scheme} s={cell.sigma:g}", iters, fs))
    write_line_chart(out / "sweep.svg", series, title="objective vs iteration")
    if warn:
        log.warning("sweep finished with warnings")
    return EXIT_OK


def cmd_compare_nag(spec: RunSpec, s0: float = 1.0) -> int:
    spec = replace(spec, backtracking=True, scheme="si2")
    spec.validate()
    out = _out_dir(spec.out_dir)
    objective, x0 = build_problem(spec)
    rows = []
    si2_trace, si2_summary = execute(spec, objective, x0)
    si2_summary["scheme"] = "si2-bt"
    rows.append(si2_summary)
    n, stop = spec.iterations_and_stop()
    try:
        nag_trace = run_nag(objective, x0, s0, BacktrackParams(), restart=True, stop=stop, max_iters=n)
    except DivergenceError as exc:
        nag_trace = exc.trace
    rows.append({"scheme": "nag-bt", "sigma": None, "tau": s0, "iters": nag_trace.iterations,
                 "grad_evals": nag_trace.grad_evals, "wall_ns": nag_trace.wall_ns,
                 "final_f": nag_trace.final_f, "stop_reason": nag_trace.stop_reason})
    write_trace_csv(si2_trace, out / "compare_si2-bt.trace.csv")
    write_trace_csv(nag_trace, out / "compare_nag-bt.trace.csv")
    with open(out / "compare_nag.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(["" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k])
                             for k in SWEEP_COLUMNS])
    _write_json(out / "compare_nag.json", rows)
    if spec.plot:
        write_line_chart(out / "compare_nag.svg",
                         [("SI2(bt)", si2_trace.column("iter"), si2_trace.column("f")),
                          ("NAG(bt)", nag_trace.column("iter"), nag_trace.column("f"))],
                         title="SI2(bt) vs NAG(bt)")
    diverged = any(r["stop_reason"] == "diverged" for r in rows)
    return EXIT_DIVERGED if diverged else EXIT_OK


# ---------------------------------------------------------------- verify

def verify_order(scheme="si2", sigma=2.0, taus=ORDER_TAUS, horizon=2.0):
    from .verify import order_study

    model = SigmaModel(sigma)
    obj, x0 = order_fixture()
    rep = order_study(scheme, model, obj, x0, horizon, taus)
    lo, hi = NOMINAL_ORDER[scheme] - ORDER_BAND[scheme], NOMINAL_ORDER[scheme] + ORDER_BAND[scheme]
    return lo <= rep.fitted_order <= hi, {**rep.to_dict(), "band": [lo, hi]}


def order_fixture():
    """Two-dimensional anisotropic quadratic used for order studies."""
    return QuadraticObjective([0.5, -0.25], [1.0, 4.0]), np.array([1.0, 1.0])


def symplectic_objectives(seed=0):
    ds = data_mod.synth_logistic(seed, 20, 5, 2.0)
    return [
        ("quadratic", QuadraticObjective(np.zeros(3), [1.0, 2.0, 3.0])),
        ("logistic", LogisticRegressionObjective.from_dataset(ds)),
    ]


def verify_symplectic(scheme="si2", sigmas=(2.0, 4.0, 6.0), n_states=20, tau=0.01, fd_h=1e-6, seed=0):
    from .verify import random_phase_state, symplecticity_check

    if not Scheme(scheme).symplectic:
        raise ConfigError(f"symplecticity is not claimed for {scheme}")
    rng = np.random.default_rng(seed)
    worst = {}
    for sigma in sigmas:
        model = SigmaModel(sigma)
        for name, obj in symplectic_objectives(seed):
            key = f"sigma={sigma:g}/{name}"
            worst[key] = max(
                symplecticity_check(scheme, model, obj, random_phase_state(rng, model, obj.dim), tau, fd_h)
                for _ in range(n_states)
            )
    top = max(worst.values())
    return top <= SYMPLECTIC_TOL, {"scheme": scheme, "max_det_deviation": top, "per_case": worst,
                                   "threshold": SYMPLECTIC_TOL}


def rate_trace(sigma, tau=1e-3, t_end=100.0, scheme="si2"):
    obj = QuadraticObjective([0.0], [1.0])
    n = round((t_end - 1.0) / tau)
    tr = run(SigmaModel(sigma), obj, [1.0], StepperConfig(scheme, tau), stop=None, max_iters=n,
             record_grad_norm=False)
    return tr, obj


def verify_rate(sigma=2.0, tau=1e-3, window=(10.0, 100.0)):
    from .verify import rate_fit

    tr, obj = rate_trace(sigma, tau, window[1])
    rep = rate_fit(tr, obj, window)
    threshold = -(sigma - 0.5)
    return rep.slope <= threshold, {**rep.to_dict(), "sigma": sigma, "threshold": threshold}


def verify_gradcheck(n_points=20, seed=0):
    rng = np.random.default_rng(seed)
    ds = data_mod.synth_logistic(seed, 20, 5, 2.0)
    logi = LogisticRegressionObjective.from_dataset(ds)
    quad = QuadraticObjective(rng.uniform(-1, 1, 5), rng.uniform(0.5, 4, 5))
    worst = {"logistic": 0.0, "quadratic": 0.0}
    for _ in range(n_points):
        worst["logistic"] = max(worst["logistic"], grad_check(logi, rng.uniform(-1, 1, 5), 1e-6).max_rel_err)
        worst["quadratic"] = max(worst["quadratic"], grad_check(quad, rng.uniform(-3, 3, 5), 1e-5).max_rel_err)
    top = max(worst.values())
    return top <= GRADCHECK_TOL, {"max_rel_err": worst, "threshold": GRADCHECK_TOL}


def residual_pair(tau=0.02, sigma=2.0, horizon=2.0, scheme="si2"):
    from .verify import ode_residual

    model = SigmaModel(sigma)
    obj, x0 = order_fixture()
    vals = []
    for h in (tau, tau / 2):
        n = round((horizon - model.t0) / h)
        tr = run(model, obj, x0, StepperConfig(scheme, h), stop=None, max_iters=n, keep_states=True,
                 record_grad_norm=False)
        vals.append(ode_residual(tr, model, obj))
    return vals


def verify_residual(tau=0.02, sigma=2.0):
    r1, r2 = residual_pair(tau, sigma)
    ratio = r1 / r2
    lo, hi = RESIDUAL_RATIO_BAND
    return lo <= ratio <= hi, {"residual_tau": r1, "residual_half_tau": r2, "ratio": ratio, "band": [lo, hi]}


def cmd_verify(which: str, args) -> int:
    out = _out_dir(args.out_dir)
    if which == "order":
        ok, report = verify_order(args.scheme or "si2", args.sigma or 2.0)
    elif which == "symplectic":
        ok, report = verify_symplectic(args.scheme or "si2", tau=args.tau or 0.01, seed=args.seed)
    elif which == "rate":
        ok, report = verify_rate(args.sigma or 2.0)
    elif which == "gradcheck":
        ok, report = verify_gradcheck(seed=args.seed)
    elif which == "residual":
        ok, report = verify_residual(sigma=args.sigma or 2.0)
    else:
        raise ConfigError(f"unknown verification {which!r}")
    report["passed"] = bool(ok)
    _write_json(out / f"verify_{which}.json", report)
    print(f"{which}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_gen_data(args) -> int:
    ds = data_mod.synth_logistic(args.seed, args.n, args.d, args.separation)
    out = Path(args.out) if args.out else _out_dir(args.out_dir) / f"synth_seed{args.seed}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(ds.d)] + ["label"])
        for row, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(y)])
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------- parsing

def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _quadratic(text: str) -> tuple:
    """'c1,c2:s1,s2' or 'c1,c2' (unit scales)."""
    center, _, scales = text.partition(":")
    c = _floats(center)
    s = _floats(scales) if scales else tuple(1.0 for _ in c)
    if len(c) != len(s) or not c:
        raise argparse.ArgumentTypeError("quadratic center and scales must have equal, non-zero length")
    return c, s


def _synthetic(text: str) -> tuple:
    """'N,D,SEP'."""
    vals = _floats(text)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--synthetic expects N,D,SEPARATION")
    return int(vals[0]), int(vals[1]), vals[2]


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default="si2", choices=[s.value for s in Scheme])
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--backtracking", action="store_true")
    p.add_argument("--tau-max", type=float, default=None, help="growth cap for --backtracking (default 0.5)")
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--horizon", type=float, default=None, help="run fixed steps up to this time; no rel-tol stop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p0", type=float, default=1.0, dest="p0_at_1")
    p.add_argument("--data")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--label-col", default="-1")
    p.add_argument("--positive-label", default="1")
    p.add_argument("--idx-images")
    p.add_argument("--idx-labels")
    p.add_argument("--synthetic", type=_synthetic, help="N,D,SEPARATION (uses --seed)")
    p.add_argument("--quadratic", type=_quadratic, help="CENTER[:SCALES], comma-separated")
    p.add_argument("--x0", type=_floats)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--add-intercept", action="store_true")
    p.add_argument("--lambda-reg", type=float, default=DEFAULT_LAMBDA_REG)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--name", default="")
    p.add_argument("--plot", action="store_true")


def spec_from_args(args) -> RunSpec:
    return RunSpec(
        scheme=args.scheme, sigma=args.sigma, tau=args.tau, backtracking=args.backtracking,
        tau_max=args.tau_max, rel_tol=args.rel_tol, max_iters=args.max_iters, horizon=args.horizon,
        seed=args.seed, p0_at_1=args.p0_at_1, data=args.data, delimiter=args.delimiter,
        has_header=not args.no_header, label_col=args.label_col, positive_label=args.positive_label,
        idx_images=args.idx_images, idx_labels=args.idx_labels, synthetic=args.synthetic,
        quadratic=args.quadratic, x0=args.x0, standardize=args.standardize,
        add_intercept=args.add_intercept, lambda_reg=args.lambda_reg,
        out_dir=args.out_dir, name=args.name, plot=args.plot,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symaccel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one optimisation run")
    _add_problem_args(p)

    p = sub.add_parser("sweep", help="grid over schemes and sigma values")
    _add_problem_args(p)
    p.add_argument("--sigmas", type=_floats, required=True)
    p.add_argument("--schemes", default="si2")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compare-nag", help="SI2 with backtracking vs NAG with backtracking and restart")
    _add_problem_args(p)
    p.set_defaults(sigma=6.0)
    p.add_argument("--nag-step", type=float, default=1.0, help="initial NAG step size")

    p = sub.add_parser("verify", help="run a verification study with built-in thresholds")
    p.add_argument("which", choices=["order", "symplectic", "rate", "gradcheck", "residual"])
    p.add_argument("--scheme", default=None, choices=[s.value for s in Scheme])
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("gen-data", help="write a synthetic logistic dataset as CSV")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--out-dir", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return cmd_run(spec_from_args(args))
        if args.command == "sweep":
            schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
            return cmd_sweep(spec_from_args(args), list(args.sigmas), schemes, args.jobs)
        if args.command == "compare-nag":
            return cmd_compare_nag(spec_from_args(args), args.nag_step)
        if args.command == "verify":
            return cmd_verify(args.which, args)
        if args.command == "gen-data":
            return cmd_gen_data(args)
    except DataFormatError as exc:
        log.error("data error: %s", exc)
        return EXIT_IO
    except (ConfigError, DomainError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DivergenceError, StepFailure) as exc:
        log.error("diverged: %s", exc)
        return EXIT_DIVERGED
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
