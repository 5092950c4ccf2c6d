"""Command-line entry point: ``lagfree {run,converge,report,rates}``.

Exit codes: 0 all checks pass, 1 a check fails, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .. import diagnostics as dg
from ..model import LagState, MassGrid, init_profile
from ..solver import Trajectory, run
from . import io
from .config import ConfigError, RunConfig, load_config, to_mapping
from .report import invariant_report
from .study import EXACT, convergence_study

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("lagfree")


def simulate(cfg: RunConfig) -> tuple[Trajectory, float]:
    state = init_profile(cfg.profile, cfg.params, MassGrid(cfg.n_cells))
    t0 = time.perf_counter()
    traj = run(state, cfg.step, cfg.params, cfg.t_end, cfg.sample_every, cfg.snapshot_times)
    return traj, time.perf_counter() - t0


def save_run(traj: Trajectory, cfg: RunConfig, out: Path, wall: float, window_start: float = 10.0) -> dict:
    io.write_timeseries(traj, out / "timeseries.csv")
    io.write_snapshots(traj, out)
    io.write_npz(traj, out / "trajectory.npz")
    rep = invariant_report(traj, cfg.params, window_start)
    timing = {"wall_seconds": wall, "steps": traj.steps, "picard_iters": traj.picard_iters,
              "max_boundary_residual": traj.max_boundary_residual,
              "max_linear_residual": traj.max_linear_residual,
              "initial_boundary_residual": traj.initial_boundary_residual, "error": traj.error}
    io.write_summary(out / "summary.json", config=to_mapping(cfg), final_record=traj.records[-1],
                     report=rep.to_dict(), timing=timing)
    return {"report": rep, "timing": timing}


def load_run(cfg: RunConfig, out: Path) -> Trajectory:
    """Rebuild a trajectory from the files written by :func:`save_run`."""
    records = io.read_timeseries(out / "timeseries.csv")
    with np.load(out / "trajectory.npz") as z:
        states = [LagState(rho, u, r, float(t)) for t, rho, u, r in zip(z["tau"], z["rho"], z["u"], z["r"])]
    summary = json.loads((out / "summary.json").read_text())
    timing = summary.get("timing", {})
    return Trajectory(cfg.params, records, states, steps=int(timing.get("steps", 0)),
                      max_boundary_residual=float(timing.get("max_boundary_residual", 0.0)),
                      max_linear_residual=float(timing.get("max_linear_residual", 0.0)),
                      initial_boundary_residual=float(timing.get("initial_boundary_residual", 0.0)),
                      error=timing.get("error"))


def _trajectory(cfg: RunConfig, out: Path) -> Trajectory:
    if (out / "timeseries.csv").exists() and (out / "trajectory.npz").exists() and (out / "summary.json").exists():
        return load_run(cfg, out)
    traj, wall = simulate(cfg)
    save_run(traj, cfg, out, wall)
    return traj


def cmd_run(cfg: RunConfig, out: Path, args) -> int:
    traj, wall = simulate(cfg)
    res = save_run(traj, cfg, out, wall)
    rep = res["report"]
    for line in rep.lines():
        print(line)
    print(f"steps={traj.steps} wall={wall:.2f}s final a={traj.records[-1].a:.10g}")
    if traj.error:
        print(f"solver failure: {traj.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_report(cfg: RunConfig, out: Path, args) -> int:
    traj = _trajectory(cfg, out)
    rep = invariant_report(traj, cfg.params, args.window_start)
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    for line in rep.lines():
        print(line)
    if traj.error:
        return EXIT_SOLVER
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_rates(cfg: RunConfig, out: Path, args) -> int:
    traj = _trajectory(cfg, out)
    if traj.error:
        print(f"solver failure: {traj.error}", file=sys.stderr)
        return EXIT_SOLVER
    t, a = traj.column("tau"), traj.column("a")
    theory = dg.theoretical_rate(cfg.params)
    try:
        s_m, res_m = dg.fit_growth_exponent(t, dg.running_max(t, a), args.window_start)
        s_a, res_a = dg.fit_growth_exponent(t, a, args.window_start)
    except ValueError as exc:
        print(f"rates: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    body = {
        "regime": theory.regime,
        "log_correction": theory.log_correction,
        "a_exponent": theory.a_exponent,
        "aM_exponent": theory.aM_exponent,
        "fitted_aM": {"slope": s_m, "residual": res_m},
        "fitted_a": {"slope": s_a, "residual": res_a},
        "window_start": args.window_start,
    }
    (out / "rates.json").write_text(json.dumps(body, indent=2) + "\n")
    lower_ok = s_m >= theory.aM_exponent - 0.05
    upper_ok = cfg.params.dim != 2 or s_a <= 0.55
    print(f"{theory.regime}: theory aM >= {theory.aM_exponent:.6g}, fitted aM {s_m:.6g} "
          f"({'PASS' if lower_ok else 'FAIL'}); fitted a {s_a:.6g} ({'PASS' if upper_ok else 'FAIL'})")
    return EXIT_OK if lower_ok and upper_ok else EXIT_CHECK


def cmd_converge(cfg: RunConfig, out: Path, args) -> int:
    try:
        res = convergence_study(cfg, args.levels)
    except ValueError as exc:
        print(f"converge: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    (out / "convergence.json").write_text(json.dumps(res.to_dict(), indent=2) + "\n")
    ok = True
    for name, q in res.quantities.items():
        good = q.status == EXACT or q.order >= 1.0
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {name}: order {q.order:.4f} [{q.status}]")
    if any(res.errors):
        return EXIT_SOLVER
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "report": cmd_report, "rates": cmd_rates}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagfree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir)")
        if name in ("rates", "report"):
            p.add_argument("--window-start", type=float, default=10.0)
        if name == "converge":
            p.add_argument("--levels", type=int, default=3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, out, args)


if __name__ == "__main__":
    sys.exit(main())
