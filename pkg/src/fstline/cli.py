"""Command-line front end: solve, reconstruct, check, sweep, ladder.

Configuration comes from a flat INI file with [model], [data] and [solver]
sections, or an equivalent JSON document.  Every run writes a
self-describing directory: trajectory CSVs (t,x,v,acc at 17 significant
digits), a solution.json embedding both world lines plus all metadata
needed to reproduce the checks, report.json, bounds.json and energy.csv.
Verbosity is controlled by the FST_LOG environment variable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, fixedpoint, stepper
from .errors import FstlineError, ReconstructionError
from .fixedpoint import CauchyData, FstHalfLine, SolverConfig
from .kinematics import (ModelSpec, Trajectory, TrajectoryPair, pair_from_json,
                         pair_to_json, trajectory_from_csv, trajectory_to_csv)
from .lightcone import breakpoint_ladder

log = logging.getLogger("fstline")

_FAMILIES = {
    "fst": ModelSpec.fst,
    "synge": ModelSpec.synge,
    "toy": ModelSpec.toy,
}


# -- configuration ---------------------------------------------------------


def _coerce(value):
    if isinstance(value, str):
        low = value.strip().lower()
        if low in ("true", "yes", "on"):
            return True
        if low in ("false", "no", "off"):
            return False
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            return value.strip()
    return value


def load_config(path) -> dict:
    """Read an INI or JSON run configuration into nested dicts."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return json.loads(text)
    parser = configparser.ConfigParser()
    parser.read_string(text)
    return {section: {k: _coerce(v) for k, v in parser[section].items()}
            for section in parser.sections()}


def _model_from_config(conf) -> ModelSpec:
    section = dict(conf.get("model", {}))
    family = str(section.pop("family", "")).lower()
    if family not in _FAMILIES:
        raise ValueError(f"[model] family must be one of {sorted(_FAMILIES)}, "
                         f"got {family!r}")
    kappa = section.pop("kappa", None)
    kappa_a = section.pop("kappa_a", kappa)
    kappa_b = section.pop("kappa_b", kappa)
    if kappa_a is None or kappa_b is None:
        raise ValueError("[model] needs kappa (or kappa_a and kappa_b)")
    if section:
        raise ValueError(f"unknown [model] keys: {sorted(section)}")
    return _FAMILIES[family](float(kappa_a), float(kappa_b))


def _data_from_config(conf, model_family, grid_step):
    section = dict(conf.get("data", {}))
    a0 = float(section.pop("a0"))
    a0_dot = float(section.pop("a0_dot", 0.0))
    strip_path = section.pop("b_strip", None)
    if model_family == "fst":
        if strip_path is not None:
            strip = trajectory_from_csv(strip_path, label="b")
            if section.keys() - {"b0", "b0_dot"}:
                raise ValueError(f"unknown [data] keys: {sorted(section)}")
            return FstHalfLine(a0, a0_dot, strip)
        b0 = float(section.pop("b0"))
        b0_dot = float(section.pop("b0_dot", 0.0))
        if section:
            raise ValueError(f"unknown [data] keys: {sorted(section)}")
        # uniform-motion strip through (0, b0); the light-cone ends are cut
        # automatically
        span = 4.0 * (a0 - b0) / max(1.0 - abs(b0_dot), 1.0e-6) + 1.0
        grid = np.linspace(-span, span, max(int(2 * span / grid_step), 8) + 1)
        curve = Trajectory(grid, b0 + b0_dot * grid,
                           np.full_like(grid, b0_dot), "b")
        return fixedpoint.make_half_line_data(a0, a0_dot, curve, grid_step=grid_step)
    b0 = float(section.pop("b0"))
    b0_dot = float(section.pop("b0_dot", 0.0))
    if section:
        raise ValueError(f"unknown [data] keys: {sorted(section)}")
    return CauchyData(a0, a0_dot, b0, b0_dot)


def _solver_from_config(conf) -> tuple[SolverConfig, int]:
    section = dict(conf.get("solver", {}))
    window = (float(section.pop("t_min")), float(section.pop("t_max")))
    seed = int(section.pop("seed", 0))
    schedule = section.pop("lambda_schedule", None)
    if isinstance(schedule, str):
        schedule = tuple(float(x) for x in schedule.split(",") if x.strip())
    elif schedule is not None:
        schedule = tuple(float(x) for x in schedule)
    kwargs = {}
    for key in ("grid_step", "damping", "tolerance", "boundary_buffer",
                "outgoing_speed"):
        if key in section:
            kwargs[key] = float(section.pop(key))
    for key in ("max_iterations",):
        if key in section:
            kwargs[key] = int(section.pop(key))
    for key in ("quadrature", "acceleration"):
        if key in section:
            kwargs[key] = str(section.pop(key))
    if section:
        raise ValueError(f"unknown [solver] keys: {sorted(section)}")
    if schedule is not None:
        kwargs["lambda_schedule"] = schedule
    return SolverConfig(window=window, **kwargs), seed


def _model_dict(model: ModelSpec):
    return {"eps_plus": model.eps_plus, "eps_minus": model.eps_minus,
            "kappa_a": model.kappa_a, "kappa_b": model.kappa_b,
            "velocity_factors": model.velocity_factors,
            "family": model.family}


def _model_from_dict(d) -> ModelSpec:
    return ModelSpec(d["eps_plus"], d["eps_minus"], d["kappa_a"], d["kappa_b"],
                     d["velocity_factors"])


def _config_dict(config: SolverConfig, seed):
    return {"window": list(config.window), "grid_step": config.grid_step,
            "damping": config.damping,
            "lambda_schedule": list(config.lambda_schedule),
            "max_iterations": config.max_iterations,
            "tolerance": config.tolerance,
            "boundary_buffer": config.boundary_buffer,
            "quadrature": config.quadrature,
            "acceleration": config.acceleration,
            "outgoing_speed": config.outgoing_speed,
            "seed": seed}


def _config_from_dict(d) -> SolverConfig:
    return SolverConfig(window=tuple(d["window"]), grid_step=d["grid_step"],
                        damping=d["damping"],
                        lambda_schedule=tuple(d["lambda_schedule"]),
                        max_iterations=d["max_iterations"],
                        tolerance=d["tolerance"],
                        boundary_buffer=d["boundary_buffer"],
                        quadrature=d["quadrature"],
                        acceleration=d.get("acceleration", "picard"),
                        outgoing_speed=d["outgoing_speed"])


# -- run directories --------------------------------------------------------


def _make_run_dir(out, prefix="run"):
    base = Path(out)
    base.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y%m%d_%H%M%S")
    for k in itertools.count():
        run = base / (f"{prefix}_{stamp}" if k == 0 else f"{prefix}_{stamp}_{k}")
        try:
            run.mkdir()
            return run
        except FileExistsError:
            continue


def _residual_ranges(data, config: SolverConfig):
    if isinstance(data, FstHalfLine):
        buf = config.boundary_buffer
        if buf is None:
            buf = 0.25 * (config.window[1] - config.window[0])
        end = config.window[1] - buf
        return [0.0, end], [float(np.nextafter(data.t_plus, np.inf)), end]
    return None, None


def _write_solution(run_dir, pair, model, config, seed, data, report):
    meta = {
        "model": _model_dict(model),
        "solver": _config_dict(config, seed),
        "report": report.to_dict(),
    }
    if isinstance(data, FstHalfLine):
        meta["data"] = {"kind": "half_line", "a0": data.a0, "a0_dot": data.a0_dot,
                        "t_minus": data.t_minus, "t_plus": data.t_plus}
    else:
        meta["data"] = {"kind": "cauchy", "a0": data.a0, "a0_dot": data.a0_dot,
                        "b0": data.b0, "b0_dot": data.b0_dot}
    a_range, b_range = _residual_ranges(data, config)
    meta["residual_ranges"] = {"a": a_range, "b": b_range}
    pair_to_json(pair, run_dir / "solution.json", metadata=meta)
    trajectory_to_csv(pair.upper, run_dir / "trajectory_a.csv", include_acceleration=True)
    trajectory_to_csv(pair.lower, run_dir / "trajectory_b.csv", include_acceleration=True)
    return meta


# -- subcommands -------------------------------------------------------------


def cmd_solve(args):
    conf = load_config(args.config)
    model = _model_from_config(conf)
    config, seed = _solver_from_config(conf)
    data = _data_from_config(conf, model.family, config.grid_step)

    pair, report = fixedpoint.solve(data, model, config)
    run_dir = _make_run_dir(args.out)
    _write_solution(run_dir, pair, model, config, seed, data, report)
    (run_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=1),
                                         encoding="utf-8")
    bounds_doc = {"bound_summary": report.bound_summary}
    if report.converged:
        try:
            bounds = diagnostics.fit_bounds(pair, model, data, config.window)
            bounds_doc["constants"] = bounds.to_dict()
            bounds_doc["decay_fit"] = diagnostics.acceleration_decay_fit(
                pair, config.window).to_dict()
        except FstlineError as exc:
            bounds_doc["error"] = str(exc)
    (run_dir / "bounds.json").write_text(json.dumps(bounds_doc, indent=1),
                                         encoding="utf-8")
    window = (0.0, config.window[1]) if isinstance(data, FstHalfLine) else config.window
    series = diagnostics.energy_series(pair, model, 0.0, window, config.grid_step)
    series.to_csv(run_dir / "energy.csv")

    bounds_pass = bool(report.bound_summary and report.bound_summary.get("all_passed"))
    print(f"run directory: {run_dir}")
    print(f"converged: {report.converged} (iterations {report.iterations}, "
          f"increment {report.final_increment:.3e})")
    print(f"interior residual: {report.interior_residual:.3e} "
          f"at t = {report.residual_time:.4g}")
    print(f"bounds: {'pass' if bounds_pass else 'FAIL'}")
    return 0 if report.converged and bounds_pass else 1


def _load_run(run_dir):
    run_dir = Path(run_dir)
    pair, meta = pair_from_json(run_dir / "solution.json")
    return pair, meta


def cmd_check(args):
    if args.run:
        pair, meta = _load_run(args.run)
        a_csv = Path(args.run) / "trajectory_a.csv"
        b_csv = Path(args.run) / "trajectory_b.csv"
        if a_csv.exists() and b_csv.exists():
            pair = TrajectoryPair(trajectory_from_csv(a_csv, "a"),
                                  trajectory_from_csv(b_csv, "b"))
        model = _model_from_dict(meta["model"])
        config = _config_from_dict(meta["solver"])
        ranges = meta.get("residual_ranges", {})
        a_range = tuple(ranges["a"]) if ranges.get("a") else None
        b_range = tuple(ranges["b"]) if ranges.get("b") else None
    else:
        if not (args.a and args.b and args.config):
            raise ValueError("check needs either --run or --a/--b/--config")
        pair = TrajectoryPair(trajectory_from_csv(args.a, "a"),
                              trajectory_from_csv(args.b, "b"))
        conf = load_config(args.config)
        model = _model_from_config(conf)
        config, _ = _solver_from_config(conf)
        a_range = b_range = None

    value, at = fixedpoint._residual_located(pair, model, config, a_range, b_range)
    doc = {"residual": value, "residual_time": at}
    passed = True
    if args.run:
        stored = _load_run(args.run)[1]["report"]
        doc["stored_residual"] = stored["interior_residual"]
        doc["matches_stored"] = abs(value - stored["interior_residual"]) <= 1.0e-12
        passed &= doc["matches_stored"]
        if stored.get("bound_summary"):
            bounds = diagnostics.AprioriBounds.from_dict(
                json.loads((Path(args.run) / "bounds.json").read_text())["constants"])
            window = tuple(config.window)
            report = diagnostics.check_bounds(pair, bounds, window)
            doc["bounds"] = report.to_dict()
            passed &= report.all_passed
    if args.threshold is not None:
        passed &= value < args.threshold
        doc["threshold"] = args.threshold
    print(json.dumps(doc, indent=1))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return 0 if passed else 1


def cmd_reconstruct(args):
    if args.config:
        conf = load_config(args.config)
        model = _model_from_config(conf)
        kappa_a, kappa_b = model.kappa_a, model.kappa_b
    else:
        kappa_a, kappa_b = args.kappa_a, args.kappa_b
    a_strip = trajectory_from_csv(args.a_strip, "a")
    b_strip = trajectory_from_csv(args.b_strip, "b")
    strips = stepper.StripPair(a_strip, b_strip, threading=args.direction)

    run_dir = _make_run_dir(args.out, prefix="reconstruct")
    doc = {"direction": args.direction, "horizon": args.horizon,
           "step": args.step, "kappa_a": kappa_a, "kappa_b": kappa_b}
    try:
        pair = stepper.reconstruct(strips, kappa_a, kappa_b, args.horizon,
                                   direction=args.direction, step=args.step,
                                   max_legs=args.max_legs)
    except ReconstructionError as exc:
        doc["error"] = str(exc)
        doc["failing_leg"] = exc.leg
        if exc.partial is not None:
            trajectory_to_csv(exc.partial.upper, run_dir / "partial_a.csv", True)
            trajectory_to_csv(exc.partial.lower, run_dir / "partial_b.csv", True)
        (run_dir / "report.json").write_text(json.dumps(doc, indent=1), "utf-8")
        print(f"reconstruction failed on leg {exc.leg}: {exc}", file=sys.stderr)
        print(f"partial result in {run_dir}")
        return 1

    trajectory_to_csv(pair.upper, run_dir / "trajectory_a.csv", True)
    trajectory_to_csv(pair.lower, run_dir / "trajectory_b.csv", True)
    pair_to_json(pair, run_dir / "solution.json", metadata=doc)
    if args.oracle:
        oracle_pair, _ = pair_from_json(args.oracle)
        doc["deviation"] = _leg_deviation(pair, strips, oracle_pair)
    (run_dir / "report.json").write_text(json.dumps(doc, indent=1), "utf-8")
    print(f"run directory: {run_dir}")
    if "deviation" in doc:
        worst = max((leg["max_deviation"] for leg in doc["deviation"]), default=0.0)
        print(f"max deviation vs oracle: {worst:.3e}")
    return 0


def _leg_deviation(pair, strips, oracle):
    out = []
    for label, traj, base, ref in (("a", pair.upper, strips.a_strip, oracle.upper),
                                   ("b", pair.lower, strips.b_strip, oracle.lower)):
        t = traj.grid[(traj.grid > base.t_max) & (traj.grid <= ref.t_max)]
        if t.size:
            dev = float(np.max(np.abs(traj.position(t) - ref.position(t))))
            out.append({"charge": label, "t_start": float(base.t_max),
                        "t_end": float(t[-1]), "max_deviation": dev})
    return out


def cmd_ladder(args):
    if args.run:
        pair, meta = _load_run(args.run)
        t_plus = args.t_plus
        if t_plus is None:
            t_plus = meta.get("data", {}).get("t_plus")
        if t_plus is None:
            raise ValueError("run has no stored T+; pass --t-plus")
    else:
        if not (args.a and args.b and args.t_plus is not None):
            raise ValueError("ladder needs either --run or --a/--b/--t-plus")
        pair = TrajectoryPair(trajectory_from_csv(args.a, "a"),
                              trajectory_from_csv(args.b, "b"))
        t_plus = args.t_plus
    ladder = breakpoint_ladder(pair, float(t_plus), args.count)
    doc = {"t_plus": float(t_plus), "sigmas": ladder.sigmas.tolist(),
           "taus": ladder.taus.tolist(), "truncated": ladder.truncated}
    print(json.dumps(doc, indent=1))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return 0


# -- parameter sweep ---------------------------------------------------------


def _sweep_cases(conf):
    axes = {
        "kappa": [float(x) for x in conf.get("kappa", [1.0])],
        "separation": [float(x) for x in conf.get("separation", [2.0])],
        "closing_speed": [float(x) for x in conf.get("closing_speed", [0.0])],
        "grid_step": [float(x) for x in conf.get("grid_step", [0.01])],
    }
    for combo in itertools.product(*axes.values()):
        yield dict(zip(axes.keys(), combo))


def _case_id(case):
    return ("k{kappa:g}_d{separation:g}_v{closing_speed:g}_h{grid_step:g}"
            .format(**case).replace(".", "p").replace("-", "m"))


def _run_sweep_case(payload):
    conf, case, out = payload
    case_dir = Path(out) / _case_id(case)
    report_path = case_dir / "report.json"
    if report_path.exists():  # resume support
        row = json.loads(report_path.read_text())
        row["resumed"] = True
        return row
    case_dir.mkdir(parents=True, exist_ok=True)
    family = conf.get("family", "synge")
    model = _FAMILIES[family](case["kappa"], case["kappa"])
    half = 0.5 * case["separation"]
    v = case["closing_speed"]
    solver = dict(conf.get("solver", {}))
    window = tuple(solver.pop("window", (-20.0, 20.0)))
    config = SolverConfig(window=window, grid_step=case["grid_step"],
                          **{k: v2 for k, v2 in solver.items()})
    row = dict(case)
    row["family"] = family
    try:
        data = CauchyData(half, -abs(v), -half, abs(v))
        pair, report = fixedpoint.solve(data, model, config)
        row.update(converged=report.converged, iterations=report.iterations,
                   residual=report.interior_residual,
                   bounds_passed=bool(report.bound_summary
                                      and report.bound_summary.get("all_passed")))
        if report.converged:
            bounds = diagnostics.fit_bounds(pair, model, data, config.window)
            row.update(bounds.to_dict())
    except FstlineError as exc:
        row.update(converged=False, error=str(exc))
    report_path.write_text(json.dumps(row, indent=1), encoding="utf-8")
    return row


def cmd_sweep(args):
    conf = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cases = [(conf, case, str(out)) for case in _sweep_cases(conf)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_run_sweep_case, cases))
    else:
        rows = [_run_sweep_case(c) for c in cases]
    fields = sorted({k for row in rows for k in row})
    agg = out / "sweep.csv"
    with open(agg, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    done = sum(1 for r in rows if r.get("converged"))
    print(f"{len(rows)} runs ({done} converged) -> {agg}")
    return 0


# -- entry point -------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fstline",
        description="Two-charge delay equations on a line: solve, reconstruct, check.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a configured problem into a run directory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reconstruct", help="extend trajectory strips leg by leg")
    p.add_argument("--a-strip", required=True)
    p.add_argument("--b-strip", required=True)
    p.add_argument("--config", help="config providing the couplings")
    p.add_argument("--kappa-a", type=float, default=1.0)
    p.add_argument("--kappa-b", type=float, default=1.0)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--direction", choices=("future", "past"), default="future")
    p.add_argument("--step", type=float, default=1.0e-3)
    p.add_argument("--max-legs", type=int, default=None)
    p.add_argument("--oracle", help="solution.json to compare against")
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("check", help="re-verify residual and bounds of trajectories")
    p.add_argument("--run", help="run directory from a previous solve")
    p.add_argument("--a", help="trajectory CSV of the upper charge")
    p.add_argument("--b", help="trajectory CSV of the lower charge")
    p.add_argument("--config", help="config with [model] and [solver] sections")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", help="write the check report JSON here")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="grid of solves with aggregated CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="sweep")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ladder", help="dump the regularity breakpoint ladder")
    p.add_argument("--run", help="run directory from a previous solve")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--t-plus", type=float, default=None)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ladder)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("FST_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FstlineError, ValueError, KeyError, OSError,
            configparser.Error, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
