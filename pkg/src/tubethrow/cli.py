"""Command-line front end: single solves, single release simulations, batch
reproduction of the stochastic release experiment, error-trace export, and a
solver latency benchmark.

All outputs are data files (CSV/JSON) or plain text; plotting is left to
external tools. Output paths default into the directory named by the
``TUBETHROW_OUTDIR`` environment variable (falling back to the current
directory).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import ballistics, experiments, release_sim, tube_qp
from .ballistics import DomainError, FlightState, TargetSpec
from .experiments import (
    DEFAULT_CONTROLLER_SPECS,
    DEFAULT_SEEDS,
    ConditionMesh,
    ControllerSpec,
    build_mesh,
)
from .release_sim import SimConfig
from .tube_qp import EEMeasurement, EmptyBoxError

MESH_HELP = (
    "default condition mesh: heights {0.5, 1.0, 1.5} m, "
    "r_dot {5..9} m/s, z_dot {1..4} m/s, "
    "error ratios {-10%, -5%, 0%, 5%, 10%} on each velocity axis "
    "(3 x 20 x 25 = 1500 conditions)"
)


def _out_path(name: str, override: str | None) -> str:
    if override:
        return override
    return os.path.join(os.environ.get("TUBETHROW_OUTDIR", "."), name)


def _interval(text: str) -> tuple[float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


def _add_bounds_args(parser):
    parser.add_argument(
        "--a-bounds-r", type=_interval, default=tube_qp.DEFAULT_A_BOUNDS[0],
        metavar="LO,HI", help="radial acceleration bounds m/s^2 (default %(default)s)",
    )
    parser.add_argument(
        "--a-bounds-z", type=_interval, default=tube_qp.DEFAULT_A_BOUNDS[1],
        metavar="LO,HI", help="vertical acceleration bounds m/s^2 (default %(default)s)",
    )
    parser.add_argument(
        "--v-bounds-r", type=_interval, default=tube_qp.DEFAULT_V_BOUNDS[0],
        metavar="LO,HI", help="radial terminal-velocity bounds m/s (default %(default)s)",
    )
    parser.add_argument(
        "--v-bounds-z", type=_interval, default=tube_qp.DEFAULT_V_BOUNDS[1],
        metavar="LO,HI", help="vertical terminal-velocity bounds m/s (default %(default)s)",
    )
    parser.add_argument(
        "--regularization", type=float, default=tube_qp.DEFAULT_REGULARIZATION,
        help="weight on |a|^2 (default %(default)s)",
    )
    parser.add_argument(
        "--vertical-only", action="store_true",
        help="restrict the command to the vertical axis",
    )


def _add_sim_args(parser):
    parser.add_argument("--dt", type=float, default=0.001, help="timestep s (default %(default)s)")
    parser.add_argument(
        "--control-freq", type=float, default=400.0, help="controller rate Hz (default %(default)s)"
    )
    parser.add_argument(
        "--noise-std", type=float, default=2.0,
        help="actuation noise std m/s^2 (default %(default)s)",
    )
    parser.add_argument("--dwell", type=float, default=0.050, help="gripper dwell s (default %(default)s)")
    parser.add_argument("--window", type=float, default=0.100, help="release window s (default %(default)s)")
    parser.add_argument(
        "--noise-per-step", action="store_true",
        help="draw actuation noise every step instead of once per control tick",
    )


def _sim_config(args, seed: int = 0) -> SimConfig:
    return SimConfig(
        dt=args.dt,
        control_freq=args.control_freq,
        noise_std=args.noise_std,
        dwell=args.dwell,
        window=args.window,
        seed=seed,
        noise_per_tick=not args.noise_per_step,
    )


def cmd_solve(args) -> int:
    ee = EEMeasurement(p=(args.r, args.z), v=(args.r_dot, args.z_dot))
    target = TargetSpec(r_target=args.target_r, z_land=args.z_land)
    try:
        problem = tube_qp.assemble(
            ee,
            args.time_to_go,
            target,
            v_bounds=(args.v_bounds_r, args.v_bounds_z),
            a_bounds=(args.a_bounds_r, args.a_bounds_z),
            regularization=args.regularization,
            vertical_only=args.vertical_only,
        )
        solution = tube_qp.solve(problem)
    except (DomainError, EmptyBoxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    payload = {
        "a_tube": list(solution.a_tube),
        "predicted_r_land": solution.predicted_r_land,
        "objective": solution.objective,
        "status": solution.status.value,
    }
    if args.timing:
        payload["solve_time_s"] = solution.solve_time
    print(json.dumps(payload, indent=2))
    return 0 if solution.status is tube_qp.SolveStatus.OPTIMAL else 1


def cmd_simulate(args) -> int:
    nominal = FlightState(0.0, args.z, args.r_dot, args.z_dot)
    target = TargetSpec(r_target=ballistics.landing_position(nominal), z_land=0.0)
    initial = FlightState(
        0.0, args.z, args.r_dot * (1.0 + args.e_r), args.z_dot * (1.0 + args.e_z)
    )
    config = _sim_config(args, seed=args.seed)
    if args.controller == "constant":
        controller = release_sim.ConstantVelocityController()
    else:
        controller = release_sim.PullbackController(
            a_bounds=(args.a_bounds_r, args.a_bounds_z),
            v_bounds=(args.v_bounds_r, args.v_bounds_z),
            regularization=args.regularization,
            vertical_only=args.vertical_only,
        )
    try:
        trace = release_sim.simulate_release(controller, initial, target, config)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_path("trace.csv", args.out)
    release_sim.write_trace_csv(out, trace)
    max_err = release_sim.max_error_in_detach_window(trace, config)
    print(f"target_r: {target.r_target:.6f} m")
    print(f"max landing error in detach window: {max_err:.6f} m")
    print(f"trace written to {out}")
    return 0


def _controller_specs(args) -> list[ControllerSpec]:
    specs = []
    for name in args.controllers:
        if name == "constant":
            specs.append(ControllerSpec(label="constant_velocity", kind="constant_velocity"))
            continue
        if name.startswith("pullback@"):
            freq = float(name.split("@", 1)[1])
            specs.append(
                ControllerSpec(
                    label=f"pullback_{freq:g}hz",
                    kind="pullback",
                    control_freq=freq,
                    a_bounds=(args.a_bounds_r, args.a_bounds_z),
                    v_bounds=(args.v_bounds_r, args.v_bounds_z),
                    regularization=args.regularization,
                    vertical_only=args.vertical_only,
                )
            )
            continue
        raise SystemExit(f"error: unknown controller {name!r} (use constant or pullback@FREQ)")
    return specs


def _load_mesh_and_sim(args) -> tuple[list, SimConfig]:
    if args.config:
        mesh_spec, sim = experiments.load_experiment_config(args.config)
    else:
        mesh_spec, sim = ConditionMesh(), SimConfig()
    overrides = {}
    if args.noise_std is not None:
        overrides["noise_std"] = args.noise_std
    if args.dt is not None:
        overrides["dt"] = args.dt
    if overrides:
        from dataclasses import replace

        sim = replace(sim, **overrides)
    return build_mesh(mesh_spec), sim


def _print_summary_table(stats) -> None:
    width = max(len(s.controller) for s in stats)
    print(f"{'controller':<{width}}  max landing error (cm)")
    for s in stats:
        print(f"{s.controller:<{width}}  {s.mae * 100:.1f} (+-{s.std * 100:.1f})")


def cmd_batch(args) -> int:
    conditions, sim = _load_mesh_and_sim(args)
    specs = _controller_specs(args)
    seeds = list(range(args.seeds))
    stats, records = experiments.run_batch(
        conditions, specs, seeds, sim, jobs=args.jobs
    )
    _print_summary_table(stats)
    failures = [r for r in records if r.note]
    if failures:
        print(f"warning: {len(failures)} trial(s) reported errors", file=sys.stderr)
    if args.out_csv:
        experiments.write_trial_records_csv(args.out_csv, records)
        print(f"trial records written to {args.out_csv}")
    if args.out_json:
        experiments.write_summary_json(args.out_json, stats)
        print(f"summary written to {args.out_json}")
    return 0


def cmd_reproduce_table4(args) -> int:
    conditions, sim = _load_mesh_and_sim(args)
    seeds = list(range(args.seeds))
    stats, records = experiments.run_batch(
        conditions, DEFAULT_CONTROLLER_SPECS, seeds, sim, jobs=args.jobs
    )
    print(
        f"{len(conditions)} conditions x {len(seeds)} seeds, "
        f"noise {sim.noise_std} m/s^2, dt {sim.dt * 1000:g} ms"
    )
    _print_summary_table(stats)
    failures = [r for r in records if r.note]
    if failures:
        print(f"warning: {len(failures)} trial(s) reported errors (partial results)", file=sys.stderr)
    out_csv = _out_path("table4_trials.csv", args.out_csv)
    out_json = _out_path("table4_summary.json", args.out_json)
    experiments.write_trial_records_csv(out_csv, records)
    experiments.write_summary_json(out_json, stats)
    print(f"trial records written to {out_csv}")
    print(f"summary written to {out_json}")
    return 0


def cmd_trace(args) -> int:
    if args.controller == "constant":
        spec = ControllerSpec(label="constant_velocity", kind="constant_velocity")
    elif args.controller.startswith("pullback@"):
        freq = float(args.controller.split("@", 1)[1])
        spec = ControllerSpec(
            label=f"pullback_{freq:g}hz",
            kind="pullback",
            control_freq=freq,
            a_bounds=(args.a_bounds_r, args.a_bounds_z),
            v_bounds=(args.v_bounds_r, args.v_bounds_z),
            regularization=args.regularization,
            vertical_only=args.vertical_only,
        )
    else:
        print(f"error: unknown controller {args.controller!r}", file=sys.stderr)
        return 2
    mesh_spec = ConditionMesh(
        heights=(args.z,) if args.z is not None else experiments.MESH_HEIGHTS,
        r_dots=(args.r_dot,) if args.r_dot is not None else experiments.MESH_R_DOTS,
        z_dots=(args.z_dot,) if args.z_dot is not None else experiments.MESH_Z_DOTS,
    )
    conditions = build_mesh(mesh_spec)
    sim = SimConfig() if not args.config else experiments.load_experiment_config(args.config)[1]
    summary = experiments.error_trace_summary(
        conditions, spec, list(range(args.seeds)), sim
    )
    out = _out_path(f"trace_{spec.label}.csv", args.out)
    experiments.write_trace_summary_csv(out, summary)
    print(f"{summary.n_trials} trials aggregated; trace summary written to {out}")
    return 0


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    conditions = build_mesh()
    problems = []
    for _ in range(args.n):
        c = conditions[rng.integers(len(conditions))]
        jitter = rng.uniform(0.95, 1.05, size=2)
        ee = EEMeasurement(
            p=(c.state.r, c.state.z),
            v=(c.state.r_dot * jitter[0], c.state.z_dot * jitter[1]),
        )
        T = float(rng.uniform(0.0025, 0.1))
        problems.append((ee, T, c.target))

    samples = np.empty(args.n)
    digest = hashlib.sha256()
    for i, (ee, T, target) in enumerate(problems):
        start = time.perf_counter()
        problem = tube_qp.assemble(ee, T, target)
        solution = tube_qp.solve(problem)
        samples[i] = time.perf_counter() - start
        digest.update(repr(solution.a_tube).encode())

    p50, p90, p99 = (np.percentile(samples, p) * 1e6 for p in (50, 90, 99))
    print(f"{args.n} assemble+solve calls")
    print(f"p50 {p50:.1f} us, p90 {p90:.1f} us, p99 {p99:.1f} us")
    print(f"solution hash {digest.hexdigest()[:16]}")
    ok = p50 < 1000.0
    print(f"p50 < 1 ms: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubethrow",
        description="Robust-release throwing: ballistic flowmap, pullback tube "
        "acceleration, and stochastic release-window experiments.",
        epilog=MESH_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one tube QP instance", epilog=MESH_HELP)
    p.add_argument("--r", type=float, default=0.0, help="EE r position m (default %(default)s)")
    p.add_argument("--z", type=float, required=True, help="EE height m")
    p.add_argument("--r-dot", type=float, required=True, help="EE radial velocity m/s")
    p.add_argument("--z-dot", type=float, required=True, help="EE vertical velocity m/s")
    p.add_argument("--target-r", type=float, required=True, help="target landing r m")
    p.add_argument("--z-land", type=float, default=0.0, help="landing height m (default %(default)s)")
    p.add_argument("--time-to-go", type=float, default=0.1, help="seconds until window end (default %(default)s)")
    p.add_argument("--timing", action="store_true", help="include solve time in the output")
    _add_bounds_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser(
        "simulate", help="simulate one release window from a perturbed nominal state",
        epilog=MESH_HELP,
    )
    p.add_argument("--controller", choices=["constant", "pullback"], default="pullback")
    p.add_argument("--z", type=float, required=True, help="nominal EE height m")
    p.add_argument("--r-dot", type=float, required=True, help="nominal radial velocity m/s")
    p.add_argument("--z-dot", type=float, required=True, help="nominal vertical velocity m/s")
    p.add_argument("--e-r", type=float, default=0.0, help="radial velocity error ratio (default %(default)s)")
    p.add_argument("--e-z", type=float, default=0.0, help="vertical velocity error ratio (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default %(default)s)")
    p.add_argument("--out", help="trace CSV path (default trace.csv in TUBETHROW_OUTDIR)")
    _add_sim_args(p)
    _add_bounds_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="run a batch over the condition mesh", epilog=MESH_HELP)
    p.add_argument(
        "--controllers", nargs="+", default=["constant", "pullback@400"],
        help="list of: constant, pullback@FREQ (default %(default)s)",
    )
    p.add_argument("--seeds", type=int, default=5, help="number of seeds 0..N-1 (default %(default)s)")
    p.add_argument("--config", help="JSON file with mesh and sim settings")
    p.add_argument("--noise-std", type=float, default=None, help="override noise std m/s^2")
    p.add_argument("--dt", type=float, default=None, help="override timestep s")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers (default %(default)s)")
    p.add_argument("--out-csv", help="write per-trial records CSV")
    p.add_argument("--out-json", help="write summary JSON")
    _add_bounds_args(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser(
        "reproduce-table4",
        help="reproduce the stochastic release experiment summary table",
        epilog=MESH_HELP,
    )
    p.add_argument("--config", help="JSON file with mesh and sim settings")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds 0..N-1 (default %(default)s)")
    p.add_argument("--noise-std", type=float, default=None, help="override noise std m/s^2")
    p.add_argument("--dt", type=float, default=None, help="override timestep s")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers (default %(default)s)")
    p.add_argument("--out-csv", help="trial records CSV path (default table4_trials.csv)")
    p.add_argument("--out-json", help="summary JSON path (default table4_summary.json)")
    p.set_defaults(func=cmd_reproduce_table4)

    p = sub.add_parser(
        "trace", help="export a pointwise-in-time landing-error band", epilog=MESH_HELP
    )
    p.add_argument("--controller", default="pullback@400", help="constant or pullback@FREQ (default %(default)s)")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds 0..N-1 (default %(default)s)")
    p.add_argument("--z", type=float, default=None, help="restrict mesh to one nominal height")
    p.add_argument("--r-dot", type=float, default=None, help="restrict mesh to one nominal radial velocity")
    p.add_argument("--z-dot", type=float, default=None, help="restrict mesh to one nominal vertical velocity")
    p.add_argument("--config", help="JSON file with sim settings")
    p.add_argument("--out", help="output CSV path")
    _add_bounds_args(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bench", help="latency benchmark of assemble+solve", epilog=MESH_HELP)
    p.add_argument("--n", type=int, default=10000, help="number of instances (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="problem-generation seed (default %(default)s)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
