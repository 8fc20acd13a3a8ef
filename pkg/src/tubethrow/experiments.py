"""Batch stochastic release-window experiments.

Builds the 1500-condition mesh of perturbed release states (3 heights x 20
nominal velocities x 25 velocity-error-ratio pairs), runs Monte-Carlo
comparisons of release controllers over it, and aggregates worst-case landing
errors into summary statistics and pointwise-in-time error bands.

Trial randomness is keyed by ``(seed, condition index)`` through a
``SeedSequence``, so results are independent of trial execution order and of
the number of parallel workers.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .ballistics import (
    DEFAULT_LANDING_SLACK,
    FlightState,
    TargetSpec,
    landing_position,
)
from .release_sim import (
    ConstantVelocityController,
    PullbackController,
    SimConfig,
    max_error_in_detach_window,
    simulate_release,
)
from .tube_qp import DEFAULT_A_BOUNDS, DEFAULT_REGULARIZATION, DEFAULT_V_BOUNDS, Bounds2

MESH_HEIGHTS = (0.5, 1.0, 1.5)
MESH_R_DOTS = (5.0, 6.0, 7.0, 8.0, 9.0)
MESH_Z_DOTS = (1.0, 2.0, 3.0, 4.0)
MESH_ERROR_RATIOS = (-0.10, -0.05, 0.0, 0.05, 0.10)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)

TRIAL_CSV_HEADER = [
    "controller",
    "z",
    "r_dot_nom",
    "z_dot_nom",
    "e_r",
    "e_z",
    "seed",
    "max_err_m",
    "note",
]


@dataclass(frozen=True, slots=True)
class ConditionMesh:
    """Cartesian mesh of nominal release states and velocity error ratios."""

    heights: tuple[float, ...] = MESH_HEIGHTS
    r_dots: tuple[float, ...] = MESH_R_DOTS
    z_dots: tuple[float, ...] = MESH_Z_DOTS
    r_error_ratios: tuple[float, ...] = MESH_ERROR_RATIOS
    z_error_ratios: tuple[float, ...] = MESH_ERROR_RATIOS

    def __post_init__(self):
        for name in ("heights", "r_dots", "z_dots", "r_error_ratios", "z_error_ratios"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"mesh axis {name} is empty")

    @property
    def size(self) -> int:
        return (
            len(self.heights)
            * len(self.r_dots)
            * len(self.z_dots)
            * len(self.r_error_ratios)
            * len(self.z_error_ratios)
        )


@dataclass(frozen=True, slots=True)
class Condition:
    """One mesh entry: a perturbed initial state and its nominal-derived target."""

    index: int
    z: float
    r_dot_nom: float
    z_dot_nom: float
    e_r: float
    e_z: float
    state: FlightState
    target: TargetSpec


def build_mesh(spec: ConditionMesh = ConditionMesh(), slack: float = DEFAULT_LANDING_SLACK) -> list[Condition]:
    """Expand a mesh spec into concrete (initial state, target) conditions.

    For each nominal ``(z, r_dot, z_dot)`` the target is the nominal's own
    landing position at zero landing height; the initial state applies the
    error ratios multiplicatively to both velocity components. The release
    position is fixed at r=0 (a pure offset in the flowmap, without loss of
    generality).
    """
    conditions = []
    index = 0
    for z in spec.heights:
        for r_dot_nom in spec.r_dots:
            for z_dot_nom in spec.z_dots:
                r_target = landing_position(FlightState(0.0, z, r_dot_nom, z_dot_nom))
                target = TargetSpec(r_target=r_target, z_land=0.0, r_slack=slack)
                for e_r in spec.r_error_ratios:
                    for e_z in spec.z_error_ratios:
                        state = FlightState(
                            0.0, z, r_dot_nom * (1.0 + e_r), z_dot_nom * (1.0 + e_z)
                        )
                        conditions.append(
                            Condition(
                                index=index,
                                z=z,
                                r_dot_nom=r_dot_nom,
                                z_dot_nom=z_dot_nom,
                                e_r=e_r,
                                e_z=e_z,
                                state=state,
                                target=target,
                            )
                        )
                        index += 1
    return conditions


@dataclass(frozen=True, slots=True)
class ControllerSpec:
    """A named controller configuration for batch runs."""

    label: str
    kind: str  # "constant_velocity" | "pullback"
    control_freq: float = 400.0
    a_bounds: Bounds2 = DEFAULT_A_BOUNDS
    v_bounds: Bounds2 = DEFAULT_V_BOUNDS
    regularization: float = DEFAULT_REGULARIZATION
    vertical_only: bool = False

    def __post_init__(self):
        if self.kind not in ("constant_velocity", "pullback"):
            raise ValueError(f"unknown controller kind {self.kind!r}")

    def make_controller(self):
        if self.kind == "constant_velocity":
            return ConstantVelocityController()
        return PullbackController(
            a_bounds=self.a_bounds,
            v_bounds=self.v_bounds,
            regularization=self.regularization,
            vertical_only=self.vertical_only,
        )


DEFAULT_CONTROLLER_SPECS = (
    ControllerSpec(label="constant_velocity", kind="constant_velocity"),
    ControllerSpec(label="pullback_100hz", kind="pullback", control_freq=100.0),
    ControllerSpec(label="pullback_200hz", kind="pullback", control_freq=200.0),
    ControllerSpec(label="pullback_400hz", kind="pullback", control_freq=400.0),
)


@dataclass(frozen=True, slots=True)
class TrialRecord:
    controller: str
    z: float
    r_dot_nom: float
    z_dot_nom: float
    e_r: float
    e_z: float
    seed: int
    max_err: float
    note: str = ""


@dataclass(frozen=True, slots=True)
class AggregateStats:
    """Mesh-level summary of per-trial worst-case landing errors."""

    controller: str
    mae: float
    std: float
    n_trials: int


@dataclass(frozen=True, slots=True)
class TraceSummary:
    """Pointwise-in-time aggregation of landing-error traces over trials."""

    controller: str
    times: np.ndarray
    mae: np.ndarray
    std: np.ndarray
    env_min: np.ndarray
    env_max: np.ndarray
    n_trials: int


def trial_rng(seed: int, condition_index: int) -> np.random.Generator:
    """Per-trial PRNG stream; identical for a trial regardless of scheduling."""
    return np.random.default_rng(np.random.SeedSequence((seed, condition_index)))


def run_trial(
    spec: ControllerSpec, condition: Condition, seed: int, config: SimConfig
) -> TrialRecord:
    cfg = replace(config, control_freq=spec.control_freq)
    controller = spec.make_controller()
    note = ""
    try:
        trace = simulate_release(
            controller, condition.state, condition.target, cfg, rng=trial_rng(seed, condition.index)
        )
        max_err = max_error_in_detach_window(trace, cfg)
    except Exception as exc:  # surface per-trial failures without killing the batch
        max_err = float("nan")
        note = f"{type(exc).__name__}: {exc}"
    return TrialRecord(
        controller=spec.label,
        z=condition.z,
        r_dot_nom=condition.r_dot_nom,
        z_dot_nom=condition.z_dot_nom,
        e_r=condition.e_r,
        e_z=condition.e_z,
        seed=seed,
        max_err=max_err,
        note=note,
    )


def _run_chunk(args):
    spec, conditions, seeds, config = args
    return [run_trial(spec, c, s, config) for c in conditions for s in seeds]


def run_batch(
    conditions: list[Condition],
    specs=DEFAULT_CONTROLLER_SPECS,
    seeds=DEFAULT_SEEDS,
    config: SimConfig = SimConfig(),
    jobs: int = 1,
) -> tuple[list[AggregateStats], list[TrialRecord]]:
    """Simulate every (controller, condition, seed) trial and aggregate.

    Statistics are the mean and population standard deviation of the per-trial
    maximum landing error in the detach window, pooled over conditions and
    seeds. Records are returned in (spec, condition, seed) order independent
    of ``jobs``.
    """
    if not conditions or not specs or not len(seeds):
        raise ValueError("conditions, specs, and seeds must be non-empty")
    seeds = list(seeds)
    stats: list[AggregateStats] = []
    all_records: list[TrialRecord] = []
    for spec in specs:
        if jobs > 1:
            chunks = [
                (spec, conditions[i::jobs], seeds, config) for i in range(jobs)
            ]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                per_chunk = list(pool.map(_run_chunk, chunks))
            # reassemble in deterministic (condition, seed) order
            keyed = {}
            for chunk, chunk_records in zip(chunks, per_chunk):
                _, chunk_conditions, _, _ = chunk
                it = iter(chunk_records)
                for c in chunk_conditions:
                    for s in seeds:
                        keyed[(c.index, s)] = next(it)
            records = [keyed[(c.index, s)] for c in conditions for s in seeds]
        else:
            records = [run_trial(spec, c, s, config) for c in conditions for s in seeds]
        errs = np.array([r.max_err for r in records])
        valid = errs[np.isfinite(errs)]
        stats.append(
            AggregateStats(
                controller=spec.label,
                mae=float(valid.mean()),
                std=float(valid.std()),
                n_trials=len(records),
            )
        )
        all_records.extend(records)
    return stats, all_records


def error_trace_summary(
    conditions: list[Condition],
    spec: ControllerSpec,
    seeds=DEFAULT_SEEDS,
    config: SimConfig = SimConfig(),
) -> TraceSummary:
    """Pointwise-in-time mean/std/envelope of landing error over all trials."""
    cfg = replace(config, control_freq=spec.control_freq)
    controller = spec.make_controller()
    n_samples = cfg.n_steps + 1
    total = np.zeros(n_samples)
    total_sq = np.zeros(n_samples)
    env_min = np.full(n_samples, np.inf)
    env_max = np.full(n_samples, -np.inf)
    times = None
    n_trials = 0
    for condition in conditions:
        for seed in seeds:
            trace = simulate_release(
                controller,
                condition.state,
                condition.target,
                cfg,
                rng=trial_rng(seed, condition.index),
            )
            errs = trace.landing_errors
            total += errs
            total_sq += errs * errs
            np.minimum(env_min, errs, out=env_min)
            np.maximum(env_max, errs, out=env_max)
            times = trace.times
            n_trials += 1
    mae = total / n_trials
    var = np.maximum(total_sq / n_trials - mae * mae, 0.0)
    return TraceSummary(
        controller=spec.label,
        times=times,
        mae=mae,
        std=np.sqrt(var),
        env_min=env_min,
        env_max=env_max,
        n_trials=n_trials,
    )


def write_trial_records_csv(path, records: list[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.controller,
                    f"{r.z:g}",
                    f"{r.r_dot_nom:g}",
                    f"{r.z_dot_nom:g}",
                    f"{r.e_r:g}",
                    f"{r.e_z:g}",
                    r.seed,
                    f"{r.max_err:.9f}",
                    r.note,
                ]
            )


def write_summary_json(path, stats: list[AggregateStats]) -> None:
    payload = [
        {
            "controller": s.controller,
            "mae_m": s.mae,
            "std_m": s.std,
            "n_trials": s.n_trials,
        }
        for s in stats
    ]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_trace_summary_csv(path, summary: TraceSummary) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "mae_m", "std_m", "env_min_m", "env_max_m"])
        for i, t in enumerate(summary.times):
            writer.writerow(
                [
                    f"{t:.6f}",
                    f"{summary.mae[i]:.9f}",
                    f"{summary.std[i]:.9f}",
                    f"{summary.env_min[i]:.9f}",
                    f"{summary.env_max[i]:.9f}",
                ]
            )


def load_experiment_config(path) -> tuple[ConditionMesh, SimConfig]:
    """Read mesh and simulation settings from a JSON file.

    Schema: ``{"mesh": {heights, r_dots, z_dots, r_error_ratios,
    z_error_ratios}, "sim": {dt, control_freq, noise_std, dwell, window, seed,
    noise_per_tick, measurement_noise_std}}``; all fields optional, defaults
    embed the standard mesh.
    """
    with open(path) as fh:
        raw = json.load(fh)
    mesh_kwargs = {k: tuple(v) for k, v in raw.get("mesh", {}).items()}
    mesh = ConditionMesh(**mesh_kwargs)
    sim = SimConfig(**raw.get("sim", {}))
    return mesh, sim
