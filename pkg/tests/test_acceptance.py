"""Acceptance suite: one test per acceptance criterion, each printing a
single PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Criteria 1-3 check the default stochastic release experiment against its
reference result levels; criteria 4-8 are numerical correctness gates for the
flowmap, its gradient, the box-QP solver, the closed-loop pullback property,
and solver latency.

Criterion 7 is implemented exactly as specified and is expected to FAIL: with
the time-to-go counting down to the window end, the closed loop contracts the
landing error linearly in remaining time (about half the initial error remains
at the dwell boundary), so initial errors above twice the tube slack cannot
enter the tube within the dwell. The same contraction is what produces the
reference error levels checked by criteria 1 and 3, so the three cannot hold
simultaneously; see the repository notes for the full analysis.
"""

import math
import time

import numpy as np
import pytest

from oracles import fd_gradient, grid_search_box_qp, integrate_landing
from tubethrow.ballistics import (
    GRAVITY,
    FlightState,
    TargetSpec,
    flowmap_gradient,
    in_brt,
    landing_position,
    propagate,
)
from tubethrow.experiments import (
    DEFAULT_CONTROLLER_SPECS,
    DEFAULT_SEEDS,
    build_mesh,
    error_trace_summary,
    run_batch,
)
from tubethrow.release_sim import SimConfig
from tubethrow.tube_qp import EEMeasurement, assemble, kkt_residual, solve

CV_SPEC, P100_SPEC, P200_SPEC, P400_SPEC = DEFAULT_CONTROLLER_SPECS


def _report(num: int, name: str, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {num} {'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    return line


@pytest.fixture(scope="module")
def conditions():
    return build_mesh()


@pytest.fixture(scope="module")
def table4_run(conditions):
    start = time.perf_counter()
    stats, records = run_batch(
        conditions, DEFAULT_CONTROLLER_SPECS, DEFAULT_SEEDS, SimConfig()
    )
    elapsed = time.perf_counter() - start
    return {s.controller: s for s in stats}, records, elapsed


@pytest.fixture(scope="module")
def cv_summary(conditions):
    return error_trace_summary(conditions, CV_SPEC, DEFAULT_SEEDS, SimConfig())


@pytest.fixture(scope="module")
def p400_summary(conditions):
    return error_trace_summary(conditions, P400_SPEC, DEFAULT_SEEDS, SimConfig())


def test_criterion_1_stochastic_batch_reproduction(table4_run):
    stats, records, elapsed = table4_run
    cv = stats["constant_velocity"].mae
    p400 = stats["pullback_400hz"].mae
    cv_ok = 0.968 * 0.85 <= cv <= 0.968 * 1.15
    p400_ok = 0.311 * 0.70 <= p400 <= 0.311 * 1.30
    runtime_ok = elapsed < 300.0
    failures = sum(1 for r in records if r.note)
    ok = cv_ok and p400_ok and runtime_ok and failures == 0
    detail = (
        f"constant-velocity MAE {cv:.3f} m (band 0.823..1.113), "
        f"pullback-400Hz MAE {p400:.3f} m (band 0.218..0.404), "
        f"{len(records)} trials in {elapsed:.0f} s, {failures} trial errors"
    )
    assert ok, _report(1, "stochastic batch reproduction", ok, detail)
    _report(1, "stochastic batch reproduction", ok, detail)


def test_criterion_2_frequency_monotonicity(table4_run):
    stats, _, _ = table4_run
    m100 = stats["pullback_100hz"].mae
    m200 = stats["pullback_200hz"].mae
    m400 = stats["pullback_400hz"].mae
    ok = m100 >= m200 >= m400
    detail = f"MAE 100 Hz {m100:.4f} >= 200 Hz {m200:.4f} >= 400 Hz {m400:.4f} m"
    assert ok, _report(2, "frequency monotonicity", ok, detail)
    _report(2, "frequency monotonicity", ok, detail)


def test_criterion_3_error_trace_anchors(conditions, cv_summary, p400_summary):
    e0 = np.mean(
        [abs(landing_position(c.state) - c.target.r_target) for c in conditions]
    )
    t0_ok = 0.35 <= e0 <= 0.45
    cv_end = cv_summary.mae[-1]
    cv_ok = 0.90 * 0.85 <= cv_end <= 0.90 * 1.15
    detach = p400_summary.times >= 0.05 - 1e-12
    p400_detach = float(p400_summary.mae[detach].max())
    p400_ok = p400_detach <= 0.30
    ok = t0_ok and cv_ok and p400_ok
    detail = (
        f"window-entry MAE {e0:.4f} m (band 0.35..0.45), "
        f"constant-velocity end MAE {cv_end:.4f} m (band 0.765..1.035), "
        f"pullback-400Hz detach-window MAE peak {p400_detach:.4f} m (<= 0.30)"
    )
    assert ok, _report(3, "error trace anchors", ok, detail)
    _report(3, "error trace anchors", ok, detail)


def test_criterion_4_flowmap_against_integration():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst_map = 0.0
    worst_invariance = 0.0
    for _ in range(1000):
        state = FlightState(
            r=rng.uniform(-2.0, 2.0),
            z=rng.uniform(0.2, 2.0),
            r_dot=rng.uniform(0.5, 12.0),
            z_dot=rng.uniform(-2.0, 6.0),
        )
        t_fly, r_oracle = integrate_landing(
            state.r, state.z, state.r_dot, state.z_dot, t_max=4.0
        )
        r_analytic = landing_position(state)
        worst_map = max(worst_map, abs(r_analytic - r_oracle))
        coasted = propagate(state, rng.uniform(0.0, 0.95) * t_fly)
        worst_invariance = max(
            worst_invariance, abs(landing_position(coasted) - r_analytic)
        )
    elapsed = time.perf_counter() - start
    ok = worst_map < 1e-6 and worst_invariance < 1e-9 and elapsed < 5.0
    detail = (
        f"worst |analytic - integrated| {worst_map:.2e} m (< 1e-6), "
        f"worst coasting drift {worst_invariance:.2e} m (< 1e-9), "
        f"1000 states in {elapsed:.2f} s (< 5 s)"
    )
    assert ok, _report(4, "flowmap correctness", ok, detail)
    _report(4, "flowmap correctness", ok, detail)


def test_criterion_5_gradient_against_finite_differences():
    rng = np.random.default_rng(2025)
    worst_rel = 0.0
    n = 0
    while n < 1000:
        state = FlightState(
            r=rng.uniform(-2.0, 2.0),
            z=rng.uniform(0.05, 2.5),
            r_dot=rng.uniform(0.5, 12.0),
            z_dot=rng.uniform(-3.0, 6.0),
        )
        disc = state.z_dot**2 + 2.0 * GRAVITY * state.z
        if disc <= 0.1:
            continue
        n += 1
        d_rdot, d_zdot = flowmap_gradient(state)
        fd_rdot = fd_gradient(
            lambda v: landing_position(FlightState(state.r, state.z, v, state.z_dot)),
            state.r_dot,
        )
        fd_zdot = fd_gradient(
            lambda v: landing_position(FlightState(state.r, state.z, state.r_dot, v)),
            state.z_dot,
        )
        worst_rel = max(
            worst_rel,
            abs(d_rdot - fd_rdot) / max(abs(fd_rdot), 1e-12),
            abs(d_zdot - fd_zdot) / max(abs(fd_zdot), 1e-12),
        )
    ok = worst_rel < 1e-6
    detail = f"worst relative error vs central differences {worst_rel:.2e} (< 1e-6)"
    assert ok, _report(5, "flowmap gradient correctness", ok, detail)
    _report(5, "flowmap gradient correctness", ok, detail)


def _random_qp_instances(rng, conditions, n):
    """Half tube-derived, half synthetic SPD box QPs."""
    instances = []
    for i in range(n):
        if i % 2 == 0:
            c = conditions[int(rng.integers(len(conditions)))]
            jit = rng.uniform(0.9, 1.1, size=2)
            ee = EEMeasurement(
                p=(c.state.r, c.state.z),
                v=(c.state.r_dot * jit[0], max(c.state.z_dot * jit[1], 0.1)),
            )
            T = float(rng.uniform(0.0025, 0.1))
            problem = assemble(ee, T, c.target)
            w1, w2 = T * problem.grad[0], T * problem.grad[1]
            res = problem.r_land0 - problem.target.r_target
            reg = problem.regularization
            instances.append(
                (
                    w1 * w1 + reg, w1 * w2, w2 * w2 + reg,
                    res * w1, res * w2,
                    *problem.box[0], *problem.box[1],
                )
            )
        else:
            a = rng.uniform(-1.0, 1.0, size=(2, 2))
            h = a.T @ a + rng.uniform(1e-4, 1.0) * np.eye(2)
            q = rng.uniform(-3.0, 3.0, size=2)
            lo = rng.uniform(-8.0, 0.0, size=2)
            hi = lo + rng.uniform(0.0, 16.0, size=2)
            instances.append((h[0, 0], h[0, 1], h[1, 1], q[0], q[1], lo[0], hi[0], lo[1], hi[1]))
    return instances


def test_criterion_6_qp_exactness(conditions):
    from tubethrow.tube_qp import solve_box_qp

    rng = np.random.default_rng(2026)
    instances = _random_qp_instances(rng, conditions, 10000)
    worst_kkt = 0.0
    worst_gap = -math.inf
    for idx, args in enumerate(instances):
        x1, x2 = solve_box_qp(*args)
        worst_kkt = max(worst_kkt, kkt_residual(*args, x1, x2))
        n_grid = 400 if idx < 500 else 200
        _, _, grid_f = grid_search_box_qp(*args, n=n_grid)
        h11, h12, h22, q1, q2 = args[:5]
        f = x1 * (h11 * x1 + 2 * h12 * x2 + 2 * q1) + x2 * (h22 * x2 + 2 * q2)
        worst_gap = max(worst_gap, f - grid_f)
    ok = worst_kkt < 1e-8 and worst_gap <= 1e-6
    detail = (
        f"10000 instances, worst KKT residual {worst_kkt:.2e} (< 1e-8), "
        f"worst objective minus grid best {worst_gap:.2e} (<= 1e-6)"
    )
    assert ok, _report(6, "box-QP exactness", ok, detail)
    _report(6, "box-QP exactness", ok, detail)


def test_criterion_7_noise_free_pullback_invariance(conditions):
    # closed loop at uniform 400 Hz ticks with exact double-integrator
    # updates, wide (+-40) acceleration authority, no noise
    window, freq = 0.1, 400.0
    period = 1.0 / freq
    n_ticks = round(window * freq)
    dwell_tick = round(0.05 * freq)
    a_bounds = ((-40.0, 40.0), (-40.0, 40.0))

    perturbed = [c for c in conditions if (c.e_r, c.e_z) != (0.0, 0.0)]
    worst_increase = 0.0
    not_entered = 0
    worst_entry_error = 0.0
    for c in perturbed:
        r, z = c.state.r, c.state.z
        r_dot, z_dot = c.state.r_dot, c.state.z_dot
        errors = [abs(landing_position(c.state) - c.target.r_target)]
        entered = in_brt(c.state, c.target)
        for k in range(n_ticks):
            T = max(window - k * period, period)
            solution = solve(
                assemble(
                    EEMeasurement(p=(r, z), v=(r_dot, z_dot)),
                    T,
                    c.target,
                    a_bounds=a_bounds,
                    clamp_infeasible=True,
                )
            )
            ar, az = solution.a_tube
            r += r_dot * period + 0.5 * ar * period * period
            z += z_dot * period + 0.5 * az * period * period
            r_dot += ar * period
            z_dot += az * period
            state = FlightState(r, z, r_dot, z_dot)
            errors.append(abs(landing_position(state) - c.target.r_target))
            if k + 1 <= dwell_tick and in_brt(state, c.target):
                entered = True
        worst_increase = max(worst_increase, float(np.diff(errors).max()))
        if not entered:
            not_entered += 1
            worst_entry_error = max(worst_entry_error, min(errors[: dwell_tick + 1]))

    monotone_ok = worst_increase <= 1e-6
    entry_ok = not_entered == 0
    ok = monotone_ok and entry_ok
    detail = (
        f"{len(perturbed)} perturbed states: worst per-tick error increase "
        f"{worst_increase:.2e} m (<= 1e-6), {not_entered} states never inside the "
        f"0.25 m tube within the 50 ms dwell (worst best-error {worst_entry_error:.3f} m)"
    )
    assert ok, _report(7, "noise-free pullback invariance", ok, detail)
    _report(7, "noise-free pullback invariance", ok, detail)


def test_criterion_8_solver_latency(conditions):
    rng = np.random.default_rng(2028)
    samples = np.empty(10000)
    for i in range(len(samples)):
        c = conditions[int(rng.integers(len(conditions)))]
        jit = rng.uniform(0.9, 1.1, size=2)
        ee = EEMeasurement(
            p=(c.state.r, c.state.z),
            v=(c.state.r_dot * jit[0], c.state.z_dot * jit[1]),
        )
        T = float(rng.uniform(0.0025, 0.1))
        start = time.perf_counter()
        solve(assemble(ee, T, c.target))
        samples[i] = time.perf_counter() - start
    p50 = float(np.percentile(samples, 50)) * 1e6
    p99 = float(np.percentile(samples, 99)) * 1e6
    ok = p50 < 1000.0
    detail = f"assemble+solve p50 {p50:.1f} us, p99 {p99:.1f} us over 10000 instances (p50 < 1000 us)"
    assert ok, _report(8, "solver latency", ok, detail)
    _report(8, "solver latency", ok, detail)
