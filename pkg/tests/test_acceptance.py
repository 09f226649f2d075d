"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line with its runtime."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from particle_robot import runner, swarm, terrain as T
from particle_robot.actuator import command_rate, lock_state_audit, make_actuator, step_actuator
from particle_robot.dynamics import (ContactSource, DriveCommand, detect_contacts, make_body_state,
                                     rolling_slip_residual, shell_contact, static_sink, step_dynamics)
from particle_robot.gait import PENTA, QUAD, TALL_TRIPOD, TRIPOD, is_statically_stable, stance_state
from particle_robot.morphology import N_SPINES, reference_morphology
from particle_robot.scenario import load_scenario, swarm_world

from oracles import greedy_latch_oracle, oracle_stable, random_stance_state

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
M = reference_morphology()
FLAT = T.flat(0.8)
ZERO = np.zeros(N_SPINES)
FIRST_RUN_CSV = {}  # scenario file name -> trajectory bytes from an earlier criterion


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def _report(number, ok, detail, limit_s=None):
        elapsed = time.perf_counter() - start
        in_time = limit_s is None or elapsed < limit_s
        status = "PASS" if ok and in_time else "FAIL"
        budget = f" (limit {limit_s:g} s)" if limit_s is not None else ""
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {status}  {detail}; runtime {elapsed:.2f} s{budget}")
        assert ok, detail
        assert in_time, f"runtime {elapsed:.2f} s exceeds {limit_s} s"

    return _report


def test_criterion_01_geometry_constants(report):
    s = M.shell
    sp = M.spine
    values = (s.outer_diameter, len(M.spine_directions), sp.base_height, sp.stroke,
              sp.extended_length, sp.extension_ratio)
    ok = values == (260, 14, 50, 128, 178, 3.56)
    report(1, ok, "D_o, spines, base, stroke, extended, ratio = " + ", ".join(map(str, values)), 1.0)


def test_criterion_02_actuator_timing(report):
    dt = 1e-3
    initial = make_actuator(M.spine)
    a = command_rate(initial, M.spine.max_rate)
    t = 0.0
    while a.extension < M.spine.stroke:
        a = step_actuator(a, dt)
        t += dt
    a = command_rate(a, -M.spine.max_rate)
    while a.extension > 0.0:
        a = step_actuator(a, dt)
    restored = a.extension == initial.extension and a.links == initial.links
    ok = abs(t - 1.28) <= dt + 1e-12 and restored
    report(2, ok, f"full extension took {t:.4f} s (expected 1.28 +/- {dt}), FSM restored: {restored}", 1.0)


def test_criterion_03_rack_fuzz(report):
    rng = np.random.default_rng(3)
    a = make_actuator(M.spine)
    pitch = M.spine.link_pitch
    bad = 0
    for _ in range(10_000):
        a = step_actuator(command_rate(a, rng.uniform(-150, 150)), rng.uniform(1e-4, 0.05))
        prefix = [link.index for link in a.links if link.arm_lock_engaged]
        expected = [i for i in range(len(a.links)) if i * pitch < a.extension]
        bad += not (lock_state_audit(a) and prefix == expected and 0.0 <= a.extension <= M.spine.stroke)
    report(3, bad == 0, f"{bad} invariant violations in 10^4 random steps", 5.0)


def test_criterion_04_rolling_oracle(report):
    tau = M.drive_torque_limit
    oracle = tau * M.outer_radius * 1e-3 / (M.inertia + M.mass_total * (M.outer_radius * 1e-3) ** 2)
    s = static_sink(make_body_state(M), M, FLAT)
    dt = 1e-3
    v = []
    slip = []
    for i in range(3000):
        s = step_dynamics(s, M, FLAT, DriveCommand(tau, 0.0), ZERO, dt)
        v.append(s.linear_velocity[0])
        if i >= 1000:
            slip.append(rolling_slip_residual(s, shell_contact(detect_contacts(s, M, FLAT))))
    measured = (v[-1] - v[999]) / (2000 * dt)
    err = abs(measured - oracle) / oracle
    ok = err < 0.05 and max(slip) < 1e-3
    report(4, ok, f"a = {measured:.4f} m/s^2 vs oracle {oracle:.4f} ({100 * err:.2f}% off), "
                  f"max steady slip {1e3 * max(slip):.3f} mm/s", 10.0)


def test_criterion_05_energy_monotonicity(report):
    s = load_scenario(SCENARIOS / "drop.json")
    summary, _ = runner.simulate_locomotion(s)
    ok = s.duration >= 10.0 and summary.max_energy_gain_j <= 1e-6
    report(5, ok, f"300 mm drop, {s.duration:g} s unpowered: max per-step gain "
                  f"{summary.max_energy_gain_j:.3e} J (limit 1e-6)", 10.0)


def _height_range(state, seconds, dt=1e-3):
    z = [state.position[2]]
    for _ in range(int(round(seconds / dt))):
        state = step_dynamics(state, M, FLAT, DriveCommand(), ZERO, dt)
        z.append(state.position[2])
    return state, np.array(z)


def test_criterion_06_static_stance(report):
    parts = []
    ok = True
    for name, stance in (("tripod", TRIPOD), ("quad", QUAD), ("penta", PENTA), ("tall tripod", TALL_TRIPOD)):
        s = stance_state(M, FLAT, stance)
        if not is_statically_stable(s, M, FLAT, 10.0):
            parts.append(f"{name} fails the margin test")
            ok = False
            continue
        _, z = _height_range(s, 5.0)
        span = 1e3 * (z.max() - z.min())
        ok &= span < 2.0
        parts.append(f"{name} height range {span:.3f} mm")
    tilted = stance_state(M, FLAT, TALL_TRIPOD, tilt=0.5)
    unstable = not is_statically_stable(tilted, M, FLAT, 10.0)
    _, z = _height_range(tilted, 2.0)
    drop = 1e3 * (z[0] - z.min())
    ok &= unstable and drop > 50.0
    parts.append(f"tilted tall tripod flagged unstable: {unstable}, falls {drop:.1f} mm in 2 s")
    report(6, ok, "; ".join(parts), 30.0)


def test_criterion_07_stability_oracle(report):
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(1000):
        s = random_stance_state(rng, M)
        contacts = detect_contacts(s, M, FLAT)
        tips = [tuple(c.location[:2] * 1e3) for c in contacts if c.source is ContactSource.SPINE_TIP]
        expected = oracle_stable(tips, tuple(s.position[:2] * 1e3), 10.0)
        agree += is_statically_stable(s, M, FLAT, 10.0, contacts) == expected
    report(7, agree == 1000, f"{agree}/1000 random stances agree with ray casting", 5.0)


def test_criterion_08_snow_claim(report, tmp_path):
    roll = load_scenario(SCENARIOS / "roll_snow.json")
    hybrid = load_scenario(SCENARIOS / "hybrid_snow.json")
    cmp = runner.compare(roll, hybrid, tmp_path)
    FIRST_RUN_CSV["roll_snow.json"] = (tmp_path / "a" / "trajectory.csv").read_bytes()
    FIRST_RUN_CSV["hybrid_snow.json"] = (tmp_path / "b" / "trajectory.csv").read_bytes()
    d_roll = cmp["a"]["net_displacement_m"]
    d_hybrid = cmp["b"]["net_displacement_m"]
    ratio = cmp["ratio"]
    ok = ratio is not None and ratio > 2.0 and d_roll < 0.1
    report(8, ok, f"snow, 10 s, seed {cmp['seed']}: roll {d_roll:.4f} m, hybrid {d_hybrid:.4f} m, "
                  f"ratio {ratio:.2f}", 60.0)


def test_criterion_09_walking_progress(report, tmp_path):
    s = load_scenario(SCENARIOS / "optimize_walk.json")
    assert s.config.mode.pattern.amplitude_mm == 0.0
    result = runner.run_optimize(s, tmp_path, budget=200)
    opt = result.extra["optimization"]
    history_ok = opt["optimized_displacement_m"] >= opt["initial_displacement_m"]
    ok = (opt["evaluations"] == 200 and result.summary.net_displacement_m > 0.0
          and opt["optimized_displacement_m"] > 0.0 and history_ok)
    report(9, ok, f"200 evaluations: initial {opt['initial_displacement_m']:.3e} m -> optimized "
                  f"{opt['optimized_displacement_m']:.4f} m over {opt['horizon_s']:g} s; "
                  f"best pattern over {s.duration:g} s: {result.summary.net_displacement_m:.4f} m", 600.0)


def test_criterion_10_swarm(report):
    w = swarm_world(load_scenario(SCENARIOS / "swarm_pair.json"))
    radius = w.latch_radius
    steps = 0
    while not w.edges and steps < 10_000:
        w = swarm.step_swarm(w, 1e-3)
        steps += 1
    latched = len(w.edges) == 1
    e = w.edges[0] if latched else None
    gap = (float(np.linalg.norm(e.rel_translation)) if latched else math.inf)
    worst = [0.0, 0.0]
    if latched:
        w = swarm.set_program(w, 0, swarm.Oscillate(1.3, (0.2, 1.0, 0.4), 0.05))
        w = swarm.set_program(w, 1, swarm.ToPose(np.array([-0.3, 0.5, 0.2]),
                                                 np.array([0.5, 0.5, -0.5, 0.5]), 0.05, 0.6))
        for _ in range(10_000):
            w = swarm.step_swarm(w, 1e-3)
            dm, dr = swarm.relative_pose_drift(w, w.edges[0])
            worst = [max(worst[0], dm), max(worst[1], dr)]
    matches = 0
    for seed in range(3):
        rw = swarm.random_world(50, seed, extent=0.9, latch_radius=0.02)
        matches += [x.endpoints for x in swarm.detect_latches(rw)] == greedy_latch_oracle(rw, 0.02)
    ok = latched and gap < radius and worst[0] < 1e-6 and worst[1] < 1e-6 and matches == 3
    report(10, ok, f"latched after {steps} steps at tip gap {1e3 * gap:.3f} mm (< {1e3 * radius:g}); "
                   f"drift over 10^4 steps {worst[0]:.2e} m / {worst[1]:.2e} rad; "
                   f"exhaustive oracle matched {matches}/3 random 50-particle worlds", 30.0)


def test_criterion_11_determinism(report, tmp_path):
    files = sorted(SCENARIOS.glob("*.json"))
    differing = []
    for path in files:
        scenario = load_scenario(path)
        if path.name not in FIRST_RUN_CSV:
            first = runner.run(scenario, tmp_path / "first" / path.stem)
            FIRST_RUN_CSV[path.name] = first.trajectory_path.read_bytes()
        again = runner.run(scenario, tmp_path / "again" / path.stem)
        if again.trajectory_path.read_bytes() != FIRST_RUN_CSV[path.name]:
            differing.append(path.name)
    report(11, not differing, f"{len(files) - len(differing)}/{len(files)} scenario files re-ran "
                              f"byte-identical" + (f"; differing: {differing}" if differing else ""))
