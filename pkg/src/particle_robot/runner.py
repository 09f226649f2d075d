"""Scenario execution: trajectories, run summaries, paired comparisons, and batches.

Output files are written atomically and floats are printed with ``repr``, so
re-running a scenario reproduces its files byte for byte.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import swarm
from .dynamics import (detect_contacts, mechanical_energy, rolling_slip_residual,
                       shell_contact, step_dynamics_detailed)
from .gait import is_statically_stable, mode_controller
from .morphology import N_SPINES
from .optimizer import GaitScenario, optimize_gait
from .scenario import Scenario, initial_state, load_scenario, locomotion_mode, swarm_world
from .units import rad_to_deg

TRAJECTORY_COLUMNS = (["t_s", "x_m", "y_m", "z_m", "qw", "qx", "qy", "qz", "wx", "wy", "wz"]
                      + [f"e{i:02d}_mm" for i in range(N_SPINES)] + ["mode", "n_contacts"])
SWARM_COLUMNS = ["t_s", "particle", "x_m", "y_m", "z_m", "qw", "qx", "qy", "qz", "assembly_size"]


@dataclass
class RunSummary:
    net_displacement_m: float = 0.0
    mean_speed_m_s: float = 0.0
    max_slip_residual_m_s: float = 0.0
    max_energy_gain_j: float = 0.0
    stance_stability_fraction: float = 0.0
    final_assembly_sizes: list = field(default_factory=list)
    max_latch_drift_m: float = 0.0
    max_latch_drift_rad: float = 0.0
    steps: int = 0

    def check_finite(self) -> "RunSummary":
        for k, v in asdict(self).items():
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"summary field {k} is not finite: {v}")
        return self


@dataclass
class RunResult:
    summary: RunSummary
    trajectory_path: Path | None = None
    summary_path: Path | None = None
    extra: dict = field(default_factory=dict)


def _fmt(x) -> str:
    return repr(float(x))


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# --- locomotion --------------------------------------------------------------------------

def _row(t, state, mode_name, n_contacts) -> str:
    values = [t, *state.position, *state.orientation, *state.angular_velocity, *state.extensions]
    return ",".join([_fmt(v) for v in values] + [mode_name, str(n_contacts)])


def simulate_locomotion(scenario: Scenario, pattern=None):
    """Run a locomotion scenario in memory; returns (summary, CSV text)."""
    m = scenario.morphology
    ter = scenario.terrain
    mode = locomotion_mode(scenario)
    if pattern is not None:
        mode = type(mode)(mode.mode, mode.drive_torque, mode.heading, pattern)
    state = initial_state(scenario)
    dt = scenario.dt
    steps = scenario.steps
    every = scenario.config.output.record_every

    contacts = detect_contacts(state, m, ter)
    energy = mechanical_energy(state, m, ter, contacts)
    start = state.position.copy()
    path = 0.0
    max_gain = -math.inf
    max_slip = 0.0
    stable = 0
    lines = [",".join(TRAJECTORY_COLUMNS), _row(0.0, state, mode.mode.value, len(contacts))]
    for i in range(steps):
        drive, rates = mode_controller(mode, state, i * dt, m)
        prev = state
        state, _ = step_dynamics_detailed(state, m, ter, drive, rates, dt)
        contacts = detect_contacts(state, m, ter)
        e = mechanical_energy(state, m, ter, contacts)
        max_gain = max(max_gain, e - energy)
        energy = e
        path += math.hypot(*(state.position[:2] - prev.position[:2]))
        shell = shell_contact(contacts)
        if shell is not None:
            max_slip = max(max_slip, rolling_slip_residual(state, shell))
        stable += is_statically_stable(state, m, ter, contacts=contacts)
        if (i + 1) % every == 0 or i + 1 == steps:
            lines.append(_row((i + 1) * dt, state, mode.mode.value, len(contacts)))
    net = float(math.hypot(*(state.position[:2] - start[:2])))
    summary = RunSummary(net_displacement_m=net, mean_speed_m_s=path / scenario.duration,
                         max_slip_residual_m_s=max_slip,
                         max_energy_gain_j=max(0.0, max_gain) if steps else 0.0,
                         stance_stability_fraction=stable / steps if steps else 0.0, steps=steps)
    return summary.check_finite(), "\n".join(lines) + "\n"


# --- swarm -------------------------------------------------------------------------------

def simulate_swarm(scenario: Scenario):
    world = swarm_world(scenario)
    dt = scenario.dt
    steps = scenario.steps
    every = scenario.config.output.record_every
    start = {p.id: p.position.copy() for p in world.particles}
    path = dict.fromkeys(start, 0.0)

    def rows(w, t):
        size = {pid: len(g) for g in swarm.assemblies(w) for pid in g}
        return [",".join([_fmt(t), str(p.id)] + [_fmt(v) for v in (*p.position, *p.orientation)]
                         + [str(size[p.id])]) for p in w.particles]

    lines = [",".join(SWARM_COLUMNS)] + rows(world, 0.0)
    drift_m = drift_rad = 0.0
    for i in range(steps):
        prev = {p.id: p.position for p in world.particles}
        world = swarm.step_swarm(world, dt)
        for p in world.particles:
            path[p.id] += float(np.linalg.norm(p.position - prev[p.id]))
        for edge in world.edges:
            dm, dr = swarm.relative_pose_drift(world, edge)
            drift_m = max(drift_m, dm)
            drift_rad = max(drift_rad, dr)
        if (i + 1) % every == 0 or i + 1 == steps:
            lines += rows(world, (i + 1) * dt)
    n = len(world.particles)
    net = sum(float(np.linalg.norm(p.position - start[p.id])) for p in world.particles) / n
    sizes = sorted((len(g) for g in swarm.assemblies(world)), reverse=True)
    summary = RunSummary(net_displacement_m=net, mean_speed_m_s=sum(path.values()) / n / scenario.duration,
                         final_assembly_sizes=sizes, max_latch_drift_m=drift_m,
                         max_latch_drift_rad=drift_rad, steps=steps)
    return summary.check_finite(), "\n".join(lines) + "\n"


# --- entry points ------------------------------------------------------------------------

def _write(scenario: Scenario, out_dir, summary: RunSummary, csv_text: str, extra=None) -> RunResult:
    out_dir = Path(out_dir)
    out = scenario.config.output
    traj = out_dir / out.trajectory
    summ = out_dir / out.summary
    atomic_write(traj, csv_text)
    data = asdict(summary)
    if extra:
        data.update(extra)
    atomic_write(summ, _dump_json(data))
    return RunResult(summary, traj, summ, extra or {})


def _pattern_json(p) -> dict:
    return {"period_s": p.period, "amplitude_mm": p.amplitude, "mid_extension_mm": p.mid_extension,
            "phases_deg": [rad_to_deg(x) for x in p.phases], "active": sorted(p.active_set),
            "waveform": p.waveform.value}


def run_optimize(scenario: Scenario, out_dir, budget: int | None = None) -> RunResult:
    """Optimize the scenario's gait pattern, then run the best pattern for the full duration."""
    cfg = scenario.config.optimize
    horizon = cfg.horizon_s if cfg else 3.0
    workers = cfg.workers if cfg else 1
    budget = budget if budget is not None else (cfg.budget if cfg else 50)
    mode = locomotion_mode(scenario)
    initial = mode.pattern
    gs = GaitScenario(scenario.morphology, scenario.terrain, initial_state(scenario), horizon,
                      scenario.dt, mode.drive_torque if mode.mode.value == "hybrid" else 0.0, mode.heading)
    result = optimize_gait(initial, gs, budget, seed=scenario.seed, workers=workers)
    summary, csv_text = simulate_locomotion(scenario, result.pattern)
    extra = {"optimization": {"budget": budget, "evaluations": result.evaluations,
                              "horizon_s": horizon,
                              "initial_displacement_m": result.initial_displacement,
                              "optimized_displacement_m": result.displacement,
                              "pattern": _pattern_json(result.pattern)}}
    return _write(scenario, out_dir, summary, csv_text, extra)


def run(scenario: Scenario, out_dir, budget: int | None = None) -> RunResult:
    if scenario.kind == "swarm":
        summary, csv_text = simulate_swarm(scenario)
        return _write(scenario, out_dir, summary, csv_text)
    if scenario.kind == "optimize":
        return run_optimize(scenario, out_dir, budget)
    summary, csv_text = simulate_locomotion(scenario)
    return _write(scenario, out_dir, summary, csv_text)


def displacement_ratio(a: float, b: float) -> float | None:
    """b / a; 1.0 when both are zero and None when only a is zero."""
    if a == 0.0:
        return 1.0 if b == 0.0 else None
    return b / a


def compare(a: Scenario, b: Scenario, out_dir) -> dict:
    """Run both scenarios under A's seed and write paired summaries plus the displacement ratio."""
    b = b.with_overrides(seed=a.seed)
    out_dir = Path(out_dir)
    ra = run(a, out_dir / "a")
    rb = run(b, out_dir / "b")
    report = {"a": asdict(ra.summary), "b": asdict(rb.summary), "seed": a.seed,
              "ratio": displacement_ratio(ra.summary.net_displacement_m, rb.summary.net_displacement_m)}
    atomic_write(out_dir / "compare.json", _dump_json(report))
    return report


def _batch_one(args):
    path, out_dir, seed, dt_ms = args
    scenario = load_scenario(path)
    if seed is not None or dt_ms is not None:
        scenario = scenario.with_overrides(seed, dt_ms)
    return str(path), asdict(run(scenario, out_dir).summary)


def batch(paths, out_dir, workers: int = 1, seed: int | None = None, dt_ms: float | None = None) -> dict:
    """Run independent scenario files, each into ``out_dir/<file stem>``."""
    out_dir = Path(out_dir)
    jobs = [(Path(p), out_dir / Path(p).stem, seed, dt_ms) for p in paths]
    if len({j[1] for j in jobs}) != len(jobs):
        raise ValueError("batch scenario files must have distinct names")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_batch_one, jobs))
    else:
        results = [_batch_one(j) for j in jobs]
    report = dict(results)
    atomic_write(out_dir / "batch.json", _dump_json(report))
    return report
