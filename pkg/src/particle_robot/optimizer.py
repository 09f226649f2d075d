"""Derivative-free gait search: coordinate descent with a shrinking step.

Each candidate pattern is scored by a deterministic simulation, so a run is
reproducible for a given seed and budget. Candidates of one coordinate move
can be scored on independent worlds in parallel; ties go to the lower index.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import BodyState, step_dynamics
from .gait import GaitPattern, LocomotionMode, Mode, TWO_PI, mode_controller
from .morphology import RobotMorphology
from .terrain import Terrain

PERIOD_BOUNDS = (0.2, 4.0)  # s
MIN_STEP_FRACTION = 1.0 / 16.0


@dataclass(frozen=True, eq=False)
class GaitScenario:
    morphology: RobotMorphology
    terrain: Terrain
    initial_state: BodyState
    horizon: float = 3.0  # s
    dt: float = 1e-3  # s
    drive_torque: float = 0.0  # N*m; nonzero switches to hybrid mode
    heading: float = 0.0


def simulate_pattern(pattern: GaitPattern, scenario: GaitScenario) -> BodyState:
    mode = LocomotionMode(Mode.HYBRID if scenario.drive_torque else Mode.WALK,
                          scenario.drive_torque, scenario.heading, pattern)
    state = scenario.initial_state
    m = scenario.morphology
    steps = int(round(scenario.horizon / scenario.dt))
    for i in range(steps):
        drive, rates = mode_controller(mode, state, i * scenario.dt, m)
        state = step_dynamics(state, m, scenario.terrain, drive, rates, scenario.dt)
    return state


def pattern_displacement(pattern: GaitPattern, scenario: GaitScenario) -> float:
    """Net horizontal displacement (m) after the scenario horizon."""
    final = simulate_pattern(pattern, scenario)
    d = final.position[:2] - scenario.initial_state.position[:2]
    return float(math.hypot(d[0], d[1]))


def _score(args):
    pattern, scenario = args
    return pattern_displacement(pattern, scenario)


@dataclass
class OptimizationResult:
    pattern: GaitPattern
    displacement: float
    evaluations: int
    initial_displacement: float
    history: list = field(default_factory=list)  # (evaluation index, displacement, accepted)


def _coordinates(pattern: GaitPattern) -> list:
    coords = ["period", "amplitude", "mid_extension"]
    coords += [("phase", i) for i in sorted(pattern.active_set)]
    return coords


def _initial_steps(stroke: float) -> dict:
    return {"period": 0.25, "amplitude": stroke / 8.0, "mid_extension": stroke / 8.0,
            "phase": math.pi / 2.0}


def _move(pattern: GaitPattern, coord, delta: float, stroke: float) -> GaitPattern:
    if coord == "period":
        return replace(pattern, period=min(PERIOD_BOUNDS[1], max(PERIOD_BOUNDS[0], pattern.period + delta)))
    if coord == "amplitude":
        limit = min(pattern.mid_extension, stroke - pattern.mid_extension)
        return replace(pattern, amplitude=min(limit, max(0.0, pattern.amplitude + delta)))
    if coord == "mid_extension":
        a = pattern.amplitude
        return replace(pattern, mid_extension=min(stroke - a, max(a, pattern.mid_extension + delta)))
    _, i = coord
    phases = list(pattern.phases)
    phases[i] = (phases[i] + delta) % TWO_PI
    return replace(pattern, phases=tuple(phases))


def _step_key(coord):
    return "phase" if isinstance(coord, tuple) else coord


def _perturb(pattern: GaitPattern, rng: np.random.Generator, steps: dict, stroke: float) -> GaitPattern:
    out = pattern
    for coord in _coordinates(pattern):
        out = _move(out, coord, float(rng.uniform(-1.0, 1.0)) * steps[_step_key(coord)], stroke)
    return out


def optimize_gait(initial: GaitPattern, scenario: GaitScenario, budget: int, seed: int = 0,
                  workers: int = 1) -> OptimizationResult:
    """Maximize net horizontal displacement over the scenario horizon within ``budget`` simulations.

    Sweeps the coordinates (period, amplitude, mid extension, active-spine phases),
    trying +step and -step on each and keeping the better one if it improves the
    best-so-far. A sweep without improvement halves every step; once steps fall
    below 1/16 of their start the search restarts from a seeded perturbation of the
    best pattern with full steps.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    stroke = scenario.morphology.stroke
    initial.validate(stroke)
    rng = np.random.default_rng(seed)
    start_steps = _initial_steps(stroke)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def score_all(patterns):
        if pool is None:
            return [pattern_displacement(p, scenario) for p in patterns]
        return list(pool.map(_score, [(p, scenario) for p in patterns]))

    try:
        best = initial
        best_score = score_all([initial])[0]
        initial_score = best_score
        history = [(0, best_score, True)]
        evals = 1
        current, current_score = best, best_score
        steps = dict(start_steps)
        seen = {_key(initial)}
        while evals < budget:
            improved = False
            for coord in _coordinates(current):
                if evals >= budget:
                    break
                step = steps[_step_key(coord)]
                cands = []
                for delta in (step, -step):
                    p = _move(current, coord, delta, stroke)
                    k = _key(p)
                    if k not in seen:
                        seen.add(k)
                        cands.append(p)
                cands = cands[:budget - evals]
                if not cands:
                    continue
                scores = score_all(cands)
                pick = int(np.argmax(scores))  # first maximum wins ties
                for j, s in enumerate(scores):
                    evals += 1
                    history.append((evals - 1, s, j == pick and s > current_score))
                if scores[pick] > current_score:
                    current, current_score = cands[pick], scores[pick]
                    improved = True
                    if current_score > best_score:
                        best, best_score = current, current_score
            if improved:
                continue
            for key in steps:
                steps[key] *= 0.5
            if steps["phase"] < start_steps["phase"] * MIN_STEP_FRACTION and evals < budget:
                steps = dict(start_steps)
                current = _perturb(best, rng, steps, stroke)
                seen.add(_key(current))
                current_score = score_all([current])[0]
                evals += 1
                history.append((evals - 1, current_score, False))
                if current_score > best_score:
                    best, best_score = current, current_score
        return OptimizationResult(best.validate(stroke), best_score, evals, initial_score, history)
    finally:
        if pool is not None:
            pool.shutdown()


def _key(p: GaitPattern):
    return (p.period, p.amplitude, p.mid_extension, p.phases)
