"""Scenario files: a strict JSON schema and its translation into simulation objects.

A minimal file::

    {"kind": "locomotion", "duration_s": 5, "terrain": {"preset": "flat"},
     "mode": {"kind": "roll", "drive_torque_nm": "max"}}

Lengths in the file are millimetres (``*_mm``), times are seconds except
``dt_ms``, angles are degrees. Unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import rotation, swarm, terrain as terrain_mod
from .dynamics import BodyState, make_body_state, static_sink
from .gait import (NAMED_PATTERNS, NAMED_STANCES, GaitPattern, LocomotionMode, Mode, Waveform,
                   stance_state)
from .morphology import N_SPINES, RobotMorphology, reference_morphology
from .units import MM, deg_to_rad, ms_to_s


class ScenarioError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MorphologyConfig(_Strict):
    outer_diameter_mm: float = Field(260.0, gt=0)
    base_height_mm: float = Field(50.0, gt=0)
    stroke_mm: float = Field(128.0, gt=0)
    max_rate_mm_s: float = Field(100.0, gt=0)
    mass_total_kg: float = Field(2.0, gt=0)
    inner_mass_fraction: float = Field(0.5, gt=0, lt=1)
    pendulum_arm_mm: float = Field(80.0, ge=0)


class TerrainConfig(_Strict):
    preset: Optional[Literal["flat", "slope15", "snow", "rocks"]] = None
    kind: Optional[Literal["flat", "slope", "heightfield"]] = None
    friction: Optional[float] = Field(None, ge=0)
    slope_deg: Optional[float] = Field(None, gt=-90, lt=90)
    heightfield_file: Optional[str] = None
    contact_stiffness: Optional[float] = Field(None, gt=0)
    contact_damping: Optional[float] = Field(None, ge=0)
    tangential_damping: Optional[float] = Field(None, ge=0)
    shell_shield_deg: Optional[float] = Field(None, ge=0, lt=90)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.kind is None):
            raise ValueError("give exactly one of 'preset' or 'kind'")
        if self.kind == "heightfield" and self.heightfield_file is None:
            raise ValueError("heightfield terrain needs 'heightfield_file'")
        return self


class InitialConfig(_Strict):
    position_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation_wxyz: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    extensions_mm: Optional[tuple[float, ...]] = None
    stance: Optional[Literal["tripod", "tall_tripod", "quad", "penta"]] = None
    yaw_deg: float = 0.0
    tilt_deg: float = 0.0
    settle: bool = True  # place the body at static equilibrium height

    @field_validator("extensions_mm")
    @classmethod
    def _fourteen(cls, v):
        if v is not None and len(v) != N_SPINES:
            raise ValueError(f"expected {N_SPINES} values")
        return v


class PatternConfig(_Strict):
    period_s: float = Field(1.0, gt=0)
    amplitude_mm: float = Field(0.0, ge=0)
    mid_extension_mm: float = Field(0.0, ge=0)
    phases_deg: tuple[float, ...] = (0.0,) * N_SPINES
    active: Optional[tuple[int, ...]] = None
    waveform: Literal["sine", "triangle"] = "sine"

    @field_validator("phases_deg")
    @classmethod
    def _fourteen(cls, v):
        if len(v) != N_SPINES:
            raise ValueError(f"expected {N_SPINES} values")
        return v


class ModeConfig(_Strict):
    kind: Literal["roll", "walk", "hybrid"]
    drive_torque_nm: Union[float, Literal["max"]] = 0.0
    heading_deg: float = 0.0
    pattern: Union[Literal["tripod_lift", "quad_wave", "snow_hybrid"], PatternConfig, None] = None


class OptimizeConfig(_Strict):
    budget: int = Field(50, ge=1)
    horizon_s: float = Field(3.0, gt=0)
    workers: int = Field(1, ge=1)


class ProgramConfig(_Strict):
    kind: Literal["hold", "to_pose", "oscillate"] = "hold"
    target_position_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    target_orientation_wxyz: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    speed_m_s: float = Field(0.05, ge=0)
    angular_speed_rad_s: float = Field(0.0, ge=0)
    frequency_hz: float = Field(1.0, gt=0)
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)


class ParticleConfig(_Strict):
    id: int
    position_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation_wxyz: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    extensions_mm: tuple[float, ...] = (0.0,) * N_SPINES
    program: ProgramConfig = ProgramConfig()
    magnets_enabled: bool = True


class SwarmConfig(_Strict):
    latch_radius_mm: float = Field(5.0, gt=0)
    particles: tuple[ParticleConfig, ...] = ()
    random_count: int = Field(0, ge=0)
    extent_m: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _some(self):
        if not self.particles and not self.random_count:
            raise ValueError("give 'particles' or a positive 'random_count'")
        return self


class OutputConfig(_Strict):
    trajectory: str = "trajectory.csv"
    summary: str = "summary.json"
    record_every: int = Field(10, ge=1)


class ScenarioConfig(_Strict):
    kind: Literal["locomotion", "swarm", "optimize"]
    duration_s: float = Field(gt=0)
    dt_ms: float = Field(1.0, gt=0, le=2)
    seed: int = 0
    morphology: MorphologyConfig = MorphologyConfig()
    terrain: TerrainConfig = TerrainConfig(preset="flat")
    initial: InitialConfig = InitialConfig()
    mode: Optional[ModeConfig] = None
    optimize: Optional[OptimizeConfig] = None
    swarm: Optional[SwarmConfig] = None
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _sections(self):
        if self.kind in ("locomotion", "optimize") and self.mode is None:
            raise ValueError(f"'{self.kind}' scenarios need a 'mode' section")
        if self.kind == "optimize" and self.mode.kind == "roll":
            raise ValueError("optimize needs a walk or hybrid mode")
        if self.kind == "swarm" and self.swarm is None:
            raise ValueError("'swarm' scenarios need a 'swarm' section")
        return self


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated scenario with every referenced resource resolved."""
    config: ScenarioConfig
    base_dir: Path
    morphology: RobotMorphology
    terrain: terrain_mod.Terrain | None

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def dt(self) -> float:
        return ms_to_s(self.config.dt_ms)

    @property
    def duration(self) -> float:
        return self.config.duration_s

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def with_overrides(self, seed: int | None = None, dt_ms: float | None = None) -> "Scenario":
        data = self.config.model_dump()
        if seed is not None:
            data["seed"] = seed
        if dt_ms is not None:
            data["dt_ms"] = dt_ms
        return build_scenario(data, self.base_dir)


def _line_of(text: str, loc) -> int | None:
    keys = [k for k in loc if isinstance(k, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _format_errors(err: ValidationError, text: str | None) -> str:
    parts = []
    for e in err.errors():
        field = ".".join(str(x) for x in e["loc"]) or "<root>"
        line = _line_of(text, e["loc"]) if text else None
        where = f"line {line}, " if line else ""
        parts.append(f"{where}field '{field}': {e['msg']}")
    return "; ".join(parts)


def _morphology(cfg: MorphologyConfig) -> RobotMorphology:
    ref = reference_morphology()
    return replace(
        ref,
        shell=replace(ref.shell, outer_diameter=cfg.outer_diameter_mm),
        spine=replace(ref.spine, base_height=cfg.base_height_mm, stroke=cfg.stroke_mm,
                      max_rate=cfg.max_rate_mm_s),
        mass_total=cfg.mass_total_kg, inner_mass_fraction=cfg.inner_mass_fraction,
        pendulum_arm=cfg.pendulum_arm_mm)


def _terrain(cfg: TerrainConfig, base_dir: Path) -> terrain_mod.Terrain:
    if cfg.preset is not None:
        ter = terrain_mod.preset(cfg.preset)
    elif cfg.kind == "flat":
        ter = terrain_mod.flat()
    elif cfg.kind == "slope":
        ter = terrain_mod.slope(cfg.slope_deg or 0.0)
    else:
        path = base_dir / cfg.heightfield_file
        if not path.is_file():
            raise ScenarioError(f"field 'terrain.heightfield_file': no such file {path}")
        ter = terrain_mod.Terrain(terrain_mod.TerrainKind.HEIGHTFIELD,
                                  heightfield=terrain_mod.load_heightfield(path), name=path.stem)
    if cfg.preset is not None and cfg.slope_deg is not None:
        raise ScenarioError("field 'terrain.slope_deg': not allowed together with a preset")
    if cfg.kind == "slope" and cfg.slope_deg is None:
        raise ScenarioError("field 'terrain.slope_deg': required for slope terrain")
    overrides = {k: getattr(cfg, k) for k in
                 ("friction", "contact_stiffness", "contact_damping", "tangential_damping")
                 if getattr(cfg, k) is not None}
    if cfg.shell_shield_deg is not None:
        overrides["shell_shield_cone"] = deg_to_rad(cfg.shell_shield_deg)
    return replace(ter, **overrides) if overrides else ter


def build_scenario(data: dict, base_dir: Path | str = ".", text: str | None = None) -> Scenario:
    try:
        cfg = ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(_format_errors(err, text)) from None
    base_dir = Path(base_dir)
    try:
        morph = _morphology(cfg.morphology)
        ter = None if cfg.kind == "swarm" else _terrain(cfg.terrain, base_dir)
    except ScenarioError:
        raise
    except ValueError as err:
        raise ScenarioError(str(err)) from None
    scenario = Scenario(cfg, base_dir, morph, ter)
    if cfg.kind == "swarm":
        swarm_world(scenario)
    if cfg.mode is not None and cfg.kind != "swarm":
        try:
            locomotion_mode(scenario)
            initial_state(scenario)
        except ValueError as err:
            raise ScenarioError(str(err)) from None
    return scenario


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; errors carry line and field diagnostics."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioError(f"cannot read {path}: {err}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")
    try:
        return build_scenario(data, path.parent, text)
    except ScenarioError as err:
        raise ScenarioError(f"{path}: {err}") from None


# --- translation -----------------------------------------------------------------------

def gait_pattern(cfg) -> GaitPattern | None:
    if cfg is None:
        return None
    if isinstance(cfg, str):
        return NAMED_PATTERNS[cfg]
    active = frozenset(range(N_SPINES)) if cfg.active is None else frozenset(cfg.active)
    phases = tuple(deg_to_rad(p) % (2.0 * math.pi) for p in cfg.phases_deg)
    return GaitPattern(cfg.period_s, cfg.amplitude_mm, cfg.mid_extension_mm, phases, active,
                       Waveform(cfg.waveform))


def locomotion_mode(scenario: Scenario) -> LocomotionMode:
    cfg = scenario.config.mode
    torque = cfg.drive_torque_nm
    if torque == "max":
        torque = scenario.morphology.drive_torque_limit
    pattern = gait_pattern(cfg.pattern)
    if pattern is not None:
        pattern.validate(scenario.morphology.stroke)
    return LocomotionMode(Mode(cfg.kind), float(torque), deg_to_rad(cfg.heading_deg), pattern)


def initial_state(scenario: Scenario) -> BodyState:
    cfg = scenario.config.initial
    m = scenario.morphology
    pos = np.array(cfg.position_mm) * MM
    if cfg.stance is not None:
        return stance_state(m, scenario.terrain, NAMED_STANCES[cfg.stance], xy=pos[:2],
                            yaw=deg_to_rad(cfg.yaw_deg), tilt=deg_to_rad(cfg.tilt_deg))
    q = rotation.multiply(rotation.from_axis_angle((0.0, 0.0, 1.0), deg_to_rad(cfg.yaw_deg)),
                          rotation.normalize(cfg.orientation_wxyz))
    ext = cfg.extensions_mm
    if ext is not None and any(not 0.0 <= e <= m.stroke for e in ext):
        raise ScenarioError(f"field 'initial.extensions_mm': values must lie in [0, {m.stroke}]")
    state = make_body_state(m, pos, q, ext)
    return static_sink(state, m, scenario.terrain) if cfg.settle else state


def _program(cfg: ProgramConfig):
    if cfg.kind == "hold":
        return swarm.Hold()
    if cfg.kind == "to_pose":
        return swarm.ToPose(np.array(cfg.target_position_mm) * MM,
                            rotation.normalize(cfg.target_orientation_wxyz),
                            cfg.speed_m_s, cfg.angular_speed_rad_s)
    return swarm.Oscillate(cfg.frequency_hz, np.array(cfg.axis), cfg.speed_m_s)


def swarm_world(scenario: Scenario) -> swarm.SwarmWorld:
    cfg = scenario.config.swarm
    radius = cfg.latch_radius_mm * MM
    m = scenario.morphology
    if cfg.random_count:
        base = swarm.random_world(cfg.random_count, scenario.seed, cfg.extent_m, radius, m)
        extra = list(base.particles)
    else:
        extra = []
    offset = len(extra)
    for p in cfg.particles:
        extra.append(swarm.SwarmParticle(
            p.id + offset, np.array(p.position_mm) * MM, rotation.normalize(p.orientation_wxyz),
            tuple(p.extensions_mm), _program(p.program), (p.magnets_enabled,) * N_SPINES))
    try:
        return swarm.latch(swarm.SwarmWorld(tuple(extra), latch_radius=radius, morphology=m))
    except ValueError as err:
        raise ScenarioError(f"field 'swarm': {err}") from None
