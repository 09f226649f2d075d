"""Spine gait patterns, static stance stability, and the locomotion mode controller.

A gait is a family of phase-offset periodic waves, one per active spine:

    e_i(t) = mid + amplitude * wave(2*pi*t/period + phase_i), clamped to [0, stroke]

The controller tracks the wave with a saturated proportional rate law.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import geometry, rotation
from .dynamics import (BodyState, ContactQueryError, ContactSource, DriveCommand, detect_contacts,
                       make_body_state, static_sink)
from .morphology import N_SPINES, RobotMorphology
from .terrain import Terrain
from .units import m_to_mm

TWO_PI = 2.0 * math.pi
TRACKING_GAIN = 20.0  # 1/s
ROLL_RETRACT_TOLERANCE = 2.0  # mm
DEFAULT_MARGIN = 10.0  # mm


class GaitError(ValueError):
    pass


class ModeError(RuntimeError):
    pass


class Waveform(enum.Enum):
    SINE = "sine"
    TRIANGLE = "triangle"


def triangle_wave(x: float) -> float:
    """Unit triangle wave in phase with sin: 0 at 0, +1 at pi/2, -1 at 3*pi/2."""
    u = (x / TWO_PI - 0.25) % 1.0
    return 4.0 * abs(u - 0.5) - 1.0


@dataclass(frozen=True)
class GaitPattern:
    period: float = 1.0  # s
    amplitude: float = 0.0  # mm
    mid_extension: float = 0.0  # mm
    phases: tuple = (0.0,) * N_SPINES  # rad
    active_set: frozenset = frozenset(range(N_SPINES))
    waveform: Waveform = Waveform.SINE

    def validate(self, stroke: float = 128.0) -> "GaitPattern":
        if not self.period > 0:
            raise GaitError("period must be positive")
        if self.amplitude < 0:
            raise GaitError("amplitude must be non-negative")
        if self.mid_extension - self.amplitude < 0 or self.mid_extension + self.amplitude > stroke:
            raise GaitError("mid_extension +/- amplitude must stay within [0, stroke]")
        if len(self.phases) != N_SPINES:
            raise GaitError(f"expected {N_SPINES} phases")
        if any(not 0.0 <= p < TWO_PI for p in self.phases):
            raise GaitError("phases must lie in [0, 2*pi)")
        if any(not 0 <= i < N_SPINES for i in self.active_set):
            raise GaitError("active_set holds an invalid spine index")
        return self


def spine_extension_at(pattern: GaitPattern, index: int, t: float, stroke: float = 128.0) -> float:
    if not 0 <= index < N_SPINES:
        raise GaitError(f"spine index {index} out of range")
    if index not in pattern.active_set:
        return 0.0
    x = TWO_PI * t / pattern.period + pattern.phases[index]
    wave = math.sin(x) if pattern.waveform is Waveform.SINE else triangle_wave(x)
    return min(stroke, max(0.0, pattern.mid_extension + pattern.amplitude * wave))


def pattern_targets(pattern: GaitPattern, t: float, stroke: float = 128.0) -> np.ndarray:
    return np.array([spine_extension_at(pattern, i, t, stroke) for i in range(N_SPINES)])


class Mode(enum.Enum):
    ROLL = "roll"
    WALK = "walk"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class LocomotionMode:
    mode: Mode
    drive_torque: float = 0.0  # N*m, Roll and Hybrid
    heading: float = 0.0  # rad
    pattern: GaitPattern | None = None  # Walk and Hybrid

    def __post_init__(self):
        if self.mode is not Mode.ROLL and self.pattern is None:
            raise GaitError(f"{self.mode.value} mode needs a gait pattern")


def mode_controller(mode: LocomotionMode, state: BodyState, t: float,
                    morphology: RobotMorphology, gain: float = TRACKING_GAIN):
    """Drive command and 14 spine rates (mm/s) for the requested locomotion mode."""
    ext = state.extensions
    max_rate = morphology.spine.max_rate
    if mode.mode is Mode.ROLL:
        if np.any(ext > ROLL_RETRACT_TOLERANCE):
            raise ModeError(
                f"roll needs retracted spines; spine {int(np.argmax(ext))} is at {ext.max():.2f} mm")
        targets = np.zeros(N_SPINES)
    else:
        targets = pattern_targets(mode.pattern, t, morphology.stroke)
    rates = np.clip(gain * (targets - ext), -max_rate, max_rate)
    torque = 0.0 if mode.mode is Mode.WALK else mode.drive_torque
    return DriveCommand(torque, mode.heading), rates


# --- static stance -----------------------------------------------------------------

@dataclass(frozen=True)
class Stance:
    support_indices: frozenset
    support_extension: float = 128.0  # mm

    def __post_init__(self):
        idx = frozenset(self.support_indices)
        object.__setattr__(self, "support_indices", idx)
        if len(idx) not in (3, 4, 5):
            raise GaitError("a stance stands on 3, 4 or 5 spines")
        if any(not 0 <= i < N_SPINES for i in idx):
            raise GaitError("stance holds an invalid spine index")


# Reference stances for the cube-14 layout (axes 0..5 = +x,-x,+y,-y,+z,-z; corners 6..13).
TRIPOD = Stance(frozenset({1, 3, 5}))
TALL_TRIPOD = Stance(frozenset({5, 8, 12}))
QUAD = Stance(frozenset({6, 8, 10, 12}))
PENTA = Stance(frozenset({5, 6, 8, 10, 12}))


def stance_orientation(morphology: RobotMorphology, stance: Stance, yaw: float = 0.0) -> np.ndarray:
    """Orientation pointing the mean support direction straight down."""
    mean = morphology.directions[sorted(stance.support_indices)].sum(axis=0)
    q = rotation.align(mean, (0.0, 0.0, -1.0))
    return rotation.multiply(rotation.from_axis_angle((0.0, 0.0, 1.0), yaw), q)


def stance_extensions(morphology: RobotMorphology, stance: Stance, orientation) -> np.ndarray:
    """Extensions (mm) putting every support tip at the same depth below the centre.

    The shallowest support spine gets support_extension; the rest are shortened to match.
    """
    dirs = morphology.directions @ rotation.to_matrix(orientation).T
    idx = sorted(stance.support_indices)
    down = -dirs[idx, 2]
    if np.any(down <= 0.0):
        raise GaitError("a support spine points upward in this orientation")
    radius = morphology.outer_radius
    depth = float(np.min((radius + stance.support_extension) * down))
    ext = np.zeros(N_SPINES)
    ext[idx] = depth / down - radius
    if np.any(ext[idx] < 0.0) or np.any(ext[idx] > morphology.stroke):
        raise GaitError("stance cannot be levelled within the spine stroke")
    return ext


def stance_state(morphology: RobotMorphology, terrain: Terrain, stance: Stance,
                 xy=(0.0, 0.0), yaw: float = 0.0, tilt: float = 0.0,
                 tilt_axis=(1.0, 0.0, 0.0)) -> BodyState:
    """Body standing on the stance at static equilibrium; ``tilt`` (rad) rotates it
    about a horizontal axis before it is lowered onto the ground."""
    q = stance_orientation(morphology, stance, yaw)
    ext = stance_extensions(morphology, stance, q)
    if tilt:
        q = rotation.multiply(rotation.from_axis_angle(tilt_axis, tilt), q)
    state = make_body_state(morphology, (xy[0], xy[1], 0.0), q, ext)
    return static_sink(state, morphology, terrain)


def support_polygon(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                    contacts=None) -> np.ndarray:
    """CCW hull (mm, horizontal plane) of the spine tips touching the ground."""
    if contacts is None:
        contacts = detect_contacts(state, morphology, terrain)
    tips = [c.location[:2] for c in contacts if c.source is ContactSource.SPINE_TIP]
    if not tips:
        raise ContactQueryError("no spine tip touches the ground")
    return geometry.convex_hull(m_to_mm(np.array(tips)))


def stability_margin(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                     contacts=None) -> float:
    """Signed distance (mm) of the centre-of-mass projection inside the support polygon."""
    poly = support_polygon(state, morphology, terrain, contacts)
    if len(poly) < 3 or abs(geometry.polygon_area(poly)) < 1e-9:
        return -math.inf
    return geometry.inside_margin(poly, m_to_mm(state.position[:2]))


def is_statically_stable(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                         margin: float = DEFAULT_MARGIN, contacts=None) -> bool:
    try:
        return stability_margin(state, morphology, terrain, contacts) >= margin
    except ContactQueryError:
        return False


# --- named patterns --------------------------------------------------------------------

def _phase_table(values: dict) -> tuple:
    return tuple(values.get(i, 0.0) for i in range(N_SPINES))


# Tripod stance spines lift one after another, a third of a period apart.
TRIPOD_LIFT = GaitPattern(1.0, 48.0, 80.0,
                          _phase_table({1: 0.0, 3: TWO_PI / 3.0, 5: 2.0 * TWO_PI / 3.0}),
                          frozenset({1, 3, 5}))
# Quad stance corners pushed in a travelling wave.
QUAD_WAVE = GaitPattern(1.0, 48.0, 80.0,
                        _phase_table({6: 0.0, 8: 0.25 * TWO_PI, 10: 0.5 * TWO_PI, 12: 0.75 * TWO_PI}),
                        frozenset({6, 8, 10, 12}))
# Found by optimize_gait on the snow preset (heading 0, full drive torque, 10 s);
# phases are multiples of pi/4.
SNOW_HYBRID = GaitPattern(0.75, 64.0, 64.0, tuple(k * math.pi / 4.0 for k in
                                                  (7, 6, 7, 5, 5, 1, 2, 4, 2, 4, 7, 6, 1, 6)))

NAMED_PATTERNS = {"tripod_lift": TRIPOD_LIFT, "quad_wave": QUAD_WAVE, "snow_hybrid": SNOW_HYBRID}
NAMED_STANCES = {"tripod": TRIPOD, "tall_tripod": TALL_TRIPOD, "quad": QUAD, "penta": PENTA}
