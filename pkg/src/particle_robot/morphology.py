"""Geometric constants of the particle robot.

Lengths are millimetres and masses kilograms. The spine layout (six cube
faces plus eight cube corners) is an assumption; only the count of 14 is
known for the physical robot.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import rotation
from .units import GRAVITY, MM

N_SPINES = 14


class MorphologyError(ValueError):
    pass


@dataclass(frozen=True)
class ShellSpec:
    outer_diameter: float = 260.0
    shell_part_count: int = 24
    inner_sphere_diameter: float = 160.0

    def __post_init__(self):
        if self.outer_diameter <= 0:
            raise MorphologyError("outer_diameter must be positive")
        if not 0 < self.inner_sphere_diameter < self.outer_diameter:
            raise MorphologyError("inner_sphere_diameter must lie in (0, outer_diameter)")
        if self.shell_part_count < 1:
            raise MorphologyError("shell_part_count must be positive")

    @property
    def outer_radius(self) -> float:
        return 0.5 * self.outer_diameter


@dataclass(frozen=True)
class SpineSpec:
    base_height: float = 50.0
    stroke: float = 128.0
    level_count: int = 4
    max_rate: float = 100.0
    link_pitch: float = 8.0

    def __post_init__(self):
        if self.base_height <= 0:
            raise MorphologyError("base_height must be positive")
        if self.stroke < 0:
            raise MorphologyError("stroke must be non-negative")
        if self.max_rate <= 0:
            raise MorphologyError("max_rate must be positive")
        if self.link_pitch <= 0:
            raise MorphologyError("link_pitch must be positive")
        if self.level_count < 1:
            raise MorphologyError("level_count must be positive")

    @property
    def extended_length(self) -> float:
        return self.base_height + self.stroke

    @property
    def extension_ratio(self) -> float:
        return self.extended_length / self.base_height


def spine_directions_cube14() -> tuple[tuple[float, float, float], ...]:
    """Unit spine directions: +x, -x, +y, -y, +z, -z, then the eight
    (±1, ±1, ±1)/sqrt(3) corners in lexicographic sign order (- before +)."""
    axes = []
    for k in range(3):
        for sign in (1.0, -1.0):
            v = [0.0, 0.0, 0.0]
            v[k] = sign
            axes.append(tuple(v))
    s = 1.0 / math.sqrt(3.0)
    corners = [tuple(c * s for c in signs)
               for signs in itertools.product((-1.0, 1.0), repeat=3)]
    return tuple(axes + corners)


@dataclass(frozen=True)
class RobotMorphology:
    shell: ShellSpec = field(default_factory=ShellSpec)
    spine: SpineSpec = field(default_factory=SpineSpec)
    spine_directions: tuple = field(default_factory=spine_directions_cube14)
    mass_total: float = 2.0
    inner_mass_fraction: float = 0.5
    pendulum_arm: float = 80.0
    # hollow-shell correction applied to the solid-sphere inertia
    inertia_factor: float = 1.2

    def __post_init__(self):
        dirs = np.asarray(self.spine_directions, dtype=float)
        if dirs.shape != (N_SPINES, 3):
            raise MorphologyError(f"expected {N_SPINES} spine directions, got shape {dirs.shape}")
        if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-9):
            raise MorphologyError("spine directions must be unit vectors")
        for d in dirs:
            if not np.any(np.all(np.abs(dirs + d) < 1e-9, axis=1)):
                raise MorphologyError("spine direction set must be closed under inversion")
        if self.mass_total <= 0:
            raise MorphologyError("mass_total must be positive")
        if not 0 < self.inner_mass_fraction < 1:
            raise MorphologyError("inner_mass_fraction must lie in (0, 1)")
        if self.pendulum_arm < 0:
            raise MorphologyError("pendulum_arm must be non-negative")
        if self.inertia_factor <= 0:
            raise MorphologyError("inertia_factor must be positive")

    @cached_property
    def directions(self) -> np.ndarray:
        """Spine directions as a read-only (14, 3) array."""
        arr = np.array(self.spine_directions, dtype=float)
        arr.flags.writeable = False
        return arr

    @property
    def outer_radius(self) -> float:
        return self.shell.outer_radius

    @property
    def stroke(self) -> float:
        return self.spine.stroke

    @property
    def inner_mass(self) -> float:
        return self.mass_total * self.inner_mass_fraction

    @property
    def drive_torque_limit(self) -> float:
        """Largest internal torque (N*m) the inner robot can exert: m_inner * g * arm."""
        return self.inner_mass * GRAVITY * self.pendulum_arm * MM

    @property
    def inertia(self) -> float:
        """Scalar moment of inertia (kg*m^2) about any axis through the centre."""
        r = self.outer_radius * MM
        return self.inertia_factor * 0.4 * self.mass_total * r * r


def reference_morphology() -> RobotMorphology:
    return RobotMorphology()


class Pose(NamedTuple):
    position: np.ndarray  # mm
    orientation: np.ndarray  # unit quaternion (w, x, y, z)


def spine_tip_position(body_pose: Pose, morphology: RobotMorphology, index: int,
                       extension: float) -> np.ndarray:
    """World-frame tip of spine ``index`` in mm. Spine bases sit flush with the shell."""
    if not 0 <= index < N_SPINES:
        raise MorphologyError(f"spine index {index} out of range")
    if not 0.0 <= extension <= morphology.stroke:
        raise MorphologyError(f"extension {extension} outside [0, {morphology.stroke}]")
    d = rotation.rotate(body_pose.orientation, morphology.directions[index])
    return np.asarray(body_pose.position, dtype=float) + d * (morphology.outer_radius + extension)


@dataclass(frozen=True)
class ActuatorCatalogEntry:
    name: str
    chain_count: int
    speed: float  # mm/s
    locked_axes: int


def actuator_catalog() -> list[ActuatorCatalogEntry]:
    """Highly extendable linear actuators compared when choosing the spine drive."""
    return [
        ActuatorCatalogEntry("Rigid chain", 1, 1000.0, 2),
        ActuatorCatalogEntry("Rigid zip", 2, 1000.0, 3),
        ActuatorCatalogEntry("Spiralift", 1, 10.0, 3),
        ActuatorCatalogEntry("Articulated rack", 1, 100.0, 3),
    ]
