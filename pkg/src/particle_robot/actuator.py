"""Telescopic spine: rate-limited extension plus the articulated-rack lock FSM.

The rack is a chain of links, link 0 outermost. A link whose span has passed
outward through the holder guide has its lock arm seated in the rack slot and
is rigid; pulling it back in rotates the unlock arm and releases it. The
transition is treated as instantaneous at the holder boundary, so the rigid
links are always the prefix 0..k-1 with k = ceil(extension / link_pitch).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

from .morphology import SpineSpec


class LinkMode(enum.Enum):
    FOLDED = "folded"
    RIGID = "rigid"


@dataclass(frozen=True)
class RackLinkState:
    index: int
    mode: LinkMode
    arm_lock_engaged: bool


@dataclass(frozen=True)
class ActuatorState:
    spec: SpineSpec
    extension: float = 0.0  # mm
    commanded_rate: float = 0.0  # mm/s, positive = pinion clockwise = extend
    links: tuple = ()

    @property
    def link_pitch(self) -> float:
        return self.spec.link_pitch

    @property
    def rigid_count(self) -> int:
        return sum(1 for link in self.links if link.mode is LinkMode.RIGID)


def link_count(spec: SpineSpec) -> int:
    return math.ceil(spec.stroke / spec.link_pitch)


def rigid_links_for(extension: float, pitch: float, n_links: int) -> int:
    return min(n_links, math.ceil(extension / pitch))


@lru_cache(maxsize=None)
def _links(n_links: int, n_rigid: int) -> tuple:
    return tuple(
        RackLinkState(i, LinkMode.RIGID, True) if i < n_rigid
        else RackLinkState(i, LinkMode.FOLDED, False)
        for i in range(n_links)
    )


def make_actuator(spec: SpineSpec) -> ActuatorState:
    return ActuatorState(spec=spec, extension=0.0, commanded_rate=0.0,
                         links=_links(link_count(spec), 0))


def command_rate(state: ActuatorState, rate: float) -> ActuatorState:
    limit = state.spec.max_rate
    rate = min(limit, max(-limit, float(rate)))
    return ActuatorState(state.spec, state.extension, rate, state.links)


def step_actuator(state: ActuatorState, dt: float) -> ActuatorState:
    """Advance the spine by dt seconds at its commanded rate and re-seat the link locks."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    spec = state.spec
    ext = state.extension + state.commanded_rate * dt
    ext = min(spec.stroke, max(0.0, ext))
    n = len(state.links)
    k = rigid_links_for(ext, spec.link_pitch, n)
    return ActuatorState(spec, ext, state.commanded_rate, _links(n, k))


def lock_state_audit(state: ActuatorState) -> bool:
    """True iff every link's arm matches its mode and the rigid links form the expected prefix."""
    spec = state.spec
    if not 0.0 <= state.extension <= spec.stroke:
        return False
    k = rigid_links_for(state.extension, spec.link_pitch, len(state.links))
    for i, link in enumerate(state.links):
        if link.index != i:
            return False
        if (link.mode is LinkMode.RIGID) != link.arm_lock_engaged:
            return False
        if (link.mode is LinkMode.RIGID) != (i < k):
            return False
    return True
