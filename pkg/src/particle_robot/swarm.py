"""Kinematic swarm of particle robots in gravity-free space.

There are no forces or inertia: each step moves particles by their commanded
velocity. Particles joined by latches form an assembly that moves as one rigid
body, driven by the mean of its members' commands. Spine tips of different
assemblies latch when both magnets are on and the tips are closer than the
latch radius. Positions are metres; extensions are mm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import rotation
from .morphology import N_SPINES, RobotMorphology, reference_morphology
from .units import MM

DEFAULT_LATCH_RADIUS = 0.005  # m


class SwarmQueryError(KeyError):
    pass


@dataclass(frozen=True)
class Hold:
    pass


@dataclass(frozen=True, eq=False)
class ToPose:
    target_position: np.ndarray  # m
    target_orientation: np.ndarray = field(default_factory=lambda: rotation.IDENTITY.copy())
    speed: float = 0.05  # m/s
    angular_speed: float = 0.0  # rad/s

    def __post_init__(self):
        if self.speed < 0 or self.angular_speed < 0:
            raise ValueError("speeds must be non-negative")


@dataclass(frozen=True, eq=False)
class Oscillate:
    frequency: float  # Hz
    axis: np.ndarray
    speed: float  # m/s, peak

    def __post_init__(self):
        if self.frequency <= 0 or self.speed < 0:
            raise ValueError("oscillation needs a positive frequency and non-negative speed")
        object.__setattr__(self, "axis", np.asarray(self.axis, float) / np.linalg.norm(self.axis))


@dataclass(frozen=True, eq=False)
class SwarmParticle:
    id: int
    position: np.ndarray
    orientation: np.ndarray
    extensions: tuple = (0.0,) * N_SPINES  # mm
    motion_program: object = field(default_factory=Hold)
    magnets_enabled: tuple = (True,) * N_SPINES
    program_start: float = 0.0  # s, world time the program began

    def commanded_speed(self) -> float:
        prog = self.motion_program
        return 0.0 if isinstance(prog, Hold) else prog.speed


@dataclass(frozen=True, eq=False)
class LatchEdge:
    a: tuple  # (particle id, spine index), the smaller endpoint
    b: tuple
    rel_translation: np.ndarray  # tip b in tip a's frame, at latch time
    rel_rotation: np.ndarray  # q_a^-1 * q_b at latch time

    @property
    def endpoints(self):
        return (self.a, self.b)


@dataclass(frozen=True, eq=False)
class SwarmWorld:
    particles: tuple  # sorted by id
    edges: tuple = ()
    time: float = 0.0
    latch_radius: float = DEFAULT_LATCH_RADIUS
    morphology: RobotMorphology = field(default_factory=reference_morphology)

    def __post_init__(self):
        ps = tuple(sorted(self.particles, key=lambda p: p.id))
        ids = [p.id for p in ps]
        if len(set(ids)) != len(ids):
            raise ValueError("particle ids must be unique")
        stroke = self.morphology.stroke
        for p in ps:
            if len(p.extensions) != N_SPINES or any(not 0.0 <= e <= stroke for e in p.extensions):
                raise ValueError(f"particle {p.id}: extensions must be {N_SPINES} values in [0, {stroke}]")
        object.__setattr__(self, "particles", ps)
        if self.latch_radius <= 0:
            raise ValueError("latch_radius must be positive")

    def particle(self, pid: int) -> SwarmParticle:
        for p in self.particles:
            if p.id == pid:
                return p
        raise SwarmQueryError(pid)

    @property
    def ids(self):
        return [p.id for p in self.particles]


def tip_position(p: SwarmParticle, index: int, morphology: RobotMorphology) -> np.ndarray:
    d = rotation.rotate(p.orientation, morphology.directions[index])
    return p.position + d * ((morphology.outer_radius + p.extensions[index]) * MM)


def _all_tips(p: SwarmParticle, morphology: RobotMorphology) -> np.ndarray:
    dirs = morphology.directions @ rotation.to_matrix(p.orientation).T
    reach = (morphology.outer_radius + np.asarray(p.extensions)) * MM
    return p.position + dirs * reach[:, None]


def _relative_pose(world: SwarmWorld, a, b):
    pa = world.particle(a[0])
    pb = world.particle(b[0])
    ta = tip_position(pa, a[1], world.morphology)
    tb = tip_position(pb, b[1], world.morphology)
    trans = rotation.to_matrix(pa.orientation).T @ (tb - ta)
    rot = rotation.multiply(rotation.conjugate(pa.orientation), pb.orientation)
    return trans, rot


def relative_pose_drift(world: SwarmWorld, edge: LatchEdge):
    """(distance m, angle rad) between the tips' current relative pose and the latch-time one."""
    trans, rot = _relative_pose(world, edge.a, edge.b)
    return (float(np.linalg.norm(trans - edge.rel_translation)),
            rotation.angle_between(edge.rel_rotation, rot))


# --- assemblies ----------------------------------------------------------------------

def _components(ids, edges) -> dict:
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in edges:
        ra, rb = find(e.a[0]), find(e.b[0])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {i: find(i) for i in ids}


def assembly_of(world: SwarmWorld, pid: int) -> set:
    """Particle ids connected to ``pid`` through latches."""
    if pid not in world.ids:
        raise SwarmQueryError(pid)
    comp = _components(world.ids, world.edges)
    root = comp[pid]
    return {i for i, r in comp.items() if r == root}


def assemblies(world: SwarmWorld) -> list:
    """All assemblies as sorted id lists, ordered by their smallest id."""
    comp = _components(world.ids, world.edges)
    groups = {}
    for i in world.ids:
        groups.setdefault(comp[i], []).append(i)
    return [groups[r] for r in sorted(groups)]


# --- latching ------------------------------------------------------------------------

def detect_latches(world: SwarmWorld, latch_radius: float | None = None) -> list:
    """New latch edges: free, magnet-enabled tip pairs from different assemblies closer
    than the radius, matched greedily by ascending distance (ties by endpoint order).

    Assembly membership is taken from the edges present before this call.
    """
    radius = world.latch_radius if latch_radius is None else latch_radius
    if radius <= 0:
        raise ValueError("latch_radius must be positive")
    used = {ep for e in world.edges for ep in e.endpoints}
    comp = _components(world.ids, world.edges)
    keys, points = [], []
    for p in world.particles:
        tips = _all_tips(p, world.morphology)
        for i in range(N_SPINES):
            if p.magnets_enabled[i] and (p.id, i) not in used:
                keys.append((p.id, i))
                points.append(tips[i])
    if len(points) < 2:
        return []
    pts = np.array(points)
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    cands = []
    for i, j in pairs:
        ka, kb = keys[i], keys[j]
        if comp[ka[0]] == comp[kb[0]]:
            continue
        d = float(np.linalg.norm(pts[i] - pts[j]))
        if d < radius:
            if kb < ka:
                ka, kb = kb, ka
            cands.append((d, ka, kb))
    cands.sort()
    taken = set()
    new = []
    for d, ka, kb in cands:
        if ka in taken or kb in taken:
            continue
        taken.update((ka, kb))
        trans, rot = _relative_pose(world, ka, kb)
        new.append(LatchEdge(ka, kb, trans, rot))
    return new


def latch(world: SwarmWorld, latch_radius: float | None = None) -> SwarmWorld:
    new = detect_latches(world, latch_radius)
    return replace(world, edges=world.edges + tuple(new)) if new else world


def set_magnet(world: SwarmWorld, pid: int, index: int, enabled: bool) -> SwarmWorld:
    """Switch one spine magnet; switching it off releases any latch at that tip."""
    p = world.particle(pid)
    mags = list(p.magnets_enabled)
    mags[index] = bool(enabled)
    particles = tuple(replace(q, magnets_enabled=tuple(mags)) if q.id == pid else q
                      for q in world.particles)
    edges = world.edges
    if not enabled:
        edges = tuple(e for e in edges if (pid, index) not in e.endpoints)
    return replace(world, particles=particles, edges=edges)


def set_program(world: SwarmWorld, pid: int, program) -> SwarmWorld:
    world.particle(pid)
    particles = tuple(replace(q, motion_program=program, program_start=world.time) if q.id == pid else q
                      for q in world.particles)
    return replace(world, particles=particles)


# --- motion --------------------------------------------------------------------------

def _command(p: SwarmParticle, t: float, dt: float):
    """Displacement and rotation vector the program asks for over [t, t + dt]."""
    prog = p.motion_program
    zero = np.zeros(3)
    if isinstance(prog, Hold):
        return zero, zero
    if isinstance(prog, ToPose):
        delta = np.asarray(prog.target_position, float) - p.position
        dist = float(np.linalg.norm(delta))
        reach = prog.speed * dt
        move = delta if dist <= reach else delta * (reach / dist)
        axis, angle = rotation.to_axis_angle(
            rotation.multiply(prog.target_orientation, rotation.conjugate(p.orientation)))
        turn = min(angle, prog.angular_speed * dt)
        return move, axis * turn
    if isinstance(prog, Oscillate):
        w = 2.0 * math.pi * prog.frequency
        tau = t - p.program_start
        amp = prog.speed / w
        return prog.axis * (amp * (math.sin(w * (tau + dt)) - math.sin(w * tau))), zero
    raise TypeError(f"unknown motion program {prog!r}")


def step_swarm(world: SwarmWorld, dt: float) -> SwarmWorld:
    """Move every assembly rigidly by its members' mean command, then form new latches."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    by_id = {p.id: p for p in world.particles}
    moved = {}
    for group in assemblies(world):
        members = [by_id[i] for i in group]
        cmds = [_command(p, world.time, dt) for p in members]
        move = np.mean([c[0] for c in cmds], axis=0)
        rotvec = np.mean([c[1] for c in cmds], axis=0)
        angle = float(np.linalg.norm(rotvec))
        if len(members) == 1:
            p = members[0]
            q = p.orientation if angle == 0.0 else rotation.normalize(
                rotation.multiply(rotation.from_axis_angle(rotvec, angle), p.orientation))
            moved[p.id] = replace(p, position=p.position + move, orientation=q)
            continue
        centre = np.mean([p.position for p in members], axis=0)
        turn = rotation.from_axis_angle(rotvec, angle) if angle > 0.0 else rotation.IDENTITY
        rot = rotation.to_matrix(turn)
        for p in members:
            q = p.orientation if angle == 0.0 else rotation.normalize(rotation.multiply(turn, p.orientation))
            moved[p.id] = replace(p, position=centre + rot @ (p.position - centre) + move, orientation=q)
    stepped = replace(world, particles=tuple(moved[i] for i in sorted(moved)), time=world.time + dt)
    return latch(stepped)


def random_world(count: int, seed: int, extent: float = 1.0, latch_radius: float = DEFAULT_LATCH_RADIUS,
                 morphology: RobotMorphology | None = None, programs: bool = True) -> SwarmWorld:
    """Particles with seeded random poses, extensions, and (optionally) motion programs."""
    m = morphology or reference_morphology()
    rng = np.random.default_rng(seed)
    particles = []
    for pid in range(count):
        pos = rng.uniform(-0.5 * extent, 0.5 * extent, size=3)
        q = rotation.normalize(rng.normal(size=4))
        ext = tuple(float(e) for e in rng.uniform(0.0, m.stroke, size=N_SPINES))
        prog = Hold()
        if programs:
            kind = int(rng.integers(3))
            if kind == 1:
                prog = ToPose(rng.uniform(-0.5 * extent, 0.5 * extent, size=3),
                              rotation.normalize(rng.normal(size=4)),
                              float(rng.uniform(0.01, 0.1)), float(rng.uniform(0.0, 1.0)))
            elif kind == 2:
                prog = Oscillate(float(rng.uniform(0.2, 2.0)), rng.normal(size=3),
                                 float(rng.uniform(0.01, 0.1)))
        particles.append(SwarmParticle(pid, pos, q, ext, prog))
    return SwarmWorld(tuple(particles), latch_radius=latch_radius, morphology=m)
