import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from particle_robot import rotation, swarm
from particle_robot.morphology import N_SPINES, reference_morphology
from particle_robot.swarm import (LatchEdge, Oscillate, SwarmParticle, SwarmQueryError, SwarmWorld,
                                  ToPose)

from oracles import bfs_component, greedy_latch_oracle

M = reference_morphology()
X_AXIS_SPINE, NEG_X_SPINE = 0, 1


def facing_pair(gap_mm=4.0, ext=20.0):
    """Particle 1's -x spine tip sits gap_mm beyond particle 0's +x spine tip."""
    e0 = [0.0] * N_SPINES
    e1 = [0.0] * N_SPINES
    e0[X_AXIS_SPINE] = ext
    e1[NEG_X_SPINE] = ext
    x1 = 2 * (130.0 + ext) + gap_mm
    p0 = SwarmParticle(0, np.zeros(3), rotation.IDENTITY.copy(), tuple(e0))
    p1 = SwarmParticle(1, np.array([x1 * 1e-3, 0, 0]), rotation.IDENTITY.copy(), tuple(e1))
    return SwarmWorld((p0, p1))


def dense_world(seed, count=50):
    w = swarm.random_world(count, seed, extent=0.9, latch_radius=0.02)
    rng = np.random.default_rng(seed)
    parts = tuple(replace(p, magnets_enabled=tuple(bool(b) for b in rng.random(N_SPINES) < 0.9))
                  for p in w.particles)
    return replace(w, particles=parts)


# --- latching ------------------------------------------------------------------------

def test_facing_spines_latch():
    w = facing_pair(4.0)
    edges = swarm.detect_latches(w, 0.005)
    assert len(edges) == 1
    assert edges[0].endpoints == ((0, X_AXIS_SPINE), (1, NEG_X_SPINE))
    w = swarm.latch(w, 0.005)
    assert swarm.relative_pose_drift(w, w.edges[0]) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_magnet_gate_and_radius():
    w = facing_pair(4.0)
    assert swarm.detect_latches(swarm.set_magnet(w, 1, NEG_X_SPINE, False), 0.005) == []
    assert swarm.detect_latches(facing_pair(6.0), 0.005) == []
    with pytest.raises(ValueError):
        swarm.detect_latches(w, 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_latch_matches_exhaustive_oracle(seed):
    w = dense_world(seed)
    first = swarm.detect_latches(w)
    assert [e.endpoints for e in first] == greedy_latch_oracle(w, 0.02)
    assert len(first) >= 3
    # with assemblies already present, a wider radius must still agree
    w = replace(w, edges=tuple(first))
    second = swarm.detect_latches(w, 0.05)
    assert [e.endpoints for e in second] == greedy_latch_oracle(w, 0.05)
    assert len(second) > len(first)


def test_three_close_particles():
    w = facing_pair(3.0)
    e2 = [0.0] * N_SPINES
    e2[2] = 20.0  # +y spine
    p2 = SwarmParticle(2, np.array([0.0, -0.302, 0.0]), rotation.from_axis_angle((0, 0, 1), math.pi),
                       tuple(e2))
    w = SwarmWorld(w.particles + (p2,))
    got = [e.endpoints for e in swarm.detect_latches(w, 0.05)]
    assert got == greedy_latch_oracle(w, 0.05)
    assert len(got) >= 1


# --- assemblies ----------------------------------------------------------------------

def edge(a, b, ia=0, ib=0):
    return LatchEdge((a, ia), (b, ib), np.zeros(3), rotation.IDENTITY.copy())


def test_assembly_examples():
    w = facing_pair()
    assert swarm.assembly_of(w, 0) == {0}
    parts = tuple(SwarmParticle(i, np.zeros(3), rotation.IDENTITY.copy()) for i in range(3))
    w = SwarmWorld(parts, (edge(0, 1), edge(1, 2, 1, 1)))
    assert all(swarm.assembly_of(w, i) == {0, 1, 2} for i in range(3))
    with pytest.raises(SwarmQueryError):
        swarm.assembly_of(w, 7)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.lists(st.tuples(st.integers(0, 49), st.integers(0, 49)), max_size=60))
def test_assembly_matches_bfs(n, raw):
    pairs = [(a, b) for a, b in raw if a < n and b < n and a != b]
    parts = tuple(SwarmParticle(i, np.zeros(3), rotation.IDENTITY.copy()) for i in range(n))
    w = SwarmWorld(parts, tuple(edge(a, b, k % 14, k % 14) for k, (a, b) in enumerate(pairs)))
    for i in range(n):
        assert swarm.assembly_of(w, i) == bfs_component(range(n), pairs, i)


# --- motion --------------------------------------------------------------------------

def test_hold_keeps_pose():
    w = facing_pair(50.0)
    w2 = swarm.step_swarm(w, 0.01)
    for a, b in zip(w.particles, w2.particles):
        assert np.array_equal(a.position, b.position) and np.array_equal(a.orientation, b.orientation)


def test_to_pose_arrives_exactly():
    target = np.array([0.3, -0.4, 0.0])  # 0.5 m away
    p = SwarmParticle(0, np.zeros(3), rotation.IDENTITY.copy(), motion_program=ToPose(target, speed=0.25))
    w = SwarmWorld((p,))
    for _ in range(2000):  # 0.5 m / 0.25 m/s = 2 s
        w = swarm.step_swarm(w, 1e-3)
    assert np.linalg.norm(w.particles[0].position - target) < 1e-9


def test_oscillate_returns_after_one_period():
    f = 1.6
    p = SwarmParticle(0, np.array([0.1, 0.2, 0.3]), rotation.IDENTITY.copy(),
                      motion_program=Oscillate(f, (1, 1, 0), 0.08))
    w = SwarmWorld((p,))
    steps = 2500  # dt = 1 / (f * steps)
    peak = 0.0
    for _ in range(steps):
        w = swarm.step_swarm(w, 1.0 / (f * steps))
        peak = max(peak, np.linalg.norm(w.particles[0].position - p.position))
    assert np.linalg.norm(w.particles[0].position - p.position) < 1e-6
    assert peak == pytest.approx(0.08 / (2 * math.pi * f), rel=1e-3)  # closed-form amplitude v / w


def test_invalid_programs_and_steps():
    with pytest.raises(ValueError):
        ToPose(np.zeros(3), speed=-1.0)
    with pytest.raises(ValueError):
        Oscillate(0.0, (1, 0, 0), 0.1)
    with pytest.raises(ValueError):
        swarm.step_swarm(facing_pair(), 0.0)
    with pytest.raises(ValueError):
        SwarmWorld((SwarmParticle(0, np.zeros(3), rotation.IDENTITY.copy(), (200.0,) * 14),))


def test_latched_pair_drift_over_long_run():
    w = swarm.latch(facing_pair(2.0))
    assert len(w.edges) == 1
    goal = rotation.from_axis_angle((0.3, 1.0, -0.2), 2.5)
    w = swarm.set_program(w, 0, ToPose(np.array([0.4, 0.2, -0.3]), goal, 0.05, 0.8))
    w = swarm.set_program(w, 1, Oscillate(0.7, (0, 0, 1), 0.1))
    worst = (0.0, 0.0)
    for _ in range(10_000):
        w = swarm.step_swarm(w, 1e-3)
        dm, dr = swarm.relative_pose_drift(w, w.edges[0])
        worst = (max(worst[0], dm), max(worst[1], dr))
    assert worst[0] < 1e-6 and worst[1] < 1e-6
    assert np.linalg.norm(w.particles[0].position) > 0.1  # the assembly really moved


def test_unlatch_and_relatch():
    w = swarm.latch(facing_pair(2.0))
    w = swarm.set_magnet(w, 0, X_AXIS_SPINE, False)
    assert w.edges == ()
    w = swarm.set_program(w, 1, ToPose(w.particles[1].position + [0.001, 0.0, 0.0], speed=0.01))
    for _ in range(100):
        w = swarm.step_swarm(w, 1e-3)
    w = swarm.set_magnet(w, 0, X_AXIS_SPINE, True)
    w = swarm.latch(w)
    assert len(w.edges) == 1
    assert swarm.relative_pose_drift(w, w.edges[0]) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert w.edges[0].rel_translation[0] == pytest.approx(0.003, abs=1e-9)


def test_random_world_invariants():
    w = swarm.latch(swarm.random_world(30, 3, extent=0.8))
    w_off = replace(w, particles=tuple(replace(p, magnets_enabled=(False,) * N_SPINES)
                                       for p in w.particles))
    n_off = len(w_off.edges)
    dt = 1e-3
    for _ in range(500):
        prev = {p.id: p for p in w.particles}
        groups = swarm.assemblies(w)
        w = swarm.step_swarm(w, dt)
        w_off = swarm.step_swarm(w_off, dt)
        assert len(w_off.edges) == n_off
        endpoints = [ep for e in w.edges for ep in e.endpoints]
        assert len(endpoints) == len(set(endpoints))
        assert all(e.a[0] != e.b[0] for e in w.edges)
        for g in groups:
            members = [prev[i] for i in g]
            centre = np.mean([p.position for p in members], axis=0)
            lin = max(p.commanded_speed() for p in members)
            ang = max(getattr(p.motion_program, "angular_speed", 0.0) for p in members)
            for p in members:
                moved = next(q for q in w.particles if q.id == p.id)
                speed = np.linalg.norm(moved.position - p.position) / dt
                bound = lin if len(g) == 1 else lin + ang * np.linalg.norm(p.position - centre)
                assert speed <= bound + 1e-9


def test_random_world_deterministic():
    a = swarm.random_world(10, 11)
    b = swarm.random_world(10, 11)
    for _ in range(50):
        a = swarm.step_swarm(a, 1e-3)
        b = swarm.step_swarm(b, 1e-3)
    assert all(np.array_equal(p.position, q.position) for p, q in zip(a.particles, b.particles))
    assert [e.endpoints for e in a.edges] == [e.endpoints for e in b.edges]
