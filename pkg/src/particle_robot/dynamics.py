"""Fixed-timestep rigid-body simulation of one particle robot on terrain.

The body is a single rigid sphere with isotropic inertia; spines are massless
rigid rods whose tips are point contacts. The inner drive robot is reduced to
a torque about a horizontal axis, saturated at the pendulum limit.

Contacts use a penalty spring-damper along the terrain normal and Coulomb
friction with viscous regularization. Both laws are evaluated at end-of-step
velocities (linearized backward Euler) with a fixed number of Gauss-Seidel
sweeps; this keeps the unpowered energy non-increasing at contact onset,
where an explicit penalty step would inject spring energy.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import rotation
from .actuator import ActuatorState, command_rate, make_actuator, step_actuator
from .morphology import N_SPINES, RobotMorphology
from .terrain import Terrain
from .units import GRAVITY, MM

# spine tips only touch the ground once they clear the shell by this much (mm)
DEPLOY_THRESHOLD = 5.0
SOLVER_SWEEPS = 10
SPECULATIVE_MARGIN = 1e-3  # m
MAX_DT = 2e-3


class SimulationError(RuntimeError):
    pass


class ContactQueryError(LookupError):
    pass


class ContactSource(enum.Enum):
    SHELL = "shell"
    SPINE_TIP = "spine_tip"


@dataclass(frozen=True, eq=False)
class BodyState:
    position: np.ndarray  # m
    orientation: np.ndarray  # unit quaternion (w, x, y, z)
    linear_velocity: np.ndarray  # m/s
    angular_velocity: np.ndarray  # rad/s, world frame
    actuators: tuple  # 14 ActuatorState

    @property
    def extensions(self) -> np.ndarray:
        """Spine extensions in mm, read straight from the actuators."""
        return np.array([a.extension for a in self.actuators])


def make_body_state(morphology: RobotMorphology, position=(0.0, 0.0, 0.0),
                    orientation=rotation.IDENTITY, extensions=None,
                    linear_velocity=(0.0, 0.0, 0.0), angular_velocity=(0.0, 0.0, 0.0)) -> BodyState:
    base = make_actuator(morphology.spine)
    if extensions is None:
        actuators = (base,) * N_SPINES
    else:
        ext = np.asarray(extensions, dtype=float)
        if ext.shape != (N_SPINES,):
            raise ValueError(f"expected {N_SPINES} extensions")
        actuators = tuple(_actuator_at(base, float(e)) for e in ext)
    return BodyState(np.array(position, dtype=float), rotation.normalize(orientation),
                     np.array(linear_velocity, dtype=float), np.array(angular_velocity, dtype=float),
                     actuators)


def _actuator_at(base: ActuatorState, extension: float) -> ActuatorState:
    stroke = base.spec.stroke
    if not 0.0 <= extension <= stroke:
        raise ValueError(f"extension {extension} outside [0, {stroke}]")
    if extension == 0.0:
        return base
    # one exact step from rest puts the rack FSM in the matching state
    moved = step_actuator(ActuatorState(base.spec, 0.0, extension, base.links), 1.0)
    return ActuatorState(moved.spec, extension, 0.0, moved.links)


@dataclass(frozen=True)
class DriveCommand:
    drive_torque: float = 0.0  # N*m
    heading: float = 0.0  # rad, direction of travel in the horizontal plane


def drive_axis(heading: float) -> np.ndarray:
    """Horizontal torque axis that rolls the body toward ``heading``."""
    return np.array([-math.sin(heading), math.cos(heading), 0.0])


def applied_drive_torque(drive: DriveCommand, morphology: RobotMorphology) -> float:
    limit = morphology.drive_torque_limit
    return min(limit, max(-limit, drive.drive_torque))


@dataclass(eq=False)
class ContactPoint:
    location: np.ndarray  # m, point on the body
    source: ContactSource
    penetration: float  # m
    normal: np.ndarray
    spine_index: int | None = None
    normal_force: float = 0.0
    friction_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stiffness: float = 0.0  # N/m along the normal


@dataclass(eq=False)
class _Candidate:
    source: ContactSource
    spine_index: int | None
    depth: float
    normal: np.ndarray
    offset: np.ndarray  # contact point relative to the centre of mass
    tip_velocity: np.ndarray  # velocity of the point due to spine extension
    stiffness: float  # N/m along the normal


def _world_geometry(state: BodyState, morphology: RobotMorphology):
    dirs = morphology.directions @ rotation.to_matrix(state.orientation).T
    ext = state.extensions
    offsets = dirs * ((morphology.outer_radius + ext) * MM)[:, None]
    return dirs, ext, offsets


def _candidates(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                margin: float, ext_rates=None) -> list[_Candidate]:
    dirs, ext, offsets = _world_geometry(state, morphology)
    deployed = ext > DEPLOY_THRESHOLD
    out = []
    radius = morphology.outer_radius * MM
    k = terrain.contact_stiffness
    depth, n, point = terrain.sphere_penetration(state.position, radius)
    cone = terrain.shell_shield_cone
    shielded = cone is not None and bool(np.any(deployed & (dirs @ (-n) > math.cos(cone))))
    if depth > -margin and not shielded:
        out.append(_Candidate(ContactSource.SHELL, None, float(depth), n,
                              point - state.position, np.zeros(3), k / (n[2] * n[2])))
    idx = np.flatnonzero(deployed)
    if idx.size:
        tips = state.position + offsets[idx]
        depths, normals = terrain.point_penetration(tips)
        for j, i in enumerate(idx):
            if depths[j] > -margin:
                tv = dirs[i] * (ext_rates[i] * MM) if ext_rates is not None else np.zeros(3)
                # potential k*(h - z)^2 / 2 in the vertical depth; along the normal
                # this is a spring of stiffness k / n_z^2
                nz = float(normals[j, 2])
                out.append(_Candidate(ContactSource.SPINE_TIP, int(i), float(depths[j]),
                                      normals[j], offsets[i], tv, k / (nz * nz)))
    return out


def detect_contacts(state: BodyState, morphology: RobotMorphology, terrain: Terrain) -> list[ContactPoint]:
    """Shell and spine-tip points currently penetrating the terrain (forces left at zero).

    A spine tip counts once its extension exceeds DEPLOY_THRESHOLD; below that
    it is part of the shell. If the terrain sets ``shell_shield_cone``, a deployed
    spine within that angle of the inward contact normal suppresses the shell
    contact (this is not energy-consistent). Contact springs store k*d^2 / 2 in the vertical
    depth d (below the terrain for tips, below the resting envelope for the
    shell), so their stiffness along the normal is k / n_z^2.
    """
    return [
        ContactPoint(state.position + c.offset, c.source, c.depth, c.normal, c.spine_index,
                     stiffness=c.stiffness)
        for c in _candidates(state, morphology, terrain, 0.0)
        if c.depth > 0.0
    ]


def contact_forces(contacts, state: BodyState, terrain: Terrain) -> list[ContactPoint]:
    """Penalty normal force and regularized Coulomb friction at the current state.

    F_n = max(0, k*delta + c*delta_dot); F_t = -min(mu*F_n, c_t*|v_t|) * v_t/|v_t|.
    Spine tips are taken as fixed on the body (no extension rate).
    """
    c, ct, mu = terrain.contact_damping, terrain.tangential_damping, terrain.friction
    out = []
    for cp in contacts:
        r = cp.location - state.position
        vel = state.linear_velocity + np.cross(state.angular_velocity, r)
        vn = float(vel @ cp.normal)
        fn = max(0.0, cp.stiffness * cp.penetration - c * vn)
        vt = vel - vn * cp.normal
        speed = float(np.linalg.norm(vt))
        ft = np.zeros(3)
        if speed > 0.0:
            ft = -min(mu * fn, ct * speed) * vt / speed
        out.append(ContactPoint(cp.location.copy(), cp.source, cp.penetration, cp.normal.copy(),
                                cp.spine_index, fn, ft, cp.stiffness))
    return out


def _cross(ax, ay, az, bx, by, bz):
    return ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx


def _solve_contacts(cands, v, w, mass, inertia, terrain: Terrain, dt: float):
    """Gauss-Seidel over contact impulses. Mutates nothing; returns new v, w and per-contact impulses."""
    cd = terrain.contact_damping
    ct = terrain.tangential_damping
    mu = terrain.friction
    inv_m = 1.0 / mass
    inv_i = 1.0 / inertia
    vx, vy, vz = float(v[0]), float(v[1]), float(v[2])
    wx, wy, wz = float(w[0]), float(w[1]), float(w[2])
    rows = []
    for c in cands:
        nx, ny, nz = (float(a) for a in c.normal)
        rx, ry, rz = (float(a) for a in c.offset)
        ex, ey, ez = (float(a) for a in c.tip_velocity)
        rnx, rny, rnz = _cross(rx, ry, rz, nx, ny, nz)
        inv_mn = inv_m + (rnx * rnx + rny * rny + rnz * rnz) * inv_i
        # tangent basis
        if abs(nx) < 0.57735:
            ax_, ay_, az_ = 1.0, 0.0, 0.0
        else:
            ax_, ay_, az_ = 0.0, 1.0, 0.0
        t1x, t1y, t1z = _cross(ax_, ay_, az_, nx, ny, nz)
        norm = math.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
        t1x, t1y, t1z = t1x / norm, t1y / norm, t1z / norm
        t2x, t2y, t2z = _cross(nx, ny, nz, t1x, t1y, t1z)
        a1 = _cross(rx, ry, rz, t1x, t1y, t1z)
        a2 = _cross(rx, ry, rz, t2x, t2y, t2z)
        k11 = inv_m + (a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]) * inv_i
        k22 = inv_m + (a2[0] * a2[0] + a2[1] * a2[1] + a2[2] * a2[2]) * inv_i
        k12 = (a1[0] * a2[0] + a1[1] * a2[1] + a1[2] * a2[2]) * inv_i
        g = ct * dt
        m11, m12, m22 = 1.0 + g * k11, g * k12, 1.0 + g * k22
        det = m11 * m22 - m12 * m12
        A11, A12, A22 = g * m22 / det, -g * m12 / det, g * m11 / det
        rows.append([nx, ny, nz, rx, ry, rz, ex, ey, ez, rnx, rny, rnz, inv_mn, c.depth,
                     t1x, t1y, t1z, t2x, t2y, t2z, k11, k12, k22, A11, A12, A22,
                     0.0, 0.0, 0.0, c.stiffness, c.stiffness * dt + cd])
    for _ in range(SOLVER_SWEEPS):
        for row in rows:
            (nx, ny, nz, rx, ry, rz, ex, ey, ez, rnx, rny, rnz, inv_mn, depth,
             t1x, t1y, t1z, t2x, t2y, t2z, k11, k12, k22, A11, A12, A22, p_old, j1, j2,
             k, stiff) = row
            cx, cy, cz = _cross(wx, wy, wz, rx, ry, rz)
            u = nx * (vx + cx + ex) + ny * (vy + cy + ey) + nz * (vz + cz + ez)
            u0 = u - p_old * inv_mn
            p_lin = (k * depth - stiff * u0) / (1.0 / dt + stiff * inv_mn)
            p_touch = (depth / dt - u0) / inv_mn
            p = max(0.0, min(p_lin, p_touch))
            dp = p - p_old
            if dp != 0.0:
                vx += dp * nx * inv_m
                vy += dp * ny * inv_m
                vz += dp * nz * inv_m
                wx += dp * rnx * inv_i
                wy += dp * rny * inv_i
                wz += dp * rnz * inv_i
                row[26] = p
            if mu > 0.0 and (p > 0.0 or j1 != 0.0 or j2 != 0.0):
                cx, cy, cz = _cross(wx, wy, wz, rx, ry, rz)
                sx, sy, sz = vx + cx + ex, vy + cy + ey, vz + cz + ez
                w1 = t1x * sx + t1y * sy + t1z * sz - (k11 * j1 + k12 * j2)
                w2 = t2x * sx + t2y * sy + t2z * sz - (k12 * j1 + k22 * j2)
                n1 = -(A11 * w1 + A12 * w2)
                n2 = -(A12 * w1 + A22 * w2)
                cap = mu * p
                mag = math.hypot(n1, n2)
                if mag > cap:
                    scale = cap / mag
                    n1 *= scale
                    n2 *= scale
                d1, d2 = n1 - j1, n2 - j2
                if d1 != 0.0 or d2 != 0.0:
                    ix = d1 * t1x + d2 * t2x
                    iy = d1 * t1y + d2 * t2y
                    iz = d1 * t1z + d2 * t2z
                    vx += ix * inv_m
                    vy += iy * inv_m
                    vz += iz * inv_m
                    tx, ty, tz = _cross(rx, ry, rz, ix, iy, iz)
                    wx += tx * inv_i
                    wy += ty * inv_i
                    wz += tz * inv_i
                    row[27] = n1
                    row[28] = n2
    impulses = []
    for row in rows:
        p, j1, j2 = row[26], row[27], row[28]
        jt = np.array([j1 * row[14] + j2 * row[17], j1 * row[15] + j2 * row[18],
                       j1 * row[16] + j2 * row[19]])
        impulses.append((p, jt))
    return np.array([vx, vy, vz]), np.array([wx, wy, wz]), impulses


def step_dynamics_detailed(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                           drive: DriveCommand, spine_rates, dt: float):
    """One semi-implicit Euler step. Returns (new state, contacts with solved forces)."""
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must lie in (0, {MAX_DT}] s")
    rates = np.asarray(spine_rates, dtype=float)
    if rates.shape != (N_SPINES,):
        raise ValueError(f"expected {N_SPINES} spine rates")
    actuators = tuple(step_actuator(command_rate(a, r), dt)
                      for a, r in zip(state.actuators, rates))
    ext_rates = np.array([(a.extension - b.extension) / dt
                          for a, b in zip(actuators, state.actuators)])

    mass = morphology.mass_total
    inertia = morphology.inertia
    tau = applied_drive_torque(drive, morphology)
    v = state.linear_velocity + np.array([0.0, 0.0, -GRAVITY * dt])
    w = state.angular_velocity + drive_axis(drive.heading) * (tau * dt / inertia)

    # a point can close at most this far within the step
    reach = (morphology.outer_radius + morphology.stroke) * MM
    closing = (float(np.linalg.norm(v)) + float(np.linalg.norm(w)) * reach
               + float(np.max(np.abs(ext_rates))) * MM)
    cands = _candidates(state, morphology, terrain, SPECULATIVE_MARGIN + closing * dt, ext_rates)
    if cands:
        v, w, impulses = _solve_contacts(cands, v, w, mass, inertia, terrain, dt)
    else:
        impulses = []

    position = state.position + dt * v
    orientation = rotation.integrate(state.orientation, w, dt)
    new = BodyState(position, orientation, v, w, actuators)
    if not (np.all(np.isfinite(position)) and np.all(np.isfinite(orientation))
            and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise SimulationError(
            f"non-finite state after step: position={position}, orientation={orientation}, "
            f"velocity={v}, angular_velocity={w}, contacts={len(cands)}")

    contacts = []
    for c, (p, jt) in zip(cands, impulses):
        if p > 0.0 or c.depth > 0.0:
            contacts.append(ContactPoint(state.position + c.offset, c.source, max(0.0, c.depth),
                                         c.normal, c.spine_index, p / dt, jt / dt, c.stiffness))
    return new, contacts


def step_dynamics(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                  drive: DriveCommand, spine_rates, dt: float) -> BodyState:
    return step_dynamics_detailed(state, morphology, terrain, drive, spine_rates, dt)[0]


def rolling_slip_residual(state: BodyState, contact: ContactPoint | None) -> float:
    """Speed (m/s) of the shell material point at the contact; zero when rolling without slip."""
    if contact is None or contact.source is not ContactSource.SHELL:
        raise ContactQueryError("slip residual needs a shell contact")
    r = contact.location - state.position
    return float(np.linalg.norm(state.linear_velocity + np.cross(state.angular_velocity, r)))


def shell_contact(contacts) -> ContactPoint | None:
    for c in contacts:
        if c.source is ContactSource.SHELL:
            return c
    return None


def mechanical_energy(state: BodyState, morphology: RobotMorphology, terrain: Terrain,
                      contacts=None) -> float:
    """Kinetic + gravitational + contact-spring potential energy (J).

    ``contacts`` may carry a ``detect_contacts`` result for this state to skip the query.
    """
    v = state.linear_velocity
    w = state.angular_velocity
    m = morphology.mass_total
    e = 0.5 * m * float(v @ v) + 0.5 * morphology.inertia * float(w @ w)
    e += m * GRAVITY * float(state.position[2])
    if contacts is None:
        contacts = detect_contacts(state, morphology, terrain)
    for c in contacts:
        e += 0.5 * c.stiffness * c.penetration * c.penetration
    return e


def static_sink(state: BodyState, morphology: RobotMorphology, terrain: Terrain) -> BodyState:
    """Translate the body vertically so the contact springs carry its weight.

    Assumes pure vertical translation; used to start scenarios near equilibrium.
    """
    weight = morphology.mass_total * GRAVITY

    def load(z):
        s = BodyState(np.array([state.position[0], state.position[1], z]), state.orientation,
                      state.linear_velocity, state.angular_velocity, state.actuators)
        return sum(c.stiffness * c.penetration * c.normal[2] for c in detect_contacts(s, morphology, terrain))

    reach = (morphology.outer_radius + morphology.stroke) * MM
    ground = float(terrain.height(state.position[0], state.position[1]))
    lo, hi = ground - reach, ground + reach + 0.01
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if load(mid) > weight:
            lo = mid
        else:
            hi = mid
    return BodyState(np.array([state.position[0], state.position[1], 0.5 * (lo + hi)]),
                     state.orientation, state.linear_velocity, state.angular_velocity,
                     state.actuators)
