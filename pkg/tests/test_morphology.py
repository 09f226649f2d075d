import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from particle_robot import rotation
from particle_robot.morphology import (N_SPINES, MorphologyError, Pose, RobotMorphology, ShellSpec,
                                       SpineSpec, actuator_catalog, reference_morphology,
                                       spine_directions_cube14, spine_tip_position)

unit_quaternions = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
    lambda q: np.linalg.norm(q) > 0.1).map(rotation.normalize)


def test_reference_constants():
    m = reference_morphology()
    assert m.shell.outer_diameter == 260
    assert m.shell.shell_part_count == 24
    assert len(m.spine_directions) == N_SPINES == 14
    assert m.spine.base_height == 50
    assert m.spine.stroke == 128
    assert m.spine.extended_length == 178
    assert m.spine.extension_ratio == 3.56
    assert m.spine.max_rate == 100
    assert m.spine.level_count == 4


def test_direction_order_and_norms():
    dirs = np.array(spine_directions_cube14())
    assert tuple(dirs[0]) == (1.0, 0.0, 0.0)
    assert tuple(dirs[5]) == (0.0, 0.0, -1.0)
    s = 1 / math.sqrt(3)
    assert np.allclose(dirs[6], (-s, -s, -s)) and np.allclose(dirs[13], (s, s, s))
    assert np.all(np.abs(np.linalg.norm(dirs, axis=1) - 1) < 1e-9)
    for d in dirs:
        assert any(np.allclose(-d, e, atol=1e-12) for e in dirs)


def test_min_pairwise_angle_brute_force():
    dirs = spine_directions_cube14()
    angles = []
    for a, b in itertools.combinations(dirs, 2):
        dot = sum(x * y for x, y in zip(a, b))
        angles.append(math.degrees(math.acos(max(-1.0, min(1.0, dot)))))
    assert len(angles) == 91
    assert min(angles) == pytest.approx(54.7356, abs=1e-4)


def test_tip_examples():
    m = reference_morphology()
    pose = Pose(np.zeros(3), rotation.IDENTITY)
    for i in range(N_SPINES):
        assert np.linalg.norm(spine_tip_position(pose, m, i, 0.0)) == pytest.approx(130.0, abs=1e-9)
        assert np.linalg.norm(spine_tip_position(pose, m, i, 128.0)) == pytest.approx(258.0, abs=1e-9)
    turned = Pose(np.zeros(3), rotation.from_axis_angle((0, 0, 1), math.pi / 2))
    assert np.allclose(spine_tip_position(turned, m, 0, 0.0), (0, 130, 0), atol=1e-9)


@pytest.mark.parametrize("index,ext", [(-1, 0.0), (14, 0.0), (0, -0.1), (0, 128.5)])
def test_tip_domain_errors(index, ext):
    with pytest.raises(MorphologyError):
        spine_tip_position(Pose(np.zeros(3), rotation.IDENTITY), reference_morphology(), index, ext)


@settings(max_examples=200, deadline=None)
@given(q=unit_quaternions, pos=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
       e=st.floats(0, 128), i=st.integers(0, 13))
def test_antipodal_tip_distance(q, pos, e, i):
    m = reference_morphology()
    pose = Pose(np.array(pos), q)
    d = m.directions[i]
    j = int(np.argmin(np.linalg.norm(m.directions + d, axis=1)))
    a = spine_tip_position(pose, m, i, e)
    b = spine_tip_position(pose, m, j, e)
    assert np.linalg.norm(a - b) == pytest.approx(2 * (130 + e), rel=1e-12, abs=1e-9)
    assert np.linalg.norm(spine_tip_position(pose, m, i, 0.0) - pose.position) == pytest.approx(130, abs=1e-9)


def test_catalog():
    cat = {e.name: e for e in actuator_catalog()}
    assert len(cat) == 4
    assert (cat["Rigid chain"].chain_count, cat["Rigid chain"].speed, cat["Rigid chain"].locked_axes) == (1, 1000, 2)
    assert (cat["Rigid zip"].chain_count, cat["Rigid zip"].speed, cat["Rigid zip"].locked_axes) == (2, 1000, 3)
    assert cat["Spiralift"].speed == 10 and cat["Spiralift"].locked_axes == 3
    assert (cat["Articulated rack"].chain_count, cat["Articulated rack"].speed) == (1, 100)
    assert cat["Articulated rack"].locked_axes == 3
    assert all(e.locked_axes in (2, 3) and e.speed > 0 for e in cat.values())


def test_derived_quantities():
    m = reference_morphology()
    assert m.drive_torque_limit == pytest.approx(1.0 * 9.81 * 0.08)
    assert m.inertia == pytest.approx(1.2 * 0.4 * 2.0 * 0.13 ** 2)


def test_validation():
    with pytest.raises(MorphologyError):
        ShellSpec(outer_diameter=100, inner_sphere_diameter=160)
    with pytest.raises(MorphologyError):
        SpineSpec(max_rate=0)
    with pytest.raises(MorphologyError):
        RobotMorphology(spine_directions=spine_directions_cube14()[:13])
    dirs = list(spine_directions_cube14())
    dirs[1] = (0.0, 1.0, 0.0)
    with pytest.raises(MorphologyError):
        RobotMorphology(spine_directions=tuple(dirs))
    with pytest.raises(MorphologyError):
        RobotMorphology(inner_mass_fraction=1.0)
    with pytest.raises(MorphologyError):
        RobotMorphology(mass_total=0.0)
