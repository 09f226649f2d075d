"""Simulation of a spherical rolling robot with telescopic spines.

Modules: morphology (geometry and constants), actuator (rack extension state),
dynamics (rigid body with ground contact), gait (spine patterns, stances and
locomotion modes), optimizer (gait search), swarm (kinematic latching),
scenario/runner/cli (config-driven runs).
"""
from .morphology import RobotMorphology, reference_morphology

__all__ = ["RobotMorphology", "reference_morphology"]
__version__ = "0.1.0"
