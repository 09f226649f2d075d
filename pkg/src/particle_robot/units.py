"""Unit conversions between the mm/ms interface and SI internals."""
import math

MM = 1e-3  # metres per millimetre
MS = 1e-3  # seconds per millisecond
GRAVITY = 9.81  # m/s^2


def mm_to_m(value):
    return value * MM


def m_to_mm(value):
    return value / MM


def ms_to_s(value):
    return value * MS


def deg_to_rad(value):
    return math.radians(value)


def rad_to_deg(value):
    return math.degrees(value)
