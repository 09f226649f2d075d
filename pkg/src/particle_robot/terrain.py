"""Ground models: flat, inclined plane, and bilinear heightfield.

Heights and positions are metres internally. Heightfield files use mm:
first line ``cols rows cell_size_mm``, then ``rows*cols`` heights in
row-major order (row index along y, column index along x). The grid is
centred on the world origin; queries outside it clamp to the border.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .units import MM


class TerrainError(ValueError):
    pass


class TerrainKind(enum.Enum):
    FLAT = "flat"
    SLOPE = "slope"
    HEIGHTFIELD = "heightfield"


@dataclass(frozen=True, eq=False)
class Heightfield:
    heights: np.ndarray  # (rows, cols), metres
    cell_size: float  # metres

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.ndim != 2 or h.shape[0] < 2 or h.shape[1] < 2:
            raise TerrainError("heightfield grid must be rectangular with at least 2x2 samples")
        if not np.all(np.isfinite(h)):
            raise TerrainError("heightfield contains non-finite values")
        if not self.cell_size > 0:
            raise TerrainError("cell size must be positive")
        h = h.copy()
        h.flags.writeable = False
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "_envelopes", {})

    @property
    def origin(self) -> tuple[float, float]:
        rows, cols = self.heights.shape
        return (-0.5 * (cols - 1) * self.cell_size, -0.5 * (rows - 1) * self.cell_size)

    def sample(self, x, y):
        """Bilinear height and gradient (dh/dx, dh/dy) at arrays x, y."""
        h = self.heights
        rows, cols = h.shape
        x0, y0 = self.origin
        u_raw = (np.asarray(x, dtype=float) - x0) / self.cell_size
        v_raw = (np.asarray(y, dtype=float) - y0) / self.cell_size
        u = np.clip(u_raw, 0.0, cols - 1.0)
        v = np.clip(v_raw, 0.0, rows - 1.0)
        i = np.minimum(np.floor(u).astype(int), cols - 2)
        j = np.minimum(np.floor(v).astype(int), rows - 2)
        fu = u - i
        fv = v - j
        h00 = h[j, i]
        h10 = h[j, i + 1]
        h01 = h[j + 1, i]
        h11 = h[j + 1, i + 1]
        a = h10 - h00
        b = h01 - h00
        c = h11 - h10 - h01 + h00
        height = h00 + a * fu + b * fv + c * fu * fv
        # the clamped height is constant outside the grid
        gx = np.where(u == u_raw, (a + c * fv) / self.cell_size, 0.0)
        gy = np.where(v == v_raw, (b + c * fu) / self.cell_size, 0.0)
        return height, gx, gy

    def sample_point(self, x: float, y: float):
        """Scalar version of ``sample``."""
        h = self.heights
        rows, cols = h.shape
        x0, y0 = self.origin
        u_raw = (x - x0) / self.cell_size
        v_raw = (y - y0) / self.cell_size
        u = min(cols - 1.0, max(0.0, u_raw))
        v = min(rows - 1.0, max(0.0, v_raw))
        i = min(int(math.floor(u)), cols - 2)
        j = min(int(math.floor(v)), rows - 2)
        fu = u - i
        fv = v - j
        h00 = float(h[j, i])
        h10 = float(h[j, i + 1])
        h01 = float(h[j + 1, i])
        h11 = float(h[j + 1, i + 1])
        a = h10 - h00
        b = h01 - h00
        c = h11 - h10 - h01 + h00
        gx = (a + c * fv) / self.cell_size if u == u_raw else 0.0
        gy = (b + c * fu) / self.cell_size if v == v_raw else 0.0
        return h00 + a * fu + b * fv + c * fu * fv, gx, gy

    def sphere_envelope(self, radius: float) -> "Heightfield":
        """Centre height of a sphere of ``radius`` resting on the grid, sampled at the grid nodes.

        This is the grid dilated by a spherical cap; cached per radius.
        """
        cache = self._envelopes
        if radius not in cache:
            h = self.heights
            reach = int(math.floor(radius / self.cell_size))
            padded = np.pad(h, reach, mode="edge")
            rows, cols = h.shape
            out = h + radius
            for dj in range(-reach, reach + 1):
                for di in range(-reach, reach + 1):
                    r2 = (di * di + dj * dj) * self.cell_size ** 2
                    if r2 > radius * radius or (di == 0 and dj == 0):
                        continue
                    cap = math.sqrt(radius * radius - r2)
                    shifted = padded[reach + dj:reach + dj + rows, reach + di:reach + di + cols]
                    np.maximum(out, shifted + cap, out=out)
            cache[radius] = Heightfield(out, self.cell_size)
        return cache[radius]


@dataclass(frozen=True, eq=False)
class Terrain:
    kind: TerrainKind = TerrainKind.FLAT
    friction: float = 0.8
    contact_stiffness: float = 5000.0  # N/m
    contact_damping: float = 50.0  # N*s/m
    tangential_damping: float = 10000.0  # N*s/m, viscous regularization of Coulomb friction
    # rad; when set, a deployed spine this close to the inward normal hides the shell contact
    shell_shield_cone: float | None = None
    slope_angle: float = 0.0  # rad, plane rises along +x
    heightfield: Heightfield | None = None
    name: str = "flat"

    def __post_init__(self):
        if not self.friction >= 0:
            raise TerrainError("friction must be non-negative")
        if not self.contact_stiffness > 0:
            raise TerrainError("contact_stiffness must be positive")
        if not self.contact_damping >= 0:
            raise TerrainError("contact_damping must be non-negative")
        if not self.tangential_damping >= 0:
            raise TerrainError("tangential_damping must be non-negative")
        if self.shell_shield_cone is not None and not 0.0 <= self.shell_shield_cone < 0.5 * math.pi:
            raise TerrainError("shell_shield_cone must lie in [0, 90) degrees")
        if self.kind is TerrainKind.HEIGHTFIELD and self.heightfield is None:
            raise TerrainError("heightfield terrain needs a grid")
        if self.kind is TerrainKind.SLOPE and not abs(self.slope_angle) < 0.5 * math.pi:
            raise TerrainError("slope angle must lie in (-90, 90) degrees")

    def with_friction(self, friction: float) -> "Terrain":
        return replace(self, friction=friction)

    def surface(self, x, y):
        """Height (m) and unit upward normal (..., 3) of the ground below points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind is TerrainKind.FLAT:
            h = np.zeros_like(x)
            gx = np.zeros_like(x)
            gy = np.zeros_like(x)
        elif self.kind is TerrainKind.SLOPE:
            t = math.tan(self.slope_angle)
            h = x * t
            gx = np.full_like(x, t)
            gy = np.zeros_like(x)
        else:
            h, gx, gy = self.heightfield.sample(x, y)
        n = np.stack([-gx, -gy, np.ones_like(x)], axis=-1)
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return h, n

    def surface_point(self, x: float, y: float):
        """Scalar height and upward normal (nx, ny, nz) at one point."""
        if self.kind is TerrainKind.FLAT:
            return 0.0, (0.0, 0.0, 1.0)
        if self.kind is TerrainKind.SLOPE:
            t = math.tan(self.slope_angle)
            h, gx, gy = x * t, t, 0.0
        else:
            h, gx, gy = self.heightfield.sample_point(x, y)
        inv = 1.0 / math.sqrt(gx * gx + gy * gy + 1.0)
        return h, (-gx * inv, -gy * inv, inv)

    def height(self, x, y):
        return self.surface(x, y)[0]

    def point_penetration(self, points):
        """Signed penetration depth (m, positive inside the ground) and normal for (N, 3) points."""
        points = np.asarray(points, dtype=float)
        h, n = self.surface(points[..., 0], points[..., 1])
        depth = (h - points[..., 2]) * n[..., 2]
        return depth, n

    def sphere_envelope_point(self, x: float, y: float, radius: float):
        """Resting centre height of a sphere above (x, y) and the envelope's upward normal."""
        if self.kind is TerrainKind.FLAT:
            return radius, (0.0, 0.0, 1.0)
        if self.kind is TerrainKind.SLOPE:
            t = math.tan(self.slope_angle)
            root = math.sqrt(1.0 + t * t)
            return x * t + radius * root, (-t / root, 0.0, 1.0 / root)
        h, gx, gy = self.heightfield.sphere_envelope(radius).sample_point(x, y)
        inv = 1.0 / math.sqrt(gx * gx + gy * gy + 1.0)
        return h, (-gx * inv, -gy * inv, inv)

    def sphere_penetration(self, center, radius: float):
        """Penetration of a sphere along the contact normal, the normal, and the contact point.

        The depth is the vertical gap below the resting envelope times n_z, which
        is exact on planes and continuous on heightfields.
        """
        cx, cy, cz = (float(v) for v in center)
        h, n = self.sphere_envelope_point(cx, cy, radius)
        normal = np.array(n)
        return (h - cz) * n[2], normal, np.array([cx, cy, cz]) - radius * normal


def flat(friction: float = 0.8, **kw) -> Terrain:
    return Terrain(TerrainKind.FLAT, friction=friction, name="flat", **kw)


def slope(angle_deg: float, friction: float = 0.8, **kw) -> Terrain:
    return Terrain(TerrainKind.SLOPE, friction=friction, slope_angle=math.radians(angle_deg),
                   name=f"slope{angle_deg:g}", **kw)


def load_heightfield(path) -> Heightfield:
    text = Path(path).read_text()
    tokens = text.split()
    try:
        cols, rows = int(tokens[0]), int(tokens[1])
        cell_mm = float(tokens[2])
        values = np.array([float(t) for t in tokens[3:]])
    except (IndexError, ValueError) as exc:
        raise TerrainError(f"{path}: malformed heightfield header or values ({exc})") from exc
    if values.size != rows * cols:
        raise TerrainError(f"{path}: expected {rows * cols} heights, found {values.size}")
    return Heightfield(values.reshape(rows, cols) * MM, cell_mm * MM)


def save_heightfield(hf: Heightfield, path) -> None:
    rows, cols = hf.heights.shape
    lines = [f"{cols} {rows} {hf.cell_size / MM:.17g}"]
    for row in hf.heights:
        lines.append(" ".join(f"{v / MM:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _grid(extent: float, cell: float):
    n = int(round(extent / cell)) + 1
    axis = (np.arange(n) - 0.5 * (n - 1)) * cell
    return np.meshgrid(axis, axis)


def snow_heightfield(lump_height: float = 0.040, spacing: float = 0.5, flat_radius: float = 0.05,
                     extent: float = 6.0, cell: float = 0.01) -> Heightfield:
    """Crud-snow ground: flat pits on a square lattice (one at the origin), each
    walled by lumps that rise smoothly to ``lump_height`` at the cell border."""
    x, y = _grid(extent, cell)
    dx = x - spacing * np.round(x / spacing)
    dy = y - spacing * np.round(y / spacing)
    d = np.maximum(np.abs(dx), np.abs(dy))
    s = np.clip((d - flat_radius) / (0.5 * spacing - flat_radius), 0.0, 1.0)
    return Heightfield(lump_height * s * s * (3.0 - 2.0 * s), cell)


def rocks_heightfield(seed: int = 7, count: int = 60, extent: float = 6.0,
                      cell: float = 0.01) -> Heightfield:
    """Scattered rounded rocks up to 60 mm tall; the 0.4 m around the origin is kept clear."""
    rng = np.random.default_rng(seed)
    x, y = _grid(extent, cell)
    h = np.zeros_like(x)
    placed = 0
    while placed < count:
        cx, cy = rng.uniform(-0.5 * extent, 0.5 * extent, size=2)
        if math.hypot(cx, cy) < 0.4:
            continue
        radius = rng.uniform(0.05, 0.15)
        height = rng.uniform(0.02, 0.06)
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / (radius * radius)
        h = np.maximum(h, height * np.clip(1.0 - r2, 0.0, None) ** 1.5)
        placed += 1
    return Heightfield(h, cell)


SNOW_FRICTION = 0.05


def preset(name: str) -> Terrain:
    """Named terrains: flat, slope15, snow, rocks."""
    if name == "flat":
        return flat(0.8)
    if name == "slope15":
        return slope(15.0, 0.8)
    if name == "snow":
        return Terrain(TerrainKind.HEIGHTFIELD, friction=SNOW_FRICTION,
                       heightfield=snow_heightfield(), name="snow")
    if name == "rocks":
        return Terrain(TerrainKind.HEIGHTFIELD, friction=0.8,
                       heightfield=rocks_heightfield(), name="rocks")
    raise TerrainError(f"unknown terrain preset {name!r}")


PRESETS = ("flat", "slope15", "snow", "rocks")
