"""Coordinate frames, the floor-plan alignment transform, and panorama slicing math.

CONVENTIONS
===========
Floor-plan frame:
  - Units: floor-plan pixels.  Physical scale (feet per pixel) is carried by
    the map that owns the points, never implied here.
  - Directions are degrees counter-clockwise from the +x axis, normalized
    to [0, 360).

Reconstruction frame (sparse-map coordinates):
  - Dimensionless scale fixed by the reconstruction run.
  - The y axis is perpendicular to the ground; the alignment transform
    treats every point as (x, 1, z), so only x and z carry information.

Alignment transform:
  - A 2x3 matrix T mapping reconstruction column vectors (x, 1, z)^T to
    floor-plan points.  Estimated from >= 3 manually picked correspondences
    by solving the normal equations  T = F X^T (X X^T)^{-1}  where F stacks
    the 2D floor picks and X the (x, 1, z) reconstruction picks.

Equirectangular frame:
  - Panorama pixel u spans longitude [0, 360) degrees, v spans latitude
    +90 (top row) to -90; the horizon sits at v = height / 2.
  - Perspective slices use a gnomonic (rectilinear) projection.  The slice's
    vertical FOV follows from the width FOV and the output aspect ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, InvalidFov, InvalidSlicing, TooFewPoints

# Condition-number threshold on X X^T beyond which the correspondence set is
# treated as collinear / rank deficient.
SINGULARITY_COND = 1e12


def normalize_deg(angle: float) -> float:
    """Wrap an angle in degrees into [0, 360)."""
    a = math.fmod(angle, 360.0)
    if a < 0.0:
        a += 360.0
    # fmod can return 360.0 - eps rounded up; guard the half-open interval
    return 0.0 if a >= 360.0 else a


def signed_delta_deg(a: float, b: float) -> float:
    """Signed shortest rotation from ``b`` to ``a``, in (-180, 180]."""
    d = math.fmod(a - b, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def circular_error_deg(a: float, b: float) -> float:
    """Absolute angular difference in [0, 180]."""
    return abs(signed_delta_deg(a, b))


@dataclass(frozen=True)
class Direction:
    """Heading in degrees CCW from the floor plan's +x axis, stored normalized."""

    degrees: float

    def __post_init__(self):
        if not math.isfinite(self.degrees):
            raise ValueError(f"direction must be finite, got {self.degrees}")
        object.__setattr__(self, "degrees", normalize_deg(self.degrees))

    def rotated(self, delta: float) -> "Direction":
        return Direction(self.degrees + delta)

    def error_to(self, other: "Direction") -> float:
        return circular_error_deg(self.degrees, other.degrees)


@dataclass(frozen=True)
class FloorPoint:
    """A point on the floor plan, in floor-plan pixels."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"floor point must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "FloorPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class MapPoint3:
    """A point in the reconstruction frame."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"map point must be finite, got ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class FloorTransform:
    """2x3 matrix mapping reconstruction (x, 1, z) columns to floor-plan points."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"transform must be 2x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("transform contains non-finite entries")
        if np.linalg.matrix_rank(m) < 2:
            raise ValueError("transform must have rank 2")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, p: MapPoint3) -> FloorPoint:
        v = self.matrix @ np.array([p.x, 1.0, p.z])
        return FloorPoint(float(v[0]), float(v[1]))

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        """Project an (n, 3) array of reconstruction points; y is forced to 1."""
        pts = np.asarray(points, dtype=np.float64)
        cols = np.stack([pts[:, 0], np.ones(len(pts)), pts[:, 2]])
        return (self.matrix @ cols).T

    def heading_to_floor(self, yaw_deg: float) -> Direction:
        """Map a reconstruction-frame heading (in the x-z plane) through the
        transform's linear part to a floor-plan direction."""
        a = self.matrix[:, [0, 2]]  # action on (x, z)
        v = a @ np.array([math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))])
        return Direction(math.degrees(math.atan2(v[1], v[0])))


def _correspondence_matrices(
    correspondences: list[tuple[MapPoint3, FloorPoint]],
) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[p.x, 1.0, p.z] for p, _ in correspondences], dtype=np.float64).T
    F = np.array([[f.x, f.y] for _, f in correspondences], dtype=np.float64).T
    return X, F


def estimate_floor_transform(
    correspondences: list[tuple[MapPoint3, FloorPoint]],
) -> FloorTransform:
    """Least-squares fit of the alignment transform from picked correspondences.

    Solves the normal equations directly: T = F X^T (X X^T)^{-1} with the
    reconstruction y coordinate forced to 1.

    Raises:
        TooFewPoints: fewer than 3 correspondences.
        DegenerateConfiguration: X X^T singular within tolerance (collinear picks).
    """
    if len(correspondences) < 3:
        raise TooFewPoints(f"need >= 3 correspondences, got {len(correspondences)}")
    X, F = _correspondence_matrices(correspondences)
    XXT = X @ X.T
    if np.linalg.cond(XXT) > SINGULARITY_COND:
        raise DegenerateConfiguration("correspondences are collinear or nearly so")
    T = F @ X.T @ np.linalg.inv(XXT)
    return FloorTransform(T)


def apply_floor_transform(transform: FloorTransform, p: MapPoint3) -> FloorPoint:
    return transform.apply(p)


def transform_residuals(
    transform: FloorTransform,
    correspondences: list[tuple[MapPoint3, FloorPoint]],
) -> np.ndarray:
    """Per-correspondence Euclidean residuals (floor-plan pixels), for error display."""
    X, F = _correspondence_matrices(correspondences)
    proj = transform.matrix @ X
    return np.linalg.norm(proj - F, axis=0)


def transform_rms(transform: FloorTransform, correspondences) -> float:
    r = transform_residuals(transform, correspondences)
    return float(np.sqrt(np.mean(r**2)))


def slice_directions(base: Direction, m: int, theta: float) -> list[Direction]:
    """Headings of the m perspective slices cut from a panorama facing ``base``.

    Slice t (t = 1..m) faces base + t * theta.  m * theta must cover the full
    circle exactly.
    """
    if m < 1 or not math.isclose(m * theta, 360.0, abs_tol=1e-9):
        raise InvalidSlicing(f"m * theta must equal 360, got {m} * {theta}")
    return [base.rotated(t * theta) for t in range(1, m + 1)]


# --- gnomonic slice mapping -------------------------------------------------


def _gnomonic_focal(fov_deg: float, out_w: int) -> float:
    return (out_w / 2.0) / math.tan(math.radians(fov_deg) / 2.0)


def perspective_pixel_to_lonlat(
    px: np.ndarray,
    py: np.ndarray,
    view_dir_deg: float,
    fov_deg: float,
    out_w: int,
    out_h: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Longitude/latitude (degrees) seen by perspective-slice pixels.

    Image right maps to increasing longitude; image up to increasing latitude.
    The slice center (out_w/2, out_h/2) looks exactly along ``view_dir_deg``
    on the horizon.
    """
    f = _gnomonic_focal(fov_deg, out_w)
    x = np.asarray(px, dtype=np.float64) - out_w / 2.0
    y = np.asarray(py, dtype=np.float64) - out_h / 2.0
    lon = view_dir_deg + np.degrees(np.arctan2(x, f))
    lat = np.degrees(np.arctan2(-y, np.hypot(f, x)))
    return lon % 360.0, lat


def lonlat_to_perspective_pixel(
    lon_deg: np.ndarray,
    lat_deg: np.ndarray,
    view_dir_deg: float,
    fov_deg: float,
    out_w: int,
    out_h: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`perspective_pixel_to_lonlat` (rays behind the slice
    plane produce unusable coordinates; callers clip by FOV)."""
    f = _gnomonic_focal(fov_deg, out_w)
    rel = np.radians((np.asarray(lon_deg, dtype=np.float64) - view_dir_deg + 180.0) % 360.0 - 180.0)
    x = f * np.tan(rel)
    y = -np.hypot(f, x) * np.tan(np.radians(lat_deg))
    return x + out_w / 2.0, y + out_h / 2.0


def equirect_to_perspective_mapping(
    view_dir: Direction,
    fov: float,
    out_w: int,
    out_h: int,
    in_w: int,
    in_h: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Source equirectangular pixel coordinates for every slice pixel.

    Returns (map_u, map_v), each (out_h, out_w) float64: the panorama
    coordinates to sample when rendering a gnomonic slice of width FOV
    ``fov`` facing ``view_dir``.

    Raises:
        InvalidFov: fov outside (0, 180).
    """
    if not 0.0 < fov < 180.0:
        raise InvalidFov(f"width FOV must be in (0, 180), got {fov}")
    px, py = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    lon, lat = perspective_pixel_to_lonlat(px, py, view_dir.degrees, fov, out_w, out_h)
    map_u = in_w * lon / 360.0
    map_v = in_h * (0.5 - lat / 180.0)
    return map_u, map_v
