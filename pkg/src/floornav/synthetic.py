"""Deterministic synthetic worlds for exercising the full pipeline.

A world is a field of point landmarks in the reconstruction frame, each with a
fixed global-signature vector and a fixed local descriptor.  Observing a pose
produces exactly what the mapping pipeline would hand us for one perspective
slice: a view-dependent global descriptor plus pinhole projections of the
visible landmarks.  Identical poses always produce identical observations,
which is what lets tests assert on exact values.

The floor frame and the reconstruction ground plane coincide here (floor
(x, y) maps to reconstruction (x, z), camera at fixed height), so the floor
alignment is the identity-style transform and every ground-truth quantity is
known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptors import LocalFeature, as_descriptor
from .errors import OutOfWorld
from .geometry import Direction, FloorPoint, FloorTransform, MapPoint3
from .mapstore import (
    Boundary,
    FrameRecord,
    Landmark,
    SliceRecord,
    TopometricMap,
    assemble_map,
)

IDENTITY_ALIGNMENT = FloorTransform(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))

CAMERA_HEIGHT = 1.0  # reconstruction y of every synthetic camera
MIN_DEPTH = 0.5      # landmarks closer than this are behind or on the lens


@dataclass(frozen=True)
class WorldConfig:
    width: float = 60.0             # feet
    height: float = 40.0            # feet
    n_landmarks: int = 700
    global_dim: int = 512
    local_dim: int = 32
    image_size: tuple[int, int] = (640, 360)
    fov_deg: float = 75.0
    max_features: int = 150
    distance_falloff: float = 12.0  # feet, scale of global-descriptor locality
    angle_falloff: float = 60.0     # degrees, ditto for view direction


class SyntheticWorld:
    """A seeded landmark field with closed-form observations."""

    def __init__(self, config: WorldConfig = WorldConfig(), seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        xs = rng.uniform(0.0, c.width, c.n_landmarks)
        zs = rng.uniform(0.0, c.height, c.n_landmarks)
        ys = rng.uniform(0.0, 2.5, c.n_landmarks)
        self.landmark_positions = np.column_stack([xs, ys, zs])
        self.global_signatures = rng.standard_normal((c.n_landmarks, c.global_dim)).astype(
            np.float32
        )
        self.local_signatures = rng.standard_normal((c.n_landmarks, c.local_dim)).astype(
            np.float32
        )
        self.focal = (c.image_size[0] / 2.0) / math.tan(math.radians(c.fov_deg) / 2.0)

    def contains(self, p: FloorPoint) -> bool:
        return 0.0 <= p.x <= self.config.width and 0.0 <= p.y <= self.config.height

    def landmarks(self) -> list[Landmark]:
        return [
            Landmark(i, MapPoint3(*self.landmark_positions[i]))
            for i in range(self.config.n_landmarks)
        ]

    # -- observation --------------------------------------------------------

    def observe(self, location: FloorPoint, direction: Direction) -> SliceRecord:
        """Render one perspective view at the given floor pose.

        Raises OutOfWorld for poses outside the landmark field.
        """
        if not self.contains(location):
            raise OutOfWorld(f"pose {location} outside {self.config.width}x{self.config.height} field")
        return SliceRecord(
            global_desc=self._global_descriptor(location, direction),
            locals=self._project_landmarks(location, direction),
        )

    def _global_descriptor(self, location: FloorPoint, direction: Direction) -> np.ndarray:
        c = self.config
        dx = self.landmark_positions[:, 0] - location.x
        dz = self.landmark_positions[:, 2] - location.y
        dist = np.hypot(dx, dz)
        bearing = np.degrees(np.arctan2(dz, dx))
        off = np.abs((bearing - direction.degrees + 180.0) % 360.0 - 180.0)
        weight = np.exp(-0.5 * (dist / c.distance_falloff) ** 2)
        weight *= np.exp(-0.5 * (off / c.angle_falloff) ** 2)
        return as_descriptor(weight.astype(np.float32) @ self.global_signatures, c.global_dim)

    def _camera_rotation(self, direction: Direction) -> np.ndarray:
        """Rows are the camera axes (right, down, forward) in world coordinates."""
        a = math.radians(direction.degrees)
        forward = np.array([math.cos(a), 0.0, math.sin(a)])
        right = np.array([-math.sin(a), 0.0, math.cos(a)])
        down = np.array([0.0, -1.0, 0.0])
        return np.stack([right, down, forward])

    def _project_landmarks(
        self, location: FloorPoint, direction: Direction
    ) -> list[LocalFeature]:
        c = self.config
        w, h = c.image_size
        center = np.array([location.x, CAMERA_HEIGHT, location.y])
        cam = (self.landmark_positions - center) @ self._camera_rotation(direction).T
        depth = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal * cam[:, 0] / depth + w / 2.0
            v = self.focal * cam[:, 1] / depth + h / 2.0
        visible = (depth > MIN_DEPTH) & (u >= 0) & (u < w) & (v >= 0) & (v < h)
        ids = np.flatnonzero(visible)
        ids = ids[np.argsort(depth[ids], kind="stable")][: c.max_features]
        return [
            LocalFeature(
                keypoint=(float(u[i]), float(v[i])),
                descriptor=self.local_signatures[i],
                landmark_id=int(i),
            )
            for i in ids
        ]

    # -- reference trajectories ---------------------------------------------

    def serpentine_poses(
        self, spacing: float = 5.0, margin: float = 4.0
    ) -> list[tuple[FloorPoint, Direction]]:
        """Walk the field in lawn-mower rows, heading along the travel direction."""
        c = self.config
        xs = np.arange(margin, c.width - margin + 1e-9, spacing)
        ys = np.arange(margin, c.height - margin + 1e-9, spacing)
        poses = []
        for row, y in enumerate(ys):
            cols = xs if row % 2 == 0 else xs[::-1]
            heading = Direction(0.0) if row % 2 == 0 else Direction(180.0)
            poses.extend((FloorPoint(float(x), float(y)), heading) for x in cols)
        return poses


def make_frames(
    world: SyntheticWorld,
    poses: list[tuple[FloorPoint, Direction]],
    m: int,
    theta: float,
) -> list[FrameRecord]:
    """Observe every slice direction at every pose, one FrameRecord per pose."""
    frames = []
    for i, (location, heading) in enumerate(poses):
        slices = tuple(
            world.observe(location, heading.rotated(t * theta)) for t in range(1, m + 1)
        )
        frames.append(
            FrameRecord(
                frame_id=i,
                position=MapPoint3(location.x, CAMERA_HEIGHT, location.y),
                heading=heading,
                slices=slices,
            )
        )
    return frames


def build_world_map(
    world: SyntheticWorld,
    name: str = "synthetic",
    m: int = 18,
    theta: float = 20.0,
    spacing: float = 5.0,
    scale_ft_per_px: float = 1.0,
    min_features: int = 30,
    boundaries: tuple[Boundary, ...] = (),
    seed: int | None = None,
) -> TopometricMap:
    """Map the whole field along a serpentine trajectory.

    When ``seed`` is given it lands in the map metadata together with the
    world configuration, so tools can reconstruct the exact world later.
    """
    frames = make_frames(world, world.serpentine_poses(spacing), m, theta)
    tmap = assemble_map(
        name=name,
        frames=frames,
        transform=IDENTITY_ALIGNMENT,
        landmarks=world.landmarks(),
        scale_ft_per_px=scale_ft_per_px,
        global_dim=world.config.global_dim,
        local_dim=world.config.local_dim,
        m=m,
        theta=theta,
        min_features=min_features,
        boundaries=boundaries,
    )
    if seed is not None:
        tmap.metadata["synthetic"] = {
            "seed": seed,
            "spacing": spacing,
            "world": {
                **{k: getattr(world.config, k) for k in (
                    "width", "height", "n_landmarks", "global_dim", "local_dim",
                    "fov_deg", "max_features", "distance_falloff", "angle_falloff",
                )},
                "image_size": list(world.config.image_size),
            },
        }
    return tmap


def world_from_metadata(metadata: dict) -> SyntheticWorld | None:
    """Reconstruct the world a map was built from, if the map recorded one."""
    info = metadata.get("synthetic")
    if not info:
        return None
    raw = dict(info["world"])
    raw["image_size"] = tuple(raw["image_size"])
    return SyntheticWorld(WorldConfig(**raw), seed=info["seed"])
