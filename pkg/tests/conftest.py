"""Shared fixtures.

The expensive pieces (a synthetic world and its mapped database) are built
once per session.  Maps are immutable value objects, so sharing them across
tests is safe; anything that needs a mutated map derives its own copy.
"""

from __future__ import annotations

import numpy as np
import pytest

from floornav.localization import Localizer
from floornav.navigation import build_nav_graph
from floornav.pnp import PinholeCamera
from floornav.service import encode_f32
from floornav.synthetic import SyntheticWorld, WorldConfig, build_world_map

SMALL_SEED = 7


@pytest.fixture(scope="session")
def small_world():
    return SyntheticWorld(WorldConfig(width=40.0, height=30.0), seed=SMALL_SEED)


@pytest.fixture(scope="session")
def small_map(small_world):
    return build_world_map(
        small_world, m=12, theta=30.0, spacing=5.0, min_features=30, seed=SMALL_SEED
    )


@pytest.fixture(scope="session")
def small_camera(small_world):
    cfg = small_world.config
    return PinholeCamera.from_fov(cfg.fov_deg, *cfg.image_size)


@pytest.fixture(scope="session")
def small_localizer(small_map, small_camera):
    return Localizer(small_map, camera=small_camera)


@pytest.fixture(scope="session")
def small_graph(small_map):
    return build_nav_graph(small_map)


def query_payload(tmap, slice_record) -> dict:
    """Wire-format query body for an observed slice (the /v1 query schema)."""
    descs = np.stack([f.descriptor for f in slice_record.locals]) if slice_record.locals \
        else np.zeros((0, tmap.local_dim), dtype=np.float32)
    return {
        "global_dim": tmap.global_dim,
        "global_b64": encode_f32(slice_record.global_desc),
        "locals": {
            "dim": tmap.local_dim,
            "keypoints": [list(f.keypoint) for f in slice_record.locals],
            "descriptors_b64": encode_f32(descs.reshape(-1)),
        },
    }
