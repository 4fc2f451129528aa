"""Regenerate the UI test fixtures from a live engine build.

Run from the repository root after any server-side change that touches the
wire format:

    python3 frontend/scripts/regen_fixtures.py

Everything the UI tests assert against (map summaries, alignment responses,
the displayed RMS string, a full evaluation report) is captured here from
real /v1 responses, so the fixtures stay bit-identical to what a browser
would receive.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from floornav.evaluation import run_sweep, synthetic_queries
from floornav.pnp import PinholeCamera
from floornav.service import MapRegistry, create_app
from floornav.synthetic import SyntheticWorld, WorldConfig, build_world_map

OUT = Path(__file__).resolve().parent.parent / "fixtures"

ALIGN_PAIRS = [
    {"reconstruction_point": [0.0, 0.0, 0.0], "floor_point": [0.0, 0.0]},
    {"reconstruction_point": [1.0, 0.0, 0.0], "floor_point": [2.0, 0.0]},
    {"reconstruction_point": [0.0, 0.0, 1.0], "floor_point": [0.0, 2.0]},
    {"reconstruction_point": [1.0, 0.0, 1.0], "floor_point": [2.0, 2.1]},
    {"reconstruction_point": [2.0, 0.0, 0.5], "floor_point": [4.1, 0.9]},
]


def write(name: str, payload: dict) -> None:
    (OUT / name).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    print(f"wrote fixtures/{name}")


def main() -> None:
    world = SyntheticWorld(WorldConfig(width=20.0, height=15.0), seed=3)
    tmap = build_world_map(world, m=6, theta=60.0, spacing=5.0, min_features=30, seed=3)
    registry = MapRegistry()
    map_id = registry.add_map(tmap)
    client = TestClient(create_app(registry))

    detail = client.get(f"/v1/maps/{map_id}")
    assert detail.status_code == 200, detail.text
    base_version = detail.json()["version"]

    edit = client.post(
        f"/v1/maps/{map_id}/boundaries",
        json={
            "base_version": base_version,
            "add": [
                {"a": [2.0, 2.0], "b": [18.0, 2.0]},
                {"a": [18.0, 2.0], "b": [18.0, 13.0]},
            ],
        },
    )
    assert edit.status_code == 200, edit.text

    some_image = detail.json()["images"][0]["id"]
    dest = client.post(
        f"/v1/maps/{map_id}/destinations",
        json={
            "base_version": edit.json()["version"],
            "reference_image_id": some_image,
            "name": "entrance",
        },
    )
    assert dest.status_code == 200, dest.text

    loaded = client.get(f"/v1/maps/{map_id}").json()
    write("map_detail.json", loaded)

    align = client.post(
        f"/v1/maps/{map_id}/align",
        json={"base_version": loaded["version"], "correspondences": ALIGN_PAIRS},
    )
    assert align.status_code == 200, align.text
    body = align.json()
    write(
        "align_round_trip.json",
        {
            "request": {"correspondences": ALIGN_PAIRS},
            "response": body,
            # what the server-side tooling prints for this fixture; the UI
            # must render the identical string
            "rms_display": f"{body['rms']:.3f}",
            "residual_displays": [f"{r:.3f}" for r in body["residuals"]],
        },
    )

    study_world = SyntheticWorld(WorldConfig(width=40.0, height=30.0), seed=7)
    study_map = build_world_map(
        study_world, m=18, theta=20.0, spacing=5.0, min_features=30, seed=7
    )
    camera = PinholeCamera.from_fov(
        study_world.config.fov_deg, *study_world.config.image_size
    )
    report = run_sweep(
        study_map,
        synthetic_queries(study_world, seed=17),
        alphas=[1, 2, 4, 8],
        betas=[1],
        camera=camera,
    )
    write("eval_report.json", report.to_json_dict())


if __name__ == "__main__":
    main()
