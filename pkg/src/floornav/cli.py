"""Command line entry points.

Verbs mirror the deployment workflow: build and edit maps, localize single
queries, run the offline simulated walk, produce evaluation reports, and
serve the HTTP API.  Machine-readable output is JSON on stdout; failures
print {"code", "message"} on stderr and exit non-zero.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import FloornavError, NotFound
from .evaluation import run_sweep, synthetic_queries
from .field_study import (
    EXPECTED_P_FRAME_RATE,
    EXPECTED_P_SLICE_RATE,
    direction_by_rates,
    location_by_frame_rate,
    location_by_slice_rate,
)
from .geometry import FloorPoint, MapPoint3, estimate_floor_transform, transform_residuals, transform_rms
from .localization import Localizer
from .mapstore import (
    Boundary,
    FrameRecord,
    SliceRecord,
    assemble_map,
    extract_boundaries,
    load_map,
    save_map,
)
from .navigation import build_nav_graph
from .pnp import PinholeCamera
from .simulate import SimConfig, run_study
from .synthetic import SyntheticWorld, WorldConfig, build_world_map, world_from_metadata


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=1))


def _load(map_dir: str):
    return load_map(map_dir)


def _camera_for(tmap) -> PinholeCamera:
    world = world_from_metadata(tmap.metadata)
    if world is not None:
        return PinholeCamera.from_fov(world.config.fov_deg, *world.config.image_size)
    return PinholeCamera.from_fov(75.0, 640, 360)


@click.group()
def cli():
    """Visual localization and wayfinding toolkit."""


# --- map ---------------------------------------------------------------------


@cli.group(name="map")
def map_group():
    """Build and edit topometric maps."""


@map_group.command("build")
@click.option("--out", required=True, type=click.Path(), help="map directory to write")
@click.option("--synthetic", "synthetic_seed", type=int, default=None,
              help="build from a seeded synthetic world instead of files")
@click.option("--frames", "frames_path", type=click.Path(exists=True), default=None,
              help="frame JSON: [{frame_id, position, heading_deg, slices: [image_id|null]}]")
@click.option("--descriptors", "manifest_path", type=click.Path(exists=True), default=None,
              help="descriptor manifest the frame slices reference")
@click.option("--landmarks", "landmarks_path", type=click.Path(exists=True), default=None,
              help="landmark JSON: [{id, position: [x,y,z]}]")
@click.option("--name", default="floor", show_default=True)
@click.option("--m", "m_slices", default=18, show_default=True)
@click.option("--theta", default=20.0, show_default=True)
@click.option("--min-features", default=100, show_default=True)
@click.option("--scale", default=1.0, show_default=True, help="feet per floor-plan pixel")
@click.option("--width", default=60.0, show_default=True, help="synthetic world width (ft)")
@click.option("--height", default=40.0, show_default=True, help="synthetic world height (ft)")
@click.option("--spacing", default=5.0, show_default=True, help="synthetic trajectory spacing (ft)")
def map_build(out, synthetic_seed, frames_path, manifest_path, landmarks_path, name,
              m_slices, theta, min_features, scale, width, height, spacing):
    """Slice frames into a reference database and write a map directory."""
    if synthetic_seed is not None:
        world = SyntheticWorld(WorldConfig(width=width, height=height), seed=synthetic_seed)
        tmap = build_world_map(
            world, name=name, m=m_slices, theta=theta, spacing=spacing,
            scale_ft_per_px=scale, min_features=min(min_features, 30),
            seed=synthetic_seed,
        )
    else:
        if not (frames_path and manifest_path):
            raise click.UsageError("provide --synthetic SEED or both --frames and --descriptors")
        tmap = _build_from_files(
            frames_path, manifest_path, landmarks_path, name,
            m_slices, theta, min_features, scale,
        )
    save_map(tmap, out)
    _echo_json({"map": str(out), "images": len(tmap.images), "version": tmap.version})


def _build_from_files(frames_path, manifest_path, landmarks_path, name,
                      m_slices, theta, min_features, scale):
    from .descriptors import ingest_descriptor_files
    from .geometry import Direction
    from .mapstore import Landmark

    records = {rec.image_id: rec for rec in ingest_descriptor_files(manifest_path)}
    doc = json.loads(Path(frames_path).read_text(encoding="utf-8"))
    frames = []
    for entry in doc["frames"]:
        slices = []
        for image_id in entry["slices"]:
            if image_id is None:
                slices.append(None)
                continue
            rec = records.get(image_id)
            if rec is None:
                raise NotFound(f"frame {entry['frame_id']} references missing image {image_id}")
            slices.append(SliceRecord(rec.global_desc, rec.locals))
        frames.append(
            FrameRecord(
                frame_id=entry["frame_id"],
                position=MapPoint3(*entry["position"]),
                heading=Direction(entry["heading_deg"]),
                slices=tuple(slices),
            )
        )
    landmarks = []
    if landmarks_path:
        for entry in json.loads(Path(landmarks_path).read_text(encoding="utf-8")):
            landmarks.append(Landmark(entry["id"], MapPoint3(*entry["position"])))
    sample = next(iter(records.values()))
    from .synthetic import IDENTITY_ALIGNMENT

    return assemble_map(
        name=name,
        frames=frames,
        transform=IDENTITY_ALIGNMENT,
        landmarks=landmarks,
        scale_ft_per_px=scale,
        global_dim=sample.global_desc.shape[0],
        local_dim=sample.locals[0].descriptor.shape[0] if sample.locals else 0,
        m=m_slices,
        theta=theta,
        min_features=min_features,
    )


@map_group.command("align")
@click.option("--map", "map_dir", required=True, type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help="JSON list of {reconstruction_point: [x,y,z], floor_point: [x,y]}")
def map_align(map_dir, pairs_path):
    """Fit the floor alignment from picked correspondences and reproject."""
    tmap = _load(map_dir)
    doc = json.loads(Path(pairs_path).read_text(encoding="utf-8"))
    pairs = [
        (MapPoint3(*e["reconstruction_point"]), FloorPoint(*e["floor_point"])) for e in doc
    ]
    transform = estimate_floor_transform(pairs)
    aligned = tmap.with_alignment(transform)
    save_map(aligned, map_dir)
    _echo_json(
        {
            "transform": transform.matrix.tolist(),
            "residuals": [float(r) for r in transform_residuals(transform, pairs)],
            "rms": transform_rms(transform, pairs),
            "version": aligned.version,
        }
    )


@map_group.command("boundaries")
@click.option("--map", "map_dir", required=True, type=click.Path(exists=True))
@click.option("--extract", is_flag=True, help="detect walls from the stored floor plan")
@click.option("--min-len", default=20, show_default=True, help="minimum wall run (px)")
@click.option("--add", "adds", multiple=True, metavar="X1,Y1,X2,Y2",
              help="manual boundary segment (repeatable)")
@click.option("--delete", "deletes", multiple=True, type=int, help="boundary id (repeatable)")
def map_boundaries(map_dir, extract, min_len, adds, deletes):
    """Extract, add, or delete boundary segments."""
    tmap = _load(map_dir)
    additions = []
    if extract:
        if tmap.floor_plan is None:
            raise NotFound(f"map {map_dir} has no stored floor plan to extract from")
        additions.extend(extract_boundaries(tmap.floor_plan, min_len))
    for spec in adds:
        x1, y1, x2, y2 = (float(v) for v in spec.split(","))
        additions.append(Boundary(FloorPoint(x1, y1), FloorPoint(x2, y2), "manual"))
    updated = tmap.with_boundary_edits(additions, deletes)
    save_map(updated, map_dir)
    _echo_json(
        {
            "version": updated.version,
            "boundaries": [
                {"id": bid, "a": [b.a.x, b.a.y], "b": [b.b.x, b.b.y], "source": b.source}
                for bid, b in sorted(updated.boundaries.items())
            ],
        }
    )


@map_group.command("destinations")
@click.option("--map", "map_dir", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", required=True, type=int)
@click.option("--name", required=True)
def map_destinations(map_dir, image_id, name):
    """Name a reference image as a navigation destination."""
    tmap = _load(map_dir)
    updated = tmap.with_destination(image_id, name)
    save_map(updated, map_dir)
    _echo_json(
        {
            "version": updated.version,
            "destinations": [
                {"name": d.name, "reference_image_id": d.reference_image_id}
                for d in updated.destinations.values()
            ],
        }
    )


# --- localize ----------------------------------------------------------------


@cli.command("localize")
@click.option("--map", "map_dir", required=True, type=click.Path(exists=True))
@click.option("--image", "image_id", type=int, default=None,
              help="self-query: localize a reference image's own descriptors")
@click.option("--query", "query_path", type=click.Path(exists=True), default=None,
              help="query payload JSON (same schema as the /v1 query endpoint)")
def localize_cmd(map_dir, image_id, query_path):
    """Localize one query against a map and print the fix."""
    tmap = _load(map_dir)
    localizer = Localizer(tmap, camera=_camera_for(tmap))
    if (image_id is None) == (query_path is None):
        raise click.UsageError("provide exactly one of --image or --query")
    if image_id is not None:
        if image_id not in tmap.images:
            raise NotFound(f"no reference image {image_id} in {map_dir}")
        img = tmap.images[image_id]
        result = localizer.localize(img.global_desc, img.locals)
    else:
        from .service import QueryRequest, _parse_query

        payload = QueryRequest(**json.loads(Path(query_path).read_text(encoding="utf-8")))
        global_desc, features = _parse_query(tmap, payload)
        result = localizer.localize(global_desc, features)
    _echo_json(
        {
            "location": [result.location.x, result.location.y],
            "direction": None if result.direction is None else result.direction.degrees,
            "method": result.method.value,
            "k_used": result.k_used,
            "retries": result.retries,
            "match_counts": {str(k): v for k, v in result.match_counts.items()},
            "pnp_inliers": result.pnp_inliers,
        }
    )


# --- navigate ----------------------------------------------------------------


@cli.command("navigate")
@click.option("--sim", is_flag=True, required=True,
              help="run the offline scripted-agent loop (no server needed)")
@click.option("--map", "map_dir", type=click.Path(exists=True), default=None,
              help="synthetic map directory (must carry world metadata)")
@click.option("--seed", default=0, show_default=True, help="world seed when no map is given")
@click.option("--runs", default=20, show_default=True)
@click.option("--period", default=1.0, show_default=True,
              help="seconds between captures (no claimed default; pick per deployment)")
@click.option("--speed", default=2.5, show_default=True, help="walking speed, ft/s")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="write per-run results JSON here")
def navigate_cmd(sim, map_dir, seed, runs, period, speed, out_path):
    """Closed-loop wayfinding simulation: observe, localize, guide, walk."""
    if map_dir is not None:
        tmap = _load(map_dir)
        world = world_from_metadata(tmap.metadata)
        if world is None:
            raise NotFound(f"map {map_dir} was not built from a synthetic world")
        spacing = tmap.metadata["synthetic"]["spacing"]
    else:
        world = SyntheticWorld(WorldConfig(), seed=seed)
        tmap = build_world_map(world, seed=seed)
        spacing = 5.0
    localizer = Localizer(tmap, camera=_camera_for(tmap))
    graph = build_nav_graph(tmap)
    config = SimConfig(step_ft=period * speed, node_spacing_ft=spacing)
    study = run_study(world, localizer, graph, runs=runs, seed=seed, config=config)
    summary = {
        "runs": runs,
        "successes": sum(r.success for r in study.results),
        "success_rate": study.success_rate,
        "mean_steps": float(np.mean([r.steps for r in study.results])),
    }
    if out_path:
        detail = [
            {
                "success": r.success,
                "steps": r.steps,
                "final_error_ft": r.final_error_ft,
                "destination_node": r.destination_node,
                "localization_failures": r.failures,
            }
            for r in study.results
        ]
        Path(out_path).write_text(
            json.dumps({"summary": summary, "runs": detail}, indent=1), encoding="utf-8"
        )
    _echo_json(summary)


# --- eval --------------------------------------------------------------------


@cli.group(name="eval")
def eval_group():
    """Accuracy studies and reports."""


@eval_group.command("sweep")
@click.option("--map", "map_dir", type=click.Path(exists=True), default=None,
              help="synthetic map directory to sweep")
@click.option("--fixtures", is_flag=True,
              help="report over the recorded field-study tables instead")
@click.option("--alpha", "alphas", default="1,5,10,15,20,25,30,40,50", show_default=True)
@click.option("--beta", "betas", default="1,2,3,4,5,6", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--queries-seed", default=17, show_default=True)
def eval_sweep(map_dir, fixtures, alphas, betas, out_dir, queries_seed):
    """Run the downsampling study and write CSV tables, JSON, and a figure."""
    from .report import write_report, write_table_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fixtures:
        _fixture_report(out)
        return
    if map_dir is None:
        raise click.UsageError("provide --map or --fixtures")
    tmap = _load(map_dir)
    world = world_from_metadata(tmap.metadata)
    if world is None:
        raise NotFound(f"map {map_dir} was not built from a synthetic world")
    queries = synthetic_queries(world, seed=queries_seed)
    report = run_sweep(
        tmap,
        queries,
        alphas=[int(a) for a in alphas.split(",")],
        betas=[int(b) for b in betas.split(",")],
        camera=_camera_for(tmap),
    )
    paths = write_report(report, out, tmap.floor_plan)
    from .evaluation import order_probability

    _echo_json(
        {
            "out": {k: str(v) for k, v in paths.items()},
            "p_location_by_alpha": order_probability(report.location_by_alpha),
            "mean_error_ft_full_density": float(
                np.nanmean(report.location_by_alpha.cells[:, 0])
            ),
        }
    )


def _fixture_report(out: Path) -> None:
    from .evaluation import order_probability
    from .report import write_table_csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    frame_table = location_by_frame_rate()
    slice_table = location_by_slice_rate()
    direction_table = direction_by_rates()
    write_table_csv(frame_table, out / "location_by_frame_rate.csv")
    write_table_csv(slice_table, out / "location_by_slice_rate.csv")
    write_table_csv(direction_table, out / "direction_by_rates.csv")

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(frame_table.col_labels, np.nanmean(frame_table.cells, axis=0), "o-")
    axes[0].set_xlabel("frame downsampling rate")
    axes[0].set_ylabel("mean location error (ft)")
    axes[1].plot(slice_table.col_labels, np.nanmean(slice_table.cells, axis=0), "o-")
    axes[1].set_xlabel("slice downsampling rate")
    axes[1].set_ylabel("mean location error (ft)")
    fig.tight_layout()
    fig.savefig(out / "error_vs_rate.png", dpi=120)
    plt.close(fig)

    payload = {
        "p_location_by_frame_rate": order_probability(frame_table),
        "p_location_by_slice_rate": order_probability(slice_table),
        "expected": {
            "frame_rate": EXPECTED_P_FRAME_RATE,
            "slice_rate": EXPECTED_P_SLICE_RATE,
        },
    }
    (out / "report.json").write_text(json.dumps(payload, indent=1), encoding="utf-8")
    _echo_json(payload)


# --- serve -------------------------------------------------------------------


@cli.command("serve")
@click.option("--bind", default=None, help="host:port (default from FLOORNAV_BIND)")
@click.option("--map-root", default=None, type=click.Path(),
              help="directory of map directories to preload (default FLOORNAV_MAP_ROOT)")
def serve_cmd(bind, map_root):
    """Run the HTTP API."""
    import os

    import uvicorn

    from .service import ENV_BIND, ENV_MAP_ROOT, bind_address, create_app

    if bind:
        os.environ[ENV_BIND] = bind
    if map_root:
        os.environ[ENV_MAP_ROOT] = str(map_root)
    host, port = bind_address()
    uvicorn.run(create_app(), host=host, port=port)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except FloornavError as exc:
        click.echo(json.dumps({"code": exc.code, "message": str(exc)}), err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)


if __name__ == "__main__":
    main()
