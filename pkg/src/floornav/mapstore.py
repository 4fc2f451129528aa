"""The topometric map: reference images, landmarks, boundaries, destinations.

A :class:`TopometricMap` is treated as an immutable value.  Every mutating
operation returns a fresh instance with the version counter bumped, so
concurrent readers holding an older version never observe partial edits.
Serialization is a directory: ``map.json`` (metadata, geometry, graph inputs)
plus a descriptor manifest/blob pair and an optional grayscale floor-plan PNG.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np
from PIL import Image

from .descriptors import (
    DescriptorRecord,
    LocalFeature,
    ingest_descriptor_files,
    write_descriptor_files,
)
from .errors import (
    DuplicateName,
    EmptyRaster,
    FormatError,
    InvalidSlicing,
    UnknownBoundary,
    UnknownImage,
    VersionUnsupported,
)
from .geometry import Direction, FloorPoint, FloorTransform, MapPoint3, slice_directions

if TYPE_CHECKING:
    from .localization import LocalizationResult

MAP_FORMAT = "floornav-map"
MAP_FORMAT_VERSION = 1

ORIGIN_MAPPED = "mapped"
ORIGIN_EVOLVED = "evolved"

BOUNDARY_EXTRACTED = "extracted"
BOUNDARY_MANUAL = "manual"

# Evolution gate: only queries that located via the weighted average on the
# first retrieval attempt, with a well-supported pose, may join the database.
EVOLVE_MIN_PNP_INLIERS = 50


@dataclass(frozen=True)
class Boundary:
    """A floor-plan segment that blocks navigation."""

    a: FloorPoint
    b: FloorPoint
    source: str = BOUNDARY_MANUAL

    def __post_init__(self):
        if self.a.distance_to(self.b) == 0.0:
            raise ValueError("boundary segment has zero length")
        if self.source not in (BOUNDARY_EXTRACTED, BOUNDARY_MANUAL):
            raise ValueError(f"unknown boundary source {self.source!r}")


@dataclass(frozen=True)
class Destination:
    name: str
    reference_image_id: int


@dataclass(frozen=True)
class Landmark:
    id: int
    position: MapPoint3
    floor_position: FloorPoint | None = None


@dataclass(eq=False)
class ReferenceImage:
    """One perspective slice in the reference database.  Treat as immutable."""

    id: int
    frame_id: int | None
    slice_index: int | None
    location: FloorPoint
    direction: Direction
    global_desc: np.ndarray
    locals: list[LocalFeature]
    origin: str = ORIGIN_MAPPED
    evidence: dict | None = None

    def __post_init__(self):
        if self.origin not in (ORIGIN_MAPPED, ORIGIN_EVOLVED):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.origin == ORIGIN_EVOLVED and not self.evidence:
            raise ValueError("evolved images must carry admission evidence")


@dataclass(frozen=True)
class SliceRecord:
    """Descriptors of one perspective slice before it becomes a ReferenceImage."""

    global_desc: np.ndarray
    locals: list[LocalFeature]


@dataclass(frozen=True)
class FrameRecord:
    """One source panorama frame: reconstruction pose plus per-slice descriptors.

    ``slices[t-1]`` holds slice t (t = 1..m); None marks a slice that was not
    extracted.
    """

    frame_id: int
    position: MapPoint3
    heading: Direction
    slices: tuple[SliceRecord | None, ...]


@dataclass(eq=False)
class TopometricMap:
    name: str
    scale_ft_per_px: float
    global_dim: int
    local_dim: int
    images: dict[int, ReferenceImage] = field(default_factory=dict)
    landmarks: dict[int, Landmark] = field(default_factory=dict)
    boundaries: dict[int, Boundary] = field(default_factory=dict)
    destinations: dict[str, Destination] = field(default_factory=dict)
    transform: FloorTransform | None = None
    frame_positions: dict[int, MapPoint3] = field(default_factory=dict)
    floor_plan_path: str | None = None
    floor_plan: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    version: int = 1

    def __post_init__(self):
        if self.scale_ft_per_px <= 0 or not math.isfinite(self.scale_ft_per_px):
            raise ValueError(f"scale must be positive feet per pixel, got {self.scale_ft_per_px}")
        self.validate()

    # -- integrity ----------------------------------------------------------

    def validate(self) -> None:
        """Check every cross-reference; raises on a broken one."""
        for dest in self.destinations.values():
            if dest.reference_image_id not in self.images:
                raise UnknownImage(
                    f"destination {dest.name!r} references missing image {dest.reference_image_id}"
                )
        for img in self.images.values():
            for feat in img.locals:
                if feat.landmark_id is not None and feat.landmark_id not in self.landmarks:
                    raise ValueError(
                        f"image {img.id} links to missing landmark {feat.landmark_id}"
                    )

    def image_ids(self) -> list[int]:
        return sorted(self.images)

    def _bump(self, **changes) -> "TopometricMap":
        return replace(self, version=self.version + 1, **changes)

    # -- mutations (each returns a new version) -----------------------------

    def with_boundary_edits(
        self,
        additions: Iterable[Boundary] = (),
        deletions: Iterable[int] = (),
    ) -> "TopometricMap":
        """Apply boundary additions and deletions in one atomic step.

        Deletions are resolved against the current version before additions
        receive fresh ids, so a single call cannot delete what it adds.
        """
        boundaries = dict(self.boundaries)
        for bid in deletions:
            if bid not in boundaries:
                raise UnknownBoundary(f"no boundary with id {bid}")
            del boundaries[bid]
        next_id = max(self.boundaries, default=-1) + 1
        for b in additions:
            boundaries[next_id] = b
            next_id += 1
        return self._bump(boundaries=boundaries)

    def with_destination(self, reference_image_id: int, name: str) -> "TopometricMap":
        if reference_image_id not in self.images:
            raise UnknownImage(f"no reference image with id {reference_image_id}")
        if name in self.destinations:
            raise DuplicateName(f"destination name {name!r} already in use")
        destinations = dict(self.destinations)
        destinations[name] = Destination(name, reference_image_id)
        return self._bump(destinations=destinations)

    def with_alignment(self, transform: FloorTransform) -> "TopometricMap":
        """Adopt a new floor alignment and reproject frames and landmarks.

        Evolved images have no reconstruction-frame pose (their location came
        from localization), so realignment leaves them in place.
        """
        images = dict(self.images)
        for img in self.images.values():
            if img.frame_id is not None and img.frame_id in self.frame_positions:
                loc = transform.apply(self.frame_positions[img.frame_id])
                images[img.id] = replace_image(img, location=loc)
        landmarks = {
            lid: Landmark(lid, lm.position, transform.apply(lm.position))
            for lid, lm in self.landmarks.items()
        }
        return self._bump(images=images, landmarks=landmarks, transform=transform)

    def with_images(self, images: dict[int, ReferenceImage]) -> "TopometricMap":
        return self._bump(images=dict(images))

    def with_evolved_image(
        self,
        global_desc: np.ndarray,
        locals: list[LocalFeature],
        location: FloorPoint,
        direction: Direction,
        evidence: dict,
    ) -> tuple["TopometricMap", int]:
        new_id = max(self.images, default=-1) + 1
        img = ReferenceImage(
            id=new_id,
            frame_id=None,
            slice_index=None,
            location=location,
            direction=direction,
            global_desc=global_desc,
            locals=list(locals),
            origin=ORIGIN_EVOLVED,
            evidence=evidence,
        )
        images = dict(self.images)
        images[new_id] = img
        return self._bump(images=images), new_id


def replace_image(img: ReferenceImage, **changes) -> ReferenceImage:
    kwargs = dict(
        id=img.id,
        frame_id=img.frame_id,
        slice_index=img.slice_index,
        location=img.location,
        direction=img.direction,
        global_desc=img.global_desc,
        locals=img.locals,
        origin=img.origin,
        evidence=img.evidence,
    )
    kwargs.update(changes)
    return ReferenceImage(**kwargs)


# --- database construction --------------------------------------------------


def build_reference_database(
    frames: Iterable[FrameRecord],
    m: int,
    theta: float,
    min_features: int,
    transform: FloorTransform,
) -> list[ReferenceImage]:
    """Slice frames into reference images, dropping feature-poor slices.

    Slice t of a frame heading alpha faces alpha + t * theta; slices whose
    local feature count falls below ``min_features`` are filtered out to avoid
    perceptual aliasing.  Image ids are assigned sequentially in (frame,
    slice) order.

    Raises:
        InvalidSlicing: when m * theta does not cover the full circle.
    """
    images: list[ReferenceImage] = []
    next_id = 0
    for frame in frames:
        directions = slice_directions(frame.heading, m, theta)
        if len(frame.slices) != m:
            raise InvalidSlicing(
                f"frame {frame.frame_id} has {len(frame.slices)} slices, expected {m}"
            )
        location = transform.apply(frame.position)
        for t, rec in enumerate(frame.slices, start=1):
            if rec is None or len(rec.locals) < min_features:
                continue
            images.append(
                ReferenceImage(
                    id=next_id,
                    frame_id=frame.frame_id,
                    slice_index=t,
                    location=location,
                    direction=directions[t - 1],
                    global_desc=rec.global_desc,
                    locals=rec.locals,
                )
            )
            next_id += 1
    return images


def project_map(
    transform: FloorTransform,
    frame_positions: dict[int, MapPoint3],
    landmarks: Iterable[Landmark],
) -> tuple[dict[int, FloorPoint], list[Landmark]]:
    """Project frame poses and landmarks onto the floor plan."""
    locations = {fid: transform.apply(pos) for fid, pos in frame_positions.items()}
    projected = [Landmark(lm.id, lm.position, transform.apply(lm.position)) for lm in landmarks]
    return locations, projected


def assemble_map(
    name: str,
    frames: list[FrameRecord],
    transform: FloorTransform,
    landmarks: Iterable[Landmark],
    scale_ft_per_px: float,
    global_dim: int,
    local_dim: int,
    m: int,
    theta: float,
    min_features: int = 100,
    boundaries: Iterable[Boundary] = (),
    floor_plan: np.ndarray | None = None,
) -> TopometricMap:
    """Build a complete map from frame records plus alignment and plan data."""
    images = build_reference_database(frames, m, theta, min_features, transform)
    _, projected = project_map(transform, {f.frame_id: f.position for f in frames}, landmarks)
    return TopometricMap(
        name=name,
        scale_ft_per_px=scale_ft_per_px,
        global_dim=global_dim,
        local_dim=local_dim,
        images={img.id: img for img in images},
        landmarks={lm.id: lm for lm in projected},
        boundaries={i: b for i, b in enumerate(boundaries)},
        transform=transform,
        frame_positions={f.frame_id: f.position for f in frames},
        floor_plan=floor_plan,
        floor_plan_path="floorplan.png" if floor_plan is not None else None,
    )


# --- boundary extraction ----------------------------------------------------


def extract_boundaries(
    floor_plan: np.ndarray,
    min_len: int,
    dark_threshold: int = 128,
) -> list[Boundary]:
    """Detect axis-aligned dark-pixel runs in a floor-plan raster as boundaries.

    A run of n dark pixels spans n pixel widths: endpoints sit on the outer
    pixel edges, so a 50-pixel run yields a segment of length 50.  Rows are
    scanned for horizontal runs, columns for vertical ones; runs shorter than
    ``min_len`` pixels are ignored.
    """
    plan = np.asarray(floor_plan)
    if plan.size == 0:
        raise EmptyRaster("floor plan raster is empty")
    dark = plan < dark_threshold

    segments: list[Boundary] = []

    def _runs(mask_1d: np.ndarray):
        padded = np.concatenate([[0], mask_1d.astype(np.int8), [0]])
        d = np.diff(padded)
        starts = np.flatnonzero(d == 1)
        ends = np.flatnonzero(d == -1)  # exclusive
        return zip(starts, ends)

    for y in range(dark.shape[0]):
        for x0, x1 in _runs(dark[y]):
            if x1 - x0 >= min_len:
                segments.append(
                    Boundary(
                        FloorPoint(x0 - 0.5, float(y)),
                        FloorPoint(x1 - 0.5, float(y)),
                        BOUNDARY_EXTRACTED,
                    )
                )
    for x in range(dark.shape[1]):
        for y0, y1 in _runs(dark[:, x]):
            if y1 - y0 >= min_len:
                segments.append(
                    Boundary(
                        FloorPoint(float(x), y0 - 0.5),
                        FloorPoint(float(x), y1 - 0.5),
                        BOUNDARY_EXTRACTED,
                    )
                )
    return segments


# --- map evolution ----------------------------------------------------------


def evolve_map(
    tmap: TopometricMap,
    query_global: np.ndarray,
    query_locals: list[LocalFeature],
    result: "LocalizationResult",
    min_pnp_inliers: int = EVOLVE_MIN_PNP_INLIERS,
) -> tuple[TopometricMap, int | None]:
    """Admit a localized query into the database when the confidence gate passes.

    The gate is deliberately conservative to avoid poisoning the map: the
    weighted-average rung must have succeeded on the first retrieval attempt
    (no K growth, no largest-match fallback) and the PnP direction must be
    supported by at least ``min_pnp_inliers`` inliers.  Rejection is a normal
    outcome and returns the map unchanged.
    """
    if (
        result.location is None
        or result.method != "weighted_average"
        or result.retries > 0
        or result.direction is None
        or result.pnp_inliers < min_pnp_inliers
    ):
        return tmap, None
    evidence = {
        "method": str(result.method),
        "k_used": result.k_used,
        "pnp_inliers": result.pnp_inliers,
        "sum_matches": result.sum_matches,
        "admitted_at": time.time(),
    }
    return tmap.with_evolved_image(
        query_global, query_locals, result.location, result.direction, evidence
    )


# --- persistence ------------------------------------------------------------


def _point2(p: FloorPoint) -> list[float]:
    return [p.x, p.y]


def _point3(p: MapPoint3) -> list[float]:
    return [p.x, p.y, p.z]


def save_map(tmap: TopometricMap, path: str | Path) -> None:
    """Write a map directory: map.json, descriptor manifest + blob, floor plan."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    ordered = [tmap.images[i] for i in tmap.image_ids()]
    write_descriptor_files(
        root / "descriptors.json",
        [DescriptorRecord(img.id, img.global_desc, img.locals) for img in ordered],
        tmap.global_dim,
        tmap.local_dim,
    )

    doc = {
        "format": MAP_FORMAT,
        "format_version": MAP_FORMAT_VERSION,
        "name": tmap.name,
        "scale_ft_per_px": tmap.scale_ft_per_px,
        "version": tmap.version,
        "global_dim": tmap.global_dim,
        "local_dim": tmap.local_dim,
        "transform": None if tmap.transform is None else tmap.transform.matrix.tolist(),
        "floor_plan": tmap.floor_plan_path,
        "metadata": tmap.metadata,
        "descriptor_manifest": "descriptors.json",
        "frame_positions": {str(fid): _point3(p) for fid, p in tmap.frame_positions.items()},
        "images": [
            {
                "id": img.id,
                "frame_id": img.frame_id,
                "slice_index": img.slice_index,
                "location": _point2(img.location),
                "direction": img.direction.degrees,
                "origin": img.origin,
                "evidence": img.evidence,
            }
            for img in ordered
        ],
        "landmarks": [
            {
                "id": lm.id,
                "position": _point3(lm.position),
                "floor_position": None if lm.floor_position is None else _point2(lm.floor_position),
            }
            for lm in sorted(tmap.landmarks.values(), key=lambda l: l.id)
        ],
        "boundaries": [
            {"id": bid, "a": _point2(b.a), "b": _point2(b.b), "source": b.source}
            for bid, b in sorted(tmap.boundaries.items())
        ],
        "destinations": [
            {"name": d.name, "reference_image_id": d.reference_image_id}
            for d in tmap.destinations.values()
        ],
    }
    (root / "map.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")

    if tmap.floor_plan is not None and tmap.floor_plan_path:
        Image.fromarray(tmap.floor_plan.astype(np.uint8), mode="L").save(
            root / tmap.floor_plan_path
        )


def load_map(path: str | Path) -> TopometricMap:
    """Load a map directory written by :func:`save_map`.

    Raises:
        FormatError: missing or malformed map.json, or descriptors that do not
            line up with the image list.
        VersionUnsupported: a format_version newer than this code understands.
    """
    root = Path(path)
    try:
        doc = json.loads((root / "map.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable map.json in {root}: {exc}") from exc
    if doc.get("format") != MAP_FORMAT:
        raise FormatError(f"not a map directory: {root}")
    if int(doc.get("format_version", -1)) > MAP_FORMAT_VERSION:
        raise VersionUnsupported(f"map format_version {doc['format_version']} is newer than supported")

    records = ingest_descriptor_files(root / doc["descriptor_manifest"])
    by_id = {rec.image_id: rec for rec in records}

    images: dict[int, ReferenceImage] = {}
    for entry in doc["images"]:
        rec = by_id.get(entry["id"])
        if rec is None:
            raise FormatError(f"image {entry['id']} missing from descriptor files")
        images[entry["id"]] = ReferenceImage(
            id=entry["id"],
            frame_id=entry["frame_id"],
            slice_index=entry["slice_index"],
            location=FloorPoint(*entry["location"]),
            direction=Direction(entry["direction"]),
            global_desc=rec.global_desc,
            locals=rec.locals,
            origin=entry["origin"],
            evidence=entry.get("evidence"),
        )

    landmarks = {
        e["id"]: Landmark(
            e["id"],
            MapPoint3(*e["position"]),
            None if e["floor_position"] is None else FloorPoint(*e["floor_position"]),
        )
        for e in doc["landmarks"]
    }
    boundaries = {
        e["id"]: Boundary(FloorPoint(*e["a"]), FloorPoint(*e["b"]), e["source"])
        for e in doc["boundaries"]
    }
    destinations = {
        e["name"]: Destination(e["name"], e["reference_image_id"]) for e in doc["destinations"]
    }

    floor_plan = None
    if doc.get("floor_plan"):
        plan_path = root / doc["floor_plan"]
        if plan_path.exists():
            floor_plan = np.asarray(Image.open(plan_path).convert("L"))

    return TopometricMap(
        name=doc["name"],
        scale_ft_per_px=doc["scale_ft_per_px"],
        global_dim=doc["global_dim"],
        local_dim=doc["local_dim"],
        images=images,
        landmarks=landmarks,
        boundaries=boundaries,
        destinations=destinations,
        transform=None if doc["transform"] is None else FloorTransform(np.array(doc["transform"])),
        frame_positions={
            int(fid): MapPoint3(*pos) for fid, pos in doc.get("frame_positions", {}).items()
        },
        floor_plan_path=doc.get("floor_plan"),
        floor_plan=floor_plan,
        metadata=doc.get("metadata", {}),
        version=doc["version"],
    )
