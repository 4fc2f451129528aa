"""Descriptor types, matching, and the on-disk descriptor format.

Global descriptors summarize a whole image for retrieval; local features are
keypoints with patch descriptors, optionally linked to a 3D landmark.  Real
extractor networks stay outside this package: descriptors arrive either from
the synthetic provider or from precomputed files in the format below.

File format (one manifest + one blob):
  manifest (UTF-8 JSON): format tag, version, global_dim, local_dim, blob
    filename, and per-image records {image_id, global_descriptor_offset,
    keypoint_count}.  Offsets are byte offsets into the blob.
  blob: all global descriptors as 32-bit little-endian floats, in manifest
    order, followed by each image's keypoint records in the same order.
    One keypoint record = u (f32), v (f32), local_dim floats, landmark id
    (signed 32-bit little-endian, -1 = unlinked).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, FormatError

DEFAULT_GLOBAL_DIM = 32768
DEFAULT_LOCAL_DIM = 256

MANIFEST_FORMAT = "floornav-descriptors"
MANIFEST_VERSION = 1

_F32 = np.dtype("<f4")
_I32 = np.dtype("<i4")


def as_descriptor(vec, dim: int | None = None) -> np.ndarray:
    """Validate and convert a descriptor vector to little-endian float32."""
    v = np.ascontiguousarray(vec, dtype=_F32).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("descriptor contains non-finite components")
    return v


def descriptor_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two global descriptors."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"descriptor dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


@dataclass(eq=False)
class LocalFeature:
    """A keypoint (u, v) with its patch descriptor and optional landmark link."""

    keypoint: tuple[float, float]
    descriptor: np.ndarray
    landmark_id: int | None = None

    def __post_init__(self):
        u, v = self.keypoint
        if not (np.isfinite(u) and np.isfinite(v)):
            raise ValueError(f"keypoint must be finite, got {self.keypoint}")
        self.descriptor = as_descriptor(self.descriptor)


@dataclass(frozen=True)
class MatchSet:
    """One-to-one index pairs (query feature, reference feature)."""

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        qs = [p[0] for p in self.pairs]
        rs = [p[1] for p in self.pairs]
        if len(set(qs)) != len(qs) or len(set(rs)) != len(rs):
            raise ValueError("match set is not one-to-one")

    @property
    def count(self) -> int:
        return len(self.pairs)

    def swapped(self) -> "MatchSet":
        return MatchSet(tuple((r, q) for q, r in self.pairs))


class Matcher(Protocol):
    """Pluggable local-feature matcher (stateless after construction)."""

    def match(self, query: list[LocalFeature], reference: list[LocalFeature]) -> MatchSet: ...


def _stack_descriptors(features: list[LocalFeature]) -> np.ndarray:
    if not features:
        return np.empty((0, 0), dtype=np.float64)
    dims = {f.descriptor.shape[0] for f in features}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent local descriptor dimensions: {sorted(dims)}")
    return np.stack([f.descriptor for f in features]).astype(np.float64)


def match_local_features(
    query: list[LocalFeature],
    reference: list[LocalFeature],
    ratio: float = 0.8,
) -> MatchSet:
    """Mutual-nearest-neighbor matching with a ratio test on both sides.

    A pair (i, j) is kept when j is i's nearest reference, i is j's nearest
    query, and each side's nearest distance beats its second-nearest by the
    ratio.  The ratio test is skipped on a side with fewer than two features.
    Symmetric: swapping arguments flips the pair orientation, nothing else.
    """
    if not query or not reference:
        return MatchSet()
    dq = _stack_descriptors(query)
    dr = _stack_descriptors(reference)
    if dq.shape[1] != dr.shape[1]:
        raise DimensionMismatch(
            f"local descriptor dimensions differ: {dq.shape[1]} vs {dr.shape[1]}"
        )
    dist = cdist(dq, dr)

    nn_of_q = np.argmin(dist, axis=1)
    nn_of_r = np.argmin(dist, axis=0)

    def _passes_ratio(values: np.ndarray, best_idx: int) -> bool:
        if values.shape[0] < 2:
            return True
        best = values[best_idx]
        second = np.min(np.delete(values, best_idx))
        return bool(best < ratio * second)

    pairs = []
    for i, j in enumerate(nn_of_q):
        if nn_of_r[j] != i:
            continue
        if not _passes_ratio(dist[i, :], j):
            continue
        if not _passes_ratio(dist[:, j], i):
            continue
        pairs.append((i, int(j)))
    return MatchSet(tuple(pairs))


@dataclass
class MutualNearestMatcher:
    """Default matcher: mutual NN with a Lowe-style ratio test."""

    ratio: float = 0.8

    def match(self, query: list[LocalFeature], reference: list[LocalFeature]) -> MatchSet:
        return match_local_features(query, reference, ratio=self.ratio)


@dataclass
class PrecomputedMatcher:
    """Matcher backed by externally computed pairs, keyed by reference image id.

    Drop-in for real match files: ``table[ref_image_id]`` holds the index
    pairs for the current query against that reference image.
    """

    table: dict[int, MatchSet] = field(default_factory=dict)
    ref_image_id: int | None = None

    def for_image(self, ref_image_id: int) -> "PrecomputedMatcher":
        return PrecomputedMatcher(self.table, ref_image_id)

    def match(self, query: list[LocalFeature], reference: list[LocalFeature]) -> MatchSet:
        if self.ref_image_id is None:
            raise ValueError("PrecomputedMatcher needs for_image(ref_image_id) before match()")
        return self.table.get(self.ref_image_id, MatchSet())


# --- descriptor files -------------------------------------------------------


@dataclass(eq=False)
class DescriptorRecord:
    """One image's descriptors as read from / written to descriptor files."""

    image_id: int
    global_desc: np.ndarray
    locals: list[LocalFeature]


def _keypoint_record_size(local_dim: int) -> int:
    return (2 + local_dim) * 4 + 4  # u, v, descriptor floats, landmark id


def write_descriptor_files(
    manifest_path: str | Path,
    records: list[DescriptorRecord],
    global_dim: int,
    local_dim: int,
    blob_name: str | None = None,
) -> None:
    """Write the manifest + blob pair for a set of image descriptor records."""
    manifest_path = Path(manifest_path)
    if blob_name is None:
        blob_name = manifest_path.stem + ".bin"
    blob_path = manifest_path.parent / blob_name

    chunks: list[bytes] = []
    entries = []
    offset = 0
    for rec in records:
        g = as_descriptor(rec.global_desc, global_dim)
        chunks.append(g.tobytes())
        entries.append(
            {
                "image_id": int(rec.image_id),
                "global_descriptor_offset": offset,
                "keypoint_count": len(rec.locals),
            }
        )
        offset += global_dim * 4
    for rec in records:
        for feat in rec.locals:
            d = as_descriptor(feat.descriptor, local_dim)
            u, v = feat.keypoint
            chunks.append(np.array([u, v], dtype=_F32).tobytes())
            chunks.append(d.tobytes())
            lid = -1 if feat.landmark_id is None else int(feat.landmark_id)
            chunks.append(np.array([lid], dtype=_I32).tobytes())

    blob_path.write_bytes(b"".join(chunks))
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "global_dim": int(global_dim),
        "local_dim": int(local_dim),
        "blob": blob_name,
        "images": entries,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def ingest_descriptor_files(manifest_path: str | Path) -> list[DescriptorRecord]:
    """Read a manifest + blob pair back into per-image descriptor records.

    Raises:
        FormatError: malformed manifest, unknown format tag, or truncated blob
            (with the byte offset at which reading failed).
        DimensionMismatch: declared dimensions that are not positive.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable manifest {manifest_path}: {exc}") from exc

    if manifest.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"not a descriptor manifest: {manifest_path}")
    if manifest.get("version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported descriptor format version {manifest.get('version')}")
    global_dim = int(manifest["global_dim"])
    local_dim = int(manifest["local_dim"])
    if global_dim <= 0 or local_dim <= 0:
        raise DimensionMismatch(f"bad dimensions in manifest: {global_dim}, {local_dim}")

    blob = (manifest_path.parent / manifest["blob"]).read_bytes()
    images = manifest["images"]

    records: list[DescriptorRecord] = []
    for entry in images:
        off = int(entry["global_descriptor_offset"])
        end = off + global_dim * 4
        if end > len(blob):
            raise FormatError("blob truncated inside global descriptor", offset=len(blob))
        g = np.frombuffer(blob, dtype=_F32, count=global_dim, offset=off).copy()
        records.append(DescriptorRecord(int(entry["image_id"]), g, []))

    cursor = len(images) * global_dim * 4
    rec_size = _keypoint_record_size(local_dim)
    for entry, rec in zip(images, records):
        for _ in range(int(entry["keypoint_count"])):
            if cursor + rec_size > len(blob):
                raise FormatError("blob truncated inside keypoint records", offset=len(blob))
            uv = np.frombuffer(blob, dtype=_F32, count=2, offset=cursor)
            desc = np.frombuffer(blob, dtype=_F32, count=local_dim, offset=cursor + 8).copy()
            lid = int(np.frombuffer(blob, dtype=_I32, count=1, offset=cursor + 8 + local_dim * 4)[0])
            rec.locals.append(
                LocalFeature(
                    keypoint=(float(uv[0]), float(uv[1])),
                    descriptor=desc,
                    landmark_id=None if lid == -1 else lid,
                )
            )
            cursor += rec_size
    if cursor != len(blob):
        raise FormatError("trailing bytes after last keypoint record", offset=cursor)
    return records
