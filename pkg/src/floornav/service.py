"""HTTP API (/v1) for map management and localization sessions.

Maps live in an in-process registry.  Every mutation goes through one lock
and swaps in a fresh map value, so reads are never torn; sessions pin the
map version that existed when they started and keep using it even while the
registry moves on.  Clients send descriptors, not images: global and local
descriptors travel as base64 little-endian float32 blobs with declared
dimensions.

Error responses always carry {"code", "message"}; codes are the stable
machine codes from the exception hierarchy.
"""

from __future__ import annotations

import base64
import os
import threading
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .descriptors import LocalFeature
from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    DuplicateName,
    EmptyDatabase,
    FloornavError,
    FormatError,
    LocalizationFailed,
    NotFound,
    TooFewPoints,
    Unreachable,
    UnknownBoundary,
    UnknownImage,
    VersionSkew,
)
from .geometry import (
    FloorPoint,
    MapPoint3,
    estimate_floor_transform,
    transform_residuals,
    transform_rms,
)
from .localization import LocalizationResult, Localizer
from .mapstore import Boundary, TopometricMap, evolve_map, load_map
from .navigation import NavGraph, Route, build_nav_graph, guide, shortest_route
from .pnp import PinholeCamera

ENV_BIND = "FLOORNAV_BIND"
ENV_MAP_ROOT = "FLOORNAV_MAP_ROOT"

ARRIVE_FT = 2.5

_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (LocalizationFailed, 422),
    (EmptyDatabase, 422),
    (NotFound, 404),
    (UnknownImage, 404),
    (UnknownBoundary, 404),
    (VersionSkew, 409),
    (DuplicateName, 409),
    (Unreachable, 409),
    (TooFewPoints, 400),
    (DegenerateConfiguration, 400),
    (DimensionMismatch, 400),
    (FormatError, 400),
]


def _status_for(exc: FloornavError) -> int:
    for etype, status in _STATUS_BY_ERROR:
        if isinstance(exc, etype):
            return status
    return 400


def decode_f32(b64: str, expected: int) -> np.ndarray:
    """Base64 little-endian float32 blob -> array of the declared length."""
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise FormatError(f"invalid base64 descriptor payload: {exc}") from exc
    arr = np.frombuffer(raw, dtype="<f4")
    if arr.size != expected:
        raise DimensionMismatch(
            f"descriptor payload holds {arr.size} floats, declared {expected}"
        )
    return arr.copy()


def encode_f32(arr: np.ndarray) -> str:
    return base64.b64encode(np.asarray(arr, dtype="<f4").tobytes()).decode("ascii")


# --- request models ---------------------------------------------------------


class CreateMapRequest(BaseModel):
    load_dir: str | None = None
    name: str | None = None
    scale_ft_per_px: float = 1.0
    global_dim: int = 512
    local_dim: int = 32


class BoundarySpec(BaseModel):
    a: tuple[float, float]
    b: tuple[float, float]
    source: str = "manual"


class BoundaryEditRequest(BaseModel):
    base_version: int
    add: list[BoundarySpec] = Field(default_factory=list)
    delete: list[int] = Field(default_factory=list)


class DestinationRequest(BaseModel):
    base_version: int
    reference_image_id: int
    name: str


class CorrespondenceSpec(BaseModel):
    reconstruction_point: tuple[float, float, float]
    floor_point: tuple[float, float]


class AlignRequest(BaseModel):
    base_version: int
    correspondences: list[CorrespondenceSpec]


class SessionRequest(BaseModel):
    map_id: str
    destination: str
    max_edge_len_ft: float = 15.0


class LocalPayload(BaseModel):
    dim: int
    keypoints: list[tuple[float, float]]
    descriptors_b64: str


class QueryRequest(BaseModel):
    global_dim: int
    global_b64: str
    locals: LocalPayload
    camera_fov_deg: float = 75.0
    camera_width: int = 640
    camera_height: int = 360


# --- registry ---------------------------------------------------------------


@dataclass
class Session:
    id: str
    map_id: str
    map_version: int
    destination_name: str
    localizer: Localizer
    graph: NavGraph
    route: Route | None = None
    next_index: int = 0
    last_result: LocalizationResult | None = None
    history: list[dict] = dc_field(default_factory=list)


class MapRegistry:
    """All served maps plus per-version caches, guarded by one lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._maps: dict[str, TopometricMap] = {}
        self._sessions: dict[str, Session] = {}
        self._localizers: dict[tuple[str, int], Localizer] = {}
        self._graphs: dict[tuple[str, int, float], NavGraph] = {}
        self._idempotent: dict[tuple[str, str, str], tuple[int, dict]] = {}
        self._counter = 0

    def load_root(self, root: str | Path) -> list[str]:
        """Register every map directory found directly under the root."""
        loaded = []
        root = Path(root)
        if not root.is_dir():
            return loaded
        for child in sorted(root.iterdir()):
            if (child / "map.json").is_file():
                loaded.append(self.add_map(load_map(child)))
        return loaded

    def add_map(self, tmap: TopometricMap) -> str:
        with self._lock:
            self._counter += 1
            map_id = f"m{self._counter}"
            self._maps[map_id] = tmap
            return map_id

    def get_map(self, map_id: str) -> TopometricMap:
        with self._lock:
            tmap = self._maps.get(map_id)
        if tmap is None:
            raise NotFound(f"no map with id {map_id}")
        return tmap

    def list_map_items(self) -> list[tuple[str, TopometricMap]]:
        with self._lock:
            return list(self._maps.items())

    def mutate(self, map_id: str, base_version: int, fn) -> TopometricMap:
        """Apply fn(current_map) -> new_map atomically, checking the version."""
        with self._lock:
            current = self._maps.get(map_id)
            if current is None:
                raise NotFound(f"no map with id {map_id}")
            if current.version != base_version:
                raise VersionSkew(
                    f"edit base version {base_version}, map is at {current.version}"
                )
            updated = fn(current)
            self._maps[map_id] = updated
            return updated

    def swap_if_current(self, map_id: str, expected: TopometricMap, new: TopometricMap) -> bool:
        with self._lock:
            if self._maps.get(map_id) is expected:
                self._maps[map_id] = new
                return True
            return False

    def localizer(self, map_id: str, tmap: TopometricMap, camera: PinholeCamera) -> Localizer:
        key = (map_id, tmap.version)
        with self._lock:
            cached = self._localizers.get(key)
            if cached is not None and cached.tmap is tmap and cached.camera == camera:
                return cached
        built = Localizer(tmap, camera=camera)
        with self._lock:
            self._localizers[key] = built
        return built

    def graph(self, map_id: str, tmap: TopometricMap, max_edge_len_ft: float) -> NavGraph:
        key = (map_id, tmap.version, max_edge_len_ft)
        with self._lock:
            cached = self._graphs.get(key)
        if cached is not None:
            return cached
        built = build_nav_graph(tmap, max_edge_len_ft)
        with self._lock:
            self._graphs[key] = built
        return built

    # sessions

    def add_session(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(f"no session with id {session_id}")
        return session

    # idempotency replay cache

    def replay(self, method: str, path: str, key: str | None):
        if key is None:
            return None
        with self._lock:
            return self._idempotent.get((method, path, key))

    def remember(self, method: str, path: str, key: str | None, status: int, body: dict):
        if key is None:
            return
        with self._lock:
            self._idempotent[(method, path, key)] = (status, body)


# --- serialization helpers --------------------------------------------------


def _map_summary(map_id: str, tmap: TopometricMap) -> dict:
    return {
        "id": map_id,
        "name": tmap.name,
        "version": tmap.version,
        "scale_ft_per_px": tmap.scale_ft_per_px,
        "global_dim": tmap.global_dim,
        "local_dim": tmap.local_dim,
        "transform": None if tmap.transform is None else tmap.transform.matrix.tolist(),
        "image_count": len(tmap.images),
        "images": [
            {
                "id": img.id,
                "location": [img.location.x, img.location.y],
                "direction": img.direction.degrees,
                "origin": img.origin,
            }
            for img in (tmap.images[i] for i in tmap.image_ids())
        ],
        "landmarks": [
            {
                "id": lm.id,
                "floor_position": None
                if lm.floor_position is None
                else [lm.floor_position.x, lm.floor_position.y],
            }
            for lm in sorted(tmap.landmarks.values(), key=lambda l: l.id)
        ],
        "boundaries": [
            {"id": bid, "a": [b.a.x, b.a.y], "b": [b.b.x, b.b.y], "source": b.source}
            for bid, b in sorted(tmap.boundaries.items())
        ],
        "destinations": [
            {"name": d.name, "reference_image_id": d.reference_image_id}
            for d in tmap.destinations.values()
        ],
    }


def _parse_query(tmap: TopometricMap, payload: QueryRequest):
    if payload.global_dim != tmap.global_dim:
        raise DimensionMismatch(
            f"query global dimension {payload.global_dim}, map uses {tmap.global_dim}"
        )
    if payload.locals.dim != tmap.local_dim:
        raise DimensionMismatch(
            f"query local dimension {payload.locals.dim}, map uses {tmap.local_dim}"
        )
    global_desc = decode_f32(payload.global_b64, payload.global_dim)
    n = len(payload.locals.keypoints)
    flat = decode_f32(payload.locals.descriptors_b64, n * payload.locals.dim)
    descs = flat.reshape(n, payload.locals.dim)
    features = [
        LocalFeature(keypoint=(float(u), float(v)), descriptor=descs[i])
        for i, (u, v) in enumerate(payload.locals.keypoints)
    ]
    return global_desc, features


# --- the app ----------------------------------------------------------------


def create_app(registry: MapRegistry | None = None) -> FastAPI:
    registry = registry if registry is not None else MapRegistry()
    root = os.environ.get(ENV_MAP_ROOT)
    if root:
        registry.load_root(root)

    app = FastAPI(title="floornav", version=__version__)
    app.state.registry = registry

    @app.exception_handler(FloornavError)
    async def _floornav_error(_req: Request, exc: FloornavError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": str(exc)},
        )

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/v1/maps")
    def list_maps():
        return {
            "maps": [
                {"id": mid, "name": m.name, "version": m.version}
                for mid, m in registry.list_map_items()
            ]
        }

    @app.post("/v1/maps", status_code=201)
    def create_map(req: CreateMapRequest):
        if req.load_dir:
            tmap = load_map(req.load_dir)
        else:
            tmap = TopometricMap(
                name=req.name or "untitled",
                scale_ft_per_px=req.scale_ft_per_px,
                global_dim=req.global_dim,
                local_dim=req.local_dim,
            )
        map_id = registry.add_map(tmap)
        return {"id": map_id, "version": tmap.version}

    @app.get("/v1/maps/{map_id}")
    def get_map(map_id: str):
        return _map_summary(map_id, registry.get_map(map_id))

    @app.post("/v1/maps/{map_id}/boundaries")
    def edit_boundaries(
        map_id: str,
        req: BoundaryEditRequest,
        idempotency_key: str | None = Header(default=None),
    ):
        cached = registry.replay("POST", f"/v1/maps/{map_id}/boundaries", idempotency_key)
        if cached is not None:
            return JSONResponse(status_code=cached[0], content=cached[1])
        additions = [
            Boundary(FloorPoint(*s.a), FloorPoint(*s.b), s.source) for s in req.add
        ]
        updated = registry.mutate(
            map_id,
            req.base_version,
            lambda m: m.with_boundary_edits(additions, req.delete),
        )
        body = {
            "version": updated.version,
            "boundaries": _map_summary(map_id, updated)["boundaries"],
        }
        registry.remember("POST", f"/v1/maps/{map_id}/boundaries", idempotency_key, 200, body)
        return body

    @app.post("/v1/maps/{map_id}/destinations")
    def add_destination(
        map_id: str,
        req: DestinationRequest,
        idempotency_key: str | None = Header(default=None),
    ):
        cached = registry.replay("POST", f"/v1/maps/{map_id}/destinations", idempotency_key)
        if cached is not None:
            return JSONResponse(status_code=cached[0], content=cached[1])
        updated = registry.mutate(
            map_id,
            req.base_version,
            lambda m: m.with_destination(req.reference_image_id, req.name),
        )
        body = {
            "version": updated.version,
            "destinations": _map_summary(map_id, updated)["destinations"],
        }
        registry.remember("POST", f"/v1/maps/{map_id}/destinations", idempotency_key, 200, body)
        return body

    @app.post("/v1/maps/{map_id}/align")
    def align(map_id: str, req: AlignRequest):
        pairs = [
            (MapPoint3(*c.reconstruction_point), FloorPoint(*c.floor_point))
            for c in req.correspondences
        ]
        transform = estimate_floor_transform(pairs)
        residuals = transform_residuals(transform, pairs)
        updated = registry.mutate(
            map_id, req.base_version, lambda m: m.with_alignment(transform)
        )
        return {
            "version": updated.version,
            "transform": transform.matrix.tolist(),
            "residuals": [float(r) for r in residuals],
            "rms": transform_rms(transform, pairs),
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(req: SessionRequest):
        tmap = registry.get_map(req.map_id)
        if req.destination not in tmap.destinations:
            raise NotFound(f"no destination named {req.destination!r}")
        camera = PinholeCamera.from_fov(75.0, 640, 360)
        session = Session(
            id=uuid.uuid4().hex,
            map_id=req.map_id,
            map_version=tmap.version,
            destination_name=req.destination,
            localizer=registry.localizer(req.map_id, tmap, camera),
            graph=registry.graph(req.map_id, tmap, req.max_edge_len_ft),
        )
        registry.add_session(session)
        return {
            "session_id": session.id,
            "map_version": session.map_version,
            "destination": req.destination,
        }

    @app.post("/v1/sessions/{session_id}/query")
    def query(session_id: str, req: QueryRequest):
        session = registry.get_session(session_id)
        tmap = session.localizer.tmap
        camera = PinholeCamera.from_fov(
            req.camera_fov_deg, req.camera_width, req.camera_height
        )
        if camera != session.localizer.camera:
            session.localizer.camera = camera
        global_desc, features = _parse_query(tmap, req)

        try:
            result = session.localizer.localize(global_desc, features)
        except LocalizationFailed as exc:
            raise LocalizationFailed(
                f"{exc}; take another image from a slightly different spot"
            ) from exc

        evolved_id = _maybe_evolve(registry, session, global_desc, features, result)

        destination = tmap.destinations[session.destination_name]
        if session.route is None:
            entry = session.graph.nearest_node(result.location)
            session.route = shortest_route(session.graph, entry, destination)
            session.next_index = 0

        scale = session.graph.scale_ft_per_px
        while (
            session.next_index < len(session.route.nodes)
            and result.location.distance_to(
                session.graph.nodes[session.route.nodes[session.next_index]]
            )
            * scale
            <= ARRIVE_FT
        ):
            session.next_index += 1

        if session.next_index >= len(session.route.nodes):
            instruction = {"text": "arrived", "turn_deg": 0.0, "distance_ft": 0.0}
            remaining = 0.0
        else:
            step = guide(result, session.route, session.graph, session.next_index)
            remaining = step.distance_ft
            nodes = session.route.nodes
            for a, b in zip(nodes[session.next_index :], nodes[session.next_index + 1 :]):
                remaining += session.graph.nodes[a].distance_to(session.graph.nodes[b]) * scale
            instruction = {
                "text": step.text,
                "turn_deg": step.turn_deg,
                "distance_ft": step.distance_ft,
                "target_node": step.target_node,
            }

        session.last_result = result
        record = {
            "location": [result.location.x, result.location.y],
            "direction": None if result.direction is None else result.direction.degrees,
            "method": result.method.value,
            "k_used": result.k_used,
            "match_counts": {str(k): v for k, v in result.match_counts.items()},
            "instruction": instruction,
            "remaining_ft": remaining,
            "map_version": session.map_version,
            "evolved_image_id": evolved_id,
        }
        session.history.append(record)
        return record

    return app


def _maybe_evolve(
    registry: MapRegistry,
    session: Session,
    global_desc: np.ndarray,
    features: list[LocalFeature],
    result: LocalizationResult,
) -> int | None:
    """Forward a confident fix into the map, but only if the registry still
    serves the exact snapshot this session localized against."""
    current = registry.get_map(session.map_id)
    if current is not session.localizer.tmap:
        return None
    evolved, admitted = evolve_map(current, global_desc, features, result)
    if admitted is None:
        return None
    if registry.swap_if_current(session.map_id, current, evolved):
        return admitted
    return None


def bind_address() -> tuple[str, int]:
    """Host and port from the environment, defaulting to localhost:8000."""
    raw = os.environ.get(ENV_BIND, "127.0.0.1:8000")
    host, _, port = raw.rpartition(":")
    return host or "127.0.0.1", int(port)
