"""Navigable graph over reference images, shortest routes, and guidance.

Graph nodes are reference image ids at their floor-plan locations.  An edge
connects two nodes when the straight segment between them touches no boundary
and its length stays under a configurable cap; lengths are in feet (pixel
distance times the map scale).  Routes are lexicographically tie-broken
Dijkstra paths, and guidance turns a localization fix into a relative turn
plus a walking distance toward the next node.

Intersection tests are endpoint inclusive: a leg that merely grazes a wall
counts as blocked.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSegment, NoRoute, Unreachable, VersionSkew
from .geometry import FloorPoint, signed_delta_deg
from .mapstore import Boundary, Destination, TopometricMap

DEFAULT_MAX_EDGE_LEN_FT = 15.0

Segment = tuple[FloorPoint, FloorPoint]


def _cross(ox, oy, ax, ay, bx, by):
    """Orientation of (a - o) x (b - o); arrays broadcast."""
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _intersect_mask(p1: np.ndarray, p2: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Endpoint-inclusive segment intersection, (m) pairs against (w) walls.

    Returns an (m,) bool array: does pair segment i touch any wall segment.
    """
    px1, py1 = p1[:, 0, None], p1[:, 1, None]
    px2, py2 = p2[:, 0, None], p2[:, 1, None]
    wx1, wy1 = w1[None, :, 0], w1[None, :, 1]
    wx2, wy2 = w2[None, :, 0], w2[None, :, 1]

    d1 = _cross(wx1, wy1, wx2, wy2, px1, py1)
    d2 = _cross(wx1, wy1, wx2, wy2, px2, py2)
    d3 = _cross(px1, py1, px2, py2, wx1, wy1)
    d4 = _cross(px1, py1, px2, py2, wx2, wy2)

    proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & (
        ((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0))
    )

    def _within(qx, qy, ax, ay, bx, by):
        return (
            (qx >= np.minimum(ax, bx)) & (qx <= np.maximum(ax, bx))
            & (qy >= np.minimum(ay, by)) & (qy <= np.maximum(ay, by))
        )

    touch = (
        ((d1 == 0) & _within(px1, py1, wx1, wy1, wx2, wy2))
        | ((d2 == 0) & _within(px2, py2, wx1, wy1, wx2, wy2))
        | ((d3 == 0) & _within(wx1, wy1, px1, py1, px2, py2))
        | ((d4 == 0) & _within(wx2, wy2, px1, py1, px2, py2))
    )
    return np.any(proper | touch, axis=1)


def segments_intersect(a: Segment, b: Segment) -> bool:
    """Whether two non-degenerate segments touch anywhere, endpoints included."""
    for seg in (a, b):
        if seg[0].distance_to(seg[1]) == 0.0:
            raise DegenerateSegment(f"zero-length segment at {seg[0]}")
    p1 = np.array([[a[0].x, a[0].y]])
    p2 = np.array([[a[1].x, a[1].y]])
    w1 = np.array([[b[0].x, b[0].y]])
    w2 = np.array([[b[1].x, b[1].y]])
    return bool(_intersect_mask(p1, p2, w1, w2)[0])


class NavGraph:
    """Immutable undirected graph; build a new one per map version."""

    def __init__(
        self,
        version: int,
        scale_ft_per_px: float,
        nodes: dict[int, FloorPoint],
        edges: dict[tuple[int, int], float],
        max_edge_len_ft: float,
    ):
        self.version = version
        self.scale_ft_per_px = scale_ft_per_px
        self.nodes = dict(nodes)
        self.edges = dict(edges)
        self.max_edge_len_ft = max_edge_len_ft
        self._adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in nodes}
        for (i, j), length in edges.items():
            self._adjacency[i].append((j, length))
            self._adjacency[j].append((i, length))
        for nbrs in self._adjacency.values():
            nbrs.sort()

    def neighbors(self, node: int) -> list[tuple[int, float]]:
        return self._adjacency[node]

    def nearest_node(self, point: FloorPoint) -> int:
        """Closest node to a floor point; distance ties go to the smaller id."""
        return min(self.nodes, key=lambda i: (point.distance_to(self.nodes[i]), i))


def _candidate_pairs(nodes: dict[int, FloorPoint], max_len_px: float):
    ids = sorted(nodes)
    coords = np.array([[nodes[i].x, nodes[i].y] for i in ids])
    ii, jj = np.triu_indices(len(ids), k=1)
    d = np.linalg.norm(coords[ii] - coords[jj], axis=1)
    keep = d <= max_len_px
    return ids, coords, ii[keep], jj[keep], d[keep]


def _wall_arrays(boundaries) -> tuple[np.ndarray, np.ndarray]:
    w1 = np.array([[b.a.x, b.a.y] for b in boundaries]).reshape(-1, 2)
    w2 = np.array([[b.b.x, b.b.y] for b in boundaries]).reshape(-1, 2)
    return w1, w2


def build_nav_graph(
    tmap: TopometricMap, max_edge_len_ft: float = DEFAULT_MAX_EDGE_LEN_FT
) -> NavGraph:
    """Connect every unblocked pair of reference images within the length cap.

    Pairs at the exact same location (slices of one frame) always connect
    with a zero-length edge: standing still crosses nothing.
    """
    nodes = {img.id: img.location for img in tmap.images.values()}
    scale = tmap.scale_ft_per_px
    ids, coords, ii, jj, dist_px = _candidate_pairs(nodes, max_edge_len_ft / scale)

    edges: dict[tuple[int, int], float] = {}
    walls = list(tmap.boundaries.values())
    proper = dist_px > 0
    blocked = np.zeros(len(ii), dtype=bool)
    if walls and np.any(proper):
        w1, w2 = _wall_arrays(walls)
        blocked[proper] = _intersect_mask(
            coords[ii[proper]], coords[jj[proper]], w1, w2
        )
    for a, b, d, bad in zip(ii, jj, dist_px, blocked):
        if not bad:
            edges[(ids[a], ids[b])] = float(d) * scale
    return NavGraph(tmap.version, scale, nodes, edges, max_edge_len_ft)


@dataclass(frozen=True)
class MapDelta:
    """A boundary edit against a known map version."""

    base_version: int
    tmap: TopometricMap            # the already-edited map
    changed: tuple[Boundary, ...]  # every boundary added or removed by the edit


def rebuild_on_edit(graph: NavGraph, delta: MapDelta) -> NavGraph:
    """Refresh a graph after boundary edits, re-testing only affected pairs.

    A pair's blocked status can only flip if a changed boundary touches its
    segment, and touching segments have overlapping bounding boxes, so pairs
    clear of every changed boundary's box keep their old status.  The result
    is identical to a full rebuild.

    Raises:
        VersionSkew: the delta was made against a different graph version.
    """
    if delta.base_version != graph.version:
        raise VersionSkew(
            f"delta is against version {delta.base_version}, graph is {graph.version}"
        )
    tmap = delta.tmap
    nodes = {img.id: img.location for img in tmap.images.values()}
    if nodes != graph.nodes:
        return build_nav_graph(tmap, graph.max_edge_len_ft)
    if not delta.changed:
        return NavGraph(tmap.version, graph.scale_ft_per_px, graph.nodes, graph.edges,
                        graph.max_edge_len_ft)

    scale = graph.scale_ft_per_px
    ids, coords, ii, jj, dist_px = _candidate_pairs(nodes, graph.max_edge_len_ft / scale)

    cw1, cw2 = _wall_arrays(delta.changed)
    cmin = np.minimum(cw1, cw2)
    cmax = np.maximum(cw1, cw2)
    pmin = np.minimum(coords[ii], coords[jj])
    pmax = np.maximum(coords[ii], coords[jj])
    overlap = np.any(
        (pmin[:, None, 0] <= cmax[None, :, 0]) & (pmax[:, None, 0] >= cmin[None, :, 0])
        & (pmin[:, None, 1] <= cmax[None, :, 1]) & (pmax[:, None, 1] >= cmin[None, :, 1]),
        axis=1,
    )

    walls = list(tmap.boundaries.values())
    blocked = np.zeros(len(ii), dtype=bool)
    retest = overlap & (dist_px > 0)
    if walls and np.any(retest):
        w1, w2 = _wall_arrays(walls)
        blocked[retest] = _intersect_mask(coords[ii[retest]], coords[jj[retest]], w1, w2)

    edges: dict[tuple[int, int], float] = {}
    for idx, (a, b, d) in enumerate(zip(ii, jj, dist_px)):
        key = (ids[a], ids[b])
        if overlap[idx]:
            if not blocked[idx]:
                edges[key] = float(d) * scale
        elif key in graph.edges:
            edges[key] = graph.edges[key]
    return NavGraph(tmap.version, scale, nodes, edges, graph.max_edge_len_ft)


@dataclass(frozen=True)
class Instruction:
    turn_deg: float
    distance_ft: float
    target_node: int
    text: str


@dataclass(frozen=True)
class Route:
    nodes: tuple[int, ...]
    length_ft: float
    instructions: tuple[Instruction, ...]


def _bearing_deg(a: FloorPoint, b: FloorPoint) -> float:
    return float(np.degrees(np.arctan2(b.y - a.y, b.x - a.x))) % 360.0


def _route_instructions(graph: NavGraph, path: tuple[int, ...]) -> tuple[Instruction, ...]:
    out = []
    prev_heading: float | None = None
    for a, b in zip(path, path[1:]):
        pa, pb = graph.nodes[a], graph.nodes[b]
        dist = pa.distance_to(pb) * graph.scale_ft_per_px
        heading = _bearing_deg(pa, pb) if dist > 0 else (prev_heading or 0.0)
        turn = 0.0 if prev_heading is None else signed_delta_deg(heading, prev_heading)
        prev_heading = heading
        out.append(
            Instruction(
                turn_deg=turn,
                distance_ft=dist,
                target_node=b,
                text=f"turn {turn:+.0f} degrees, walk {dist:.1f} ft to waypoint {b}",
            )
        )
    return tuple(out)


def shortest_route(
    graph: NavGraph, from_node: int, destination: Destination | int
) -> Route:
    """Cheapest path by total length; equal costs take the smaller node sequence.

    Raises:
        Unreachable: the destination is in the graph but no path exists.
    """
    target = destination.reference_image_id if isinstance(destination, Destination) else destination
    for node in (from_node, target):
        if node not in graph.nodes:
            raise ValueError(f"node {node} is not in the graph")

    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (from_node,))]
    visited: set[int] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in visited:
            continue
        visited.add(node)
        if node == target:
            return Route(path, cost, _route_instructions(graph, path))
        for nb, weight in graph.neighbors(node):
            if nb not in visited:
                heapq.heappush(heap, (cost + weight, path + (nb,)))
    raise Unreachable(f"no path from {from_node} to {target}")


def guide(result, route: Route, graph: NavGraph, next_index: int = 0) -> Instruction:
    """Turn-and-walk instruction from a localization fix toward the next route node.

    ``next_index`` 0 targets the route's first node (the nearest graph node
    when the route was planned from there); advance it as nodes are reached.

    Raises:
        NoRoute: the index has walked off the end of the route.
    """
    if next_index >= len(route.nodes):
        raise NoRoute("route has no remaining target")
    target = route.nodes[next_index]
    target_pt = graph.nodes[target]
    here = result.location
    distance_ft = here.distance_to(target_pt) * graph.scale_ft_per_px
    if distance_ft > 0:
        bearing = _bearing_deg(here, target_pt)
    elif result.direction is not None:
        bearing = result.direction.degrees
    else:
        bearing = 0.0
    facing = result.direction.degrees if result.direction is not None else bearing
    turn = signed_delta_deg(bearing, facing)
    return Instruction(
        turn_deg=turn,
        distance_ft=distance_ft,
        target_node=target,
        text=f"turn {turn:+.0f} degrees, walk {distance_ft:.1f} ft to waypoint {target}",
    )
