"""Graph construction, routing, incremental rebuilds, and guidance.

The heavy checks run against independent oracles written here: a scalar
orientation-test intersection, a naive O(n^2 * walls) graph builder, and an
exhaustive simple-path enumerator for route costs.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from floornav.errors import DegenerateSegment, NoRoute, Unreachable, VersionSkew
from floornav.geometry import Direction, FloorPoint
from floornav.localization import LocalizationResult, Method
from floornav.mapstore import Boundary, ReferenceImage, TopometricMap
from floornav.navigation import (
    MapDelta,
    build_nav_graph,
    guide,
    rebuild_on_edit,
    segments_intersect,
    shortest_route,
)


# --- independent oracles -----------------------------------------------------


def _orient(p, q, r):
    v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    return int(v > 0) - int(v < 0)


def _on_segment(p, q, r):
    return (
        min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
        and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])
    )


def segs_cross_oracle(a, b):
    """Textbook endpoint-inclusive segment intersection, scalar arithmetic."""
    p1, p2, q1, q2 = a[0], a[1], b[0], b[1]
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, p2, q2):
        return True
    if o3 == 0 and _on_segment(q1, q2, p1):
        return True
    if o4 == 0 and _on_segment(q1, q2, p2):
        return True
    return False


def min_cost_by_enumeration(graph, s, t):
    """Cheapest simple-path cost via exhaustive DFS (graphs <= 10 nodes)."""
    best = math.inf

    def dfs(node, seen, cost):
        nonlocal best
        if cost > best:
            return
        if node == t:
            best = min(best, cost)
            return
        for nb, w in graph.neighbors(node):
            if nb not in seen:
                dfs(nb, seen | {nb}, cost + w)

    dfs(s, {s}, 0.0)
    return best


# --- fixtures ----------------------------------------------------------------


def nav_map(points, walls=(), scale=1.0, version=1):
    images = {
        i: ReferenceImage(
            id=i, frame_id=i, slice_index=1,
            location=FloorPoint(*xy), direction=Direction(0.0),
            global_desc=np.zeros(4, np.float32), locals=(),
        )
        for i, xy in points.items()
    }
    boundaries = {
        i: Boundary(FloorPoint(*a), FloorPoint(*b)) for i, (a, b) in enumerate(walls)
    }
    return TopometricMap(
        name="nav", scale_ft_per_px=scale, global_dim=4, local_dim=4,
        images=images, boundaries=boundaries, version=version,
    )


def fake_fix(x, y, facing=None):
    return LocalizationResult(
        location=FloorPoint(x, y), method=Method.WEIGHTED_AVERAGE, k_used=10,
        retries=0, weights={}, match_counts={}, candidates=(),
        direction=None if facing is None else Direction(facing),
    )


def random_nav_map(rng, n_nodes, n_walls, extent=40.0):
    points = {
        i: (float(rng.uniform(0, extent)), float(rng.uniform(0, extent)))
        for i in range(n_nodes)
    }
    walls = []
    while len(walls) < n_walls:
        a = rng.uniform(0, extent, 2)
        b = a + rng.uniform(-extent / 2, extent / 2, 2)
        if np.hypot(*(b - a)) > 1e-6:
            walls.append((tuple(a), tuple(b)))
    return nav_map(points, walls)


# --- segment intersection ----------------------------------------------------


def seg(ax, ay, bx, by):
    return (FloorPoint(ax, ay), FloorPoint(bx, by))


def test_crossing_diagonals():
    assert segments_intersect(seg(0, 0, 2, 2), seg(0, 2, 2, 0))


def test_parallel_disjoint():
    assert not segments_intersect(seg(0, 0, 2, 0), seg(0, 1, 2, 1))


def test_endpoint_touch_counts():
    assert segments_intersect(seg(0, 0, 2, 0), seg(1, 0, 1, 5))  # T-touch
    assert segments_intersect(seg(0, 0, 2, 0), seg(2, 0, 4, 3))  # shared endpoint


def test_collinear_overlap_and_gap():
    assert segments_intersect(seg(0, 0, 4, 0), seg(2, 0, 6, 0))
    assert not segments_intersect(seg(0, 0, 1, 0), seg(2, 0, 3, 0))


def test_degenerate_segment_rejected():
    with pytest.raises(DegenerateSegment):
        segments_intersect(seg(1, 1, 1, 1), seg(0, 0, 2, 2))


def test_intersection_agrees_with_oracle():
    rng = np.random.default_rng(12)
    for _ in range(400):
        a = rng.uniform(0, 10, 4)
        b = rng.uniform(0, 10, 4)
        got = segments_intersect(seg(*a), seg(*b))
        want = segs_cross_oracle(((a[0], a[1]), (a[2], a[3])), ((b[0], b[1]), (b[2], b[3])))
        assert got == want


# --- graph construction ------------------------------------------------------


def test_open_floor_complete_graph():
    g = build_nav_graph(nav_map({0: (0, 0), 1: (3, 0), 2: (0, 4)}), math.inf)
    assert len(g.edges) == 3
    assert g.edges[(0, 1)] == pytest.approx(3.0)
    assert g.edges[(1, 2)] == pytest.approx(5.0)


def test_wall_removes_crossing_edges():
    g = build_nav_graph(
        nav_map({0: (0, 0), 1: (10, 0), 2: (0, 5)}, walls=[((5, -10), (5, 10))]),
        math.inf,
    )
    assert (0, 1) not in g.edges
    assert (1, 2) not in g.edges
    assert (0, 2) in g.edges


def test_length_cap_prunes_long_edges():
    m = nav_map({0: (0, 0), 1: (20, 0)})
    assert (0, 1) not in build_nav_graph(m, 15.0).edges
    assert (0, 1) in build_nav_graph(m, math.inf).edges


def test_scale_converts_to_feet():
    g = build_nav_graph(nav_map({0: (0, 0), 1: (10, 0)}, scale=0.5), math.inf)
    assert g.edges[(0, 1)] == pytest.approx(5.0)


def test_colocated_nodes_always_connect():
    # slices of one frame pile up at its point; a wall through the point
    # cannot separate someone from themselves
    m = nav_map({0: (5, 5), 1: (5, 5), 2: (9, 5)}, walls=[((5, 0), (5, 10))])
    g = build_nav_graph(m, math.inf)
    assert g.edges[(0, 1)] == 0.0
    assert (0, 2) not in g.edges


def test_nearest_node_tie_smaller_id():
    g = build_nav_graph(nav_map({3: (0, 0), 1: (4, 0), 2: (4, 0)}), math.inf)
    assert g.nearest_node(FloorPoint(3.0, 0.0)) == 1
    assert g.nearest_node(FloorPoint(0.5, 0.0)) == 3


def test_graph_matches_naive_oracle():
    rng = np.random.default_rng(4)
    for _ in range(10):
        m = random_nav_map(rng, 50, 10)
        g = build_nav_graph(m, math.inf)
        ids = sorted(m.images)
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                i, j = ids[ai], ids[bi]
                pi, pj = m.images[i].location, m.images[j].location
                blocked = any(
                    segs_cross_oracle(
                        ((pi.x, pi.y), (pj.x, pj.y)),
                        ((w.a.x, w.a.y), (w.b.x, w.b.y)),
                    )
                    for w in m.boundaries.values()
                )
                assert ((i, j) in g.edges) == (not blocked), (i, j)


# --- routing -----------------------------------------------------------------


def test_route_to_self_is_empty():
    g = build_nav_graph(nav_map({0: (0, 0), 1: (5, 0)}), math.inf)
    r = shortest_route(g, 0, 0)
    assert r.nodes == (0,)
    assert r.length_ft == 0.0
    assert r.instructions == ()


def test_triangle_takes_direct_edge():
    g = build_nav_graph(nav_map({0: (0, 0), 1: (3, 0), 2: (3, 4)}), math.inf)
    r = shortest_route(g, 0, 2)
    assert r.nodes == (0, 2)
    assert r.length_ft == pytest.approx(5.0)


def test_route_follows_detour_around_wall():
    m = nav_map(
        {0: (0, 0), 1: (10, 0), 2: (5, 8)},
        walls=[((5, -5), (5, 4))],
    )
    r = shortest_route(build_nav_graph(m, math.inf), 0, 1)
    assert r.nodes == (0, 2, 1)
    assert r.length_ft == pytest.approx(2 * math.hypot(5, 8))


def test_equal_cost_tie_lexicographic():
    m = nav_map({0: (0, 0), 1: (1, 1), 2: (1, -1), 3: (2, 0)})
    g = build_nav_graph(m, 1.6)  # drop the direct 0-3 edge (length 2)
    r = shortest_route(g, 0, 3)
    assert r.nodes == (0, 1, 3)


def test_unreachable():
    m = nav_map({0: (0, 0), 1: (30, 0)})
    g = build_nav_graph(m, 15.0)
    with pytest.raises(Unreachable):
        shortest_route(g, 0, 1)


def test_unknown_node_rejected():
    g = build_nav_graph(nav_map({0: (0, 0)}), math.inf)
    with pytest.raises(ValueError):
        shortest_route(g, 0, 77)


def test_route_cost_matches_enumeration_and_is_safe():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(15):
        m = random_nav_map(rng, 9, 4, extent=25.0)
        g = build_nav_graph(m, math.inf)
        s, t = 0, 8
        want = min_cost_by_enumeration(g, s, t)
        if math.isinf(want):
            with pytest.raises(Unreachable):
                shortest_route(g, s, t)
            continue
        r = shortest_route(g, s, t)
        assert r.length_ft == pytest.approx(want)
        for a, b in zip(r.nodes, r.nodes[1:]):
            pa, pb = g.nodes[a], g.nodes[b]
            if pa.distance_to(pb) == 0.0:
                continue
            for w in m.boundaries.values():
                assert not segs_cross_oracle(
                    ((pa.x, pa.y), (pb.x, pb.y)), ((w.a.x, w.a.y), (w.b.x, w.b.y))
                )
        checked += 1
    assert checked >= 5


def test_route_length_is_sum_of_instruction_distances():
    rng = np.random.default_rng(30)
    m = random_nav_map(rng, 8, 3, extent=20.0)
    g = build_nav_graph(m, math.inf)
    try:
        r = shortest_route(g, 0, 7)
    except Unreachable:
        pytest.skip("disconnected draw")
    assert r.length_ft == pytest.approx(sum(i.distance_ft for i in r.instructions))
    assert r.instructions[0].turn_deg == 0.0


# --- incremental rebuild -----------------------------------------------------


def graphs_equal(a, b):
    return a.nodes == b.nodes and a.edges == b.edges and a.version == b.version


def test_noop_delta_keeps_edges_bumps_version():
    m = random_nav_map(np.random.default_rng(1), 15, 4)
    g = build_nav_graph(m, math.inf)
    m2 = m.with_boundary_edits()  # empty edit still advances the version
    g2 = rebuild_on_edit(g, MapDelta(g.version, m2, ()))
    assert g2.version == m2.version
    assert g2.edges == g.edges


def test_stale_delta_rejected():
    m = random_nav_map(np.random.default_rng(2), 10, 2)
    g = build_nav_graph(m, math.inf)
    m2 = m.with_boundary_edits([Boundary(FloorPoint(0, 0), FloorPoint(1, 1))])
    with pytest.raises(VersionSkew):
        rebuild_on_edit(g, MapDelta(g.version + 5, m2, tuple(m2.boundaries.values())))


def test_randomized_edit_sequences_match_full_rebuild():
    rng = np.random.default_rng(17)
    m = random_nav_map(rng, 20, 5)
    g = build_nav_graph(m, math.inf)
    for _ in range(30):
        if m.boundaries and rng.random() < 0.4:
            victim = int(rng.choice(sorted(m.boundaries)))
            changed = (m.boundaries[victim],)
            m2 = m.with_boundary_edits(deletions=[victim])
        else:
            a = rng.uniform(0, 40, 2)
            b = a + rng.uniform(-20, 20, 2)
            wall = Boundary(FloorPoint(*a), FloorPoint(*b))
            changed = (wall,)
            m2 = m.with_boundary_edits([wall])
        g2 = rebuild_on_edit(g, MapDelta(g.version, m2, changed))
        assert graphs_equal(g2, build_nav_graph(m2, math.inf))
        m, g = m2, g2


def test_rebuild_with_new_node_falls_back_to_full():
    m = random_nav_map(np.random.default_rng(3), 10, 3)
    g = build_nav_graph(m, math.inf)
    m2, _ = m.with_evolved_image(
        np.zeros(4, np.float32), [], FloorPoint(20.0, 20.0), Direction(0.0), {"t": 1}
    )
    g2 = rebuild_on_edit(g, MapDelta(g.version, m2, ()))
    assert graphs_equal(g2, build_nav_graph(m2, math.inf))


# --- guidance ----------------------------------------------------------------


def test_guide_straight_ahead():
    g = build_nav_graph(nav_map({0: (0, 10)}), math.inf)
    r = shortest_route(g, 0, 0)
    step = guide(fake_fix(0.0, 0.0, facing=90.0), r, g)
    assert step.turn_deg == pytest.approx(0.0)
    assert step.distance_ft == pytest.approx(10.0)
    assert step.target_node == 0


def test_guide_turn_right_ninety():
    g = build_nav_graph(nav_map({0: (10, 0)}), math.inf)
    r = shortest_route(g, 0, 0)
    step = guide(fake_fix(0.0, 0.0, facing=90.0), r, g)
    assert step.turn_deg == pytest.approx(-90.0)


def test_guide_respects_scale():
    g = build_nav_graph(nav_map({0: (0, 10)}, scale=2.0), math.inf)
    step = guide(fake_fix(0.0, 0.0, facing=90.0), shortest_route(g, 0, 0), g)
    assert step.distance_ft == pytest.approx(20.0)


def test_guide_without_heading_walks_without_turning():
    g = build_nav_graph(nav_map({0: (0, 10)}), math.inf)
    step = guide(fake_fix(0.0, 0.0, facing=None), shortest_route(g, 0, 0), g)
    assert step.turn_deg == 0.0
    assert step.distance_ft == pytest.approx(10.0)


def test_guide_past_route_end():
    g = build_nav_graph(nav_map({0: (0, 10)}), math.inf)
    r = shortest_route(g, 0, 0)
    with pytest.raises(NoRoute):
        guide(fake_fix(0.0, 0.0, facing=0.0), r, g, next_index=1)


def test_guide_advances_through_route():
    m = nav_map({0: (0, 0), 1: (10, 0), 2: (10, 10)})
    g = build_nav_graph(m, 12.0)
    r = shortest_route(g, 0, 2)
    assert r.nodes == (0, 1, 2)
    first = guide(fake_fix(0.0, 0.0, facing=0.0), r, g, next_index=1)
    assert first.target_node == 1
    second = guide(fake_fix(10.0, 0.0, facing=0.0), r, g, next_index=2)
    assert second.target_node == 2
    assert second.turn_deg == pytest.approx(90.0)


# --- accuracy improves while approaching a reference -------------------------

M_TO_FT = 3.2808


def test_error_shrinks_near_references():
    """Mean localization error within 1 m of a reference image should not
    exceed the mean error 3 to 5 m out; approaching a waypoint means
    approaching the imagery it was mapped from."""
    from floornav.localization import Localizer
    from floornav.pnp import PinholeCamera
    from floornav.synthetic import SyntheticWorld, WorldConfig, build_world_map

    world = SyntheticWorld(WorldConfig(width=60.0, height=40.0, n_landmarks=500), seed=11)
    tmap = build_world_map(world, m=12, theta=30.0, spacing=20.0, min_features=20)
    loc = Localizer(
        tmap, camera=PinholeCamera.from_fov(world.config.fov_deg, *world.config.image_size)
    )
    spots = [img.location for img in tmap.images.values()]

    rng = np.random.default_rng(5)
    near, far = [], []
    while len(near) < 12 or len(far) < 12:
        p = FloorPoint(float(rng.uniform(2, 58)), float(rng.uniform(2, 38)))
        gap = min(p.distance_to(s) for s in spots)
        if gap <= 1.0 * M_TO_FT:
            bucket = near
        elif 3.0 * M_TO_FT <= gap <= 5.0 * M_TO_FT:
            bucket = far
        else:
            continue
        if len(bucket) >= 12:
            continue
        rec = world.observe(p, Direction(float(rng.uniform(0, 360))))
        try:
            fix = loc.localize_slice(rec)
        except Exception:
            bucket.append(20.0)  # a miss is the worst outcome for that bucket
            continue
        bucket.append(fix.location.distance_to(p))

    assert float(np.mean(near)) <= float(np.mean(far))
