"""Release gates for the localization and wayfinding engine.

Each test prints one [PASS]/[FAIL] line with the measured numbers so the
verdict reads straight off the pytest log.  The bounds are the release bar;
a red gate means the engine regressed, not that the bound needs loosening.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest

from test_localization import brute_force_top_k
from test_navigation import min_cost_by_enumeration, random_nav_map, segs_cross_oracle

from floornav.errors import LocalizationFailed, Unreachable
from floornav.evaluation import order_probability, run_sweep, synthetic_queries
from floornav.field_study import (
    EXPECTED_P_FRAME_RATE,
    EXPECTED_P_SLICE_RATE,
    location_by_frame_rate,
    location_by_slice_rate,
)
from floornav.geometry import (
    FloorPoint,
    MapPoint3,
    estimate_floor_transform,
    transform_rms,
)
from floornav.localization import (
    DescriptorIndex,
    Localizer,
    Method,
    ladder_step,
)
from floornav.navigation import build_nav_graph, shortest_route
from floornav.pnp import PinholeCamera, solve_pnp
from floornav.simulate import run_study
from floornav.synthetic import SyntheticWorld, WorldConfig, build_world_map

M_TO_FT = 3.2808


def gate(capsys, ok: bool, label: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}")
    assert ok, label


@pytest.fixture(scope="module")
def gate_world():
    return SyntheticWorld(WorldConfig(width=40.0, height=30.0), seed=7)


@pytest.fixture(scope="module")
def gate_map(gate_world):
    return build_world_map(
        gate_world, m=18, theta=20.0, spacing=5.0, min_features=30, seed=7
    )


@pytest.fixture(scope="module")
def gate_camera(gate_world):
    cfg = gate_world.config
    return PinholeCamera.from_fov(cfg.fov_deg, *cfg.image_size)


# 1. Order statistic over the recorded field tables ---------------------------


def test_field_table_order_statistic(capsys):
    t0 = time.perf_counter()
    p_frame = order_probability(location_by_frame_rate())
    p_slice = order_probability(location_by_slice_rate())
    elapsed = time.perf_counter() - t0
    ok = (
        abs(p_frame - EXPECTED_P_FRAME_RATE) <= 5e-3
        and abs(p_slice - EXPECTED_P_SLICE_RATE) <= 5e-3
        and elapsed < 1.0
    )
    gate(
        capsys, ok,
        f"field-table order statistic: frame-rate p={p_frame:.4f} "
        f"(0.72 +/- 0.005), slice-rate p={p_slice:.4f} (0.65 +/- 0.005), "
        f"{elapsed * 1000:.0f} ms (< 1 s)",
    )


# 2. Floor alignment recovery -------------------------------------------------


def test_floor_alignment_recovery(capsys):
    rng = np.random.default_rng(311)
    t0 = time.perf_counter()
    worst_exact = 0.0
    worst_noisy_rms = 0.0
    for i in range(1000):
        h = 3 + i % 8
        while True:
            pts = rng.uniform(-50, 50, size=(h, 3))
            design = np.column_stack([pts[:, 0], np.ones(h), pts[:, 2]])
            if np.linalg.cond(design.T @ design) < 1e8:
                break
        truth = rng.uniform(-3, 3, size=(2, 3))
        while np.linalg.matrix_rank(truth) < 2:
            truth = rng.uniform(-3, 3, size=(2, 3))
        floor = design @ truth.T

        exact = [
            (MapPoint3(*pts[j]), FloorPoint(*floor[j])) for j in range(h)
        ]
        est = estimate_floor_transform(exact)
        worst_exact = max(worst_exact, float(np.max(np.abs(est.matrix - truth))))

        noisy = [
            (MapPoint3(*pts[j]), FloorPoint(*(floor[j] + rng.normal(0.0, 1.0, size=2))))
            for j in range(h)
        ]
        worst_noisy_rms = max(
            worst_noisy_rms, transform_rms(estimate_floor_transform(noisy), noisy)
        )
    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 1e-9 and worst_noisy_rms <= 2.0 and elapsed < 5.0
    gate(
        capsys, ok,
        f"alignment recovery over 1000 sets (h=3..10): exact worst "
        f"|dT|={worst_exact:.2e} (<= 1e-9), sigma=1 worst RMS="
        f"{worst_noisy_rms:.3f} (<= 2), {elapsed:.2f} s (< 5 s)",
    )


# 3. Camera pose from landmark correspondences --------------------------------


def _pose_scene(rng, camera, n, n_outliers):
    yaw = float(rng.uniform(0, 360))
    center = np.array([rng.uniform(-5, 5), rng.uniform(-1, 1), rng.uniform(-5, 5)])
    a = math.radians(yaw)
    rot = np.array(
        [
            [math.sin(a), 0.0, -math.cos(a)],
            [0.0, 1.0, 0.0],
            [math.cos(a), 0.0, math.sin(a)],
        ]
    )
    z = rng.uniform(4, 30, n)
    cam_pts = np.stack(
        [rng.uniform(-0.5, 0.5, n) * z, rng.uniform(-0.25, 0.25, n) * z, z], axis=1
    )
    world_pts = cam_pts @ rot + center
    pixels = np.stack(
        [
            camera.focal * cam_pts[:, 0] / cam_pts[:, 2] + camera.cx,
            camera.focal * cam_pts[:, 1] / cam_pts[:, 2] + camera.cy,
        ],
        axis=1,
    )
    if n_outliers:
        shift = rng.uniform(30, 120, size=(n_outliers, 2))
        pixels[:n_outliers] += shift * rng.choice([-1, 1], size=(n_outliers, 2))
    return yaw, world_pts, pixels


def test_pose_recovery_with_and_without_outliers(capsys):
    camera = PinholeCamera.from_fov(75.0, 640, 360)
    rng = np.random.default_rng(9)
    t0 = time.perf_counter()

    worst_exact = 0.0
    for _ in range(100):
        yaw, pts, px = _pose_scene(rng, camera, n=20, n_outliers=0)
        res = solve_pnp(pts, px, camera, seed=3)
        worst_exact = max(worst_exact, abs((res.yaw_deg - yaw + 180) % 360 - 180))

    worst_outlier = 0.0
    wrong_inlier_sets = 0
    for _ in range(100):
        yaw, pts, px = _pose_scene(rng, camera, n=30, n_outliers=10)
        res = solve_pnp(pts, px, camera, seed=3)
        worst_outlier = max(worst_outlier, abs((res.yaw_deg - yaw + 180) % 360 - 180))
        if set(res.inlier_indices.tolist()) != set(range(10, 30)):
            wrong_inlier_sets += 1

    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 0.1 and worst_outlier <= 0.5 and wrong_inlier_sets == 0
    gate(
        capsys, ok,
        f"pose recovery, 200 seeded trials: exact worst yaw err="
        f"{worst_exact:.4f} deg (<= 0.1), 33% outliers worst="
        f"{worst_outlier:.4f} deg (<= 0.5), wrong inlier sets="
        f"{wrong_inlier_sets} (= 0), {elapsed:.1f} s",
    )


# 4. Match-count ladder -------------------------------------------------------


def _ladder_oracle(counts, strong=75, weak=30):
    survivors = {j: m for j, m in counts.items() if m > strong}
    if survivors:
        total = float(sum(survivors.values()))
        return Method.WEIGHTED_AVERAGE, {j: m / total for j, m in survivors.items()}
    best = max(counts.values(), default=0)
    if best > weak:
        winner = min(j for j, m in counts.items() if m == best)
        return Method.LARGEST_MATCH, {winner: 1.0}
    return None


def test_match_count_ladder_matrix(capsys):
    values = (0, 30, 31, 75, 76, 100)
    cases = 0
    mismatches = 0
    for ids in ((), (1,), (1, 2), (1, 2, 3)):
        for combo in itertools.product(values, repeat=len(ids)):
            counts = dict(zip(ids, combo))
            got = ladder_step(counts)
            want = _ladder_oracle(counts)
            cases += 1
            if (got is None) != (want is None):
                mismatches += 1
                continue
            if got is None:
                continue
            same_method = got[0] == want[0]
            same_keys = got[1].keys() == want[1].keys()
            same_weights = same_keys and all(
                abs(got[1][k] - want[1][k]) < 1e-12 for k in want[1]
            )
            if not (same_method and same_weights):
                mismatches += 1

    # with every count at the weak bound, widening K never helps: the engine
    # must give up rather than answer
    from test_localization import controlled_map, matcher_for, query_locals, ZERO_QUERY

    weak_map = controlled_map([float(i + 1) for i in range(100)])
    localizer = Localizer(weak_map, matcher=matcher_for({i: 30 for i in range(100)}))
    try:
        localizer.localize(ZERO_QUERY, query_locals())
        exhausted = False
    except LocalizationFailed:
        exhausted = True

    ok = mismatches == 0 and exhausted
    gate(
        capsys, ok,
        f"match-count ladder: {cases} rung cases incl. boundaries 30/31/75/76, "
        f"{mismatches} mismatches (= 0); all-weak database raises after the "
        f"full K schedule: {exhausted}",
    )


# 5. Retrieval exactness and latency ------------------------------------------


def test_retrieval_exact_and_fast(capsys):
    rng = np.random.default_rng(0)
    ids = np.arange(10_000)

    matrix = rng.standard_normal((10_000, 256)).astype(np.float32)
    index = DescriptorIndex(ids, matrix)
    mismatches = 0
    for _ in range(500):
        q = rng.standard_normal(256).astype(np.float32)
        got = [c.image_id for c in index.query(q, 10)]
        if got != brute_force_top_k(matrix, ids, q, 10):
            mismatches += 1

    wide = rng.standard_normal((10_000, 32_768)).astype(np.float32)
    wide_index = DescriptorIndex(ids, wide)
    queries = rng.standard_normal((51, 32_768)).astype(np.float32)
    wide_index.query(queries[0], 10)  # warm the cache before timing
    # best of two rounds, so a scheduler hiccup cannot fail the gate
    p95 = math.inf
    for _ in range(2):
        laps = []
        for i in range(1, 51):
            t0 = time.perf_counter()
            wide_index.query(queries[i], 10)
            laps.append(time.perf_counter() - t0)
        p95 = min(p95, float(np.percentile(laps, 95)))

    ok = mismatches == 0 and p95 <= 0.200
    gate(
        capsys, ok,
        f"retrieval: 500 queries vs brute force on 10k db, "
        f"{mismatches} mismatches (= 0); p95 latency at dim 32768 = "
        f"{p95 * 1000:.0f} ms (<= 200 ms)",
    )


# 6. Route safety and optimality ----------------------------------------------


def test_routes_avoid_walls_and_match_enumeration(capsys):
    rng = np.random.default_rng(23)
    legs_checked = 0
    crossings = 0
    enum_checked = 0
    enum_mismatches = 0
    routes_found = 0
    for trial in range(100):
        n_nodes = int(rng.integers(2, 11)) if trial % 2 == 0 else int(rng.integers(2, 51))
        n_walls = int(rng.integers(0, 11))
        tmap = random_nav_map(rng, n_nodes, n_walls)
        graph = build_nav_graph(tmap)
        walls = [((b.a.x, b.a.y), (b.b.x, b.b.y)) for b in tmap.boundaries.values()]
        for _ in range(3):
            src, dst = (int(v) for v in rng.choice(n_nodes, size=2, replace=False)) \
                if n_nodes > 1 else (0, 0)
            try:
                route = shortest_route(graph, src, dst)
            except Unreachable:
                continue
            routes_found += 1
            for a, b in zip(route.nodes, route.nodes[1:]):
                pa, pb = graph.nodes[a], graph.nodes[b]
                leg = ((pa.x, pa.y), (pb.x, pb.y))
                legs_checked += 1
                crossings += any(segs_cross_oracle(leg, wall) for wall in walls)
            if n_nodes <= 10:
                enum_checked += 1
                if not math.isclose(
                    route.length_ft, min_cost_by_enumeration(graph, src, dst),
                    rel_tol=0, abs_tol=1e-9,
                ):
                    enum_mismatches += 1

    ok = (
        crossings == 0
        and enum_mismatches == 0
        and legs_checked >= 100
        and enum_checked >= 20
    )
    gate(
        capsys, ok,
        f"routing on 100 random worlds: {routes_found} routes, {legs_checked} "
        f"legs, {crossings} wall crossings (= 0); enumeration check on "
        f"{enum_checked} small instances, {enum_mismatches} cost mismatches (= 0)",
    )


# 7. End-to-end synthetic accuracy study --------------------------------------


def test_synthetic_study_end_to_end(capsys, gate_world, gate_map, gate_camera):
    t0 = time.perf_counter()
    queries = synthetic_queries(gate_world, seed=17)
    report = run_sweep(
        gate_map, queries, alphas=[1, 2, 4, 8], betas=[1], camera=gate_camera
    )
    full_density = report.location_by_alpha.cells[:, 0]
    mean_ft = float(np.mean(full_density))
    p_alpha = order_probability(report.location_by_alpha)
    elapsed = time.perf_counter() - t0
    ok = (
        len(queries) == 17
        and not np.isnan(full_density).any()
        and mean_ft <= M_TO_FT
        and p_alpha > 0.5
        and elapsed < 120.0
    )
    gate(
        capsys, ok,
        f"synthetic study: mean error over 17 test points = {mean_ft:.2f} ft "
        f"(<= {M_TO_FT} ft); density-sweep order statistic p={p_alpha:.3f} "
        f"(> 0.5); {elapsed:.0f} s (< 120 s)",
    )


# 8. Closed-loop navigation ---------------------------------------------------


def test_closed_loop_reaches_destination(capsys, gate_world, gate_map, gate_camera):
    localizer = Localizer(gate_map, camera=gate_camera)
    graph = build_nav_graph(gate_map)
    study = run_study(gate_world, localizer, graph, runs=100, seed=12)
    successes = sum(r.success for r in study.results)
    ok = successes >= 95
    gate(
        capsys, ok,
        f"closed-loop navigation: {successes}/100 seeded runs ended within "
        f"one node spacing of the destination (>= 95)",
    )
