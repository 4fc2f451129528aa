"""Closed-loop wayfinding simulation in a synthetic world.

A scripted agent carries out the same loop a phone user would: photograph
(observe), localize, ask for guidance, turn by the commanded amount, walk a
bounded step, repeat.  The agent turns relative to its true heading, so any
error in the estimated direction becomes a real heading error, exactly as it
would for a person told "turn 30 degrees" while the app misjudges where they
face.  Success means the true position ends within one reference node spacing
of the destination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LocalizationFailed, Unreachable
from .geometry import Direction, FloorPoint
from .localization import Localizer
from .mapstore import Destination, TopometricMap
from .navigation import NavGraph, Route, guide, shortest_route
from .synthetic import SyntheticWorld


@dataclass(frozen=True)
class SimConfig:
    step_ft: float = 2.5       # distance walked per instruction, at most
    arrive_ft: float = 2.5     # estimated distance at which a waypoint counts as reached
    node_spacing_ft: float = 5.0
    max_steps: int = 150
    relocalize_spin_deg: float = 45.0  # turn applied when localization fails


@dataclass
class SimResult:
    success: bool
    steps: int
    start: FloorPoint
    destination_node: int
    final_position: FloorPoint
    final_error_ft: float
    route: Route | None = None
    failures: int = 0           # localization failures encountered en route


def run_episode(
    world: SyntheticWorld,
    localizer: Localizer,
    graph: NavGraph,
    start: FloorPoint,
    start_direction: Direction,
    destination: Destination,
    config: SimConfig = SimConfig(),
) -> SimResult:
    """Walk one agent from start to destination under guide() instructions."""
    tmap = localizer.tmap
    dest_node = destination.reference_image_id
    dest_point = tmap.images[dest_node].location
    scale = graph.scale_ft_per_px

    true_pos = start
    true_dir = start_direction
    route: Route | None = None
    next_index = 0
    failures = 0

    def _clamped(p: FloorPoint) -> FloorPoint:
        return FloorPoint(
            min(max(p.x, 0.5), world.config.width - 0.5),
            min(max(p.y, 0.5), world.config.height - 0.5),
        )

    steps = 0
    for steps in range(1, config.max_steps + 1):
        obs = world.observe(true_pos, true_dir)
        try:
            fix = localizer.localize_slice(obs)
        except LocalizationFailed:
            failures += 1
            true_dir = true_dir.rotated(config.relocalize_spin_deg)
            continue

        if route is None:
            entry = graph.nearest_node(fix.location)
            route = shortest_route(graph, entry, destination)

        # advance past any waypoint the estimate says we have reached,
        # including the zero-length hops between co-located slices
        while (
            next_index < len(route.nodes)
            and fix.location.distance_to(graph.nodes[route.nodes[next_index]]) * scale
            <= config.arrive_ft
        ):
            next_index += 1
        if next_index >= len(route.nodes):
            break

        step = guide(fix, route, graph, next_index)
        # with no heading estimate guide() emits turn 0, so this keeps course
        true_dir = true_dir.rotated(step.turn_deg)
        walk_ft = min(config.step_ft, step.distance_ft)
        a = math.radians(true_dir.degrees)
        true_pos = _clamped(
            FloorPoint(
                true_pos.x + walk_ft / scale * math.cos(a),
                true_pos.y + walk_ft / scale * math.sin(a),
            )
        )

    final_err = true_pos.distance_to(dest_point) * scale
    return SimResult(
        success=final_err <= config.node_spacing_ft,
        steps=steps,
        start=start,
        destination_node=dest_node,
        final_position=true_pos,
        final_error_ft=final_err,
        route=route,
        failures=failures,
    )


@dataclass
class SimStudy:
    results: list[SimResult] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        if not self.results:
            return 0.0
        return sum(r.success for r in self.results) / len(self.results)


def run_study(
    world: SyntheticWorld,
    localizer: Localizer,
    graph: NavGraph,
    runs: int,
    seed: int = 0,
    config: SimConfig = SimConfig(),
    margin_ft: float = 6.0,
) -> SimStudy:
    """Seeded batch of episodes with random starts and destinations.

    Destinations are drawn from reference images reachable in the graph;
    starts are uniform interior poses.  Every run is deterministic in the
    seed.
    """
    tmap = localizer.tmap
    rng = np.random.default_rng(seed)
    ids = tmap.image_ids()
    study = SimStudy()
    for _ in range(runs):
        start = FloorPoint(
            float(rng.uniform(margin_ft, world.config.width - margin_ft)),
            float(rng.uniform(margin_ft, world.config.height - margin_ft)),
        )
        direction = Direction(float(rng.uniform(0.0, 360.0)))
        dest_node = None
        while dest_node is None:
            candidate = int(ids[rng.integers(len(ids))])
            try:
                shortest_route(graph, graph.nearest_node(start), candidate)
            except Unreachable:
                continue
            dest_node = candidate
        destination = Destination(f"run-{len(study.results)}", dest_node)
        study.results.append(
            run_episode(world, localizer, graph, start, direction, destination, config)
        )
    return study
