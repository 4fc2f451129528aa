"""Accuracy study machinery: downsampling sweeps and error aggregation.

A study localizes a fixed set of test-point observations against
progressively thinner reference databases.  Frame rate alpha keeps every
alpha-th source frame; slice rate beta keeps every beta-th surviving slice
within each frame.  Results land in error tables (rows = test points or
rates, missing cells = NaN) and a heatmap record per test point for
rendering.

The summary statistic over a table is the column-order probability: the
fraction of same-row cell pairs (left column, right column) where the left
cell is not larger.  Values near 1 mean error grows as the database thins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LocalizationFailed, NoComparablePairs
from .geometry import Direction, FloorPoint, circular_error_deg
from .localization import LocalizationConfig, Localizer
from .mapstore import TopometricMap
from .pnp import PinholeCamera
from .synthetic import SyntheticWorld

MISSING = float("nan")
MISSING_LABEL = "n/s"


@dataclass(frozen=True)
class TestPoint:
    index: int
    location: FloorPoint
    direction: Direction


@dataclass(frozen=True)
class ErrorTable:
    """Non-negative error cells; NaN marks a value that could not be measured."""

    row_labels: tuple
    col_labels: tuple
    cells: np.ndarray
    unit: str = "ft"

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"cell shape {cells.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        if np.any(cells[np.isfinite(cells)] < 0):
            raise ValueError("error cells must be non-negative")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    def cell(self, i: int, j: int) -> float:
        return float(self.cells[i, j])


def location_error(est: FloorPoint, gt: FloorPoint, scale_ft_per_px: float) -> float:
    """Euclidean floor-plan distance converted to feet."""
    if scale_ft_per_px <= 0:
        raise ValueError(f"scale must be positive, got {scale_ft_per_px}")
    return est.distance_to(gt) * scale_ft_per_px


def direction_error(est: Direction, gt: Direction) -> float:
    """Circular absolute difference in degrees, in [0, 180]."""
    return circular_error_deg(est.degrees, gt.degrees)


def order_probability(table: ErrorTable) -> float:
    """Fraction of same-row (left, right) column pairs with left <= right.

    Pairs touching a missing cell are excluded and the normalization shrinks
    to the comparable-pair count.

    Raises:
        NoComparablePairs: every pair involves a missing cell.
    """
    cells = table.cells
    if cells.shape[1] < 2:
        raise NoComparablePairs("need at least two columns to compare")
    hits = 0
    total = 0
    for j in range(cells.shape[1] - 1):
        for k in range(j + 1, cells.shape[1]):
            left, right = cells[:, j], cells[:, k]
            ok = np.isfinite(left) & np.isfinite(right)
            total += int(ok.sum())
            hits += int(np.sum(left[ok] <= right[ok]))
    if total == 0:
        raise NoComparablePairs("no row has two comparable cells")
    return hits / total


# --- database downsampling --------------------------------------------------


def surviving_frames(frame_ids: Sequence[int], alpha: int) -> list[int]:
    """Frames kept at rate alpha: ordinal positions divisible by alpha."""
    ordered = sorted(frame_ids)
    return [fid for idx, fid in enumerate(ordered) if idx % alpha == 0]


def frame_downsample(tmap: TopometricMap, alpha: int) -> TopometricMap:
    """Thin the database to every alpha-th source frame.

    Images without a source frame (evolved ones) are dropped too: the sweep
    measures the mapped database only.
    """
    if alpha < 1 or int(alpha) != alpha:
        raise ValueError(f"alpha must be a positive integer, got {alpha}")
    frame_ids = {img.frame_id for img in tmap.images.values() if img.frame_id is not None}
    keep = set(surviving_frames(frame_ids, int(alpha)))
    images = {
        i: img for i, img in tmap.images.items() if img.frame_id in keep
    }
    return tmap.with_images(images)


def direction_downsample(tmap: TopometricMap, beta: int) -> TopometricMap:
    """Within each frame, keep every beta-th slice of the surviving slices."""
    if beta < 1 or int(beta) != beta:
        raise ValueError(f"beta must be a positive integer, got {beta}")
    beta = int(beta)
    by_frame: dict[int, list] = {}
    for img in tmap.images.values():
        if img.frame_id is not None:
            by_frame.setdefault(img.frame_id, []).append(img)
    images = {}
    for frame_images in by_frame.values():
        frame_images.sort(key=lambda im: im.slice_index)
        for img in frame_images[::beta]:
            images[img.id] = img
    return tmap.with_images(images)


# --- the sweep itself -------------------------------------------------------


@dataclass(frozen=True)
class HeatmapPoint:
    index: int
    gt: FloorPoint
    est: FloorPoint | None
    error_ft: float  # NaN when the point could not be localized


@dataclass
class SweepReport:
    alphas: tuple[int, ...]
    betas: tuple[int, ...]
    location_by_alpha: ErrorTable       # rows = test points, beta fixed at its smallest
    location_by_beta: ErrorTable        # rows = test points, alpha fixed at its smallest
    direction_by_rate: ErrorTable       # rows = alphas, cols = betas, mean over points
    heatmap: list[HeatmapPoint] = field(default_factory=list)
    scale_ft_per_px: float = 1.0

    def to_json_dict(self) -> dict:
        """Schema consumed by the heatmap viewer; keep keys stable."""
        return {
            "format": "floornav-report",
            "format_version": 1,
            "scale_ft_per_px": self.scale_ft_per_px,
            "alphas": list(self.alphas),
            "betas": list(self.betas),
            "heatmap": [
                {
                    "index": h.index,
                    "gt": [h.gt.x, h.gt.y],
                    "est": None if h.est is None else [h.est.x, h.est.y],
                    "error_ft": None if np.isnan(h.error_ft) else h.error_ft,
                }
                for h in self.heatmap
            ],
            "tables": {
                "location_by_alpha": _table_json(self.location_by_alpha),
                "location_by_beta": _table_json(self.location_by_beta),
                "direction_by_rate": _table_json(self.direction_by_rate),
            },
        }


def _table_json(table: ErrorTable) -> dict:
    return {
        "unit": table.unit,
        "rows": list(table.row_labels),
        "cols": list(table.col_labels),
        "cells": [
            [None if np.isnan(c) else float(c) for c in row] for row in table.cells
        ],
    }


def evaluate_queries(
    tmap: TopometricMap,
    queries: list[tuple[TestPoint, object]],
    camera: PinholeCamera,
    config: LocalizationConfig = LocalizationConfig(),
) -> tuple[np.ndarray, np.ndarray, list[HeatmapPoint]]:
    """Localize every query against one database variant.

    Returns per-point location errors (feet), direction errors (degrees),
    and heatmap records; failures appear as NaN.
    """
    localizer = Localizer(tmap, camera=camera, config=config)
    scale = tmap.scale_ft_per_px
    loc_err = np.full(len(queries), MISSING)
    dir_err = np.full(len(queries), MISSING)
    heat = []
    for idx, (point, obs) in enumerate(queries):
        try:
            fix = localizer.localize(obs.global_desc, obs.locals)
        except LocalizationFailed:
            heat.append(HeatmapPoint(point.index, point.location, None, MISSING))
            continue
        loc_err[idx] = location_error(fix.location, point.location, scale)
        if fix.direction is not None:
            dir_err[idx] = direction_error(fix.direction, point.direction)
        heat.append(HeatmapPoint(point.index, point.location, fix.location, float(loc_err[idx])))
    return loc_err, dir_err, heat


def run_sweep(
    tmap: TopometricMap,
    queries: list[tuple[TestPoint, object]],
    alphas: Sequence[int],
    betas: Sequence[int],
    camera: PinholeCamera,
    config: LocalizationConfig = LocalizationConfig(),
) -> SweepReport:
    """Full study: localize all test points at every (alpha, beta) density.

    The direction table cell for a rate pair is the mean direction error over
    all test points, or missing when any point's direction was unavailable,
    so sparse databases surface as gaps rather than optimistic means.
    """
    alphas = tuple(int(a) for a in alphas)
    betas = tuple(int(b) for b in betas)
    if not alphas or not betas:
        raise ValueError("need at least one alpha and one beta")
    points = [p for p, _ in queries]

    loc_results: dict[tuple[int, int], np.ndarray] = {}
    dir_means = np.full((len(alphas), len(betas)), MISSING)
    heatmap: list[HeatmapPoint] = []

    for ai, alpha in enumerate(alphas):
        thinned = frame_downsample(tmap, alpha)
        for bi, beta in enumerate(betas):
            variant = direction_downsample(thinned, beta)
            loc, direc, heat = evaluate_queries(variant, queries, camera, config)
            loc_results[(alpha, beta)] = loc
            if np.all(np.isfinite(direc)):
                dir_means[ai, bi] = float(np.mean(direc))
            if alpha == min(alphas) and beta == min(betas):
                heatmap = heat

    b0, a0 = min(betas), min(alphas)
    return SweepReport(
        alphas=alphas,
        betas=betas,
        location_by_alpha=ErrorTable(
            tuple(p.index for p in points),
            alphas,
            np.column_stack([loc_results[(a, b0)] for a in alphas]),
            unit="ft",
        ),
        location_by_beta=ErrorTable(
            tuple(p.index for p in points),
            betas,
            np.column_stack([loc_results[(a0, b)] for b in betas]),
            unit="ft",
        ),
        direction_by_rate=ErrorTable(alphas, betas, dir_means, unit="deg"),
        heatmap=heatmap,
        scale_ft_per_px=tmap.scale_ft_per_px,
    )


def synthetic_queries(
    world: SyntheticWorld, count: int = 17, seed: int = 17, margin: float = 8.0
) -> list[tuple[TestPoint, object]]:
    """Seeded interior test poses with their exact observations."""
    rng = np.random.default_rng(seed)
    queries = []
    for i in range(count):
        point = TestPoint(
            index=i,
            location=FloorPoint(
                float(rng.uniform(margin, world.config.width - margin)),
                float(rng.uniform(margin, world.config.height - margin)),
            ),
            direction=Direction(float(rng.uniform(0.0, 360.0))),
        )
        queries.append((point, world.observe(point.location, point.direction)))
    return queries
