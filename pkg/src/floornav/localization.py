"""Query pose estimation against a reference database.

The pipeline is retrieval, then verification, then a weight ladder:

1. Nearest neighbors by global-descriptor distance give K candidate images.
2. Local-feature matching against each candidate yields match counts m_j.
3. Candidates with m_j above the strong threshold share the location estimate,
   weighted by their share of the total matches.  With no strong candidate,
   the single best one is used alone if it clears the weak threshold;
   otherwise K grows and the ladder runs again on the larger pool.

Direction comes from resecting the query camera against landmarks linked to
the matched reference features, then projecting the recovered heading onto
the floor plan.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .descriptors import LocalFeature, MatchSet, Matcher, MutualNearestMatcher
from .errors import DimensionMismatch, EmptyDatabase, LocalizationFailed
from .errors import ConsensusFailed, InsufficientCorrespondences
from .geometry import Direction, FloorPoint
from .mapstore import TopometricMap
from .pnp import PinholeCamera, PnPResult, solve_pnp

STRONG_MATCH_THRESHOLD = 75
WEAK_MATCH_THRESHOLD = 30


class Method(str, enum.Enum):
    WEIGHTED_AVERAGE = "weighted_average"
    LARGEST_MATCH = "largest_match_fallback"


@dataclass(frozen=True)
class Candidate:
    image_id: int
    distance: float


@dataclass(frozen=True)
class LocalizationConfig:
    first_k: int = 10
    growth: float = 2.0
    max_k: int = 80
    strong_match: int = STRONG_MATCH_THRESHOLD
    weak_match: int = WEAK_MATCH_THRESHOLD
    ratio: float = 0.8
    pnp_inlier_px: float = 4.0
    pnp_min_consensus: int = 12
    pnp_max_iters: int = 1000
    pnp_seed: int = 0

    def __post_init__(self):
        if not 0 < self.first_k <= self.max_k:
            raise ValueError(f"need 0 < first_k <= max_k, got {self.first_k}, {self.max_k}")
        if self.growth <= 1.0:
            raise ValueError("growth factor must exceed 1")
        if not 0 <= self.weak_match < self.strong_match:
            raise ValueError("weak threshold must sit below the strong one")


def retrieval_schedule(config: LocalizationConfig, database_size: int) -> list[int]:
    """K values to try in order, clamped to the database and deduplicated."""
    ks: list[int] = []
    k = config.first_k
    while True:
        clamped = min(k, database_size)
        if not ks or clamped != ks[-1]:
            ks.append(clamped)
        if k >= config.max_k or clamped == database_size:
            return ks
        k = min(int(np.ceil(k * config.growth)), config.max_k)


class DescriptorIndex:
    """Exact nearest-neighbor retrieval over global descriptors.

    Distances are accumulated in float32 via the expansion
    ``d^2 = |r|^2 - 2 r.q + |q|^2`` for speed, then the leading candidates
    (top k plus a safety margin) are re-scored in float64 so the returned
    order is exactly the float64 order.  Ties break toward the smaller
    image id.
    """

    RERANK_MARGIN = 16
    _NORM_CHUNK = 256

    def __init__(self, ids: Sequence[int], matrix: np.ndarray):
        self._ids = np.asarray(ids, dtype=np.int64)
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        if self._matrix.ndim != 2 or len(self._ids) != self._matrix.shape[0]:
            raise ValueError("ids and descriptor rows must line up")
        sq = np.empty(len(self._ids), dtype=np.float64)
        for start in range(0, len(self._ids), self._NORM_CHUNK):
            block = self._matrix[start : start + self._NORM_CHUNK].astype(np.float64)
            sq[start : start + self._NORM_CHUNK] = np.einsum("ij,ij->i", block, block)
        self._sq = sq

    @classmethod
    def from_map(cls, tmap: TopometricMap) -> "DescriptorIndex":
        ids = tmap.image_ids()
        if not ids:
            return cls(np.empty(0, dtype=np.int64), np.empty((0, tmap.global_dim), np.float32))
        return cls(ids, np.stack([tmap.images[i].global_desc for i in ids]))

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def query(self, global_desc: np.ndarray, k: int) -> list[Candidate]:
        if len(self._ids) == 0:
            raise EmptyDatabase("cannot retrieve from an empty reference database")
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        q = np.ascontiguousarray(global_desc, dtype=np.float32)
        if q.shape != (self.dim,):
            raise DimensionMismatch(
                f"query dimension {q.shape} does not match index dimension {self.dim}"
            )
        k = min(k, len(self._ids))

        dots = (self._matrix @ q).astype(np.float64)
        q64 = q.astype(np.float64)
        approx = self._sq - 2.0 * dots + q64 @ q64

        take = min(len(self._ids), k + self.RERANK_MARGIN)
        pool = np.argpartition(approx, take - 1)[:take]
        diff = self._matrix[pool].astype(np.float64) - q64
        exact = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((self._ids[pool], exact))[:k]
        chosen = pool[order]
        dist = np.sqrt(np.maximum(exact[order], 0.0))
        return [Candidate(int(i), float(d)) for i, d in zip(self._ids[chosen], dist)]


def ladder_step(
    match_counts: dict[int, int],
    strong: int = STRONG_MATCH_THRESHOLD,
    weak: int = WEAK_MATCH_THRESHOLD,
) -> tuple[Method, dict[int, float]] | None:
    """One rung of the weight ladder over verified match counts.

    Returns the method plus per-image weights, or None when neither rung
    accepts and retrieval should widen.  Strong candidates need strictly more
    than ``strong`` matches; the single-image fallback needs strictly more
    than ``weak``.
    """
    if not match_counts:
        return None
    survivors = {j: m for j, m in match_counts.items() if m > strong}
    if survivors:
        total = sum(survivors.values())
        return Method.WEIGHTED_AVERAGE, {j: m / total for j, m in sorted(survivors.items())}
    best = min(match_counts, key=lambda j: (-match_counts[j], j))
    if match_counts[best] > weak:
        return Method.LARGEST_MATCH, {best: 1.0}
    return None


def weighted_location(weights: dict[int, float], tmap: TopometricMap) -> FloorPoint:
    x = sum(w * tmap.images[j].location.x for j, w in weights.items())
    y = sum(w * tmap.images[j].location.y for j, w in weights.items())
    return FloorPoint(x, y)


@dataclass(frozen=True)
class DirectionEstimate:
    direction: Direction
    yaw_deg: float
    inliers: int
    correspondences: int
    reprojection_rms: float


@dataclass(frozen=True)
class LocalizationResult:
    location: FloorPoint
    method: Method
    k_used: int
    retries: int
    weights: dict[int, float]
    match_counts: dict[int, int]
    candidates: tuple[Candidate, ...]
    direction: Direction | None = None
    yaw_deg: float | None = None
    pnp_inliers: int = 0
    pnp_rms: float | None = None

    @property
    def sum_matches(self) -> int:
        return sum(self.match_counts[j] for j in self.weights)


def gather_correspondences(
    query_locals: list[LocalFeature],
    ranked_image_ids: list[int],
    match_sets: dict[int, MatchSet],
    tmap: TopometricMap,
) -> tuple[np.ndarray, np.ndarray]:
    """Collect deduplicated 3D-2D pairs from matches against landmark-linked features.

    Reference images are visited in ranking order, so when the same query
    feature or the same landmark shows up twice, the pairing from the
    stronger image wins.
    """
    pts3d: list[tuple[float, float, float]] = []
    pixels: list[tuple[float, float]] = []
    seen_query: set[int] = set()
    seen_landmark: set[int] = set()
    for j in ranked_image_ids:
        ref = tmap.images[j]
        for qi, ri in match_sets[j].pairs:
            lid = ref.locals[ri].landmark_id
            if lid is None or lid not in tmap.landmarks:
                continue
            if qi in seen_query or lid in seen_landmark:
                continue
            seen_query.add(qi)
            seen_landmark.add(lid)
            pos = tmap.landmarks[lid].position
            pts3d.append((pos.x, pos.y, pos.z))
            pixels.append(query_locals[qi].keypoint)
    return np.asarray(pts3d, dtype=np.float64), np.asarray(pixels, dtype=np.float64)


def estimate_direction(
    tmap: TopometricMap,
    query_locals: list[LocalFeature],
    weights: dict[int, float],
    match_sets: dict[int, MatchSet],
    camera: PinholeCamera,
    config: LocalizationConfig,
) -> DirectionEstimate | None:
    """Resect the query against matched landmarks; None when that is impossible."""
    ranked = sorted(weights, key=lambda j: (-weights[j], j))
    pts3d, pixels = gather_correspondences(query_locals, ranked, match_sets, tmap)
    if len(pts3d) < 4:
        return None
    try:
        result: PnPResult = solve_pnp(
            pts3d,
            pixels,
            camera,
            seed=config.pnp_seed,
            max_iters=config.pnp_max_iters,
            inlier_px=config.pnp_inlier_px,
            min_consensus=min(config.pnp_min_consensus, len(pts3d)),
        )
    except (ConsensusFailed, InsufficientCorrespondences):
        return None
    if tmap.transform is not None:
        direction = tmap.transform.heading_to_floor(result.yaw_deg)
    else:
        direction = Direction(result.yaw_deg)
    return DirectionEstimate(
        direction=direction,
        yaw_deg=result.yaw_deg,
        inliers=len(result.inlier_indices),
        correspondences=len(pts3d),
        reprojection_rms=result.reprojection_rms,
    )


@dataclass
class Localizer:
    """Bundles a map snapshot with its retrieval index and match cache reuse.

    Build one per map version; localize() carries no state across calls and
    all randomness is seeded, so results are reproducible.
    """

    tmap: TopometricMap
    camera: PinholeCamera = field(default_factory=lambda: PinholeCamera.from_fov(75.0, 640, 360))
    config: LocalizationConfig = field(default_factory=LocalizationConfig)
    matcher: Matcher | None = None

    def __post_init__(self):
        if self.matcher is None:
            self.matcher = MutualNearestMatcher(self.config.ratio)
        self.index = DescriptorIndex.from_map(self.tmap)

    def localize(
        self, global_desc: np.ndarray, query_locals: list[LocalFeature]
    ) -> LocalizationResult:
        """Full pipeline for one query slice.

        Raises:
            EmptyDatabase: the map has no reference images.
            LocalizationFailed: every rung of the ladder declined at every K.
        """
        schedule = retrieval_schedule(self.config, len(self.index))
        match_cache: dict[int, MatchSet] = {}
        counts_seen: dict[int, int] = {}
        for retries, k in enumerate(schedule):
            candidates = tuple(self.index.query(global_desc, k))
            counts: dict[int, int] = {}
            for cand in candidates:
                if cand.image_id not in match_cache:
                    match_cache[cand.image_id] = self._match(cand.image_id, query_locals)
                counts[cand.image_id] = match_cache[cand.image_id].count
            counts_seen = counts
            outcome = ladder_step(counts, self.config.strong_match, self.config.weak_match)
            if outcome is not None:
                method, weights = outcome
                return self._finish(
                    method, weights, counts, candidates, k, retries, query_locals, match_cache
                )
        best = max(counts_seen.values(), default=0)
        raise LocalizationFailed(
            f"no candidate cleared the match thresholds (best {best} matches "
            f"after K schedule {schedule})"
        )

    def localize_slice(self, slice_record) -> LocalizationResult:
        return self.localize(slice_record.global_desc, slice_record.locals)

    def _match(self, image_id: int, query_locals: list[LocalFeature]) -> MatchSet:
        matcher = self.matcher
        if hasattr(matcher, "for_image"):
            matcher = matcher.for_image(image_id)
        return matcher.match(query_locals, self.tmap.images[image_id].locals)

    def _finish(
        self, method, weights, counts, candidates, k, retries, query_locals, match_cache
    ) -> LocalizationResult:
        location = weighted_location(weights, self.tmap)
        est = estimate_direction(
            self.tmap, query_locals, weights, match_cache, self.camera, self.config
        )
        return LocalizationResult(
            location=location,
            method=method,
            k_used=k,
            retries=retries,
            weights=weights,
            match_counts={j: counts[j] for j in weights},
            candidates=candidates,
            direction=None if est is None else est.direction,
            yaw_deg=None if est is None else est.yaw_deg,
            pnp_inliers=0 if est is None else est.inliers,
            pnp_rms=None if est is None else est.reprojection_rms,
        )
