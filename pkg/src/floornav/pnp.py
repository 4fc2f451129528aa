"""Camera pose from 2D-3D correspondences: minimal solver, RANSAC, refinement.

The minimal solver is the classic three-point resection.  With distance
ratios u = s2/s1 and v = s3/s1 between the three unknown point depths, the
law-of-cosines system reduces to a quartic in v; each admissible root gives
the depths, and rigid alignment of the recovered camera-frame points against
the world points yields rotation and translation.  A fourth correspondence
disambiguates the up-to-four solutions inside the RANSAC loop, and the
consensus pose is polished with Levenberg-Marquardt over all inliers.

Camera convention: axes (right, down, forward), pixel u = f*x/z + cx,
v = f*y/z + cy, valid depths z > 0.  The yaw reported is the heading of the
forward axis over the reconstruction ground plane, degrees counterclockwise
from +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .errors import ConsensusFailed, InsufficientCorrespondences

_MIN_SIDE = 1e-9          # world triangles thinner than this are useless
_REAL_ROOT_TOL = 1e-8
_MIN_DEPTH = 1e-6

DEFAULT_MAX_ITERS = 1000
DEFAULT_INLIER_PX = 4.0
DEFAULT_MIN_CONSENSUS = 12
DEFAULT_CONFIDENCE = 0.99


@dataclass(frozen=True)
class PinholeCamera:
    focal: float
    cx: float
    cy: float

    @classmethod
    def from_fov(cls, fov_deg: float, width: int, height: int) -> "PinholeCamera":
        focal = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
        return cls(focal, width / 2.0, height / 2.0)

    def bearings(self, pixels: np.ndarray) -> np.ndarray:
        """Unit view rays for an (n, 2) pixel array."""
        rays = np.column_stack(
            [
                (pixels[:, 0] - self.cx) / self.focal,
                (pixels[:, 1] - self.cy) / self.focal,
                np.ones(len(pixels)),
            ]
        )
        return rays / np.linalg.norm(rays, axis=1, keepdims=True)

    def project(self, rotation: np.ndarray, tvec: np.ndarray, points: np.ndarray) -> np.ndarray:
        cam = points @ rotation.T + tvec
        z = cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = self.focal * cam[:, :2] / z[:, None]
        uv[:, 0] += self.cx
        uv[:, 1] += self.cy
        uv[z <= 0] = np.inf
        return uv


@dataclass(frozen=True)
class PnPResult:
    rotation: np.ndarray        # (3, 3), world -> camera
    tvec: np.ndarray            # (3,)
    center: np.ndarray          # (3,), camera position in world coordinates
    yaw_deg: float
    inlier_indices: np.ndarray  # sorted int indices into the input
    reprojection_rms: float
    iterations: int

    def __post_init__(self):
        for arr in (self.rotation, self.tvec, self.center, self.inlier_indices):
            arr.setflags(write=False)


def _p3p_depth_ratios(cos_a: float, cos_b: float, cos_g: float, a: float, b: float, c: float):
    """Solve the three-point depth system; yields (s1, s2, s3) tuples.

    Side a opposes point 1, b opposes 2, c opposes 3; cos_a is the angle
    between rays 2 and 3, and so on, matching the opposing-side layout.
    """
    ratio_ab = (a * a) / (b * b)
    ratio_cb = (c * c) / (b * b)
    P, Q, R = 2.0 * cos_a, 2.0 * cos_b, 2.0 * cos_g

    # u eliminated via u = N(v) / (R - P v); substitution into the third
    # equation leaves the quartic N^2 - R N D + G D^2 = 0 with D = R - P v.
    diff = ratio_ab - ratio_cb
    N = np.array([1.0 + diff, -diff * Q, diff - 1.0])
    D = np.array([R, -P])
    G = np.array([1.0 - ratio_cb, ratio_cb * Q, -ratio_cb])
    quartic = npoly.polyadd(
        npoly.polysub(npoly.polymul(N, N), R * npoly.polymul(N, D)),
        npoly.polymul(G, npoly.polymul(D, D)),
    )
    if not np.any(np.abs(quartic) > 0):
        return
    roots = npoly.polyroots(quartic)

    for root in roots:
        if abs(root.imag) > _REAL_ROOT_TOL * max(1.0, abs(root.real)):
            continue
        v = float(root.real)
        if v <= 0:
            continue
        denom_u = R - P * v
        if abs(denom_u) < 1e-12:
            continue
        u = float(npoly.polyval(v, N)) / denom_u
        if u <= 0:
            continue
        s1_sq = (b * b) / (1.0 + v * v - Q * v)
        if s1_sq <= 0:
            continue
        s1 = math.sqrt(s1_sq)
        yield s1, u * s1, v * s1


def _rigid_align(world: np.ndarray, camera: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotation and translation with camera = R @ world + t (Kabsch)."""
    wc = world.mean(axis=0)
    cc = camera.mean(axis=0)
    h = (world - wc).T @ (camera - cc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, cc - rot @ wc


def _p3p_solutions(points3d: np.ndarray, rays: np.ndarray):
    """All candidate (R, t) poses for three correspondences."""
    a = np.linalg.norm(points3d[1] - points3d[2])
    b = np.linalg.norm(points3d[0] - points3d[2])
    c = np.linalg.norm(points3d[0] - points3d[1])
    if min(a, b, c) < _MIN_SIDE:
        return
    cos_a = float(rays[1] @ rays[2])
    cos_b = float(rays[0] @ rays[2])
    cos_g = float(rays[0] @ rays[1])
    for s1, s2, s3 in _p3p_depth_ratios(cos_a, cos_b, cos_g, a, b, c):
        camera_pts = np.array([s1 * rays[0], s2 * rays[1], s3 * rays[2]])
        yield _rigid_align(points3d, camera_pts)


def yaw_from_rotation(rotation: np.ndarray) -> float:
    """Heading of the camera forward axis over the ground plane, degrees CCW from +x."""
    forward = rotation[2]
    return math.degrees(math.atan2(forward[2], forward[0])) % 360.0


def _reprojection_errors(
    camera: PinholeCamera, rotation: np.ndarray, tvec: np.ndarray,
    points3d: np.ndarray, pixels: np.ndarray,
) -> np.ndarray:
    proj = camera.project(rotation, tvec, points3d)
    err = np.linalg.norm(proj - pixels, axis=1)
    return np.where(np.isfinite(err), err, np.inf)


def _refine(
    camera: PinholeCamera, rotation: np.ndarray, tvec: np.ndarray,
    points3d: np.ndarray, pixels: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    def residuals(params):
        rot = Rotation.from_rotvec(params[:3]).as_matrix()
        proj = camera.project(rot, params[3:], points3d)
        bad = ~np.isfinite(proj)
        proj[bad] = 1e6
        return (proj - pixels).ravel()

    x0 = np.concatenate([Rotation.from_matrix(rotation).as_rotvec(), tvec])
    fit = least_squares(residuals, x0, method="lm", max_nfev=200)
    return Rotation.from_rotvec(fit.x[:3]).as_matrix(), fit.x[3:]


def solve_pnp(
    points3d: np.ndarray,
    pixels: np.ndarray,
    camera: PinholeCamera,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    inlier_px: float = DEFAULT_INLIER_PX,
    min_consensus: int = DEFAULT_MIN_CONSENSUS,
    confidence: float = DEFAULT_CONFIDENCE,
) -> PnPResult:
    """Robustly estimate camera pose from matched world points and pixels.

    Runs seeded RANSAC over four-point samples (three for the minimal solver,
    the fourth to pick among its solutions), stops early once the expected
    number of draws at ``confidence`` is exhausted, then refines over the
    final consensus set.

    Raises:
        InsufficientCorrespondences: fewer than four input pairs.
        ConsensusFailed: no pose reached ``min_consensus`` inliers.
    """
    points3d = np.asarray(points3d, dtype=np.float64)
    pixels = np.asarray(pixels, dtype=np.float64)
    n = len(points3d)
    if n < 4 or len(pixels) != n:
        raise InsufficientCorrespondences(
            f"need at least 4 matched pairs, got {min(n, len(pixels))}"
        )

    rays = camera.bearings(pixels)
    rng = np.random.default_rng(seed)

    best_count = 0
    best_pose: tuple[np.ndarray, np.ndarray] | None = None
    best_mask: np.ndarray | None = None
    needed = max_iters
    iterations = 0

    for iterations in range(1, max_iters + 1):
        if iterations > needed:
            iterations -= 1
            break
        sample = rng.choice(n, size=4, replace=False)
        tri, check = sample[:3], sample[3]

        candidate: tuple[np.ndarray, np.ndarray] | None = None
        candidate_err = inlier_px
        for rot, tvec in _p3p_solutions(points3d[tri], rays[tri]):
            err = _reprojection_errors(
                camera, rot, tvec, points3d[check : check + 1], pixels[check : check + 1]
            )[0]
            if err < candidate_err:
                candidate_err = err
                candidate = (rot, tvec)
        if candidate is None:
            continue

        errors = _reprojection_errors(camera, *candidate, points3d, pixels)
        mask = errors < inlier_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_pose = candidate
            best_mask = mask
            ratio = count / n
            if ratio >= 1.0:
                break
            denom = math.log(max(1.0 - ratio**4, 1e-12))
            needed = min(max_iters, math.ceil(math.log(1.0 - confidence) / denom))

    if best_pose is None or best_count < min_consensus:
        raise ConsensusFailed(
            f"best consensus {best_count} of {n} below minimum {min_consensus}"
        )

    inliers = np.flatnonzero(best_mask)
    rot, tvec = _refine(camera, *best_pose, points3d[inliers], pixels[inliers])
    final_err = _reprojection_errors(camera, rot, tvec, points3d[inliers], pixels[inliers])
    return PnPResult(
        rotation=rot,
        tvec=tvec,
        center=-rot.T @ tvec,
        yaw_deg=yaw_from_rotation(rot),
        inlier_indices=inliers,
        reprojection_rms=float(np.sqrt(np.mean(final_err**2))),
        iterations=iterations,
    )
