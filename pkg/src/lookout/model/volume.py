"""Parameter-free unprojection of frame features into a canonical voxel volume."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import geom
from ..errors import GridMismatch
from ..ndiff import Tensor, bilinear_sample
from .config import VoxelGridSpec

MIN_DEPTH = 1e-4


@dataclass
class FeatureVolume:
    features: Tensor  # (nz, ny, nx, C)
    visibility: np.ndarray  # (nz, ny, nx) frame-hit counts
    grid: VoxelGridSpec


def projection_coords(pose: geom.Pose, intrinsics, frame: geom.CanonicalFrame,
                      grid: VoxelGridSpec, fmap_hw: tuple):
    """(u, v, mask) arrays mapping each voxel center into the camera's feature map."""
    centers = grid.centers().reshape(-1, 3)
    # componentwise arithmetic (no BLAS) so a per-voxel scalar loop reproduces
    # the exact same floating-point results
    F = frame.rotation
    ox, oy, oz = frame.origin
    cx_, cy_, cz_ = centers[:, 0], centers[:, 1], centers[:, 2]
    wx = F[0, 0] * cx_ + F[0, 1] * cy_ + F[0, 2] * cz_ + ox
    wy = F[1, 0] * cx_ + F[1, 1] * cy_ + F[1, 2] * cz_ + oy
    wz = F[2, 0] * cx_ + F[2, 1] * cy_ + F[2, 2] * cz_ + oz
    R = pose.rotation()
    tx, ty, tz = pose.t
    dx, dy, dz = wx - tx, wy - ty, wz - tz
    camx = R[0, 0] * dx + R[1, 0] * dy + R[2, 0] * dz
    camy = R[0, 1] * dx + R[1, 1] * dy + R[2, 1] * dz
    z = R[0, 2] * dx + R[1, 2] * dy + R[2, 2] * dz
    safe_z = np.where(z > MIN_DEPTH, z, 1.0)
    u = intrinsics.fx * camx / safe_z + intrinsics.cx
    v = intrinsics.cy - intrinsics.fy * camy / safe_z
    h, w = fmap_hw
    mask = (z > MIN_DEPTH) & (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    return u, v, mask


def unproject_frame(obs, frame: geom.CanonicalFrame, grid: VoxelGridSpec,
                    fmap: Tensor | None = None) -> FeatureVolume:
    """Bilinearly lift one frame's feature map onto the canonical voxel grid.

    Differentiable with respect to the feature map; voxels behind the camera or
    outside the map get zero features and zero visibility.
    """
    if fmap is None:
        fmap = Tensor(obs.feature_map)
    h, w, c = fmap.shape
    u, v, mask = projection_coords(obs.pose, obs.intrinsics, frame, grid, (h, w))
    sampled = bilinear_sample(fmap, u, v, mask)
    shape3 = (grid.nz, grid.ny, grid.nx)
    return FeatureVolume(
        features=sampled.reshape(shape3 + (c,)),
        visibility=mask.reshape(shape3).astype(np.int64),
        grid=grid,
    )


def aggregate_temporal(volumes, mode: str = "visible") -> FeatureVolume:
    """Average voxel features over time.

    "visible" divides each voxel by the number of frames that saw it;
    "strict_paper" divides by the frame count unconditionally.
    """
    if mode not in ("visible", "strict_paper"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    grid = volumes[0].grid
    for vol in volumes[1:]:
        if vol.grid != grid:
            raise GridMismatch("feature volumes use different grids")
    total = volumes[0].features
    vis = volumes[0].visibility.copy()
    for vol in volumes[1:]:
        total = total + vol.features
        vis += vol.visibility
    if mode == "visible":
        denom = np.maximum(vis, 1).astype(np.float32)
    else:
        denom = np.full(vis.shape, float(len(volumes)), dtype=np.float32)
    features = total * (1.0 / denom)[..., None]
    return FeatureVolume(features=features, visibility=vis, grid=grid)
