"""Non-learned forecasting baselines: constant velocity, linear extrapolation,
and A* planning over the static occupancy grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import geom, gridplan
from .errors import ConfigInvalid, EmptyGrid, StartBlocked, TooFewSteps
from .evalkit import OccupancyGrid

STEP_DT = 0.05  # seconds per prediction step


@dataclass(frozen=True)
class PlannerConfig:
    max_speed: float = 1.5
    inflation_radius: float = 0.15
    height_band: tuple = (0.15, 2.2)  # meters above ground considered blocking
    ground_height: float | None = None  # defaults to the grid's bottom plane

    def __post_init__(self):
        if self.max_speed <= 0:
            raise ConfigInvalid("max_speed must be positive")
        if self.inflation_radius < 0:
            raise ConfigInvalid("inflation_radius must be >= 0")


def _poses_of(past):
    poses = past.poses if isinstance(past, geom.Trajectory) else list(past)
    if len(poses) < 2:
        raise TooFewSteps(f"need at least 2 past poses, got {len(poses)}")
    return poses


def const_vel(past, t2: int = 8):
    """Extrapolate the linear and angular velocity of the last two steps."""
    poses = _poses_of(past)
    v = np.asarray(poses[-1].t) - np.asarray(poses[-2].t)
    R_last = poses[-1].rotation()
    dR = poses[-2].rotation().T @ R_last
    out = []
    for k in range(1, t2 + 1):
        t = np.asarray(poses[-1].t) + k * v
        R = R_last @ np.linalg.matrix_power(dR, k)
        out.append(geom.Pose.from_matrix(t, R))
    return out


def lin_ext(past, t2: int = 8):
    """Least-squares line per pose coordinate, extrapolated into the future.

    Extrapolated 6D rotation vectors are re-orthonormalized through the
    Gram-Schmidt recovery, so outputs are always valid rotations.
    """
    poses = _poses_of(past)
    flat = np.array([p.flatten() for p in poses])  # (T1, 9)
    xs = np.arange(len(poses), dtype=np.float64)
    future_xs = len(poses) - 1 + np.arange(1, t2 + 1)
    coeffs = np.polyfit(xs, flat, 1)  # (2, 9): slope row then intercept row
    pred = np.outer(future_xs, coeffs[0]) + coeffs[1]
    out = []
    for row in pred:
        R = geom.rot6d_to_matrix(row[3:9])
        out.append(geom.Pose(row[:3], geom.matrix_to_rot6d(R)))
    return out


def bev_blocked(occ: OccupancyGrid, cfg: PlannerConfig) -> np.ndarray:
    """(nz, nx) blocked mask: any occupied voxel in the height band, then inflated."""
    if occ.counts.size == 0:
        raise EmptyGrid("occupancy grid has no cells")
    spec = occ.spec
    ground = cfg.ground_height if cfg.ground_height is not None else spec.origin[1]
    heights = spec.origin[1] + (np.arange(spec.ny) + 0.5) * spec.spacing
    band = (heights >= ground + cfg.height_band[0]) & (heights <= ground + cfg.height_band[1])
    blocked = (occ.occupied & band[None, :, None]).any(axis=1)
    if cfg.inflation_radius > 0 and blocked.any():
        free_dist = distance_transform_edt(~blocked) * spec.spacing
        blocked = free_dist <= cfg.inflation_radius
    return blocked


def _cell_of(p, spec):
    iz = int(np.floor((p[2] - spec.origin[2]) / spec.spacing))
    ix = int(np.floor((p[0] - spec.origin[0]) / spec.spacing))
    return (min(max(iz, 0), spec.nz - 1), min(max(ix, 0), spec.nx - 1))


def _cell_center(cell, spec):
    z = spec.origin[2] + (cell[0] + 0.5) * spec.spacing
    x = spec.origin[0] + (cell[1] + 0.5) * spec.spacing
    return x, z


def plan_path(occ: OccupancyGrid, start, goal, cfg: PlannerConfig):
    """A* path of (x, z) points from start to goal (or the nearest reachable cell)."""
    blocked = bev_blocked(occ, cfg)
    start_cell = _cell_of(start, occ.spec)
    goal_cell = _cell_of(goal, occ.spec)
    if blocked[start_cell]:
        raise StartBlocked(f"start cell {start_cell} is blocked after inflation")
    cells = None
    if not blocked[goal_cell]:
        cells = gridplan.astar(blocked, start_cell, goal_cell)
    if cells is None:
        # goal unreachable: aim for the reachable free cell nearest the goal
        cost, parents = gridplan.reachable_costs(blocked, start_cell)
        zz, xx = np.nonzero(np.isfinite(cost))
        d2 = (zz - goal_cell[0]) ** 2 + (xx - goal_cell[1]) ** 2
        best = int(np.argmin(d2))
        cells = gridplan.path_from_parents(parents, start_cell, (int(zz[best]), int(xx[best])))
    pts = [(float(start[0]), float(start[2]))]
    for cell in cells[1:]:
        pts.append(_cell_center(cell, occ.spec))
    if cells[-1] == goal_cell and not blocked[goal_cell]:
        pts.append((float(goal[0]), float(goal[2])))
    return _shortcut(pts, blocked, occ.spec)


def _segment_free(p, q, blocked, spec) -> bool:
    length = float(np.hypot(q[0] - p[0], q[1] - p[1]))
    n = max(int(np.ceil(length / (spec.spacing * 0.25))), 1)
    for i in range(n + 1):
        f = i / n
        x = p[0] + f * (q[0] - p[0])
        z = p[1] + f * (q[1] - p[1])
        if blocked[_cell_of((x, 0.0, z), spec)]:
            return False
    return True


def _shortcut(pts, blocked, spec):
    """String-pulling: drop intermediate waypoints with free line of sight."""
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_free(pts[i], pts[j], blocked, spec):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def _resample(pts, t2: int, step_len: float):
    pts = np.asarray(pts, dtype=np.float64)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1) if len(pts) > 1 else np.zeros(0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    out = []
    for k in range(1, t2 + 1):
        s = min(k * step_len, total)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(i, len(pts) - 2) if len(pts) > 1 else 0
        if len(pts) == 1 or seg[i] == 0:
            out.append(pts[i])
        else:
            frac = (s - cum[i]) / seg[i]
            out.append(pts[i] + frac * (pts[i + 1] - pts[i]))
    return np.asarray(out)


def astar_lin_ext(occ: OccupancyGrid, start, goal, past, cfg: PlannerConfig | None = None,
                  t2: int = 8):
    """Plan toward the goal on the static BEV occupancy; rotations from lin_ext.

    Waypoints follow the A* path at up to max_speed and stop early when the
    goal is beyond reach in t2 steps. Heights interpolate start to goal.
    """
    cfg = cfg or PlannerConfig()
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    pts = plan_path(occ, start, goal, cfg)
    xz = _resample(pts, t2, cfg.max_speed * STEP_DT)
    rots = lin_ext(past, t2)
    out = []
    for k in range(t2):
        y = start[1] + (k + 1) / t2 * (goal[1] - start[1])
        t = np.array([xz[k, 0], y, xz[k, 1]])
        out.append(geom.Pose(t, rots[k].r))
    return out
