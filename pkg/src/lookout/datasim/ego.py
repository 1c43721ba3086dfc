"""Ego head trajectory generation: planned walking with waiting, slowing, and yaw scans."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .. import geom, gridplan
from ..errors import NoFreePath
from .scene import DT, FPS, Scene


@dataclass(frozen=True)
class EgoConfig:
    n_steps: int = 160
    clearance_m: float = 0.35
    inflation_m: float = 0.6
    cell_m: float = 0.15
    speed_range: tuple = (0.9, 1.4)
    slow_dist_m: float = 1.5
    crawl_speed: float = 0.15
    stop_margin_m: float = 0.3
    head_height_range: tuple = (1.5, 1.8)
    bob_amp_m: float = 0.02
    scan_trigger_m: float = 1.2  # distance from zone edge that triggers a scan
    scan_amp_deg_range: tuple = (45.0, 80.0)
    scan_duration_range: tuple = (0.5, 1.0)
    height_band: tuple = (0.15, 2.2)  # above ground; obstacles counted for planning
    max_attempts: int = 25


class _PlanGrid:
    """2D blocked map over the scene footprint with obstacle inflation."""

    def __init__(self, scene: Scene, cfg: EgoConfig):
        self.cell = cfg.cell_m
        half = scene.extent_m / 2
        self.origin = np.array([-half, -half])  # (x, z) of cell (0, 0) corner
        n = int(math.ceil(scene.extent_m / self.cell))
        occupied = np.zeros((n, n), dtype=bool)
        pts = scene.static_points
        if len(pts):
            band = (pts[:, 1] >= scene.ground_height + cfg.height_band[0]) & \
                   (pts[:, 1] <= scene.ground_height + cfg.height_band[1])
            idx = np.floor((pts[band][:, [0, 2]] - self.origin) / self.cell).astype(np.int64)
            keep = (idx[:, 0] >= 0) & (idx[:, 0] < n) & (idx[:, 1] >= 0) & (idx[:, 1] < n)
            occupied[idx[keep, 0], idx[keep, 1]] = True
        free_dist = ndimage.distance_transform_edt(~occupied) * self.cell
        self.blocked = free_dist <= cfg.inflation_m
        self.free_dist = free_dist
        self.n = n

    def cell_of(self, xz) -> tuple:
        idx = np.floor((np.asarray(xz) - self.origin) / self.cell).astype(np.int64)
        return int(idx[0]), int(idx[1])

    def center_of(self, cell) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell


def _polyline_lengths(points):
    deltas = np.diff(points, axis=0)
    seg = np.linalg.norm(deltas, axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _point_at_arc(points, cum, s):
    s = min(max(s, 0.0), cum[-1])
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(i, len(points) - 2)
    span = cum[i + 1] - cum[i]
    frac = 0.0 if span <= 0 else (s - cum[i]) / span
    return points[i] + frac * (points[i + 1] - points[i])


def _scan_offset(phase: float, amplitude: float) -> float:
    """Yaw excursion profile: swing to +A, through to -A, back to center."""
    return amplitude * math.sin(2.0 * math.pi * phase)


def gen_ego_trajectory(scene: Scene, seed: int, config: EgoConfig = EgoConfig()) -> geom.Trajectory:
    """20 Hz head trajectory through the scene, deterministic in (scene, seed, config)."""
    grid = _PlanGrid(scene, config)
    last_error = None
    for attempt in range(config.max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        traj = _try_generate(scene, grid, rng, config)
        if traj is not None:
            return traj
        last_error = attempt
    raise NoFreePath(f"no valid ego trajectory after {config.max_attempts} attempts (seed {seed}, last attempt {last_error})")


def _try_generate(scene: Scene, grid: _PlanGrid, rng, cfg: EgoConfig):
    spawn_ok = grid.free_dist >= max(1.0, cfg.inflation_m + grid.cell)
    candidates = np.argwhere(spawn_ok & ~grid.blocked)
    if len(candidates) < 2:
        return None
    start = tuple(candidates[rng.integers(len(candidates))])
    dists = np.linalg.norm(candidates - np.array(start), axis=1) * grid.cell
    far = candidates[dists >= scene.extent_m * 0.35]
    if len(far) == 0:
        return None
    goal = tuple(far[rng.integers(len(far))])
    cells = gridplan.astar(grid.blocked, start, goal)
    if cells is None:
        return None
    path = np.array([grid.center_of(c) for c in cells])
    cum = _polyline_lengths(path)

    nominal = rng.uniform(*cfg.speed_range)
    h0 = rng.uniform(*cfg.head_height_range)
    amp = math.radians(rng.uniform(*cfg.scan_amp_deg_range))
    scan_len = rng.uniform(*cfg.scan_duration_range)
    bob_freq = rng.uniform(1.6, 2.0)

    zones_todo = list(scene.crossing_zones)
    scan_steps_left = 0
    scan_total = max(1, int(round(scan_len * FPS)))
    scan_side = 1.0

    s = 0.0
    pos = path[0].copy()
    heading = None
    poses = []
    n_agents = len(scene.dynamic_agents)
    for k in range(cfg.n_steps):
        t = k * DT
        speed = nominal if s < cum[-1] else 0.0

        # yaw-scan state machine near crossing zones
        scan_offset = 0.0
        if scan_steps_left > 0:
            phase = 1.0 - scan_steps_left / scan_total
            scan_offset = scan_side * _scan_offset(phase, amp)
            scan_steps_left -= 1
            speed = 0.0
        else:
            for zi, (zx, zz, zr) in enumerate(zones_todo):
                if math.hypot(pos[0] - zx, pos[1] - zz) <= zr + cfg.scan_trigger_m:
                    scan_steps_left = scan_total
                    scan_side = 1.0 if rng.random() < 0.5 else -1.0
                    zones_todo.pop(zi)
                    speed = 0.0
                    break

        # dynamic obstacle handling: crawl when blocked ahead, stop before contact
        if speed > 0.0 and n_agents:
            next_pos = _point_at_arc(path, cum, s + speed * DT)
            move_dir = next_pos - pos
            norm = np.linalg.norm(move_dir)
            move_dir = move_dir / norm if norm > 1e-9 else move_dir
            for agent in scene.dynamic_agents:
                ap = agent.position_at(k)
                rel = ap - pos
                dist = np.linalg.norm(rel) - agent.radius
                ahead = norm <= 1e-9 or float(np.dot(rel, move_dir)) > 0.0
                if dist < cfg.slow_dist_m and ahead:
                    speed = min(speed, cfg.crawl_speed)
                ap_next = agent.position_at(k + 1)
                cand = _point_at_arc(path, cum, s + speed * DT)
                if np.linalg.norm(ap_next - cand) - agent.radius < cfg.clearance_m + cfg.stop_margin_m:
                    speed = 0.0

        s_new = min(s + speed * DT, cum[-1])
        new_pos = _point_at_arc(path, cum, s_new)
        step_vec = new_pos - pos
        if np.linalg.norm(step_vec) > 1e-9:
            d = step_vec / np.linalg.norm(step_vec)
            heading = d if heading is None else 0.75 * heading + 0.25 * d
            heading = heading / np.linalg.norm(heading)
        elif heading is None:
            fallback = _point_at_arc(path, cum, s + 4 * grid.cell) - pos
            n = np.linalg.norm(fallback)
            heading = fallback / n if n > 1e-9 else np.array([0.0, 1.0])
        pos, s = new_pos, s_new

        yaw = geom.heading_yaw(np.array([heading[0], 0.0, heading[1]])) + scan_offset
        height = scene.ground_height + h0 + cfg.bob_amp_m * math.sin(2 * math.pi * bob_freq * t)
        pitch = 0.04 * math.sin(2 * math.pi * 0.3 * t)
        R = geom.yaw_matrix(yaw) @ geom.rot_x(pitch)
        poses.append(geom.Pose.from_matrix(np.array([pos[0], height, pos[1]]), R))

    traj = geom.Trajectory.at_20hz(poses)
    if not _validate_clearance(scene, traj, cfg):
        return None
    return traj


def _validate_clearance(scene: Scene, traj: geom.Trajectory, cfg: EgoConfig) -> bool:
    pts = scene.static_points
    trans = traj.translations()
    if len(pts):
        from scipy.spatial import cKDTree

        d, _ = cKDTree(pts).query(trans)
        if d.min() < cfg.clearance_m:
            return False
    for agent in scene.dynamic_agents:
        for k in range(len(traj)):
            ap = agent.position_at(k)
            dist = math.hypot(trans[k, 0] - ap[0], trans[k, 2] - ap[1]) - agent.radius
            if dist < cfg.clearance_m:
                return False
    return True
