"""Synthetic desk-scale navigation scenes: obstacle point clouds and walking agents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigInvalid

FPS = 20
DT = 1.0 / FPS

LABEL_WALL = 0
LABEL_BOX = 1
LABEL_CYLINDER = 2


@dataclass(frozen=True)
class SceneConfig:
    n_static_obstacles: int = 6
    n_agents: int = 2
    extent_m: float = 16.0
    duration_s: float = 15.0
    n_crossing_zones: int = 1
    point_density: float = 250.0  # pts per m^2 on obstacle surfaces
    wall_density: float = 60.0
    ground_height: float = 0.0
    agent_speed_range: tuple = (0.8, 1.6)
    agent_radius_range: tuple = (0.25, 0.35)

    def validate(self):
        if self.extent_m < 10.0:
            raise ConfigInvalid(f"extent_m must be >= 10, got {self.extent_m}")
        if self.n_static_obstacles < 0 or self.n_agents < 0:
            raise ConfigInvalid("obstacle / agent counts must be >= 0")


@dataclass(frozen=True)
class AgentTrack:
    """One walking agent: 20 Hz ground positions, headings, and a collision radius."""

    positions: np.ndarray  # (T, 2) ground-plane (x, z), meters
    headings: np.ndarray  # (T,) radians
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=np.float64))
        object.__setattr__(self, "headings", np.asarray(self.headings, dtype=np.float64))

    def __len__(self):
        return len(self.positions)

    def position_at(self, frame: int) -> np.ndarray:
        frame = min(max(frame, 0), len(self.positions) - 1)
        return self.positions[frame]


@dataclass(frozen=True)
class Scene:
    static_points: np.ndarray  # (N, 3)
    labels: np.ndarray  # (N,) int
    dynamic_agents: tuple
    ground_height: float
    extent_m: float
    crossing_zones: tuple  # ((x, z, radius), ...)
    rng_seed: int
    duration_s: float

    def n_frames(self) -> int:
        return int(round(self.duration_s * FPS))


def _sample_box(rng, density) -> tuple:
    w, d = rng.uniform(0.4, 1.4, size=2)
    h = rng.uniform(0.6, 2.2)
    yaw = rng.uniform(0, 2 * math.pi)
    faces = []
    # four sides + top, area-proportional sampling
    specs = [("x", w, h), ("x", w, h), ("z", d, h), ("z", d, h), ("top", w, d)]
    c, s = math.cos(yaw), math.sin(yaw)
    for idx, (kind, a, b) in enumerate(specs):
        n = max(1, int(math.ceil(a * b * density)))
        uu = rng.uniform(-0.5, 0.5, n)
        vv = rng.uniform(0, 1, n)
        if kind == "x":
            sign = 1.0 if idx == 0 else -1.0
            local = np.stack([uu * w, vv * h, np.full(n, sign * d / 2)], axis=1)
        elif kind == "z":
            sign = 1.0 if idx == 2 else -1.0
            local = np.stack([np.full(n, sign * w / 2), vv * h, uu * d], axis=1)
        else:
            local = np.stack([uu * w, np.full(n, h), (rng.uniform(-0.5, 0.5, n)) * d], axis=1)
        # yaw about the up axis
        x = local[:, 0] * c + local[:, 2] * s
        z = -local[:, 0] * s + local[:, 2] * c
        faces.append(np.stack([x, local[:, 1], z], axis=1))
    return np.concatenate(faces), LABEL_BOX


def _sample_cylinder(rng, density) -> tuple:
    r = rng.uniform(0.2, 0.6)
    h = rng.uniform(0.6, 2.2)
    side_area = 2 * math.pi * r * h
    n = max(1, int(math.ceil(side_area * density)))
    theta = rng.uniform(0, 2 * math.pi, n)
    y = rng.uniform(0, h, n)
    pts = np.stack([r * np.cos(theta), y, r * np.sin(theta)], axis=1)
    n_top = max(1, int(math.ceil(math.pi * r * r * density)))
    rr = r * np.sqrt(rng.uniform(0, 1, n_top))
    tt = rng.uniform(0, 2 * math.pi, n_top)
    top = np.stack([rr * np.cos(tt), np.full(n_top, h), rr * np.sin(tt)], axis=1)
    return np.concatenate([pts, top]), LABEL_CYLINDER


def _boundary_walls(rng, extent, density, ground) -> np.ndarray:
    half = extent / 2
    height = 2.0
    pts = []
    for axis, fixed in [(0, -half), (0, half), (2, -half), (2, half)]:
        n = max(1, int(math.ceil(extent * height * density)))
        run = rng.uniform(-half, half, n)
        y = rng.uniform(0, height, n) + ground
        if axis == 0:
            pts.append(np.stack([np.full(n, fixed), y, run], axis=1))
        else:
            pts.append(np.stack([run, y, np.full(n, fixed)], axis=1))
    return np.concatenate(pts)


def _gen_agent(rng, cfg: SceneConfig, n_frames: int) -> AgentTrack:
    half = cfg.extent_m / 2 - 0.5
    n_way = rng.integers(2, 5)
    waypoints = rng.uniform(-half, half, size=(n_way, 2))
    radius = rng.uniform(*cfg.agent_radius_range)
    positions = [waypoints[0].copy()]
    headings = [0.0]
    seg = 1
    speed = rng.uniform(*cfg.agent_speed_range)
    pos = waypoints[0].copy()
    heading = 0.0
    while len(positions) < n_frames:
        if seg < n_way:
            target = waypoints[seg]
            delta = target - pos
            dist = np.linalg.norm(delta)
            if dist < speed * DT:
                pos = target.copy()
                seg += 1
                speed = rng.uniform(*cfg.agent_speed_range)
            else:
                step = delta / dist * speed * DT
                pos = pos + step
                heading = math.atan2(-step[0], step[1])
        positions.append(pos.copy())
        headings.append(heading)
    return AgentTrack(np.array(positions[:n_frames]), np.array(headings[:n_frames]), radius)


def gen_scene(seed: int, config: SceneConfig = SceneConfig()) -> Scene:
    """Deterministic scene from (seed, config)."""
    config.validate()
    rng = np.random.default_rng(seed)
    half = config.extent_m / 2
    clouds = [_boundary_walls(rng, config.extent_m, config.wall_density, config.ground_height)]
    labels = [np.full(len(clouds[0]), LABEL_WALL, dtype=np.int64)]
    for _ in range(config.n_static_obstacles):
        local, label = (_sample_box if rng.random() < 0.5 else _sample_cylinder)(rng, config.point_density)
        center = rng.uniform(-half + 1.5, half - 1.5, size=2)
        pts = local + np.array([center[0], config.ground_height, center[1]])
        clouds.append(pts)
        labels.append(np.full(len(pts), label, dtype=np.int64))
    n_frames = int(round(config.duration_s * FPS))
    agents = tuple(_gen_agent(rng, config, n_frames) for _ in range(config.n_agents))
    zones = tuple(
        (rng.uniform(-half * 0.5, half * 0.5), rng.uniform(-half * 0.5, half * 0.5), rng.uniform(1.0, 1.6))
        for _ in range(config.n_crossing_zones)
    )
    return Scene(
        static_points=np.concatenate(clouds),
        labels=np.concatenate(labels),
        dynamic_agents=agents,
        ground_height=config.ground_height,
        extent_m=config.extent_m,
        crossing_zones=zones,
        rng_seed=seed,
        duration_s=config.duration_s,
    )


def filter_pointcloud(points, voxel_min_support: int = 3, height_band=(-0.5, 3.5),
                      voxel_size: float = 0.2) -> np.ndarray:
    """Drop points in sparsely supported voxels or outside the height band. Idempotent."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return points
    in_band = (points[:, 1] >= height_band[0]) & (points[:, 1] <= height_band[1])
    points = points[in_band]
    if len(points) == 0:
        return points
    cells = np.floor(points / voxel_size).astype(np.int64)
    _, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    return points[counts[inverse] >= voxel_min_support]
