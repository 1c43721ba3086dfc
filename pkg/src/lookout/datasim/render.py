"""Per-frame feature rendering: a deterministic geometric/semantic stand-in encoder.

Projects scene points and agent bodies through a pinhole model defined on the
feature grid, keeps the nearest hit per pixel, and writes channels
[inverse depth, static mask, dynamic mask, hit height, semantic one-hots...].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import geom
from ..errors import ConfigInvalid
from .scene import Scene

MIN_DEPTH = 1e-6
# fixed ring geometry used to turn an agent into sample points
_AGENT_COLUMN_HEIGHTS = np.array([0.15, 0.55, 0.95, 1.35, 1.65])
_AGENT_RING_HEIGHTS = np.array([0.5, 1.2])
_AGENT_RING_ANGLES = np.linspace(0.0, 2.0 * math.pi, 6, endpoint=False)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigInvalid("focal lengths must be positive")

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d):
        return cls(d["fx"], d["fy"], d["cx"], d["cy"])


@dataclass(frozen=True)
class RenderConfig:
    resolution: int = 16
    channels: int = 8  # >= 4; channels beyond 4 hold semantic one-hots
    fov_deg: float = 90.0

    def intrinsics(self) -> Intrinsics:
        f = (self.resolution / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)
        c = (self.resolution - 1) / 2.0
        return Intrinsics(f, f, c, c)


@dataclass(frozen=True)
class FrameObservation:
    feature_map: np.ndarray  # (H, W, C) float32
    intrinsics: Intrinsics
    pose: geom.Pose

    def __post_init__(self):
        object.__setattr__(self, "feature_map", np.asarray(self.feature_map, dtype=np.float32))


def agent_sample_points(agent, frame_index: int, ground_height: float) -> np.ndarray:
    """3D sample points representing the agent's body at a frame."""
    x, z = agent.position_at(frame_index)
    pts = [np.array([x, ground_height + h, z]) for h in _AGENT_COLUMN_HEIGHTS]
    for h in _AGENT_RING_HEIGHTS:
        for a in _AGENT_RING_ANGLES:
            pts.append(np.array([x + agent.radius * math.cos(a), ground_height + h,
                                 z + agent.radius * math.sin(a)]))
    return np.stack(pts)


def render_features(scene: Scene, pose: geom.Pose, config: RenderConfig = RenderConfig(),
                    frame_index: int = 0) -> FrameObservation:
    """Deterministic feature map for one camera pose; empty views are all-zero."""
    if config.channels < 4:
        raise ConfigInvalid("need at least 4 feature channels")
    res = config.resolution
    intr = config.intrinsics()

    pts = [scene.static_points] if len(scene.static_points) else []
    labels = [scene.labels] if len(scene.static_points) else []
    dynamic = [np.zeros(len(scene.static_points), dtype=bool)] if len(scene.static_points) else []
    for agent in scene.dynamic_agents:
        ap = agent_sample_points(agent, frame_index, scene.ground_height)
        pts.append(ap)
        labels.append(np.full(len(ap), -1, dtype=np.int64))
        dynamic.append(np.ones(len(ap), dtype=bool))

    fmap = np.zeros((res, res, config.channels), dtype=np.float32)
    if not pts:
        return FrameObservation(fmap, intr, pose)
    pts = np.concatenate(pts)
    labels = np.concatenate(labels)
    dynamic = np.concatenate(dynamic)

    R = pose.rotation()
    cam = (pts - pose.t) @ R  # rows: R.T @ (p - t)
    z = cam[:, 2]
    front = z > MIN_DEPTH
    u = intr.fx * cam[:, 0] / z + intr.cx
    v = intr.cy - intr.fy * cam[:, 1] / z
    col = np.floor(u).astype(np.int64)
    row = np.floor(v).astype(np.int64)
    valid = front & (col >= 0) & (col < res) & (row >= 0) & (row < res)
    if not np.any(valid):
        return FrameObservation(fmap, intr, pose)

    idx = np.nonzero(valid)[0]
    pix = row[idx] * res + col[idx]
    order = np.lexsort((idx, z[idx], pix))
    pix_sorted = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    winners = idx[order[first]]
    wpix = pix_sorted[first]

    rr, cc = wpix // res, wpix % res
    fmap[rr, cc, 0] = (1.0 / z[winners]).astype(np.float32)
    fmap[rr, cc, 1] = (~dynamic[winners]).astype(np.float32)
    fmap[rr, cc, 2] = dynamic[winners].astype(np.float32)
    fmap[rr, cc, 3] = pts[winners, 1].astype(np.float32)
    n_sem = config.channels - 4
    if n_sem > 0:
        static_hit = ~dynamic[winners]
        sem = labels[winners] % n_sem
        fmap[rr[static_hit], cc[static_hit], 4 + sem[static_hit]] = 1.0
    return FrameObservation(fmap, intr, pose)
