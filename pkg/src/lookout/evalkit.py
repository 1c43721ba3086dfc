"""Collision and accuracy metrics, occupancy and height-map construction, reports."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geom
from .errors import (
    EmptyCloud,
    InconsistentClipSets,
    LengthMismatch,
    MissingDynamicData,
)
from .model.config import VoxelGridSpec

COLLISION_KS = (15, 25, 35)
CSV_COLUMNS = ["method", "L1_trans", "L1_rot",
               "Col_stt_15", "Col_dyn_15", "Col_stt_25", "Col_dyn_25",
               "Col_stt_35", "Col_dyn_35", "Col_stt_avg", "Col_dyn_avg"]


@dataclass
class OccupancyGrid:
    spec: VoxelGridSpec
    counts: np.ndarray  # (nz, ny, nx) per-cell point counts
    min_points: int = 1

    @property
    def occupied(self) -> np.ndarray:
        return self.counts >= self.min_points


def build_occupancy(points, spec: VoxelGridSpec, min_points: int = 1) -> OccupancyGrid:
    """Bin points into cells by floor indexing; out-of-grid points are dropped."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    counts = np.zeros((spec.nz, spec.ny, spec.nx), dtype=np.int64)
    if len(points):
        x0, y0, z0 = spec.origin
        ix = np.floor((points[:, 0] - x0) / spec.spacing).astype(np.int64)
        iy = np.floor((points[:, 1] - y0) / spec.spacing).astype(np.int64)
        iz = np.floor((points[:, 2] - z0) / spec.spacing).astype(np.int64)
        keep = ((ix >= 0) & (ix < spec.nx) & (iy >= 0) & (iy < spec.ny)
                & (iz >= 0) & (iz < spec.nz))
        np.add.at(counts, (iz[keep], iy[keep], ix[keep]), 1)
    return OccupancyGrid(spec=spec, counts=counts, min_points=min_points)


def heightmap(occ: OccupancyGrid) -> np.ndarray:
    """(nz, nx) map of the highest occupied voxel-center height; NaN where empty."""
    spec = occ.spec
    y0 = spec.origin[1]
    heights = y0 + (np.arange(spec.ny) + 0.5) * spec.spacing
    mask = occ.occupied
    col_any = mask.any(axis=1)
    # argmax over a reversed axis finds the topmost occupied cell
    top = spec.ny - 1 - np.argmax(mask[:, ::-1, :], axis=1)
    out = np.where(col_any, heights[top], np.nan)
    return out


def nearest_static_distance(p, points) -> float:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise EmptyCloud("static point cloud is empty")
    dist, _ = cKDTree(points).query(np.asarray(p, dtype=np.float64))
    return float(dist)


def _translations(pred) -> np.ndarray:
    if isinstance(pred, geom.Trajectory):
        pred = pred.poses
    if isinstance(pred, np.ndarray):
        return pred.reshape(-1, 3).astype(np.float64)
    return np.array([np.asarray(p.t, dtype=np.float64) for p in pred])


def _pooled_pct(distances, k_cm: float) -> float:
    d = np.concatenate([np.asarray(x, dtype=np.float64).ravel() for x in distances])
    return 100.0 * float(np.mean(d >= k_cm / 100.0))


def col_static(preds, cloud_points, k_cm: float) -> float:
    """Percentage of predicted steps at least k cm from the nearest static point.

    Steps are pooled over all clips before thresholding.
    """
    cloud = np.asarray(cloud_points, dtype=np.float64).reshape(-1, 3)
    if len(cloud) == 0:
        raise EmptyCloud("static point cloud is empty")
    tree = cKDTree(cloud)
    dists = [tree.query(_translations(p))[0] for p in preds]
    return _pooled_pct(dists, k_cm)


def step_dynamic_distances(positions, frame_indices, tracks) -> np.ndarray:
    """Per-step distance to the closest agent surface; inf when no agents exist."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    out = np.full(len(positions), np.inf)
    for agent in tracks:
        for s, (pos, fi) in enumerate(zip(positions, frame_indices)):
            ax, az = agent.position_at(int(fi))
            d = float(np.hypot(pos[0] - ax, pos[2] - az)) - agent.radius
            out[s] = min(out[s], d)
    return out


def col_dynamic(preds, frame_indices, k_cm: float, tracks=None, distances=None) -> float:
    """Dynamic-obstacle counterpart of col_static.

    Track mode measures 2D distance to simulator agents at each step's frame
    index, minus the agent radius. File mode reads a per-frame distance map
    (frame index -> meters). With no agents at all the pass is vacuous (100).
    """
    if tracks is None and distances is None:
        raise MissingDynamicData("need agent tracks or a per-frame distance map")
    step_dists = []
    for pred, fis in zip(preds, frame_indices):
        pos = _translations(pred)
        if len(pos) != len(fis):
            raise LengthMismatch(f"{len(pos)} steps but {len(fis)} frame indices")
        if tracks is not None:
            step_dists.append(step_dynamic_distances(pos, fis, tracks))
        else:
            try:
                step_dists.append(np.array([distances[int(fi)] for fi in fis]))
            except KeyError as exc:
                raise MissingDynamicData(f"no distance for frame {exc}") from exc
    return _pooled_pct(step_dists, k_cm)


def l1_metrics(pred, gt):
    """Per-step averages of the translation and rotation loss terms."""
    pred_poses = pred.poses if isinstance(pred, geom.Trajectory) else list(pred)
    gt_poses = gt.poses if isinstance(gt, geom.Trajectory) else list(gt)
    if len(pred_poses) != len(gt_poses):
        raise LengthMismatch(f"pred has {len(pred_poses)} poses, gt has {len(gt_poses)}")
    if not pred_poses:
        raise LengthMismatch("empty trajectories")
    trans = 0.0
    rot = 0.0
    for p, g in zip(pred_poses, gt_poses):
        trans += float(np.abs(np.asarray(p.t) - np.asarray(g.t)).sum())
        rot += float(np.abs(g.rotation().T @ p.rotation() - np.eye(3)).sum())
    n = len(pred_poses)
    return trans / n, rot / n


@dataclass
class ClipEval:
    """Everything metric computation needs to know about one evaluation clip."""

    clip_id: str
    gt_canonical: list  # T2 ground-truth Poses in the canonical frame
    frame: geom.CanonicalFrame
    frame_indices: tuple  # absolute frame index per future step
    cloud_points: np.ndarray = None  # static cloud of the parent sequence
    tracks: tuple | None = None  # agent tracks of the parent sequence
    dyn_distances: dict | None = None  # frame index -> meters, file mode


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)  # dicts keyed by CSV_COLUMNS
    n_clips: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            cells = [row["method"]]
            cells += [f"{row[c]:.4f}" for c in CSV_COLUMNS[1:]]
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def to_text(self) -> str:
        widths = [max(len(c), 10) for c in CSV_COLUMNS]
        widths[0] = max([len(c["method"]) for c in self.rows] + [len("method")])
        lines = ["  ".join(c.ljust(w) for c, w in zip(CSV_COLUMNS, widths))]
        for row in self.rows:
            cells = [row["method"].ljust(widths[0])]
            cells += [f"{row[c]:.4f}".rjust(w) for c, w in zip(CSV_COLUMNS[1:], widths[1:])]
            lines.append("  ".join(cells))
        return "\n".join(lines) + "\n"


def _to_world(poses, frame):
    return np.array([geom.pose_from_canonical(p, frame).t for p in poses])


def evaluate_method(preds_by_clip, clips):
    """One metrics row for a single method's canonical-frame predictions."""
    trans_vals, rot_vals, static_dists, dyn_dists = [], [], [], []
    trees = {}
    for clip in clips:
        pred = preds_by_clip[clip.clip_id]
        t, r = l1_metrics(pred, clip.gt_canonical)
        trans_vals.append(t)
        rot_vals.append(r)
        world = _to_world(pred, clip.frame)
        cloud = np.asarray(clip.cloud_points, dtype=np.float64).reshape(-1, 3)
        if len(cloud) == 0:
            raise EmptyCloud(f"clip {clip.clip_id}: static point cloud is empty")
        key = id(clip.cloud_points)
        if key not in trees:
            trees[key] = cKDTree(cloud)
        static_dists.append(trees[key].query(world)[0])
        if clip.tracks is not None:
            dyn_dists.append(step_dynamic_distances(world, clip.frame_indices, clip.tracks))
        elif clip.dyn_distances is not None:
            try:
                dyn_dists.append(np.array([clip.dyn_distances[int(fi)]
                                           for fi in clip.frame_indices]))
            except KeyError as exc:
                raise MissingDynamicData(f"no distance for frame {exc}") from exc
        else:
            raise MissingDynamicData(f"clip {clip.clip_id}: no tracks or distance map")
    row = {"L1_trans": float(np.mean(trans_vals)), "L1_rot": float(np.mean(rot_vals))}
    for k in COLLISION_KS:
        row[f"Col_stt_{k}"] = _pooled_pct(static_dists, k)
        row[f"Col_dyn_{k}"] = _pooled_pct(dyn_dists, k)
    row["Col_stt_avg"] = float(np.mean([row[f"Col_stt_{k}"] for k in COLLISION_KS]))
    row["Col_dyn_avg"] = float(np.mean([row[f"Col_dyn_{k}"] for k in COLLISION_KS]))
    return row


def make_report(method_preds, clips) -> MetricsReport:
    """Assemble the comparison table: a GT row plus one row per method.

    method_preds maps method name -> {clip_id -> canonical Pose list}; row order
    follows insertion order. All methods must cover exactly the same clips.
    """
    clip_ids = {c.clip_id for c in clips}
    for name, preds in method_preds.items():
        if set(preds.keys()) != clip_ids:
            raise InconsistentClipSets(f"method {name!r} covers a different clip set")
    report = MetricsReport(n_clips=len(clips))
    gt_preds = {c.clip_id: c.gt_canonical for c in clips}
    row = evaluate_method(gt_preds, clips)
    row["method"] = "gt"
    report.rows.append(row)
    for name, preds in method_preds.items():
        row = evaluate_method(preds, clips)
        row["method"] = name
        report.rows.append(row)
    return report


def save_heightmap_pgm(path, hmap: np.ndarray, no_data=0) -> None:
    """Write a height map as a 16-bit ASCII PGM; NaN columns get the no_data level."""
    finite = hmap[np.isfinite(hmap)]
    lo = float(finite.min()) if len(finite) else 0.0
    hi = float(finite.max()) if len(finite) else 1.0
    span = (hi - lo) or 1.0
    maxval = 65535
    scaled = np.where(np.isfinite(hmap),
                      1 + (hmap - lo) / span * (maxval - 1), float(no_data))
    scaled = np.clip(np.round(scaled), 0, maxval).astype(np.int64)
    with open(path, "w") as fh:
        fh.write(f"P2\n{hmap.shape[1]} {hmap.shape[0]}\n{maxval}\n")
        for row in scaled:
            fh.write(" ".join(str(v) for v in row) + "\n")
