"""Dataset serialization: ASCII PLY clouds, LOFT float tensors, JSON manifests."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import geom
from .render import FrameObservation, Intrinsics
from .scene import AgentTrack

LOFT_MAGIC = b"LOFT"


# -- point clouds -----------------------------------------------------------

def save_ply(path, points, labels=None) -> None:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if labels is None:
        labels = np.zeros(len(points), dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property int label\n")
        fh.write("end_header\n")
        for p, lab in zip(points, labels):
            fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {lab}\n")


def load_ply(path):
    points, labels = [], []
    with open(path) as fh:
        n = 0
        for line in fh:
            line = line.strip()
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            if line == "end_header":
                break
        for _ in range(n):
            parts = next(fh).split()
            points.append([float(parts[0]), float(parts[1]), float(parts[2])])
            labels.append(int(parts[3]) if len(parts) > 3 else 0)
    return np.array(points, dtype=np.float64).reshape(-1, 3), np.array(labels, dtype=np.int64)


# -- LOFT raw float tensors --------------------------------------------------

def save_loft(path, array) -> None:
    array = np.asarray(array, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(LOFT_MAGIC)
        fh.write(struct.pack("<I", array.ndim))
        for d in array.shape:
            fh.write(struct.pack("<I", d))
        fh.write(array.astype("<f4").tobytes())


def load_loft(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != LOFT_MAGIC:
            raise ValueError(f"{path}: not a LOFT tensor file")
        (rank,) = struct.unpack("<I", fh.read(4))
        shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
        data = np.frombuffer(fh.read(), dtype="<f4")
    return data.reshape(shape).copy()


# -- agent tracks ------------------------------------------------------------

def save_tracks(path, agents, fps: int = 20) -> None:
    payload = {
        "fps": fps,
        "agents": [
            {
                "radius": a.radius,
                "positions": np.asarray(a.positions).tolist(),
                "headings": np.asarray(a.headings).tolist(),
            }
            for a in agents
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_tracks(path):
    with open(path) as fh:
        payload = json.load(fh)
    return tuple(
        AgentTrack(np.array(a["positions"]), np.array(a["headings"]), a["radius"])
        for a in payload["agents"]
    )


# -- per-frame dynamic distance file ----------------------------------------

def save_dynamic_distances(path, distances: dict) -> None:
    """`frame_index distance_m` lines."""
    with open(path, "w") as fh:
        for frame in sorted(distances):
            fh.write(f"{frame} {distances[frame]:.6f}\n")


def load_dynamic_distances(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            frame, dist = line.split()
            out[int(frame)] = float(dist)
    return out


# -- sequences ---------------------------------------------------------------

@dataclass
class Sequence:
    """A recorded sequence loaded in memory."""

    seq_id: str
    trajectory: geom.Trajectory
    features: np.ndarray  # (L, H, W, C)
    intrinsics: Intrinsics
    cloud_points: np.ndarray
    cloud_labels: np.ndarray
    tracks: tuple
    ground_height: float = 0.0
    fps: int = 20

    def observation(self, frame: int) -> FrameObservation:
        return FrameObservation(self.features[frame], self.intrinsics, self.trajectory.poses[frame])


def save_sequence(seq_dir, seq: Sequence) -> str:
    seq_dir = Path(seq_dir)
    seq_dir.mkdir(parents=True, exist_ok=True)
    geom.save_trajectory(seq_dir / "poses.txt", seq.trajectory)
    save_loft(seq_dir / "features.loft", seq.features)
    save_ply(seq_dir / "cloud.ply", seq.cloud_points, seq.cloud_labels)
    save_tracks(seq_dir / "tracks.json", seq.tracks, seq.fps)
    manifest = {
        "seq_id": seq.seq_id,
        "fps": seq.fps,
        "pose_file": "poses.txt",
        "feature_files": ["features.loft"],
        "cloud_file": "cloud.ply",
        "track_file": "tracks.json",
        "intrinsics": seq.intrinsics.to_dict(),
        "ground_height": seq.ground_height,
    }
    path = seq_dir / "seq.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return str(path)


def load_sequence(seq_json_path) -> Sequence:
    seq_json_path = Path(seq_json_path)
    with open(seq_json_path) as fh:
        manifest = json.load(fh)
    base = seq_json_path.parent
    features = np.concatenate([load_loft(base / f) for f in manifest["feature_files"]])
    points, labels = load_ply(base / manifest["cloud_file"])
    return Sequence(
        seq_id=manifest["seq_id"],
        trajectory=geom.load_trajectory(base / manifest["pose_file"]),
        features=features,
        intrinsics=Intrinsics.from_dict(manifest["intrinsics"]),
        cloud_points=points,
        cloud_labels=labels,
        tracks=load_tracks(base / manifest["track_file"]),
        ground_height=manifest.get("ground_height", 0.0),
        fps=manifest["fps"],
    )


def load_dataset(dataset_dir):
    """All sequences listed by the dataset manifest, in manifest order."""
    dataset_dir = Path(dataset_dir)
    with open(dataset_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    return [load_sequence(dataset_dir / rel) for rel in manifest["sequences"]]
