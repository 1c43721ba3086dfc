"""Rigid-body pose algebra: 6D rotation representation, head-centered canonical frame.

Conventions (shared by every module):
  * Y-up, Z-forward, X-right; right-handed.
  * The forward axis of a head pose is the third column (+Z) of its rotation matrix.
  * A pose flattens to a 9-vector [tx, ty, tz, r1..r6] where r is the 6D rotation
    representation (first two columns of the rotation matrix, column-major).
  * Yaw is measured in the top-down view, counterclockwise from +Z (so a head
    facing world +X has yaw -90 degrees).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRotation,
    FrameMismatch,
    GimbalDegenerate,
    InvalidRotation,
)

# Local +Z of the head frame points where the head is looking.
FORWARD_AXIS = 2
WORLD_UP = np.array([0.0, 1.0, 0.0])
FRAME_DT = 0.05  # 20 Hz

_NORM_EPS = 1e-8
_GIMBAL_EPS = 1e-3  # radians
_ORTHO_TOL = 1e-5

IDENTITY_ROT6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


def rot6d_to_matrix(r) -> np.ndarray:
    """Recover a rotation matrix from its first two columns via Gram-Schmidt."""
    r = np.asarray(r, dtype=np.float64).reshape(6)
    a1, a2 = r[:3], r[3:]
    n1 = np.linalg.norm(a1)
    if n1 < _NORM_EPS:
        raise DegenerateRotation(f"first column norm {n1:.3e} below {_NORM_EPS}")
    b1 = a1 / n1
    u2 = a2 - np.dot(b1, a2) * b1
    n2 = np.linalg.norm(u2)
    if n2 < _NORM_EPS:
        raise DegenerateRotation(f"orthogonalization residual {n2:.3e} below {_NORM_EPS}")
    b2 = u2 / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def check_rotation(R: np.ndarray, tol: float = _ORTHO_TOL) -> None:
    """Raise InvalidRotation unless R is orthonormal with determinant +1."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotation(f"expected 3x3 matrix, got {R.shape}")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > tol:
        raise InvalidRotation(f"orthonormality error {err:.3e} exceeds {tol}")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol * 10:
        raise InvalidRotation(f"determinant {det:.6f} is not +1")


def matrix_to_rot6d(R) -> np.ndarray:
    """First two columns of R, column-major concatenated."""
    R = np.asarray(R, dtype=np.float64)
    check_rotation(R)
    return np.concatenate([R[:, 0], R[:, 1]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation about the +Y axis (standard right-handed convention)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def yaw_matrix(yaw: float) -> np.ndarray:
    """Matrix turning +Z to the heading with the given yaw (CCW-from-+Z, top-down)."""
    return rot_y(-yaw)


def heading_yaw(direction) -> float:
    """Yaw of a ground-plane direction vector (ignores its Y component)."""
    d = np.asarray(direction, dtype=np.float64)
    return math.atan2(-d[0], d[2])


@dataclass(frozen=True)
class Pose:
    """6D head pose: translation (meters) + 6D rotation representation."""

    t: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.float64).reshape(6))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), IDENTITY_ROT6D.copy())

    @classmethod
    def from_matrix(cls, t, R) -> "Pose":
        return cls(np.asarray(t, dtype=np.float64), matrix_to_rot6d(R))

    @classmethod
    def from_flat(cls, v) -> "Pose":
        v = np.asarray(v, dtype=np.float64).reshape(9)
        return cls(v[:3], v[3:])

    def rotation(self) -> np.ndarray:
        return rot6d_to_matrix(self.r)

    def forward(self) -> np.ndarray:
        return self.rotation()[:, FORWARD_AXIS]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.t, self.r])


@dataclass(frozen=True)
class Trajectory:
    """Ordered 20 Hz pose sequence with a frame label."""

    poses: tuple
    timestamps: np.ndarray
    frame: str = "world"

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        ts = np.asarray(self.timestamps, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        if len(self.poses) != len(ts):
            raise ValueError("pose / timestamp count mismatch")
        if len(ts) > 1:
            dt = np.diff(ts)
            if np.any(dt <= 0):
                raise ValueError("timestamps must be strictly increasing")
            if np.abs(dt - FRAME_DT).max() > 1e-6:
                raise ValueError("trajectory must be uniformly sampled at 20 Hz")

    @classmethod
    def at_20hz(cls, poses, t0: float = 0.0, frame: str = "world") -> "Trajectory":
        ts = t0 + FRAME_DT * np.arange(len(poses))
        return cls(tuple(poses), ts, frame)

    def __len__(self) -> int:
        return len(self.poses)

    def translations(self) -> np.ndarray:
        return np.stack([p.t for p in self.poses]) if self.poses else np.zeros((0, 3))


@dataclass(frozen=True)
class CanonicalFrame:
    """Ground-parallel frame centered on the head at the anchor step."""

    origin: np.ndarray
    yaw: float
    up: np.ndarray = field(default_factory=lambda: WORLD_UP.copy())
    rotation: np.ndarray = field(default=None)  # canonical -> world, columns [right, up, forward]

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        object.__setattr__(self, "up", np.asarray(self.up, dtype=np.float64).reshape(3))
        if self.rotation is None:
            object.__setattr__(self, "rotation", yaw_matrix(self.yaw))

    def world_to_canonical_point(self, p) -> np.ndarray:
        return self.rotation.T @ (np.asarray(p, dtype=np.float64) - self.origin)

    def canonical_to_world_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.origin


def canonical_frame_of(pose: Pose, gravity_up=WORLD_UP) -> CanonicalFrame:
    """Frame at the head position, gravity-aligned, facing the head's heading."""
    up = np.asarray(gravity_up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    f = pose.forward()
    f_ground = f - np.dot(f, up) * up
    n = np.linalg.norm(f_ground)
    # |angle(f, +-up)| > eps  <=>  |f_ground| > sin(eps)
    if n < math.sin(_GIMBAL_EPS):
        raise GimbalDegenerate("forward axis within 1e-3 rad of the gravity axis")
    ez = f_ground / n
    ex = np.cross(up, ez)
    ex = ex / np.linalg.norm(ex)
    R_f = np.stack([ex, up, ez], axis=1)
    return CanonicalFrame(origin=pose.t.copy(), yaw=heading_yaw(ez), up=up, rotation=R_f)


def pose_to_canonical(pose: Pose, frame: CanonicalFrame) -> Pose:
    R = frame.rotation.T @ pose.rotation()
    t = frame.rotation.T @ (pose.t - frame.origin)
    return Pose(t, matrix_to_rot6d(R))


def pose_from_canonical(pose: Pose, frame: CanonicalFrame) -> Pose:
    R = frame.rotation @ pose.rotation()
    t = frame.rotation @ pose.t + frame.origin
    return Pose(t, matrix_to_rot6d(R))


def to_canonical(traj: Trajectory, frame: CanonicalFrame) -> Trajectory:
    if traj.frame == "canonical":
        raise FrameMismatch("trajectory is already canonical")
    poses = tuple(pose_to_canonical(p, frame) for p in traj.poses)
    return Trajectory(poses, traj.timestamps, "canonical")


def from_canonical(traj: Trajectory, frame: CanonicalFrame) -> Trajectory:
    if traj.frame != "canonical":
        raise FrameMismatch("trajectory is not canonical")
    poses = tuple(pose_from_canonical(p, frame) for p in traj.poses)
    return Trajectory(poses, traj.timestamps, "world")


def poses_to_canonical(poses, frame: CanonicalFrame):
    return [pose_to_canonical(p, frame) for p in poses]


def poses_from_canonical(poses, frame: CanonicalFrame):
    return [pose_from_canonical(p, frame) for p in poses]


# ---------------------------------------------------------------------------
# Text serialization: one `timestamp_s tx ty tz r1 r2 r3 r4 r5 r6` line per step.

def save_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write(f"# frame: {traj.frame}\n")
        for ts, pose in zip(traj.timestamps, traj.poses):
            vals = " ".join(f"{v:.9f}" for v in pose.flatten())
            fh.write(f"{ts:.9f} {vals}\n")


def load_trajectory(path) -> Trajectory:
    poses, ts = [], []
    frame = "world"
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "frame:" in line:
                    frame = line.split("frame:")[1].strip()
                continue
            parts = [float(x) for x in line.split()]
            if len(parts) != 10:
                raise ValueError(f"expected 10 columns, got {len(parts)}")
            ts.append(parts[0])
            poses.append(Pose.from_flat(parts[1:]))
    return Trajectory(tuple(poses), np.array(ts), frame)
