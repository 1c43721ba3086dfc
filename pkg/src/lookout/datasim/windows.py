"""Sliding-window clip segmentation with stride and dilation."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import SequenceTooShort

DEFAULT_T1 = 8
DEFAULT_T2 = 8
DEFAULT_STRIDE = 6
DEFAULT_DILATION = 6


@dataclass(frozen=True)
class Clip:
    """One training/eval sample: T1 observed steps + T2 future steps."""

    observations: tuple  # T1 FrameObservations
    past_poses: tuple  # T1 Poses
    future_poses: tuple  # T2 Poses
    t1: int
    t2: int
    seq_id: str
    start: int
    dilation: int

    @property
    def frame_indices(self):
        return tuple(self.start + j * self.dilation for j in range(self.t1 + self.t2))

    @property
    def future_frame_indices(self):
        return self.frame_indices[self.t1:]


def clip_start_indices(length: int, t1: int = DEFAULT_T1, t2: int = DEFAULT_T2,
                       stride: int = DEFAULT_STRIDE, dilation: int = DEFAULT_DILATION):
    """Start indices of all clips fitting a sequence of `length` frames."""
    span = (t1 + t2 - 1) * dilation + 1
    if length < span:
        raise SequenceTooShort(f"need at least {span} frames, got {length}")
    n = (length - span) // stride + 1
    return [i * stride for i in range(n)]


def window_clips(sequence, t1: int = DEFAULT_T1, t2: int = DEFAULT_T2,
                 stride: int = DEFAULT_STRIDE, dilation: int = DEFAULT_DILATION):
    """Segment a loaded sequence into clips; frame j of clip i is start_i + j*dilation."""
    starts = clip_start_indices(len(sequence.trajectory), t1, t2, stride, dilation)
    clips = []
    for s in starts:
        idx = [s + j * dilation for j in range(t1 + t2)]
        obs = tuple(sequence.observation(i) for i in idx[:t1])
        past = tuple(sequence.trajectory.poses[i] for i in idx[:t1])
        future = tuple(sequence.trajectory.poses[i] for i in idx[t1:])
        clips.append(Clip(obs, past, future, t1, t2, sequence.seq_id, s, dilation))
    return clips
