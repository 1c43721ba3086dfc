"""Seeded, resumable training loop over precomputed clip volumes."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .. import geom
from ..errors import NonFiniteLoss, NonFiniteValue
from ..ndiff import LrSchedule, OptimState, adamw_step, onecycle_lr, pose_loss
from ..ndiff.checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig
from .network import ModelParams, assemble_volume, forward, forward_from_volume, init_params

LOG_FIELDS = ["step", "lr", "loss", "loss_trans", "loss_rot"]


@dataclass
class TrainConfig:
    lr: float = 1e-3
    steps: int = 3000
    batch: int = 4
    weight_decay: float = 0.05
    pct_start: float = 0.05
    seed: int = 0
    log_path: str | None = None
    ckpt_path: str | None = None
    ckpt_every: int = 1000
    resume_from: str | None = None
    stop_after: int | None = None  # pause before this step; schedule still spans `steps`


@dataclass
class TrainingClip:
    """A clip reduced to what the optimizer consumes."""

    volume: np.ndarray  # aggregated (nz, ny, nx, C) features, constant
    gt: np.ndarray  # (T2, 9) canonical future poses
    goal: np.ndarray  # canonical final future translation


def canonical_targets(clip):
    """(T2, 9) canonical-frame ground-truth array for a clip, plus its frame."""
    frame = geom.canonical_frame_of(clip.past_poses[-1])
    rows = [geom.pose_to_canonical(p, frame).flatten() for p in clip.future_poses]
    return np.stack(rows), frame


def prepare_clip(clip, config: ModelConfig, occupancy=None) -> TrainingClip:
    """Precompute the aggregated feature volume (constant w.r.t. parameters)."""
    gt, frame = canonical_targets(clip)
    if config.pooling_2d_only:
        maps = np.stack([obs.feature_map for obs in clip.observations])
        volume = maps.mean(axis=0)
    else:
        features, _ = assemble_volume(clip, config, frame=frame, occupancy=occupancy)
        volume = features.data
    return TrainingClip(volume=volume, gt=gt, goal=gt[-1, :3].copy())


def _loss_components(pred_data: np.ndarray, gt: np.ndarray) -> tuple:
    t2 = gt.shape[0]
    trans = float(np.abs(pred_data[:, :3] - gt[:, :3]).sum() / t2)
    rot = 0.0
    for t in range(t2):
        R_gt = geom.rot6d_to_matrix(gt[t, 3:9])
        R_pred = geom.rot6d_to_matrix(pred_data[t, 3:9])
        rot += float(np.abs(R_gt.T @ R_pred - np.eye(3)).sum())
    return trans, rot / t2


def train(training_clips, config: ModelConfig, tcfg: TrainConfig):
    """Returns (params, optimizer state, log rows). Deterministic in (clips, configs)."""
    if not training_clips:
        raise ValueError("training set is empty")
    if tcfg.resume_from:
        loaded, state = load_checkpoint(tcfg.resume_from)
        params = ModelParams.from_list(loaded)
        if state is None:
            state = OptimState(weight_decay=tcfg.weight_decay)
    else:
        params = init_params(config)
        state = OptimState(weight_decay=tcfg.weight_decay)
    state.weight_decay = tcfg.weight_decay
    schedule = LrSchedule(max_lr=tcfg.lr, total_steps=tcfg.steps, pct_start=tcfg.pct_start)
    param_list = list(params)
    n = len(training_clips)
    rows = []

    last_step = tcfg.steps if tcfg.stop_after is None else min(tcfg.steps, tcfg.stop_after)
    for step in range(state.step, last_step):
        lr = onecycle_lr(schedule, step)
        rng = np.random.default_rng(np.random.SeedSequence([tcfg.seed, step]))
        idx = rng.integers(0, n, size=tcfg.batch)
        params.zero_grads()
        total = None
        trans_sum = rot_sum = 0.0
        try:
            for i in idx:
                tc = training_clips[int(i)]
                goal = tc.goal if config.goal_conditioned else None
                pred = forward_from_volume(tc.volume, config, params, goal=goal)
                loss = pose_loss(pred, tc.gt, config.lambda_trans, config.lambda_rot,
                                 config.rotation_form)
                total = loss if total is None else total + loss
                trans, rot = _loss_components(pred.data, tc.gt)
                trans_sum += trans
                rot_sum += rot
            total = total * (1.0 / tcfg.batch)
            loss_val = total.item()
            if not np.isfinite(loss_val):
                raise NonFiniteValue("loss is not finite")
            total.backward()
            adamw_step(param_list, state, lr)
        except NonFiniteValue as exc:
            if tcfg.ckpt_path:
                # state.step still points at the last completed update
                save_checkpoint(tcfg.ckpt_path, param_list, state)
            raise NonFiniteLoss(f"aborted at step {step}: {exc}") from exc
        rows.append({
            "step": step,
            "lr": lr,
            "loss": loss_val,
            "loss_trans": trans_sum / tcfg.batch,
            "loss_rot": rot_sum / tcfg.batch,
        })
        if tcfg.ckpt_path and (step + 1) % tcfg.ckpt_every == 0:
            save_checkpoint(tcfg.ckpt_path, param_list, state)

    if tcfg.ckpt_path:
        save_checkpoint(tcfg.ckpt_path, param_list, state)
    if tcfg.log_path:
        write_log(tcfg.log_path, rows, append=bool(tcfg.resume_from))
    return params, state, rows


def write_log(path, rows, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        if not append:
            writer.writeheader()
        for row in rows:
            writer.writerow({
                "step": row["step"],
                "lr": f"{row['lr']:.10g}",
                "loss": f"{row['loss']:.8f}",
                "loss_trans": f"{row['loss_trans']:.8f}",
                "loss_rot": f"{row['loss_rot']:.8f}",
            })
