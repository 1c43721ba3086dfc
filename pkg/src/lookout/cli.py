"""Command-line entry point: simulate, train, eval, plot."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, baselines, datasim, evalkit, geom, model
from .errors import ConfigInvalid, InconsistentClipSets, LookoutError, NonFiniteLoss
from .ndiff.checkpoint import load_checkpoint

EXIT_CONFIG = 2
EXIT_NONFINITE = 3
EXIT_CLIPSET = 4


def write_run_manifest(out_dir, command, config, seed, artifacts, wall_clock_s):
    """Record what a run produced; every named artifact must exist."""
    for name, path in artifacts.items():
        if not Path(path).exists():
            raise LookoutError(f"artifact {name} missing: {path}")
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "artifacts": {k: str(v) for k, v in artifacts.items()},
        "version": __version__,
        "wall_clock_s": wall_clock_s,
    }
    path = Path(out_dir) / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("LOOKOUT_THREADS", "1"))


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scfg = datasim.SceneConfig(n_agents=args.agents, duration_s=args.duration)
    ecfg = datasim.EgoConfig(n_steps=args.steps)
    rcfg = datasim.RenderConfig()
    seq_paths = []
    for i in range(args.scenes):
        seed = args.seed + i
        scene = datasim.gen_scene(seed, scfg)
        traj = datasim.gen_ego_trajectory(scene, seed, ecfg)
        feats = np.stack([
            datasim.render_features(scene, pose, rcfg, j).feature_map
            for j, pose in enumerate(traj.poses)
        ])
        seq = datasim.Sequence(
            seq_id=f"seq{seed:05d}", trajectory=traj, features=feats,
            intrinsics=rcfg.intrinsics(), cloud_points=scene.static_points,
            cloud_labels=scene.labels, tracks=scene.dynamic_agents,
            ground_height=scene.ground_height)
        rel = seq.seq_id
        datasim.save_sequence(out / rel, seq)
        seq_paths.append(f"{rel}/seq.json")
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump({"sequences": seq_paths}, fh, indent=2, sort_keys=True)
    write_run_manifest(out, "simulate",
                       {"scenes": args.scenes, "agents": args.agents,
                        "duration": args.duration, "steps": args.steps,
                        "threads": _threads(args)},
                       args.seed, {"manifest": manifest_path}, time.time() - t0)
    print(f"wrote {args.scenes} sequences to {out}")
    return 0


# -- shared clip plumbing ----------------------------------------------------

def _clip_id(clip) -> str:
    return f"{clip.seq_id}:{clip.start}"


def points_to_canonical(points, frame: geom.CanonicalFrame) -> np.ndarray:
    return (np.asarray(points, dtype=np.float64) - frame.origin) @ frame.rotation


def canonical_occupancy(clip_frame, cloud_points, grid) -> np.ndarray:
    pts = points_to_canonical(cloud_points, clip_frame)
    return evalkit.build_occupancy(pts, grid).occupied.astype(np.float32)


def load_clips(data_dir, t1=8, t2=8, stride=6, dilation=6):
    """Returns (clips, sequences_by_id)."""
    sequences = datasim.load_dataset(data_dir)
    clips = []
    seqs = {}
    for seq in sequences:
        seqs[seq.seq_id] = seq
        clips.extend(datasim.window_clips(seq, t1, t2, stride, dilation))
    return clips, seqs


def clip_evals(clips, seqs):
    out = []
    for clip in clips:
        gt, frame = model.canonical_targets(clip)
        gt_poses = [geom.Pose.from_flat(row) for row in gt]
        seq = seqs[clip.seq_id]
        out.append(evalkit.ClipEval(
            clip_id=_clip_id(clip), gt_canonical=gt_poses, frame=frame,
            frame_indices=clip.future_frame_indices,
            cloud_points=seq.cloud_points, tracks=seq.tracks))
    return out


# -- train -------------------------------------------------------------------

def _load_model_config(args) -> model.ModelConfig:
    if args.config:
        with open(args.config) as fh:
            return model.ModelConfig.from_json(fh.read())
    return model.ModelConfig()


def cmd_train(args) -> int:
    t0 = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _load_model_config(args)
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    config.validate()
    clips, seqs = load_clips(args.data)
    tclips = []
    for clip in clips:
        occ = None
        if config.concat_occupancy:
            frame = geom.canonical_frame_of(clip.past_poses[-1])
            occ = canonical_occupancy(frame, seqs[clip.seq_id].cloud_points, config.grid)
        tclips.append(model.prepare_clip(clip, config, occupancy=occ))
    ckpt_path = out / "model.locp"
    log_path = out / "train_log.csv"
    tcfg = model.TrainConfig(
        lr=args.lr, steps=args.steps, batch=args.batch, seed=config.seed,
        log_path=str(log_path), ckpt_path=str(ckpt_path),
        ckpt_every=args.ckpt_every, resume_from=args.resume)
    _, state, rows = model.train(tclips, config, tcfg)
    config_path = out / "config.json"
    with open(config_path, "w") as fh:
        fh.write(config.to_json())
    write_run_manifest(out, "train",
                       {"steps": args.steps, "lr": args.lr, "batch": args.batch,
                        "data": str(args.data), "threads": _threads(args)},
                       config.seed,
                       {"checkpoint": ckpt_path, "log": log_path, "config": config_path},
                       time.time() - t0)
    last = rows[-1]["loss"] if rows else float("nan")
    print(f"trained to step {state.step}, final loss {last:.4f}")
    return 0


# -- eval --------------------------------------------------------------------

def _model_predictions(clips, seqs, config, params):
    preds = {}
    for clip in clips:
        frame = geom.canonical_frame_of(clip.past_poses[-1])
        occ = None
        if config.concat_occupancy:
            occ = canonical_occupancy(frame, seqs[clip.seq_id].cloud_points, config.grid)
        goal = None
        if config.goal_conditioned:
            gt, _ = model.canonical_targets(clip)
            goal = gt[-1, :3]
        pred, _ = model.forward(clip, config, params, goal=goal, occupancy=occ)
        preds[_clip_id(clip)] = model.predicted_canonical_poses(pred)
    return preds


def _baseline_predictions(name, clips, seqs, grid, planner_cfg):
    preds = {}
    for clip in clips:
        frame = geom.canonical_frame_of(clip.past_poses[-1])
        past = [geom.pose_to_canonical(p, frame) for p in clip.past_poses]
        if name == "const_vel":
            preds[_clip_id(clip)] = baselines.const_vel(past, clip.t2)
        elif name == "lin_ext":
            preds[_clip_id(clip)] = baselines.lin_ext(past, clip.t2)
        elif name == "astar":
            cloud = points_to_canonical(seqs[clip.seq_id].cloud_points, frame)
            occ = evalkit.build_occupancy(cloud, grid)
            gt, _ = model.canonical_targets(clip)
            start = np.asarray(past[-1].t, dtype=np.float64)
            preds[_clip_id(clip)] = baselines.astar_lin_ext(
                occ, start, gt[-1, :3], past, planner_cfg, clip.t2)
        else:
            raise ConfigInvalid(f"unknown baseline {name!r}")
    return preds


def cmd_eval(args) -> int:
    t0 = time.time()
    clips, seqs = load_clips(args.data)
    evals = clip_evals(clips, seqs)
    method_preds = {}
    config = None
    if args.checkpoint:
        config_path = args.config or str(Path(args.checkpoint).parent / "config.json")
        with open(config_path) as fh:
            config = model.ModelConfig.from_json(fh.read())
        if args.goal and not config.goal_conditioned:
            raise ConfigInvalid("--goal requires a goal-conditioned checkpoint")
        loaded, _ = load_checkpoint(args.checkpoint)
        params = model.ModelParams.from_list(loaded)
        method_preds["model"] = _model_predictions(clips, seqs, config, params)
    grid = config.grid if config else model.ModelConfig().grid
    planner_cfg = baselines.PlannerConfig(inflation_radius=args.inflation)
    names = [n for n in args.baselines.split(",") if n] if args.baselines else []
    for name in names:
        method_preds[name] = _baseline_predictions(name, clips, seqs, grid, planner_cfg)
    report = evalkit.make_report(method_preds, evals)
    report_base = Path(args.report)
    report_base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = report_base.with_suffix(".csv")
    txt_path = report_base.with_suffix(".txt")
    csv_path.write_text(report.to_csv())
    txt_path.write_text(report.to_text())
    write_run_manifest(report_base.parent, "eval",
                       {"data": str(args.data), "baselines": names,
                        "checkpoint": args.checkpoint, "threads": _threads(args)},
                       0, {"report_csv": csv_path, "report_txt": txt_path},
                       time.time() - t0)
    print(report.to_text())
    return 0


# -- plot --------------------------------------------------------------------

_PAST_COLOR = (255, 255, 255)
_GT_COLORS = ((70, 130, 235), (60, 220, 120))  # blue to green
_PRED_COLORS = ((255, 105, 180), (255, 165, 0))  # pink to orange


def heightmap_grays(hmap: np.ndarray) -> np.ndarray:
    """Gray levels for a height map: 30 where empty, 80..230 from low to high."""
    finite = hmap[np.isfinite(hmap)]
    lo = float(finite.min()) if len(finite) else 0.0
    hi = float(finite.max()) if len(finite) else 1.0
    span = (hi - lo) or 1.0
    gray = 80 + (hmap - lo) / span * 150
    return np.where(np.isfinite(hmap), np.round(gray), 30).astype(np.int64)


def _lerp_color(c0, c1, frac):
    return tuple(int(round(a + frac * (b - a))) for a, b in zip(c0, c1))


def _gradient_lines(points_px, colors, width):
    parts = []
    n = len(points_px) - 1
    for i in range(n):
        frac = i / max(n - 1, 1)
        r, g, b = _lerp_color(colors[0], colors[1], frac)
        (x0, y0), (x1, y1) = points_px[i], points_px[i + 1]
        parts.append(f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x1:.1f}" y2="{y1:.1f}" '
                     f'stroke="rgb({r},{g},{b})" stroke-width="{width}" '
                     'stroke-linecap="round" />')
    return parts


def render_svg(hmap, grid, past_xz, gt_xz, pred_xz, scale=24.0):
    """BEV SVG: height-map raster with past, ground-truth, predicted polylines."""
    x0, _, z0 = grid.origin
    nz, nx = hmap.shape
    w_px = nx * grid.spacing * scale
    h_px = nz * grid.spacing * scale

    def to_px(x, z):
        return ((x - x0) * scale, (z0 + nz * grid.spacing - z) * scale)

    grays = heightmap_grays(hmap)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px:.0f}" '
             f'height="{h_px:.0f}" viewBox="0 0 {w_px:.1f} {h_px:.1f}">']
    cell = grid.spacing * scale
    for iz in range(nz):
        for ix in range(nx):
            g = int(grays[iz, ix])
            px = ix * cell
            py = (nz - 1 - iz) * cell
            parts.append(f'<rect x="{px:.1f}" y="{py:.1f}" width="{cell:.1f}" '
                         f'height="{cell:.1f}" fill="rgb({g},{g},{g})" />')
    if len(past_xz) > 1:
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in (to_px(*p) for p in past_xz))
        r, g, b = _PAST_COLOR
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="rgb({r},{g},{b})" stroke-width="2" class="past" />')
    if len(gt_xz) > 1:
        parts.append('<g class="gt">')
        parts += _gradient_lines([to_px(*p) for p in gt_xz], _GT_COLORS, 2)
        parts.append("</g>")
    if pred_xz is not None and len(pred_xz) > 1:
        parts.append('<g class="pred">')
        parts += _gradient_lines([to_px(*p) for p in pred_xz], _PRED_COLORS, 2)
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(args) -> int:
    t0 = time.time()
    seq = datasim.load_sequence(Path(args.sequence) / "seq.json"
                                if Path(args.sequence).is_dir() else args.sequence)
    clips = datasim.window_clips(seq)
    matches = [c for c in clips if c.start == args.clip]
    if not matches:
        raise ConfigInvalid(f"no clip starts at frame {args.clip}")
    clip = matches[0]
    # world-aligned BEV grid sized to the cloud footprint
    pts = seq.cloud_points
    spacing = args.spacing
    pad = spacing
    x_lo, z_lo = pts[:, 0].min() - pad, pts[:, 2].min() - pad
    x_hi, z_hi = pts[:, 0].max() + pad, pts[:, 2].max() + pad
    y_lo, y_hi = pts[:, 1].min() - pad, pts[:, 1].max() + pad
    grid = model.VoxelGridSpec(
        nz=max(int(np.ceil((z_hi - z_lo) / spacing)), 2),
        ny=max(int(np.ceil((y_hi - y_lo) / spacing)), 2),
        nx=max(int(np.ceil((x_hi - x_lo) / spacing)), 2),
        spacing=spacing, origin=(float(x_lo), float(y_lo), float(z_lo)))
    hmap = evalkit.heightmap(evalkit.build_occupancy(pts, grid))
    past_xz = [(p.t[0], p.t[2]) for p in clip.past_poses]
    gt_xz = [(p.t[0], p.t[2]) for p in clip.future_poses]
    pred_xz = None
    if args.pred:
        pred_traj = geom.load_trajectory(args.pred)
        pred_xz = [(p.t[0], p.t[2]) for p in pred_traj.poses]
    svg = render_svg(hmap, grid, past_xz, gt_xz, pred_xz)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    if args.heightmap_pgm:
        evalkit.save_heightmap_pgm(args.heightmap_pgm, hmap)
    write_run_manifest(out.parent, "plot",
                       {"sequence": str(args.sequence), "clip": args.clip,
                        "threads": _threads(args)},
                       0, {"svg": out}, time.time() - t0)
    print(f"wrote {out}")
    return 0


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lookout",
                                     description="Egocentric 6D head-pose forecasting toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--duration", type=float, default=15.0)
    p.add_argument("--steps", type=int, default=240)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the forecasting model")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None)
    p.add_argument("--ckpt-every", type=int, default=1000)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate methods and write a report")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--baselines", default="")
    p.add_argument("--goal", action="store_true")
    p.add_argument("--inflation", type=float, default=0.15)
    p.add_argument("--report", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="render a BEV SVG of one clip")
    p.add_argument("--sequence", required=True)
    p.add_argument("--clip", type=int, default=0)
    p.add_argument("--pred", default=None)
    p.add_argument("--spacing", type=float, default=0.3)
    p.add_argument("--heightmap-pgm", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except InconsistentClipSets as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLIPSET
    except (ConfigInvalid, FileNotFoundError, LookoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
