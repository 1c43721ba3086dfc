from .scene import AgentTrack, Scene, SceneConfig, filter_pointcloud, gen_scene
from .ego import EgoConfig, gen_ego_trajectory
from .render import FrameObservation, Intrinsics, RenderConfig, agent_sample_points, render_features
from .windows import Clip, clip_start_indices, window_clips
from .io import (
    Sequence,
    load_dataset,
    load_dynamic_distances,
    load_loft,
    load_ply,
    load_sequence,
    load_tracks,
    save_dynamic_distances,
    save_loft,
    save_ply,
    save_sequence,
    save_tracks,
)

__all__ = [
    "AgentTrack", "Scene", "SceneConfig", "filter_pointcloud", "gen_scene",
    "EgoConfig", "gen_ego_trajectory",
    "FrameObservation", "Intrinsics", "RenderConfig", "agent_sample_points", "render_features",
    "Clip", "clip_start_indices", "window_clips",
    "Sequence", "load_dataset", "load_dynamic_distances", "load_loft", "load_ply",
    "load_sequence", "load_tracks", "save_dynamic_distances", "save_loft", "save_ply",
    "save_sequence", "save_tracks",
]
