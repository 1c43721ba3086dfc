from .config import (
    PAPER_SPACING,
    ModelConfig,
    VoxelGridSpec,
    desk_bev_plan,
    paper_bev_plan,
)
from .network import (
    ModelParams,
    assemble_volume,
    bev_net_forward,
    bev_squeeze,
    forward,
    forward_from_volume,
    init_params,
    predict_poses,
    predicted_canonical_poses,
)
from .train import (
    LOG_FIELDS,
    TrainConfig,
    TrainingClip,
    canonical_targets,
    prepare_clip,
    train,
    write_log,
)
from .volume import FeatureVolume, aggregate_temporal, projection_coords, unproject_frame

__all__ = [
    "PAPER_SPACING", "ModelConfig", "VoxelGridSpec", "desk_bev_plan", "paper_bev_plan",
    "ModelParams", "assemble_volume", "bev_net_forward", "bev_squeeze", "forward",
    "forward_from_volume", "init_params", "predict_poses", "predicted_canonical_poses",
    "LOG_FIELDS", "TrainConfig", "TrainingClip", "canonical_targets", "prepare_clip",
    "train", "write_log",
    "FeatureVolume", "aggregate_temporal", "projection_coords", "unproject_frame",
]
