from .tensor import Tensor, as_tensor, bilinear_sample, concat, pad2d, pad3d, stack
from .ops import (
    avg_pool_spatial,
    conv2d,
    conv3d,
    gelu,
    layernorm,
    linear,
    pose_loss,
    rot6d_to_matrix_t,
)
from .optim import LrSchedule, OptimState, Param, adamw_step, onecycle_lr
from .gradcheck import grad_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Tensor", "as_tensor", "bilinear_sample", "concat", "pad2d", "pad3d", "stack",
    "avg_pool_spatial", "conv2d", "conv3d", "gelu", "layernorm", "linear",
    "pose_loss", "rot6d_to_matrix_t",
    "LrSchedule", "OptimState", "Param", "adamw_step", "onecycle_lr",
    "grad_check", "load_checkpoint", "save_checkpoint",
]
