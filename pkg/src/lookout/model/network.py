"""The forecasting network: up-axis squeeze, BEV modules, pose-regression head."""

from __future__ import annotations

import numpy as np

from .. import geom
from ..errors import ShapeMismatch
from ..ndiff import (
    Param,
    Tensor,
    avg_pool_spatial,
    concat,
    conv2d,
    conv3d,
    gelu,
    layernorm,
    linear,
)
from .config import ModelConfig
from .volume import aggregate_temporal, unproject_frame

_INIT_STD = 0.02
# final-layer bias starts every step at the identity pose so early Gram-Schmidt
# inputs are well-conditioned
_IDENTITY_POSE = np.array([0, 0, 0, 1, 0, 0, 0, 1, 0], dtype=np.float32)


def _trunc_normal(rng, shape, std=_INIT_STD):
    return np.clip(rng.normal(0.0, std, size=shape), -2 * std, 2 * std).astype(np.float32)


class ModelParams:
    """Ordered parameter store; iteration order is fixed for reproducibility."""

    def __init__(self):
        self._params = {}

    def add(self, name, data, is_bias=False, trainable=True):
        p = Param(name, Tensor(data, requires_grad=trainable), is_bias)
        self._params[name] = p
        return p

    def __getitem__(self, name) -> Param:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def tensors(self):
        return {name: p.value for name, p in self._params.items()}

    def zero_grads(self):
        for p in self._params.values():
            p.zero_grad()

    @classmethod
    def from_list(cls, params) -> "ModelParams":
        out = cls()
        for p in params:
            out._params[p.name] = p
        return out


def init_params(config: ModelConfig) -> ModelParams:
    config.validate()
    rng = np.random.default_rng(config.seed)
    params = ModelParams()
    c_vol = config.volume_channels
    c_bev = config.bev_channels

    if config.pooling_2d_only:
        cin = config.channels
        for i, (cout, _) in enumerate(config.bev_plan):
            _add_bev_module(params, rng, f"p2d.{i}", cin, cout)
            cin = cout
        head_in = config.bev_plan[-1][0]
    elif config.conv3d:
        cin = c_vol
        for i, (cout, _) in enumerate(config.conv3d_plan):
            params.add(f"c3d.{i}.w", _trunc_normal(rng, (3, 3, 3, cin, cout)))
            params.add(f"c3d.{i}.b", np.zeros(cout, np.float32), is_bias=True)
            params.add(f"c3d.{i}.ln_g", np.ones(cout, np.float32))
            params.add(f"c3d.{i}.ln_b", np.zeros(cout, np.float32), is_bias=True)
            cin = cout
        head_in = config.conv3d_plan[-1][0]
    else:
        params.add("squeeze.w", _trunc_normal(rng, (config.grid.ny * c_vol, c_bev)))
        params.add("squeeze.b", np.zeros(c_bev, np.float32), is_bias=True)
        cin = c_bev
        for i, (cout, _) in enumerate(config.bev_plan):
            _add_bev_module(params, rng, f"bev.{i}", cin, cout)
            cin = cout
        head_in = config.bev_plan[-1][0]

    if config.goal_conditioned:
        head_in += 3
    h = config.head_hidden
    params.add("head.w1", _trunc_normal(rng, (head_in, h)))
    params.add("head.b1", np.zeros(h, np.float32), is_bias=True)
    params.add("head.ln1_g", np.ones(h, np.float32))
    params.add("head.ln1_b", np.zeros(h, np.float32), is_bias=True)
    params.add("head.w2", _trunc_normal(rng, (h, h)))
    params.add("head.b2", np.zeros(h, np.float32), is_bias=True)
    params.add("head.ln2_g", np.ones(h, np.float32))
    params.add("head.ln2_b", np.zeros(h, np.float32), is_bias=True)
    params.add("head.w3", _trunc_normal(rng, (h, config.t2 * 9)))
    params.add("head.b3", np.tile(_IDENTITY_POSE, config.t2), is_bias=True)
    return params


def _add_bev_module(params, rng, prefix, cin, cout):
    params.add(f"{prefix}.conv_w", _trunc_normal(rng, (3, 3, cin, cout)))
    params.add(f"{prefix}.conv_b", np.zeros(cout, np.float32), is_bias=True)
    params.add(f"{prefix}.ln_g", np.ones(cout, np.float32))
    params.add(f"{prefix}.ln_b", np.zeros(cout, np.float32), is_bias=True)
    params.add(f"{prefix}.mlp_w1", _trunc_normal(rng, (cout, cout)))
    params.add(f"{prefix}.mlp_b1", np.zeros(cout, np.float32), is_bias=True)
    params.add(f"{prefix}.mlp_w2", _trunc_normal(rng, (cout, cout)))
    params.add(f"{prefix}.mlp_b2", np.zeros(cout, np.float32), is_bias=True)


def bev_squeeze(volume: Tensor, w, b) -> Tensor:
    """Squeeze the up axis: (nz, ny, nx, C) -> (nz, nx, C') via a learned linear map."""
    nz, ny, nx, c = volume.shape
    w = w if isinstance(w, Tensor) else Tensor(w)
    if w.shape[0] != ny * c:
        raise ShapeMismatch(f"squeeze weights expect input {w.shape[0]}, volume gives {ny * c}")
    cols = volume.transpose((0, 2, 1, 3)).reshape((nz * nx, ny * c))
    out = cols @ w
    if b is not None:
        out = out + (b if isinstance(b, Tensor) else Tensor(b))
    return out.reshape((nz, nx, w.shape[1]))


def _bev_module_forward(x: Tensor, params, prefix, stride) -> Tensor:
    x = conv2d(x, params[f"{prefix}.conv_w"].value, params[f"{prefix}.conv_b"].value,
               stride=stride, padding=1)
    x = layernorm(x, params[f"{prefix}.ln_g"].value, params[f"{prefix}.ln_b"].value)
    h = gelu(linear(x, params[f"{prefix}.mlp_w1"].value, params[f"{prefix}.mlp_b1"].value))
    return linear(h, params[f"{prefix}.mlp_w2"].value, params[f"{prefix}.mlp_b2"].value)


def bev_net_forward(bev: Tensor, config: ModelConfig, params: ModelParams,
                    prefix: str = "bev") -> Tensor:
    x = bev
    for i, (_, stride) in enumerate(config.bev_plan):
        x = _bev_module_forward(x, params, f"{prefix}.{i}", stride)
    return x


def predict_poses(bev_out: Tensor, config: ModelConfig, params: ModelParams,
                  goal=None) -> Tensor:
    """Pool spatially, optionally append the canonical goal, regress (T2, 9) poses."""
    pooled = avg_pool_spatial(bev_out) if bev_out.ndim == 3 else bev_out
    if config.goal_conditioned:
        if goal is None:
            raise ShapeMismatch("goal-conditioned model needs a 3-vector goal")
        pooled = concat([pooled, Tensor(np.asarray(goal, dtype=np.float32).reshape(3))])
    elif goal is not None:
        raise ShapeMismatch("goal given but model is not goal-conditioned")
    x = gelu(layernorm(linear(pooled, params["head.w1"].value, params["head.b1"].value),
                       params["head.ln1_g"].value, params["head.ln1_b"].value))
    x = gelu(layernorm(linear(x, params["head.w2"].value, params["head.b2"].value),
                       params["head.ln2_g"].value, params["head.ln2_b"].value))
    out = linear(x, params["head.w3"].value, params["head.b3"].value)
    return out.reshape((config.t2, 9))


def assemble_volume(clip, config: ModelConfig, frame=None, fmaps=None, occupancy=None):
    """Unproject all T1 frames and aggregate; returns (FeatureVolume tensor, frame)."""
    if frame is None:
        frame = geom.canonical_frame_of(clip.past_poses[-1])
    volumes = []
    for j, obs in enumerate(clip.observations):
        fmap = fmaps[j] if fmaps is not None else None
        volumes.append(unproject_frame(obs, frame, config.grid, fmap=fmap))
    agg = aggregate_temporal(volumes)
    features = agg.features
    if config.concat_occupancy:
        if occupancy is None:
            raise ShapeMismatch("concat_occupancy model needs an occupancy volume")
        occ = Tensor(np.asarray(occupancy, dtype=np.float32)[..., None])
        features = concat([features, occ], axis=3)
    return features, frame


def forward_from_volume(volume, config: ModelConfig, params: ModelParams, goal=None) -> Tensor:
    """Squeeze -> BEV net -> head, from an already-aggregated feature volume."""
    volume = volume if isinstance(volume, Tensor) else Tensor(volume)
    if config.conv3d:
        x = volume
        for i, (_, stride) in enumerate(config.conv3d_plan):
            x = conv3d(x, params[f"c3d.{i}.w"].value, params[f"c3d.{i}.b"].value,
                       stride=stride, padding=1)
            x = layernorm(x, params[f"c3d.{i}.ln_g"].value, params[f"c3d.{i}.ln_b"].value)
            x = gelu(x)
        d, h, w, c = x.shape
        pooled = x.reshape((d * h * w, c)).mean(axis=0)
        return predict_poses(pooled, config, params, goal=goal)
    bev = bev_squeeze(volume, params["squeeze.w"].value, params["squeeze.b"].value)
    out = bev_net_forward(bev, config, params)
    return predict_poses(out, config, params, goal=goal)


def forward(clip, config: ModelConfig, params: ModelParams, goal=None,
            fmaps=None, occupancy=None):
    """Full pipeline for one clip; returns ((T2, 9) Tensor, CanonicalFrame).

    Predictions are in the canonical frame of the last observed pose. `goal`,
    when given, must already be canonical.
    """
    frame = geom.canonical_frame_of(clip.past_poses[-1])
    if config.pooling_2d_only:
        maps = [fmaps[j] if fmaps is not None else Tensor(obs.feature_map)
                for j, obs in enumerate(clip.observations)]
        total = maps[0]
        for m in maps[1:]:
            total = total + m
        x = total * (1.0 / len(maps))
        for i, (_, stride) in enumerate(config.bev_plan):
            x = _bev_module_forward(x, params, f"p2d.{i}", stride)
        return predict_poses(x, config, params, goal=goal), frame
    volume, frame = assemble_volume(clip, config, frame=frame, fmaps=fmaps, occupancy=occupancy)
    return forward_from_volume(volume, config, params, goal=goal), frame


def predicted_canonical_poses(pred: Tensor):
    """Convert a (T2, 9) network output into canonical-frame Pose objects."""
    out = []
    for row in np.asarray(pred.data, dtype=np.float64):
        R = geom.rot6d_to_matrix(row[3:9])
        out.append(geom.Pose(row[:3], geom.matrix_to_rot6d(R)))
    return out
