"""Model configuration: voxel grid placement, BEV network plan, variant flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import ConfigInvalid, ShapeMismatch

PAPER_SPACING = 0.0843  # cube root of ~600 cm^3 per voxel


@dataclass(frozen=True)
class VoxelGridSpec:
    """Voxel grid in the canonical frame, indexed (z, y, x); forward-biased in Z."""

    nz: int = 96
    ny: int = 32
    nx: int = 96
    spacing: float = PAPER_SPACING
    origin: tuple = None  # (x0, y0, z0) lower corner, meters

    def __post_init__(self):
        if min(self.nz, self.ny, self.nx) < 2:
            raise ConfigInvalid("voxel counts must be >= 2")
        if self.spacing <= 0:
            raise ConfigInvalid("voxel spacing must be positive")
        if self.origin is None:
            # X centered, Y from below the head to above it, Z forward-biased
            object.__setattr__(self, "origin", (
                -self.nx * self.spacing / 2.0,
                -1.8,
                -self.nz * self.spacing / 6.0,
            ))

    @classmethod
    def paper(cls) -> "VoxelGridSpec":
        return cls()

    @classmethod
    def desk(cls) -> "VoxelGridSpec":
        return cls(nz=24, ny=8, nx=24, spacing=0.3, origin=(-3.6, -1.5, -1.2))

    def centers(self) -> np.ndarray:
        """(nz, ny, nx, 3) voxel-center coordinates (x, y, z) in the canonical frame."""
        x0, y0, z0 = self.origin
        zs = z0 + (np.arange(self.nz) + 0.5) * self.spacing
        ys = y0 + (np.arange(self.ny) + 0.5) * self.spacing
        xs = x0 + (np.arange(self.nx) + 0.5) * self.spacing
        zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
        return np.stack([xx, yy, zz], axis=-1)

    def to_dict(self):
        return {"nz": self.nz, "ny": self.ny, "nx": self.nx,
                "spacing": self.spacing, "origin": list(self.origin)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["nz"], d["ny"], d["nx"], d["spacing"], tuple(d["origin"]))


def _conv_out(n: int, stride: int) -> int:
    # 3x3 kernel, padding 1
    return (n - 1) // stride + 1


def paper_bev_plan(width: int = 384):
    """11 modules; width doubles twice, five stride-2 convs take 96 -> 3."""
    widths = [width, width, width, 2 * width, 2 * width, 2 * width,
              4 * width, 4 * width, 4 * width, 4 * width, 4 * width]
    strides = [1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1]
    return tuple(zip(widths, strides))


def desk_bev_plan(width: int = 8):
    widths = [width, 2 * width, 2 * width, 4 * width, 4 * width]
    strides = [1, 2, 1, 2, 2]
    return tuple(zip(widths, strides))


@dataclass(frozen=True)
class ModelConfig:
    grid: VoxelGridSpec = field(default_factory=VoxelGridSpec.desk)
    channels: int = 8  # input feature-map channel count
    bev_channels: int = 8  # channel width after the up-axis squeeze
    bev_plan: tuple = field(default_factory=desk_bev_plan)
    head_hidden: int = 64
    t2: int = 8
    goal_conditioned: bool = False
    concat_occupancy: bool = False
    raw_features_no_encoder: bool = True  # renderer channels are unencoded by construction
    pooling_2d_only: bool = False
    conv3d: bool = False
    conv3d_plan: tuple = ((16, 2), (32, 2))
    lambda_trans: float = 1.0
    lambda_rot: float = 1.0
    rotation_form: str = "relative"
    seed: int = 0

    @classmethod
    def paper(cls) -> "ModelConfig":
        return cls(grid=VoxelGridSpec.paper(), channels=384, bev_channels=384,
                   bev_plan=paper_bev_plan(), head_hidden=512)

    @property
    def volume_channels(self) -> int:
        return self.channels + (1 if self.concat_occupancy else 0)

    def bev_input_spatial(self) -> tuple:
        return (self.grid.nz, self.grid.nx)

    def shape_trace(self, t1: int = 8, fmap_hw: int = 16):
        """Symbolic shape chain of the default 3D pipeline."""
        g = self.grid
        chain = [("frame_features", (t1, fmap_hw, fmap_hw, self.channels)),
                 ("feature_volume", (g.nz, g.ny, g.nx, self.volume_channels)),
                 ("bev_features", (g.nz, g.nx, self.bev_channels))]
        h, w = g.nz, g.nx
        for cout, stride in self.bev_plan:
            h, w = _conv_out(h, stride), _conv_out(w, stride)
            chain.append(("bev_module", (h, w, cout)))
        chain.append(("pooled", (self.bev_plan[-1][0],)))
        chain.append(("poses", (self.t2, 9)))
        return chain

    def validate(self):
        if not self.pooling_2d_only and not self.conv3d:
            h, w = self.bev_input_spatial()
            for _, stride in self.bev_plan:
                h, w = _conv_out(h, stride), _conv_out(w, stride)
            if (h, w) != (3, 3):
                raise ShapeMismatch(f"BEV plan ends at {h}x{w}, expected 3x3")

    def to_json(self) -> str:
        d = asdict(self)
        d["grid"] = self.grid.to_dict()
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        d = json.loads(text)
        d["grid"] = VoxelGridSpec.from_dict(d["grid"])
        for key in ("bev_plan", "conv3d_plan"):
            if key in d:
                d[key] = tuple(tuple(p) for p in d[key])
        return cls(**d)

    def with_overrides(self, **kw) -> "ModelConfig":
        return replace(self, **kw)
