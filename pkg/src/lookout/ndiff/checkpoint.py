"""Binary checkpoint serialization for parameters and optimizer state.

Layout (all little-endian):
  magic "LOCP" | u32 version | u32 param_count | u8 has_optimizer
  per param: u32 name_len | name utf-8 | u8 is_bias | u32 rank | u32 dims... | f32 data
  if has_optimizer: u64 step | per param in the same order: f32 m data | f32 v data
"""

from __future__ import annotations

import struct

import numpy as np

from .optim import OptimState, Param
from .tensor import Tensor

MAGIC = b"LOCP"
VERSION = 1


def _write_array(fh, arr: np.ndarray):
    fh.write(arr.astype("<f4").tobytes())


def _read_array(fh, shape) -> np.ndarray:
    n = int(np.prod(shape)) if shape else 1
    buf = fh.read(4 * n)
    return np.frombuffer(buf, dtype="<f4").reshape(shape).copy()


def save_checkpoint(path, params, state: OptimState | None = None) -> None:
    params = list(params)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        fh.write(struct.pack("<B", 1 if state is not None else 0))
        for p in params:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<B", 1 if p.is_bias else 0))
            shape = p.value.shape
            fh.write(struct.pack("<I", len(shape)))
            for d in shape:
                fh.write(struct.pack("<I", d))
            _write_array(fh, p.value.data)
        if state is not None:
            fh.write(struct.pack("<Q", state.step))
            for p in params:
                m, v = state.moments(p)
                _write_array(fh, m)
                _write_array(fh, v)


def load_checkpoint(path):
    """Returns (params, optim_state_or_None)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (has_opt,) = struct.unpack("<B", fh.read(1))
        params = []
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (is_bias,) = struct.unpack("<B", fh.read(1))
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
            data = _read_array(fh, shape)
            params.append(Param(name, Tensor(data, requires_grad=True), bool(is_bias)))
        state = None
        if has_opt:
            (step,) = struct.unpack("<Q", fh.read(8))
            state = OptimState(step=step)
            for p in params:
                state.m[p.name] = _read_array(fh, p.value.shape)
                state.v[p.name] = _read_array(fh, p.value.shape)
    return params, state
