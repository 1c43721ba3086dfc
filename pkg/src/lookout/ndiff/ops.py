"""Differentiable building blocks: dense layer, conv, layernorm, GELU, pooling, pose loss."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateRotation, ShapeMismatch
from .tensor import Tensor, as_tensor, concat, pad2d, pad3d, stack

LAYERNORM_EPS = 1e-5
_GS_EPS = 1e-8


def linear(x, W, b=None) -> Tensor:
    """y = x W + b for x of shape (..., n) against W (n, m)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ShapeMismatch(f"linear: {x.shape} @ {W.shape}")
    lead = x.shape[:-1]
    y = x.reshape((-1, x.shape[-1])) @ W if x.ndim > 2 else x @ W
    if x.ndim > 2:
        y = y.reshape(lead + (W.shape[1],))
    if b is not None:
        y = y + as_tensor(b)
    return y


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x (H, W, Cin) with kernels w (kh, kw, Cin, Cout)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeMismatch(f"conv2d expects (H,W,Cin) and (kh,kw,Cin,Cout), got {x.shape}, {w.shape}")
    H, W_, cin = x.shape
    kh, kw, wcin, cout = w.shape
    if cin != wcin:
        raise ShapeMismatch(f"conv2d channel mismatch: {cin} vs {wcin}")
    ho = (H + 2 * padding - kh) // stride + 1
    wo = (W_ + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatch("kernel does not fit padded input")
    xp = pad2d(x, padding)
    out = None
    for i in range(kh):
        for j in range(kw):
            patch = xp[i : i + stride * (ho - 1) + 1 : stride,
                       j : j + stride * (wo - 1) + 1 : stride, :]
            term = patch.reshape((ho * wo, cin)) @ w[i, j]
            out = term if out is None else out + term
    out = out.reshape((ho, wo, cout))
    if b is not None:
        out = out + as_tensor(b)
    return out


def conv3d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of x (D, H, W, Cin) with kernels w (kd, kh, kw, Cin, Cout)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 5:
        raise ShapeMismatch(f"conv3d expects (D,H,W,Cin) and (kd,kh,kw,Cin,Cout), got {x.shape}, {w.shape}")
    D, H, W_, cin = x.shape
    kd, kh, kw, wcin, cout = w.shape
    if cin != wcin:
        raise ShapeMismatch(f"conv3d channel mismatch: {cin} vs {wcin}")
    do = (D + 2 * padding - kd) // stride + 1
    ho = (H + 2 * padding - kh) // stride + 1
    wo = (W_ + 2 * padding - kw) // stride + 1
    if min(do, ho, wo) < 1:
        raise ShapeMismatch("kernel does not fit padded input")
    xp = pad3d(x, padding)
    out = None
    for a in range(kd):
        for i in range(kh):
            for j in range(kw):
                patch = xp[a : a + stride * (do - 1) + 1 : stride,
                           i : i + stride * (ho - 1) + 1 : stride,
                           j : j + stride * (wo - 1) + 1 : stride, :]
                term = patch.reshape((do * ho * wo, cin)) @ w[a, i, j]
                out = term if out is None else out + term
    out = out.reshape((do, ho, wo, cout))
    if b is not None:
        out = out + as_tensor(b)
    return out


def layernorm(x, gamma, beta) -> Tensor:
    """Normalize over the trailing (channel) axis."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[-1]
    if c < 2:
        raise ShapeMismatch("layernorm needs a channel axis of length >= 2")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatch(f"layernorm affine params must be ({c},)")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / (var + LAYERNORM_EPS).sqrt() * gamma + beta


def gelu(x) -> Tensor:
    """Exact-erf GELU: x * Phi(x)."""
    x = as_tensor(x)
    inv_sqrt2 = float(1.0 / np.sqrt(2.0))
    return x * ((x * inv_sqrt2).erf() + 1.0) * 0.5


def avg_pool_spatial(x) -> Tensor:
    """Per-channel mean over the leading spatial axes of (H, W, C)."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"avg_pool_spatial expects (H,W,C), got {x.shape}")
    h, w, c = x.shape
    return x.reshape((h * w, c)).mean(axis=0)


def rot6d_to_matrix_t(r6: Tensor) -> Tensor:
    """Differentiable Gram-Schmidt from a 6-vector to a 3x3 rotation matrix."""
    a1, a2 = r6[:3], r6[3:6]
    n1 = (a1 * a1).sum().sqrt()
    if float(n1.data) < _GS_EPS:
        raise DegenerateRotation("first 6D column collapsed")
    b1 = a1 / n1
    u2 = a2 - (b1 * a2).sum() * b1
    n2 = (u2 * u2).sum().sqrt()
    if float(n2.data) < _GS_EPS:
        raise DegenerateRotation("6D columns are parallel")
    b2 = u2 / n2
    b3 = _cross(b1, b2)
    return stack([b1, b2, b3], axis=0).transpose((1, 0))


def _cross(a: Tensor, b: Tensor) -> Tensor:
    return stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ],
        axis=0,
    )


def pose_loss(pred, gt_flat, lambda_trans: float = 1.0, lambda_rot: float = 1.0,
              rotation_form: str = "relative") -> Tensor:
    """Combined L1 loss over a (T2, 9) pose sequence.

    Translation term: L1 distance per step. Rotation term: L1 deviation of the
    relative rotation gt^T @ pred from identity ("relative", default), or of the
    raw product gt @ pred ("literal"). Averaged over steps.
    """
    pred = as_tensor(pred)
    gt_flat = np.asarray(gt_flat, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != 9 or gt_flat.shape != pred.shape:
        raise ShapeMismatch(f"pose_loss expects matching (T2, 9) arrays, got {pred.shape} vs {gt_flat.shape}")
    if rotation_form not in ("relative", "literal"):
        raise ValueError(f"unknown rotation_form {rotation_form!r}")
    from .. import geom  # late import to keep ndiff free of geometry at module load

    t2 = pred.shape[0]
    eye = np.eye(3, dtype=np.float32)
    total = None
    for t in range(t2):
        gt_R = geom.rot6d_to_matrix(gt_flat[t, 3:9])
        base = gt_R.T if rotation_form == "relative" else gt_R
        pred_R = rot6d_to_matrix_t(pred[t, 3:9])
        rel = Tensor(base.astype(np.float32)) @ pred_R
        rot_term = (rel - eye).abs().sum()
        trans_term = (pred[t, :3] - gt_flat[t, :3].astype(np.float32)).abs().sum()
        step = trans_term * lambda_trans + rot_term * lambda_rot
        total = step if total is None else total + step
    return total * (1.0 / t2)
