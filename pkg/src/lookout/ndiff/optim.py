"""AdamW with decoupled weight decay (biases exempt) and a linear OneCycle schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteGradient, StepOutOfRange
from .tensor import Tensor


@dataclass
class Param:
    name: str
    value: Tensor
    is_bias: bool = False

    def zero_grad(self):
        self.value.grad = None


@dataclass
class OptimState:
    """Per-parameter Adam moments plus the shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.05
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def moments(self, param: Param):
        if param.name not in self.m:
            self.m[param.name] = np.zeros_like(param.value.data)
            self.v[param.name] = np.zeros_like(param.value.data)
        return self.m[param.name], self.v[param.name]


def adamw_step(params, state: OptimState, lr: float):
    """One AdamW update in place. Decay is applied only to non-bias params."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p in params:
        g = p.value.grad
        if g is None:
            g = np.zeros_like(p.value.data)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient of {p.name} is not finite")
        m, v = state.moments(p)
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        theta = p.value.data
        if not p.is_bias and state.weight_decay > 0.0:
            theta -= np.float32(lr * state.weight_decay) * theta
        theta -= np.float32(lr) * (m_hat / (np.sqrt(v_hat) + state.eps)).astype(np.float32)
    return params


@dataclass(frozen=True)
class LrSchedule:
    max_lr: float
    total_steps: int
    pct_start: float = 0.05
    div_factor: float = 25.0
    final_div_factor: float = 1e4

    def __post_init__(self):
        if not 0.0 < self.pct_start < 1.0:
            raise ValueError("pct_start must lie in (0, 1)")
        if self.total_steps < 2:
            raise ValueError("total_steps must be >= 2")


def onecycle_lr(schedule: LrSchedule, step: int) -> float:
    """Linear warmup to max_lr at pct_start * total, then linear anneal."""
    total = schedule.total_steps
    if step < 0 or step > total:
        raise StepOutOfRange(f"step {step} outside [0, {total}]")
    peak = schedule.pct_start * total
    lr_start = schedule.max_lr / schedule.div_factor
    lr_final = schedule.max_lr / schedule.final_div_factor
    if step <= peak:
        frac = step / peak
        return lr_start + frac * (schedule.max_lr - lr_start)
    frac = (step - peak) / (total - peak)
    return schedule.max_lr + frac * (lr_final - schedule.max_lr)
