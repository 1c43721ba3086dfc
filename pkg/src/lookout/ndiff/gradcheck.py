"""Finite-difference verification of backward passes."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, default_dtype

_DENOM_FLOOR = 1e-6


def grad_check(op, inputs, h: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    `op` maps the given Tensors to a scalar Tensor. Inputs are checked entry by
    entry; relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
    Runs in float64 so the comparison probes the backward formulas, not float32
    rounding in the forward pass.
    """
    with default_dtype(np.float64):
        return _grad_check_impl(op, inputs, h)


def _grad_check_impl(op, inputs, h: float) -> float:
    inputs = [Tensor(np.asarray(x.data, dtype=np.float64)) for x in inputs]
    for x in inputs:
        x.requires_grad = True
        x.zero_grad()
    out = op(*inputs)
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]

    worst = 0.0
    for x, a_grad in zip(inputs, analytic):
        flat = x.data.reshape(-1)
        a_flat = a_grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(op(*inputs).data)
            flat[i] = orig - h
            f_minus = float(op(*inputs).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), _DENOM_FLOOR)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    for x in inputs:
        x.zero_grad()
    return worst
