"""Differentiable reconstruction of positions from (speed, heading) plans."""

from __future__ import annotations

import numpy as np
import torch


def integrate_plan(plan: torch.Tensor, init_xy: torch.Tensor, tick: float) -> torch.Tensor:
    """Positions after each tick: p_{t+1} = p_t + v_t*(cos h_t, sin h_t)*tick.

    plan: [A, T, 2] world-unit (speed, heading); init_xy: [A, 2];
    returns [A, T, 2], differentiable w.r.t. plan.
    """
    v = plan[..., 0]
    h = plan[..., 1]
    steps = torch.stack([v * torch.cos(h), v * torch.sin(h)], dim=-1) * tick
    return init_xy[:, None, :] + torch.cumsum(steps, dim=1)


def integrate_plan_np(plan: np.ndarray, init_xy: np.ndarray, tick: float) -> np.ndarray:
    v = plan[..., 0]
    h = plan[..., 1]
    steps = np.stack([v * np.cos(h), v * np.sin(h)], axis=-1) * tick
    return np.asarray(init_xy)[..., None, :] + np.cumsum(steps, axis=-2)
