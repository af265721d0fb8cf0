"""Guided plan sampling: Heun-corrected denoising with interleaved
gradient-ascent guide steps, each clipped elementwise around the
pre-guidance iterate."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .config import NoiseSchedule


class SampleDiverged(RuntimeError):
    def __init__(self, level_index: int, sigma: float):
        super().__init__(
            f"non-finite sample at denoising level {level_index} (sigma={sigma:.4g})"
        )
        self.level_index = level_index
        self.sigma = sigma


@dataclass
class SimpleGuide:
    """Duck-typed guide for tests and closed-form studies."""

    grad_fn: object
    alpha: float
    beta: float
    k_steps: int

    def grad(self, x: torch.Tensor) -> torch.Tensor:
        return self.grad_fn(x)


@dataclass
class SampleTrace:
    guide_step_max_delta: list[float] = field(default_factory=list)
    levels_run: int = 0


def sample_plans(
    denoise_fn,
    shape: tuple[int, ...],
    schedule: NoiseSchedule,
    guide=None,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
    trace: SampleTrace | None = None,
) -> torch.Tensor:
    """Draw one batch of normalized plans.

    denoise_fn(x, sigma) -> D(x; sigma). The guide (if any, with k_steps > 0)
    exposes grad(x) = dG/dx plus alpha/beta/k_steps; every guide step's
    displacement from the pre-guidance iterate is clipped to [-beta, beta]
    per element.
    """
    levels = schedule.levels()
    x = (
        torch.randn(shape, generator=generator, dtype=dtype)
        * schedule.s_noise
    )
    n = len(levels) - 1
    for i in range(n):
        t_i = float(levels[i])
        t_next = float(levels[i + 1])
        d_hat = denoise_fn(x, t_i)
        if not torch.isfinite(d_hat).all():
            raise SampleDiverged(i, t_i)
        d_i = (x - d_hat) / t_i
        x_next = x + (t_next - t_i) * d_i
        if t_next != 0.0:
            d_hat2 = denoise_fn(x_next, t_next)
            if not torch.isfinite(d_hat2).all():
                raise SampleDiverged(i, t_next)
            d_prime = (x_next - d_hat2) / t_next
            x_next = x + (t_next - t_i) * (0.5 * d_i + 0.5 * d_prime)

        if guide is not None and getattr(guide, "k_steps", 0) > 0:
            beta = guide.beta
            x0 = x_next
            x_j = x_next
            for _ in range(guide.k_steps):
                g = guide.grad(x_j)
                x_j = x_j + guide.alpha * g
                delta = torch.clamp(x_j - x0, -beta, beta)
                x_j = x0 + delta
                if trace is not None:
                    trace.guide_step_max_delta.append(float(delta.abs().max()))
            x_next = x_j
        if not torch.isfinite(x_next).all():
            raise SampleDiverged(i, t_next)
        x = x_next
        if trace is not None:
            trace.levels_run = i + 1
    return x
