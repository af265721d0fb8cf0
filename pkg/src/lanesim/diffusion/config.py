"""Planner hyperparameters: network sizes, radii, noise schedule, guide specs.

Desk-scale defaults train on a laptop CPU in minutes; `ModelConfig.paper_scale`
selects the full-size configuration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class ModelConfig:
    n_hidden: int = 64
    n_heads: int = 4
    head_dim: int = 16
    n_history: int = 10  # T_h, ticks of context
    n_future: int = 80  # T_f, ticks generated (8 s at 10 Hz)
    encoder_layers: int = 2
    decoder_layers: int = 2
    recurrent_steps: int = 2
    dropout: float = 0.1
    n_freq_bands: int = 64
    num_t2m_steps: int = 10
    map_segment_len: float = 20.0
    a2a_radius: float = 50.0
    pl2a_radius: float = 50.0
    m2m_radius: float = 150.0
    pl2m_radius: float = 150.0
    a2m_radius: float = 150.0
    heading_relative: bool = True  # plan headings relative to the t_c pose

    @classmethod
    def paper_scale(cls) -> "ModelConfig":
        return cls(n_hidden=128, n_heads=8, head_dim=64)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class NoiseSchedule:
    """Power-interpolated sampling levels t_0 > ... > t_N = 0 plus the
    lognormal training-noise distribution."""

    sigma_data: float = 0.1
    p_mean: float = -1.2
    p_std: float = 1.2
    s_noise: float = 8.0  # initial sampling level (sigma_max)
    sigma_min: float = 0.002
    rho: float = 7.0
    n_steps: int = 32

    def levels(self) -> np.ndarray:
        i = np.arange(self.n_steps)
        hi = self.s_noise ** (1.0 / self.rho)
        lo = self.sigma_min ** (1.0 / self.rho)
        ts = (hi + i / max(self.n_steps - 1, 1) * (lo - hi)) ** self.rho
        return np.concatenate([ts, [0.0]])

    def sample_training_sigma(self, generator) -> float:
        import torch

        z = torch.randn((), generator=generator, dtype=torch.float64)
        return float(math.exp(self.p_mean + self.p_std * z.item()))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(**d)


@dataclass
class GuideTerm:
    kind: str
    weight: float = 1.0
    params: dict = field(default_factory=dict)


@dataclass
class GuideSpec:
    """Weighted differentiable costs steering the sampler.

    alpha is the ascent rate on G = -sum(weight * cost), beta the
    per-element clip on each guide step's displacement, k_steps the number
    of ascent steps per denoising level (0 disables guidance).
    """

    terms: list[GuideTerm] = field(default_factory=list)
    alpha: float = 0.1
    beta: float = 0.5
    k_steps: int = 0

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("guide clip beta must be > 0")
        if self.k_steps < 0:
            raise ValueError("k_steps must be >= 0")
        for term in self.terms:
            if term.weight < 0:
                raise ValueError("guide weights must be >= 0")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k_steps": self.k_steps,
            "terms": [
                {"kind": t.kind, "weight": t.weight, "params": t.params} for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GuideSpec":
        return cls(
            terms=[GuideTerm(t["kind"], t.get("weight", 1.0), t.get("params", {})) for t in d.get("terms", [])],
            alpha=d.get("alpha", 0.1),
            beta=d.get("beta", 0.5),
            k_steps=d.get("k_steps", 0),
        )


GUIDE_KINDS = (
    "max_acceleration",
    "target_velocity",
    "time_headway",
    "relative_distance",
    "goal_point",
    "no_collision",
    "no_offroad",
    "adversarial_approach",
)
