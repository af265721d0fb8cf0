"""Plan normalization: z-scoring by corpus statistics, headings taken
relative to each agent's pose at the current step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

STD_FLOOR = 0.05  # degenerate corpora (all-equal channel) stay invertible


@dataclass
class NormStats:
    mean: np.ndarray  # [2] = (speed, relative heading)
    std: np.ndarray  # [2]
    heading_relative: bool = True

    @classmethod
    def from_targets(cls, targets: list[np.ndarray], ref_headings: list[np.ndarray]):
        rows = []
        for tgt, refs in zip(targets, ref_headings):
            t = np.array(tgt, dtype=np.float64)
            if t.ndim == 2:
                t = t[None]
            rel = np.remainder(t[..., 1] - np.asarray(refs)[:, None] + np.pi, 2 * np.pi) - np.pi
            rows.append(np.stack([t[..., 0].ravel(), rel.ravel()], axis=1))
        flat = np.concatenate(rows, axis=0)
        mean = flat.mean(axis=0)
        std = np.maximum(flat.std(axis=0), STD_FLOOR)
        return cls(mean=mean, std=std)

    def normalize(self, target_world: np.ndarray, ref_headings: np.ndarray) -> np.ndarray:
        out = np.array(target_world, dtype=np.float64)
        if self.heading_relative:
            out[..., 1] = (
                np.remainder(out[..., 1] - np.asarray(ref_headings)[:, None] + np.pi, 2 * np.pi)
                - np.pi
            )
        out[..., 0] = (out[..., 0] - self.mean[0]) / self.std[0]
        out[..., 1] = (out[..., 1] - self.mean[1]) / self.std[1]
        return out

    def denormalize_torch(self, tau: torch.Tensor, ref_headings: torch.Tensor) -> torch.Tensor:
        """Differentiable inverse; headings are left unwrapped (sin/cos
        consumers don't care, and wrapping would kink the gradient)."""
        v = tau[..., 0] * float(self.std[0]) + float(self.mean[0])
        h = tau[..., 1] * float(self.std[1]) + float(self.mean[1])
        if self.heading_relative:
            h = h + ref_headings[:, None]
        return torch.stack([v, h], dim=-1)

    def denormalize(self, tau: np.ndarray, ref_headings: np.ndarray) -> np.ndarray:
        out = np.array(tau, dtype=np.float64)
        out[..., 0] = out[..., 0] * self.std[0] + self.mean[0]
        out[..., 1] = out[..., 1] * self.std[1] + self.mean[1]
        if self.heading_relative:
            out[..., 1] = out[..., 1] + np.asarray(ref_headings)[:, None]
        out[..., 1] = np.remainder(out[..., 1] + np.pi, 2 * np.pi) - np.pi
        return out

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "heading_relative": self.heading_relative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            heading_relative=bool(d.get("heading_relative", True)),
        )
