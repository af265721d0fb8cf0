"""Torch building blocks: MLPs, Fourier noise embedding, edge attention."""

from __future__ import annotations

import math

import torch
from torch import nn


def mlp(dims: list[int], dropout: float = 0.0) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        layers.append(nn.Linear(a, b))
        if i < len(dims) - 2:
            layers.append(nn.ReLU())
            if dropout > 0:
                layers.append(nn.Dropout(dropout))
    return nn.Sequential(*layers)


class FourierEmbedding(nn.Module):
    """Scalar -> feature vector via a fixed random frequency bank."""

    def __init__(self, n_bands: int, out_dim: int):
        super().__init__()
        self.register_buffer("freqs", torch.randn(n_bands) * 2.0 * math.pi)
        self.proj = mlp([2 * n_bands, out_dim, out_dim])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        ang = x.reshape(-1, 1) * self.freqs.reshape(1, -1)
        feat = torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)
        return self.proj(feat)


def sinusoidal_table(n_positions: int, dim: int) -> torch.Tensor:
    """Fixed time encoding for history offsets t - t_c in [-(n-1), 0]."""
    pos = torch.arange(n_positions, dtype=torch.float32) - (n_positions - 1)
    half = dim // 2
    freqs = torch.exp(torch.arange(half, dtype=torch.float32) * (-math.log(100.0) / max(half - 1, 1)))
    ang = pos[:, None] * freqs[None, :]
    table = torch.zeros(n_positions, dim)
    table[:, 0::2] = torch.sin(ang)[:, : (dim + 1) // 2]
    table[:, 1::2] = torch.cos(ang)[:, : dim // 2]
    return table


def segment_softmax(scores: torch.Tensor, seg: torch.Tensor, n_seg: int) -> torch.Tensor:
    """Softmax over rows sharing a segment index; scores [E, H]."""
    m = torch.full((n_seg, scores.shape[1]), -torch.inf, dtype=scores.dtype)
    m = m.index_reduce(0, seg, scores, "amax", include_self=True)
    ex = torch.exp(scores - m[seg])
    denom = torch.zeros(n_seg, scores.shape[1], dtype=scores.dtype)
    denom = denom.index_add(0, seg, ex)
    return ex / (denom[seg] + 1e-12)


class EdgeAttention(nn.Module):
    """Multi-head attention over an explicit edge list.

    Keys come from the key node embedding alone; values from the key node
    concatenated with a per-edge extra feature (relative pose embedding or
    time encoding), matching the scene encoder's attention table.
    """

    def __init__(self, dim: int, heads: int, head_dim: int, dropout: float = 0.0):
        super().__init__()
        inner = heads * head_dim
        self.heads = heads
        self.head_dim = head_dim
        self.norm_q = nn.LayerNorm(dim)
        self.norm_k = nn.LayerNorm(dim)
        self.w_q = nn.Linear(dim, inner)
        self.w_k = nn.Linear(dim, inner)
        self.w_v = nn.Linear(2 * dim, inner)
        self.w_o = nn.Linear(inner, dim)
        self.drop = nn.Dropout(dropout)
        self.ffn = nn.Sequential(
            nn.LayerNorm(dim), nn.Linear(dim, 4 * dim), nn.ReLU(), nn.Linear(4 * dim, dim)
        )

    def forward(
        self,
        q_nodes: torch.Tensor,  # [Nq, dim]
        k_nodes: torch.Tensor,  # [Nk, dim]
        src: torch.Tensor,  # [E] query indices
        dst: torch.Tensor,  # [E] key indices
        extra: torch.Tensor,  # [E, dim]
    ) -> torch.Tensor:
        n_q = q_nodes.shape[0]
        if src.numel() == 0:
            return q_nodes + self.ffn(q_nodes)
        qn = self.norm_q(q_nodes)
        kn = self.norm_k(k_nodes)
        q = self.w_q(qn)[src].view(-1, self.heads, self.head_dim)
        k = self.w_k(kn)[dst].view(-1, self.heads, self.head_dim)
        v = self.w_v(torch.cat([kn[dst], extra], dim=-1)).view(-1, self.heads, self.head_dim)
        scores = (q * k).sum(-1) / math.sqrt(self.head_dim)
        alpha = segment_softmax(scores, src, n_q)
        weighted = (alpha.unsqueeze(-1) * v).reshape(-1, self.heads * self.head_dim)
        out = torch.zeros(n_q, weighted.shape[1], dtype=weighted.dtype)
        out = out.index_add(0, src, weighted)
        q_nodes = q_nodes + self.drop(self.w_o(out))
        return q_nodes + self.ffn(q_nodes)
