"""Scene encoder, plan decoder, and the preconditioned denoiser around them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .graph import SceneGraph
from .nn import EdgeAttention, FourierEmbedding, mlp, sinusoidal_table

AGENT_FEAT_DIM = 6
MAP_FEAT_DIM = 4
EDGE_FEAT_DIM = 3
PLAN_DIM = 2  # (speed, heading) per future tick


@dataclass
class TorchGraph:
    agent_feat: torch.Tensor
    map_feat: torch.Tensor
    edges: dict[str, tuple[torch.Tensor, torch.Tensor, torch.Tensor]]
    n_agents: int
    n_map: int

    @classmethod
    def from_graph(cls, g: SceneGraph) -> "TorchGraph":
        edges = {
            name: (
                torch.from_numpy(es.src),
                torch.from_numpy(es.dst),
                torch.from_numpy(es.feat),
            )
            for name, es in g.edges.items()
        }
        return cls(
            agent_feat=torch.from_numpy(g.agent_feat),
            map_feat=torch.from_numpy(g.map_feat),
            edges=edges,
            n_agents=g.n_agents,
            n_map=g.n_map,
        )


@dataclass
class SceneEmbedding:
    map_emb: torch.Tensor  # [M, N_h]
    agent_emb: torch.Tensor  # [A, T_h, N_h]
    graph: TorchGraph


class SceneEncoder(nn.Module):
    """Four attention mechanisms over the heterogeneous graph: map-map,
    agent temporal, agent-map, agent-agent; emits the per-step agent
    embedding with the current-step slot refined."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.n_hidden
        self.cfg = cfg
        self.map_in = mlp([MAP_FEAT_DIM, d, d])
        self.agent_in = mlp([AGENT_FEAT_DIM, d, d])
        self.edge_in = nn.ModuleDict(
            {name: mlp([EDGE_FEAT_DIM, d, d]) for name in ("a2a", "pl2a", "m2m")}
        )
        self.register_buffer("time_enc", sinusoidal_table(cfg.n_history, d))
        ah = dict(heads=cfg.n_heads, head_dim=cfg.head_dim, dropout=cfg.dropout)
        self.blocks = nn.ModuleList()
        for _ in range(cfg.encoder_layers):
            self.blocks.append(
                nn.ModuleDict(
                    {
                        "m2m": EdgeAttention(d, **ah),
                        "temporal": EdgeAttention(d, **ah),
                        "a2m": EdgeAttention(d, **ah),
                        "a2a": EdgeAttention(d, **ah),
                    }
                )
            )

    def forward(self, tg: TorchGraph) -> SceneEmbedding:
        a, t_h = tg.n_agents, self.cfg.n_history
        map_emb = self.map_in(tg.map_feat)
        agent_emb = self.agent_in(tg.agent_feat)  # [A, T_h, d]

        e_emb = {
            name: self.edge_in[name](tg.edges[name][2]) if tg.edges[name][2].numel() else tg.edges[name][2].reshape(0, map_emb.shape[-1])
            for name in ("a2a", "pl2a", "m2m")
        }
        t_src = torch.arange(a, dtype=torch.long).repeat_interleave(t_h)
        t_dst = torch.arange(a * t_h, dtype=torch.long)
        t_extra = self.time_enc.repeat(a, 1)

        for block in self.blocks:
            map_emb = block["m2m"](
                map_emb, map_emb, tg.edges["m2m"][0], tg.edges["m2m"][1], e_emb["m2m"]
            )
            q = block["temporal"](
                agent_emb[:, -1], agent_emb.reshape(a * t_h, -1), t_src, t_dst, t_extra
            )
            q = block["a2m"](q, map_emb, tg.edges["pl2a"][0], tg.edges["pl2a"][1], e_emb["pl2a"])
            q = block["a2a"](q, q, tg.edges["a2a"][0], tg.edges["a2a"][1], e_emb["a2a"])
            agent_emb = torch.cat([agent_emb[:, :-1], q.unsqueeze(1)], dim=1)
        return SceneEmbedding(map_emb=map_emb, agent_emb=agent_emb, graph=tg)


class PlanDecoder(nn.Module):
    """Cross-attention from per-agent plan queries to map, neighbors and own
    history, then agent-wise self-attention, repeated recurrently."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.n_hidden
        self.cfg = cfg
        self.query_in = mlp([cfg.n_future * PLAN_DIM, d, d])
        self.noise_emb = FourierEmbedding(cfg.n_freq_bands, d)
        self.edge_in = nn.ModuleDict(
            {name: mlp([EDGE_FEAT_DIM, d, d]) for name in ("pl2m", "a2m")}
        )
        self.register_buffer("time_enc", sinusoidal_table(cfg.num_t2m_steps, d))
        ah = dict(heads=cfg.n_heads, head_dim=cfg.head_dim, dropout=cfg.dropout)
        self.blocks = nn.ModuleList()
        for _ in range(cfg.decoder_layers):
            self.blocks.append(
                nn.ModuleDict(
                    {
                        "t2m": EdgeAttention(d, **ah),
                        "pl2m": EdgeAttention(d, **ah),
                        "a2m": EdgeAttention(d, **ah),
                        "self": EdgeAttention(d, **ah),
                    }
                )
            )
        self.out = mlp([d, d, cfg.n_future * PLAN_DIM])

    def forward(self, x: torch.Tensor, emb: SceneEmbedding, c_noise: torch.Tensor) -> torch.Tensor:
        tg = emb.graph
        a = tg.n_agents
        n_t2m = min(self.cfg.num_t2m_steps, emb.agent_emb.shape[1])
        noise_feat = self.noise_emb(c_noise)
        if noise_feat.shape[0] == 1:
            noise_feat = noise_feat.expand(a, -1)
        q = self.query_in(x.reshape(a, -1)) + noise_feat

        hist = emb.agent_emb[:, -n_t2m:].reshape(a * n_t2m, -1)
        t_src = torch.arange(a, dtype=torch.long).repeat_interleave(n_t2m)
        t_dst = torch.arange(a * n_t2m, dtype=torch.long)
        t_extra = self.time_enc[-n_t2m:].repeat(a, 1)

        e_emb = {
            name: self.edge_in[name](tg.edges[name][2]) if tg.edges[name][2].numel() else tg.edges[name][2].reshape(0, q.shape[-1])
            for name in ("pl2m", "a2m")
        }
        s_src = torch.arange(a, dtype=torch.long).repeat_interleave(a)
        s_dst = torch.arange(a, dtype=torch.long).repeat(a)
        s_extra = torch.zeros(a * a, q.shape[-1])

        agent_now = emb.agent_emb[:, -1]
        for _ in range(self.cfg.recurrent_steps):
            for block in self.blocks:
                q = block["t2m"](q, hist, t_src, t_dst, t_extra)
                q = block["pl2m"](
                    q, emb.map_emb, tg.edges["pl2m"][0], tg.edges["pl2m"][1], e_emb["pl2m"]
                )
                q = block["a2m"](
                    q, agent_now, tg.edges["a2m"][0], tg.edges["a2m"][1], e_emb["a2m"]
                )
                q = block["self"](q, q, s_src, s_dst, s_extra)
        return self.out(q).reshape(a, self.cfg.n_future, PLAN_DIM)


class Denoiser(nn.Module):
    """D(x; c, sigma) = c_skip*x + c_out*F(c_in*x; c, c_noise) with
    c_in = 1/sqrt(sigma^2+sd^2), c_skip = sd^2/(sigma^2+sd^2),
    c_out = sigma*sd/sqrt(sigma^2+sd^2), c_noise = ln(sigma)/4."""

    def __init__(self, cfg: ModelConfig, sigma_data: float = 0.1):
        super().__init__()
        self.cfg = cfg
        self.sigma_data = sigma_data
        self.encoder = SceneEncoder(cfg)
        self.decoder = PlanDecoder(cfg)

    def encode(self, graph: SceneGraph) -> SceneEmbedding:
        return self.encoder(TorchGraph.from_graph(graph))

    def coefficients(self, sigma: float) -> tuple[float, float, float, float]:
        sd2 = self.sigma_data**2
        denom = sigma**2 + sd2
        c_in = 1.0 / math.sqrt(denom)
        c_skip = sd2 / denom
        c_out = sigma * self.sigma_data / math.sqrt(denom)
        c_noise = 0.25 * math.log(sigma)
        return c_in, c_skip, c_out, c_noise

    def forward(
        self, x: torch.Tensor, emb: SceneEmbedding, sigma: float | torch.Tensor
    ) -> torch.Tensor:
        """sigma may be a scalar or a per-agent tensor [A] (batched training)."""
        if not torch.isfinite(x).all():
            raise ValueError("non-finite input to denoiser")
        if isinstance(sigma, torch.Tensor):
            if (sigma <= 0).any():
                raise ValueError("sigma must be > 0")
            sig = sigma.reshape(-1, 1, 1).to(x.dtype)
        else:
            if sigma <= 0:
                raise ValueError("sigma must be > 0")
            sig = torch.tensor([[[float(sigma)]]], dtype=x.dtype)
        sd2 = self.sigma_data**2
        denom = sig**2 + sd2
        c_in = denom.rsqrt()
        c_skip = sd2 / denom
        c_out = sig * self.sigma_data * denom.rsqrt()
        c_noise = 0.25 * torch.log(sig.reshape(-1))
        f = self.decoder((c_in * x).to(torch.float32), emb, c_noise.to(torch.float32))
        return c_skip * x + c_out * f.to(x.dtype)


def score(denoised: torch.Tensor, x: torch.Tensor, sigma: float) -> torch.Tensor:
    """Score-function estimate (D(x) - x) / sigma^2."""
    return (denoised - x) / (sigma * sigma)


def build_denoiser(cfg: ModelConfig, sigma_data: float, seed: int = 0) -> Denoiser:
    """Construct with deterministic initialization."""
    torch.manual_seed(seed)
    model = Denoiser(cfg, sigma_data)
    model.eval()
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(int(np.prod(p.shape)) for p in model.parameters())
