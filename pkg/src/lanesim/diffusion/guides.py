"""Differentiable guide costs steering the sampler.

Each cost maps a denormalized plan (and the trajectory integrated from it)
to a nonnegative scalar; the sampler ascends G = -sum(weight * cost).
Car-following pairs are resolved per tick from detached positions so the
pairing itself never enters the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import GUIDE_KINDS, GuideSpec
from .integrate import integrate_plan
from .stats import NormStats

FOLLOW_RANGE = 100.0  # m, max leader distance when pairing
FOLLOW_LATERAL = 2.0  # m, lateral corridor when pairing
FOLLOW_ALIGN = math.pi / 4
SPEED_EPS = 0.5  # m/s, headway undefined below this follower speed


@dataclass
class GuideContext:
    """Everything the costs need besides the plan itself."""

    init_states: np.ndarray  # [A, 4] x, y, speed, heading at t_c
    stats: NormStats
    tick: float
    lengths: np.ndarray | None = None  # [A]
    widths: np.ndarray | None = None
    drivable: list[np.ndarray] = field(default_factory=list)  # boundary polygons

    @property
    def n_agents(self) -> int:
        return len(self.init_states)

    def torch_init_xy(self) -> torch.Tensor:
        return torch.as_tensor(self.init_states[:, :2], dtype=torch.float64)

    def ref_headings(self) -> torch.Tensor:
        return torch.as_tensor(self.init_states[:, 3], dtype=torch.float64)


def resolve_follow_pairs(positions: np.ndarray, headings: np.ndarray):
    """(t, leader, follower) index arrays: leader i directly ahead of j."""
    a, t_f = positions.shape[0], positions.shape[1]
    out_t, out_i, out_j = [], [], []
    for t in range(t_f):
        p = positions[:, t]
        h = headings[:, t]
        for j in range(a):
            c, s = math.cos(h[j]), math.sin(h[j])
            best = None
            for i in range(a):
                if i == j:
                    continue
                dx, dy = p[i, 0] - p[j, 0], p[i, 1] - p[j, 1]
                fwd = dx * c + dy * s
                lat = -dx * s + dy * c
                if not (0.5 < fwd < FOLLOW_RANGE) or abs(lat) > FOLLOW_LATERAL:
                    continue
                dh = (h[i] - h[j] + math.pi) % (2 * math.pi) - math.pi
                if abs(dh) > FOLLOW_ALIGN:
                    continue
                if best is None or fwd < best[0]:
                    best = (fwd, i)
            if best is not None:
                out_t.append(t)
                out_i.append(best[1])
                out_j.append(j)
    return np.asarray(out_t), np.asarray(out_i), np.asarray(out_j)


def _pair_distances(positions: torch.Tensor, t_idx, i_idx, j_idx) -> torch.Tensor:
    pi = positions[i_idx, t_idx]
    pj = positions[j_idx, t_idx]
    return torch.linalg.vector_norm(pi - pj, dim=-1)


def signed_distance_outside(points: torch.Tensor, polygons: list[np.ndarray]) -> torch.Tensor:
    """Positive outside the drivable union, negative inside; the magnitude is
    the distance to the nearest boundary edge (differentiable); the sign is
    resolved on detached coordinates."""
    flat = points.reshape(-1, 2)
    n = flat.shape[0]
    dmin = torch.full((n,), torch.inf, dtype=flat.dtype)
    for poly in polygons:
        a = torch.as_tensor(poly, dtype=flat.dtype)
        b = torch.roll(a, -1, dims=0)
        seg = b - a  # [V, 2]
        seg_len2 = (seg**2).sum(-1).clamp_min(1e-12)
        rel = flat[:, None, :] - a[None, :, :]  # [n, V, 2]
        t = ((rel * seg[None]).sum(-1) / seg_len2).clamp(0.0, 1.0)
        foot = a[None] + t[..., None] * seg[None]
        d = torch.linalg.vector_norm(flat[:, None, :] - foot, dim=-1)
        dmin = torch.minimum(dmin, d.min(dim=1).values)
    inside = np.zeros(n, dtype=bool)
    pts_np = flat.detach().numpy()
    from ..geometry import point_in_polygon

    for poly in polygons:
        for k in range(n):
            if not inside[k] and point_in_polygon(pts_np[k], poly):
                inside[k] = True
    sign = torch.where(torch.as_tensor(inside), -1.0, 1.0).to(flat.dtype)
    return (sign * dmin).reshape(points.shape[:-1])


def guide_cost(
    kind: str,
    plan_world: torch.Tensor,
    positions: torch.Tensor,
    ctx: GuideContext,
    params: dict,
) -> torch.Tensor:
    """One Table-row cost as a scalar tensor (differentiable w.r.t. the plan)."""
    if kind not in GUIDE_KINDS:
        raise ValueError(f"unknown guide kind {kind!r} (known: {', '.join(GUIDE_KINDS)})")
    v = plan_world[..., 0]
    h = plan_world[..., 1]

    if kind == "max_acceleration":
        acc_max = float(params.get("acc_max", 5.0))
        v0 = torch.as_tensor(ctx.init_states[:, 2], dtype=v.dtype)
        v_full = torch.cat([v0[:, None], v], dim=1)
        acc = (v_full[:, 1:] - v_full[:, :-1]) / ctx.tick
        return torch.clamp(acc.abs() - acc_max, min=0.0).sum()

    if kind == "target_velocity":
        v_target = float(params.get("v_target", 10.0))
        return ((v - v_target) ** 2).sum()

    if kind in ("time_headway", "relative_distance"):
        pos_np = positions.detach().numpy()
        h_np = h.detach().numpy()
        t_idx, i_idx, j_idx = resolve_follow_pairs(pos_np, h_np)
        if len(t_idx) == 0:
            return torch.zeros((), dtype=plan_world.dtype)
        dis = _pair_distances(positions, t_idx, i_idx, j_idx)
        if kind == "relative_distance":
            target = float(params.get("dis_target", 10.0))
            return (dis - target).abs().sum()
        thw_target = float(params.get("thw_target", 2.0))
        vj = v[j_idx, t_idx]
        keep = vj.detach() > SPEED_EPS
        if not bool(keep.any()):
            return torch.zeros((), dtype=plan_world.dtype)
        denom = vj[keep] ** 2 if params.get("literal_squared", False) else vj[keep]
        return (dis[keep] / denom - thw_target).abs().sum()

    if kind == "goal_point":
        targets = torch.as_tensor(params["targets"], dtype=positions.dtype)
        if targets.ndim == 1:  # one shared point
            targets = targets.reshape(1, 1, 2).expand_as(positions)
        elif targets.ndim == 2:  # per-agent point
            targets = targets[:, None, :].expand_as(positions)
        mask = params.get("mask")
        err = ((positions - targets) ** 2).sum(-1)
        if mask is not None:
            err = err * torch.as_tensor(np.asarray(mask, dtype=np.float64), dtype=err.dtype)
        return err.sum()

    if kind == "no_collision":
        widths = ctx.widths if ctx.widths is not None else np.full(ctx.n_agents, 2.0)
        margin_extra = float(params.get("margin", 0.5))
        a = positions.shape[0]
        if a < 2:
            return torch.zeros((), dtype=plan_world.dtype)
        total = torch.zeros((), dtype=plan_world.dtype)
        for i in range(a):
            for j in range(i + 1, a):
                dist = torch.linalg.vector_norm(positions[i] - positions[j], dim=-1)
                margin = 0.5 * (widths[i] + widths[j]) + margin_extra
                total = total + torch.nn.functional.softplus(margin - dist).sum()
        return total

    if kind == "no_offroad":
        if not ctx.drivable:
            return torch.zeros((), dtype=plan_world.dtype)
        margin = float(params.get("margin", 0.0))
        sd = signed_distance_outside(positions, ctx.drivable)
        return torch.nn.functional.softplus(sd + margin).sum()

    if kind == "adversarial_approach":
        if "target_trajectory" in params:
            goal = torch.as_tensor(params["target_trajectory"], dtype=positions.dtype)
            goal = goal[None, :, :]
        elif "target_position" in params:
            goal = torch.as_tensor(params["target_position"], dtype=positions.dtype)
            goal = goal.reshape(1, 1, 2)
        else:
            # in-scene target: mutual-approach form (kept differentiable
            # through the target so the gradient is exact)
            target_idx = int(params["target_agent"])
            goal = positions[target_idx][None, :, :]
        exclude = set(params.get("exclude", []))
        if "target_agent" in params:
            exclude.add(int(params["target_agent"]))
        keep = [i for i in range(positions.shape[0]) if i not in exclude]
        if not keep:
            return torch.zeros((), dtype=plan_world.dtype)
        err = ((positions[keep] - goal) ** 2).sum(-1)
        return err.sum()

    raise AssertionError("unreachable")


class GuideRunner:
    """Evaluates a GuideSpec on normalized plan tensors."""

    def __init__(self, spec: GuideSpec, ctx: GuideContext):
        for term in spec.terms:
            if term.kind not in GUIDE_KINDS:
                raise ValueError(f"unknown guide kind {term.kind!r}")
        self.spec = spec
        self.ctx = ctx

    @property
    def alpha(self) -> float:
        return self.spec.alpha

    @property
    def beta(self) -> float:
        return self.spec.beta

    @property
    def k_steps(self) -> int:
        return self.spec.k_steps

    def total_cost(self, tau_norm: torch.Tensor) -> torch.Tensor:
        plan = self.ctx.stats.denormalize_torch(
            tau_norm.to(torch.float64), self.ctx.ref_headings()
        )
        positions = integrate_plan(plan, self.ctx.torch_init_xy(), self.ctx.tick)
        total = torch.zeros((), dtype=torch.float64)
        for term in self.spec.terms:
            total = total + term.weight * guide_cost(
                term.kind, plan, positions, self.ctx, term.params
            )
        return total

    def cost(self, tau_norm: torch.Tensor) -> float:
        return float(self.total_cost(tau_norm.detach()))

    def grad(self, tau_norm: torch.Tensor) -> torch.Tensor:
        """dG/dtau with G = -total cost; works inside no_grad sampling."""
        with torch.enable_grad():
            leaf = tau_norm.detach().to(torch.float64).requires_grad_(True)
            cost = self.total_cost(leaf)
            (g,) = torch.autograd.grad(cost, leaf, allow_unused=True)
        if g is None:
            g = torch.zeros_like(leaf)
        return (-g).to(tau_norm.dtype)
