import numpy as np
import pytest
import torch

from lanesim.diffusion import GuideSpec, GuideTerm, integrate_plan, integrate_plan_np
from lanesim.diffusion.guides import GuideContext, GuideRunner, resolve_follow_pairs
from lanesim.diffusion.stats import NormStats

STATS = NormStats(mean=np.array([8.0, 0.0]), std=np.array([3.0, 0.3]))


def make_ctx(n_agents=3, spacing=15.0, speed=8.0, polys=None):
    init = np.zeros((n_agents, 4))
    init[:, 0] = spacing * np.arange(n_agents)[::-1]  # agent 0 leads
    init[:, 2] = speed
    return GuideContext(
        init_states=init,
        stats=STATS,
        tick=0.1,
        lengths=np.full(n_agents, 4.5),
        widths=np.full(n_agents, 2.0),
        drivable=polys or [],
    )


def fd_gradient(runner, tau, eps=1e-6):
    fd = torch.zeros_like(tau)
    for idx in np.ndindex(*tau.shape):
        tp = tau.clone()
        tp[idx] += eps
        tm = tau.clone()
        tm[idx] -= eps
        fd[idx] = (runner.total_cost(tp) - runner.total_cost(tm)) / (2 * eps)
    return fd


ALL_KINDS = [
    ("max_acceleration", {"acc_max": 2.0}),
    ("target_velocity", {"v_target": 10.0}),
    ("time_headway", {"thw_target": 1.5}),
    ("time_headway", {"thw_target": 1.5, "literal_squared": True}),
    ("relative_distance", {"dis_target": 8.0}),
    ("goal_point", {}),
    ("no_collision", {"margin": 0.5}),
    ("no_offroad", {"margin": 0.2}),
    ("adversarial_approach", {"target_agent": 0}),
]


class TestGradients:
    @pytest.mark.parametrize("kind,params", ALL_KINDS, ids=lambda v: str(v)[:28])
    def test_matches_central_finite_differences(self, kind, params):
        rng = np.random.default_rng(hash(kind) % 2**32)
        a, t = 3, 12
        params = dict(params)
        if kind == "goal_point":
            params["targets"] = rng.uniform(-5, 40, size=(a, t, 2))
        polys = [np.array([(-10.0, -5.0), (120.0, -5.0), (120.0, 5.0), (-10.0, 5.0)])]
        ctx = make_ctx(a, polys=polys)
        spec = GuideSpec(terms=[GuideTerm(kind, 1.0, params)], alpha=0.1, beta=0.5, k_steps=1)
        runner = GuideRunner(spec, ctx)
        tau = torch.tensor(rng.normal(0, 1, size=(a, t, 2)), dtype=torch.float64)
        grad = -runner.grad(tau)  # cost gradient
        fd = fd_gradient(runner, tau)
        denom = max(float(fd.abs().max()), 1e-8)
        assert float((grad - fd).abs().max()) / denom < 1e-4


class TestCostSemantics:
    def test_target_velocity_zero_at_target(self):
        ctx = make_ctx(1)
        spec = GuideSpec(
            terms=[GuideTerm("target_velocity", 1.0, {"v_target": 8.0})],
            alpha=0.1,
            beta=0.5,
            k_steps=1,
        )
        runner = GuideRunner(spec, ctx)
        # normalized plan that denormalizes to exactly 8 m/s, heading 0
        tau = torch.zeros(1, 10, 2, dtype=torch.float64)
        tau[..., 0] = (8.0 - STATS.mean[0]) / STATS.std[0]
        assert runner.cost(tau) == pytest.approx(0.0, abs=1e-12)
        assert float(runner.grad(tau).abs().max()) == pytest.approx(0.0, abs=1e-9)

    def test_max_acceleration_hinge_zero_within_limit(self):
        ctx = make_ctx(1)
        spec = GuideSpec(
            terms=[GuideTerm("max_acceleration", 1.0, {"acc_max": 5.0})],
            alpha=0.1,
            beta=0.5,
            k_steps=1,
        )
        runner = GuideRunner(spec, ctx)
        tau = torch.zeros(1, 10, 2, dtype=torch.float64)
        tau[..., 0] = (8.0 - STATS.mean[0]) / STATS.std[0]  # constant speed = init
        assert runner.cost(tau) == 0.0

    def test_unknown_kind_rejected(self):
        ctx = make_ctx(1)
        with pytest.raises(ValueError, match="unknown guide kind"):
            GuideRunner(
                GuideSpec(terms=[GuideTerm("levitate", 1.0, {})], k_steps=1), ctx
            )

    def test_invalid_spec_params(self):
        with pytest.raises(ValueError):
            GuideSpec(beta=0.0)
        with pytest.raises(ValueError):
            GuideSpec(k_steps=-1)
        with pytest.raises(ValueError):
            GuideSpec(terms=[GuideTerm("goal_point", -1.0, {})])

    def test_follow_pairs_line_astern(self):
        # three agents in a column heading +x: 1 follows 0, 2 follows 1
        pos = np.zeros((3, 4, 2))
        pos[0, :, 0] = [30, 31, 32, 33]
        pos[1, :, 0] = [20, 21, 22, 23]
        pos[2, :, 0] = [10, 11, 12, 13]
        headings = np.zeros((3, 4))
        t, i, j = resolve_follow_pairs(pos, headings)
        pairs = set(zip(i.tolist(), j.tolist()))
        assert pairs == {(0, 1), (1, 2)}
        assert len(t) == 8  # both pairs at every tick

    def test_offroad_cost_zero_deep_inside(self):
        polys = [np.array([(-1000.0, -1000.0), (1000.0, -1000.0), (1000.0, 1000.0), (-1000.0, 1000.0)])]
        ctx = make_ctx(1, polys=polys)
        spec = GuideSpec(
            terms=[GuideTerm("no_offroad", 1.0, {"margin": 0.0})], alpha=0.1, beta=0.5, k_steps=1
        )
        runner = GuideRunner(spec, ctx)
        tau = torch.zeros(1, 10, 2, dtype=torch.float64)
        # softplus(-d) with d ~ 900 m underflows to exactly 0
        assert runner.cost(tau) == pytest.approx(0.0, abs=1e-12)


class TestIntegrate:
    def test_constant_velocity_endpoint(self):
        plan = torch.zeros(1, 80, 2, dtype=torch.float64)
        plan[..., 0] = 10.0
        pos = integrate_plan(plan, torch.zeros(1, 2, dtype=torch.float64), 0.1)
        assert float(pos[0, -1, 0]) == pytest.approx(80.0)
        assert float(pos[0, -1, 1]) == pytest.approx(0.0)

    def test_zero_speed_stays_put(self):
        plan = torch.zeros(2, 40, 2, dtype=torch.float64)
        init = torch.tensor([[3.0, 4.0], [-1.0, 2.0]], dtype=torch.float64)
        pos = integrate_plan(plan, init, 0.1)
        assert torch.allclose(pos[:, -1], init)

    def test_constant_turn_rate_matches_circle(self):
        # closed-form oracle: constant speed + constant turn rate is a circle
        # of radius v / omega; fit a circle (Kasa least squares) and compare
        v, omega, tick, n = 8.0, 0.3, 0.1, 80
        headings = omega * tick * np.arange(n)
        plan = np.stack([np.full(n, v), headings], axis=-1)[None]
        pos = integrate_plan_np(plan, np.zeros((1, 2)), tick)[0]
        a_mat = np.column_stack([2 * pos[:, 0], 2 * pos[:, 1], np.ones(len(pos))])
        b = (pos**2).sum(axis=1)
        (cx, cy, c0), *_ = np.linalg.lstsq(a_mat, b, rcond=None)
        r_fit = np.sqrt(c0 + cx**2 + cy**2)
        assert r_fit == pytest.approx(v / omega, rel=0.01)
        # and the fitted circle explains the points
        radii = np.linalg.norm(pos - (cx, cy), axis=-1)
        assert np.abs(radii - r_fit).max() / r_fit < 0.01

    def test_no_teleportation(self):
        rng = np.random.default_rng(0)
        plan = np.stack(
            [rng.uniform(0, 15, size=(4, 80)), rng.uniform(-np.pi, np.pi, size=(4, 80))],
            axis=-1,
        )
        pos = integrate_plan_np(plan, np.zeros((4, 2)), 0.1)
        assert np.linalg.norm(pos[:, -1], axis=-1).max() <= 15.0 * 8.0 + 1e-9

    def test_gradient_flows(self):
        plan = torch.zeros(1, 10, 2, dtype=torch.float64, requires_grad=True)
        pos = integrate_plan(plan, torch.zeros(1, 2, dtype=torch.float64), 0.1)
        pos.sum().backward()
        assert plan.grad is not None
        assert torch.isfinite(plan.grad).all()
