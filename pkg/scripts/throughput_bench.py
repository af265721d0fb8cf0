#!/usr/bin/env python3
"""Wall-time per 9-second scenario for each policy family, single thread.

Usage: python scripts/throughput_bench.py [--agents 64] [--repeat 5]
"""

import argparse
import time

import numpy as np

from lanesim import router
from lanesim import scenario as sc
from lanesim.diffusion import DiffusionPlanner, ModelConfig, NoiseSchedule, rollout_replan
from lanesim.engine import Engine, EngineConfig


def bench_policy(scn, policy, repeat, duration):
    times = []
    for rep in range(repeat):
        eng = Engine(
            scn, default_policy=policy, config=EngineConfig(spawn_gating=True), seed=rep
        )
        t0 = time.perf_counter()
        eng.run(duration)
        times.append(time.perf_counter() - t0)
    return times


def bench_diffusion(scn, planner, repeat, duration):
    times = []
    for rep in range(repeat):
        eng = Engine(
            scn,
            default_policy="traj_idm",
            config=EngineConfig(spawn_gating=True, check_offroad=False),
            seed=rep,
        )
        t0 = time.perf_counter()
        rollout_replan(eng, planner, duration=duration, replan_interval=1.0, seed=rep)
        times.append(time.perf_counter() - t0)
    return times


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--agents", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--duration", type=float, default=9.0)
    ap.add_argument("--with-diffusion", action="store_true")
    ap.add_argument("--checkpoint")
    args = ap.parse_args()

    scn = sc.generate_grid(3, 3, 150.0, 1, args.agents, seed=11)
    router.complete_routes(scn, target_speed=12.0)

    for policy in ("expert", "lane_idm"):
        times = bench_policy(scn, policy, args.repeat, args.duration)
        print(
            f"{policy:12s}: mean {np.mean(times):.3f} s/scenario "
            f"(min {min(times):.3f}, max {max(times):.3f}, n={len(times)})"
        )
    if args.with_diffusion:
        planner = (
            DiffusionPlanner.load(args.checkpoint)
            if args.checkpoint
            else DiffusionPlanner.fresh(ModelConfig(), NoiseSchedule(), seed=0)
        )
        times = bench_diffusion(scn, planner, max(args.repeat // 2, 1), args.duration)
        print(
            f"{'diffusion':12s}: mean {np.mean(times):.3f} s/scenario "
            f"(replan 1 s, n={len(times)})"
        )


if __name__ == "__main__":
    main()
