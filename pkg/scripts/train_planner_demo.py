#!/usr/bin/env python3
"""Desk-scale planner training on the synthetic straight-road corpus, with a
before/after best-of-6 displacement-error comparison.

Usage: python scripts/train_planner_demo.py [--scenes 500] [--steps 400]
"""

import argparse
import time

import numpy as np

from lanesim.diffusion import (
    DiffusionPlanner,
    ModelConfig,
    NoiseSchedule,
    TrainConfig,
    evaluate_min_ade,
    make_straight_corpus,
    train,
)
from lanesim.diffusion.model import build_denoiser


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenes", type=int, default=500)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--eval-scenes", type=int, default=20)
    ap.add_argument("--out", default="planner.npz")
    args = ap.parse_args()

    cfg = ModelConfig()
    schedule = NoiseSchedule()
    t0 = time.time()
    scenes, stats = make_straight_corpus(args.scenes, cfg, seed=args.seed)
    print(f"built {len(scenes)} scenes in {time.time() - t0:.1f}s")

    model = build_denoiser(cfg, schedule.sigma_data, seed=0)
    ade0 = evaluate_min_ade(model, scenes, schedule, stats, k=6, max_scenes=args.eval_scenes)
    print(f"untrained minADE: {ade0:.2f} m")

    t0 = time.time()
    result = train(
        model,
        scenes,
        schedule,
        stats,
        TrainConfig(steps=args.steps, batch_size=args.batch_size, seed=0),
    )
    l0, l1 = np.mean(result.losses[:20]), np.mean(result.losses[-20:])
    print(
        f"trained {result.steps_run} steps in {time.time() - t0:.0f}s, "
        f"loss {l0:.4f} -> {l1:.4f} ({100 * (1 - l1 / l0):.0f}% drop)"
    )

    ade1 = evaluate_min_ade(model, scenes, schedule, stats, k=6, max_scenes=args.eval_scenes)
    print(f"trained minADE: {ade1:.2f} m ({100 * (1 - ade1 / ade0):.0f}% better)")

    DiffusionPlanner(model, schedule, stats).save(args.out)
    print(f"checkpoint -> {args.out}")


if __name__ == "__main__":
    main()
