"""Operator command line: generate, route, simulate, train-planner,
evaluate, bench. Every subcommand validates inputs before side effects and
is reproducible under a fixed seed."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import router
from . import scenario as sc
from .engine import Engine, EngineConfig
from .records import RolloutRecord
from .runconfig import ConfigError, RunConfig, load_run_config

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    try:
        scenario = sc.generate_grid(
            args.rows, args.cols, args.block_len, args.lanes, args.agents, args.seed
        )
    except ValueError as e:
        return _fail(str(e), EXIT_VALIDATION)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sc.save(scenario, out)
    print(f"wrote {out} ({len(scenario.map.lanes)} lanes, {len(scenario.agents)} agents)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# route


def cmd_route(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        return _fail(f"scenario file not found: {path}", EXIT_VALIDATION)
    try:
        scenario = sc.load(path)
    except sc.ParseError as e:
        return _fail(str(e), EXIT_VALIDATION)
    agent_ids = [int(a) for a in args.agents.split(",")] if args.agents else None
    try:
        done = router.complete_routes(
            scenario, target_speed=args.target_speed, agent_ids=agent_ids
        )
    except router.NoPath as e:
        return _fail(str(e), EXIT_RUNTIME)
    out = path if args.in_place else Path(args.out or path.with_suffix(".routed.lcs.json"))
    sc.save(scenario, out)
    print(f"completed {len(done)} routes -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _build_engine(scenario, cfg: RunConfig, seed: int) -> Engine:
    from .policies import IDMParams, MobilParams, make_policy

    idm = IDMParams(**cfg.idm) if cfg.idm else None
    mobil = MobilParams(**cfg.mobil) if cfg.mobil else None
    shared = {}

    def policy_for(name):
        if name not in shared:
            shared[name] = make_policy(name, idm=idm, mobil=mobil)
        return shared[name]

    assignment = {aid: policy_for(name) for aid, name in cfg.policy_overrides.items()}
    engine_cfg = EngineConfig(
        collision_mode=cfg.collision_mode,
        spawn_gating=cfg.spawn_gating,
    )
    return Engine(
        scenario,
        assignment=assignment,
        default_policy=cfg.policy,
        config=engine_cfg,
        seed=seed,
        map_index=None,
    )


def _simulate_one(scenario_path: Path, cfg: RunConfig, seed: int, out_dir: Path, planner):
    from .render import render_world

    scenario = sc.load(scenario_path)
    if cfg.tick is not None:
        scenario.tick = cfg.tick
    engine = _build_engine(scenario, cfg, seed)
    engine.start_recording()
    frames_dir = out_dir / "frames"
    if cfg.render:
        frames_dir.mkdir(parents=True, exist_ok=True)
    steps = int(round(cfg.duration / scenario.tick))
    every = max(int(round(cfg.replan_interval / scenario.tick)), 1)
    guide = None
    if cfg.guide:
        from .diffusion import GuideSpec

        guide = GuideSpec.from_dict(cfg.guide)
    generations = 0
    t0 = time.perf_counter()
    for k in range(steps):
        if planner is not None and k % every == 0:
            engine.activate_departures()
            targets = engine.world.active_ids()
            if targets:
                plans = planner.plan_for_world(
                    engine, agent_ids=targets, guide=guide, seed=seed * 1_000_003 + generations
                )
                for aid, plan in plans.items():
                    engine.assign_plan(aid, plan)
                generations += 1
        engine.step()
        if cfg.render and k % cfg.render_every == 0:
            render_world(engine, frames_dir / f"frame_{k:05d}.svg")
    wall = time.perf_counter() - t0
    record = engine.finish_recording()
    return engine, record, wall


def cmd_simulate(args) -> int:
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        base = Path(args.config).resolve().parent
        paths = cfg.scenario_paths(base)
    except ConfigError as e:
        return _fail(str(e), EXIT_VALIDATION)
    out_dir = Path(cfg.out_dir)
    if not out_dir.is_absolute():
        out_dir = base / out_dir
    (out_dir / "records").mkdir(parents=True, exist_ok=True)
    planner = None
    if cfg.planner_checkpoint:
        from .diffusion import DiffusionPlanner

        ckpt = Path(cfg.planner_checkpoint)
        if not ckpt.is_absolute():
            ckpt = base / ckpt
        if not ckpt.exists():
            return _fail(f"planner checkpoint not found: {ckpt}", EXIT_VALIDATION)
        planner = DiffusionPlanner.load(ckpt)
    jobs = max(int(cfg.jobs), 1)
    tasks = [(path, cfg.seed + rep) for path in paths for rep in range(cfg.repeat)]
    try:
        for path in paths:
            sc.save(sc.load(path), out_dir / "scenario.lcs.json")
        if jobs > 1 and planner is None and len(tasks) > 1:
            import concurrent.futures as cf

            with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    pool.submit(_simulate_task, str(path), cfg, seed, str(out_dir)): (path, seed)
                    for path, seed in tasks
                }
                for fut in cf.as_completed(futures):
                    print(fut.result())
        else:
            if jobs > 1 and planner is not None:
                print("note: planner checkpoints run single-process; ignoring --jobs")
            for path, seed in tasks:
                engine, record, wall = _simulate_one(path, cfg, seed, out_dir, planner)
                name = f"{path.stem.split('.')[0]}_seed{seed}"
                record.save(out_dir / "records" / f"{name}.npz")
                (out_dir / "events.ndjson").write_text(engine.world.events_ndjson())
                print(
                    f"{name}: {record.n_steps - 1} steps, {len(record.events)} events,"
                    f" hash {record.content_hash()[:12]}, {wall:.3f}s"
                )
    except Exception as e:  # noqa: BLE001 - CLI boundary
        return _fail(f"simulation failed: {e}", EXIT_RUNTIME)
    return EXIT_OK


def _simulate_task(path: str, cfg: RunConfig, seed: int, out_dir: str) -> str:
    """Worker for --jobs fan-out; one independent rollout per call."""
    p, out = Path(path), Path(out_dir)
    engine, record, wall = _simulate_one(p, cfg, seed, out, None)
    name = f"{p.stem.split('.')[0]}_seed{seed}"
    record.save(out / "records" / f"{name}.npz")
    (out / "events.ndjson").write_text(engine.world.events_ndjson())
    return (
        f"{name}: {record.n_steps - 1} steps, {len(record.events)} events,"
        f" hash {record.content_hash()[:12]}, {wall:.3f}s"
    )


# ---------------------------------------------------------------------------
# train-planner


def cmd_train_planner(args) -> int:
    from .diffusion import (
        DiffusionPlanner,
        ModelConfig,
        NoiseSchedule,
        TrainConfig,
        make_straight_corpus,
        train,
    )
    from .diffusion.model import build_denoiser
    from .diffusion.train import corpus_norm_stats, scenes_from_scenario

    model_cfg = ModelConfig()
    schedule = NoiseSchedule()
    train_cfg = TrainConfig(steps=args.steps, seed=args.seed)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            return _fail(f"bad planner config: {e}", EXIT_VALIDATION)
        if "model" in doc:
            model_cfg = ModelConfig.from_dict({**model_cfg.to_dict(), **doc["model"]})
        if "schedule" in doc:
            schedule = NoiseSchedule.from_dict({**schedule.to_dict(), **doc["schedule"]})
        for key in ("steps", "batch_size", "lr", "weight_decay", "sigma_weighting"):
            if key in doc.get("training", {}):
                setattr(train_cfg, key, doc["training"][key])

    if args.synthetic:
        scenes, stats = make_straight_corpus(args.synthetic, model_cfg, seed=args.seed)
    else:
        corpus = Path(args.corpus)
        files = sorted(corpus.glob("*.lcs.json"))
        if not files:
            return _fail(f"no .lcs.json scenarios under {corpus}", EXIT_VALIDATION)
        scenes = []
        for f in files:
            scenes.extend(scenes_from_scenario(sc.load(f), model_cfg))
        if not scenes:
            return _fail("corpus produced no training windows (routes too short?)", EXIT_VALIDATION)
        stats = corpus_norm_stats(scenes)
    print(f"training on {len(scenes)} windows, {train_cfg.steps} steps")
    model = build_denoiser(model_cfg, schedule.sigma_data, seed=args.seed)
    loss_path = Path(args.out).with_suffix(".losses.ndjson")
    loss_path.parent.mkdir(parents=True, exist_ok=True)
    with open(loss_path, "w") as fh:
        result = train(
            model,
            scenes,
            schedule,
            stats,
            train_cfg,
            loss_callback=lambda step, loss: fh.write(
                json.dumps({"step": step, "loss": loss}) + "\n"
            ),
        )
    if result.diverged:
        print(f"warning: training diverged at step {result.steps_run}; kept last snapshot")
    DiffusionPlanner(model, schedule, stats).save(args.out)
    first = np.mean(result.losses[:20]) if result.losses else float("nan")
    last = np.mean(result.losses[-20:]) if result.losses else float("nan")
    print(f"wrote {args.out} (loss {first:.4f} -> {last:.4f})")
    return EXIT_OK if not result.diverged else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    records = []
    if args.records:
        rec_dir = Path(args.records)
        files = sorted(rec_dir.glob("*.npz"))
        if not files:
            return _fail(f"no records under {rec_dir}", EXIT_VALIDATION)
        records = [RolloutRecord.load(f) for f in files]
        out_dir = rec_dir.parent
    else:
        try:
            cfg = load_run_config(args.config)
            base = Path(args.config).resolve().parent
            paths = cfg.scenario_paths(base)
        except ConfigError as e:
            return _fail(str(e), EXIT_VALIDATION)
        cfg.repeat = max(cfg.repeat, args.repeat)
        out_dir = Path(cfg.out_dir)
        if not out_dir.is_absolute():
            out_dir = base / out_dir
        (out_dir / "records").mkdir(parents=True, exist_ok=True)
        planner = None
        if cfg.planner_checkpoint:
            from .diffusion import DiffusionPlanner

            ckpt = Path(cfg.planner_checkpoint)
            planner = DiffusionPlanner.load(ckpt if ckpt.is_absolute() else base / ckpt)
        for path in paths:
            for rep in range(cfg.repeat):
                _, record, _ = _simulate_one(path, cfg, cfg.seed + rep, out_dir, planner)
                records.append(record)
    report = metrics_mod.build_report(records, arrival_threshold=args.arrival_threshold)
    out = out_dir / "report.json"
    out.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    if args.plots:
        from .render import render_histogram

        plot_dir = Path(args.plots)
        plot_dir.mkdir(parents=True, exist_ok=True)
        for name, payload in report["style_histograms"].items():
            render_histogram(
                payload["bin_edges"],
                payload["mass"],
                plot_dir / f"{name}.svg",
                title=f"{name} (n={payload['n']})",
            )
    rates = report["violation_rates"]
    print(
        f"report -> {out}\n"
        f"collision: {rates['collision_pct']['mean']:.2f}% ± {rates['collision_pct']['stderr']:.2f}\n"
        f"offroad:   {rates['offroad_pct']['mean']:.2f}% ± {rates['offroad_pct']['stderr']:.2f}\n"
        f"arrival within {args.arrival_threshold:.0f}s: "
        f"{100 * report['arrival_time']['fraction_within']:.1f}%"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    try:
        cfg = load_run_config(args.config)
        base = Path(args.config).resolve().parent
        paths = cfg.scenario_paths(base)
    except ConfigError as e:
        return _fail(str(e), EXIT_VALIDATION)
    times = []
    for path in paths:
        scenario = sc.load(path)
        for rep in range(max(cfg.repeat, args.repeat)):
            engine = _build_engine(scenario, cfg, cfg.seed + rep)
            t0 = time.perf_counter()
            engine.run(cfg.duration)
            dt = time.perf_counter() - t0
            times.append(dt)
            print(f"{path.name} rep {rep}: {dt:.3f} s")
    mean = float(np.mean(times))
    print(f"mean wall time per scenario: {mean:.3f} s over {len(times)} runs")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lanesim",
        description="controllable microscopic traffic simulation",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a synthetic signalized-grid scenario")
    g.add_argument("--rows", type=int, default=2)
    g.add_argument("--cols", type=int, default=2)
    g.add_argument("--block-len", type=float, default=150.0)
    g.add_argument("--lanes", type=int, default=1)
    g.add_argument("--agents", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("route", help="complete OD waypoints into reference routes")
    r.add_argument("scenario")
    r.add_argument("--agents", help="comma-separated agent ids (default: all)")
    r.add_argument("--target-speed", type=float, default=12.0)
    r.add_argument("--in-place", action="store_true")
    r.add_argument("--out")
    r.set_defaults(func=cmd_route)

    s = sub.add_parser("simulate", help="run rollouts from a run config")
    s.add_argument("config")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train-planner", help="desk-scale diffusion planner training")
    t.add_argument("--corpus", help="directory of .lcs.json scenarios with routes")
    t.add_argument("--synthetic", type=int, default=0, help="train on N synthetic scenes")
    t.add_argument("--config", help="model/schedule/training JSON")
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train_planner)

    e = sub.add_parser("evaluate", help="metrics report from records or fresh runs")
    e.add_argument("--records", help="directory of rollout .npz files")
    e.add_argument("--config", help="run config to simulate first")
    e.add_argument("--repeat", type=int, default=1)
    e.add_argument("--arrival-threshold", type=float, default=20.0)
    e.add_argument("--plots", help="emit SVG histograms into this directory")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="wall-time per scenario")
    b.add_argument("config")
    b.add_argument("--repeat", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train-planner" and not (args.corpus or args.synthetic):
        return _fail("train-planner needs --corpus or --synthetic", EXIT_VALIDATION)
    if args.command == "evaluate" and not (args.records or args.config):
        return _fail("evaluate needs --records or --config", EXIT_VALIDATION)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
