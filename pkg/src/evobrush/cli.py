"""Command-line front door: run evolution, re-render genotypes, prune marks."""

from __future__ import annotations

import argparse
import csv
import signal
import sys
import threading
from pathlib import Path

import evobrush
from evobrush.checkpoint import CheckpointFormatError, load_checkpoint, load_genotype, save_genotype
from evobrush.config import ConfigError, RunConfig, load_config
from evobrush.critic import ExternalCritic, HistogramCritic, TargetImageCritic
from evobrush.evolve import EvalConfig, prune_importance, run_evolution
from evobrush.generator import decode
from evobrush.raster import Canvas, rasterize


def build_critic(cfg: RunConfig):
    if cfg.critic == "external":
        return ExternalCritic(cfg.endpoint, cfg.prompt, resolution=cfg.eval_resolution)
    target = Canvas.from_png(cfg.target)
    if (target.width, target.height) != (cfg.eval_resolution, cfg.eval_resolution):
        target = target.resized(cfg.eval_resolution, cfg.eval_resolution)
    if cfg.critic == "histogram":
        return HistogramCritic(target)
    return TargetImageCritic(target)


def _config_overrides(args) -> dict:
    overrides = {
        "prompt": args.prompt,
        "critic": args.critic,
        "target": args.target,
        "endpoint": args.endpoint,
        "tournaments": args.tournaments,
        "population": args.population,
        "workers": args.workers,
        "seed": args.seed,
        "mode": args.mode,
        "augment_strength": args.augment_strength,
        "output_dir": args.out,
        "checkpoint_every": args.checkpoint_every,
        "eval_resolution": args.eval_resolution,
    }
    return {k: v for k, v in overrides.items() if v is not None}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML config file; flags override file values")
    p.add_argument("--prompt", help="text prompt for the external critic")
    p.add_argument("--critic", choices=["target", "histogram", "external"])
    p.add_argument("--target", help="target image path for the built-in critics")
    p.add_argument("--endpoint", help="scoring service address for the external critic")
    p.add_argument("--tournaments", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["flat", "hierarchical"])
    p.add_argument("--augment-strength", type=float, dest="augment_strength")
    p.add_argument("--out", help="output directory")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--eval-resolution", type=int, dest="eval_resolution")


def _load_effective_config(args) -> RunConfig:
    return load_config(args.config, _config_overrides(args))


def cmd_run(args) -> int:
    try:
        cfg = _load_effective_config(args)
    except ConfigError as exc:
        for problem in exc.violations:
            print(f"config error: {problem}", file=sys.stderr)
        return 2

    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"output directory {out} is not writable: {exc}", file=sys.stderr)
        return 2

    from evobrush.config import echo_config

    echo_config(cfg, out / "effective_config.yaml", extra={"code_version": evobrush.__version__})

    resume = None
    if args.resume:
        try:
            resume = load_checkpoint(args.resume)
        except CheckpointFormatError as exc:
            print(f"cannot resume: {exc}", file=sys.stderr)
            return 2

    try:
        critic = build_critic(cfg)
    except (OSError, ValueError) as exc:
        print(f"cannot build critic: {exc}", file=sys.stderr)
        return 2

    stop_event = threading.Event()
    previous = {}

    def request_stop(signum, frame):
        print("stop requested; writing checkpoint...", file=sys.stderr)
        stop_event.set()

    for sig in (signal.SIGINT, signal.SIGTERM):
        previous[sig] = signal.signal(sig, request_stop)

    step = max(1, cfg.tournaments // 20)

    def progress(result):
        if (result.tournament_index + 1) % step == 0:
            print(
                f"tournament {result.tournament_index + 1}/{cfg.tournaments}"
                f"  winner fitness {result.winner_fitness:+.4f}"
            )

    try:
        stats = run_evolution(cfg, critic, resume=resume, stop_event=stop_event,
                              progress=progress)
    except Exception as exc:
        print(f"run halted: {exc}", file=sys.stderr)
        return 1
    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)

    with open(out / "stats.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tournament_index", "best_fitness"])
        for t, fit in stats.history:
            writer.writerow([t, f"{fit:.17g}"])

    from evobrush.report import save_fitness_curve

    save_fitness_curve(stats.history, out / "fitness_curve.png")

    if stats.best_genotype is not None:
        w, h = critic.eval_size
        rasterize(decode(stats.best_genotype), w, h).save_png(out / "best.png")
        save_genotype(out / "best_genotype.npz", stats.best_genotype)

    if stop_event.is_set() and stats.tournaments_done < cfg.tournaments:
        print(f"stopped after {stats.tournaments_done} tournaments; checkpoint written")
        return 1
    print(f"completed {stats.tournaments_done} tournaments; best fitness {stats.best_fitness:+.4f}")
    return 0


def cmd_render(args) -> int:
    if args.resolution < 1:
        print(f"resolution must be >= 1, got {args.resolution}", file=sys.stderr)
        return 2
    try:
        genotype = load_genotype(args.genotype)
    except CheckpointFormatError as exc:
        print(f"cannot read genotype: {exc}", file=sys.stderr)
        return 2
    canvas = rasterize(decode(genotype), args.resolution, args.resolution)
    out = args.out or (Path(args.genotype).stem + f"_{args.resolution}.png")
    canvas.save_png(out)
    print(f"wrote {out}")
    return 0


def cmd_prune(args) -> int:
    try:
        cfg = _load_effective_config(args)
    except ConfigError as exc:
        for problem in exc.violations:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    if cfg.augment_strength > 0.0:
        print(
            "pruning needs a deterministic fitness; disable projective "
            "augmentation (augment_strength 0) and rerun",
            file=sys.stderr,
        )
        return 2
    try:
        genotype = load_genotype(args.genotype)
    except CheckpointFormatError as exc:
        print(f"cannot read genotype: {exc}", file=sys.stderr)
        return 2
    try:
        critic = build_critic(cfg)
    except (OSError, ValueError) as exc:
        print(f"cannot build critic: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ranking = prune_importance(genotype, critic, args.top_k, EvalConfig(
        style_mode=cfg.style_mode, style_weight=cfg.style_weight))

    with open(out / "prune.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["element_id", "fitness_drop"])
        for element_id, drop in ranking:
            writer.writerow([element_id, f"{drop:.17g}"])

    from evobrush.report import save_prune_figure

    w, _ = critic.eval_size
    save_prune_figure(decode(genotype), ranking, w, out / "prune_report.png")
    print(f"wrote {out / 'prune.csv'} ({len(ranking)} elements) and {out / 'prune_report.png'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evobrush",
        description="Evolve stroke paintings against an image critic.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an evolution loop")
    _add_config_flags(p_run)
    p_run.add_argument("--resume", help="checkpoint file to continue from")
    p_run.set_defaults(func=cmd_run)

    p_render = sub.add_parser("render", help="re-render a genotype at any resolution")
    p_render.add_argument("genotype", help="genotype file (.npz)")
    p_render.add_argument("--resolution", type=int, required=True)
    p_render.add_argument("--out", help="output PNG path")
    p_render.set_defaults(func=cmd_render)

    p_prune = sub.add_parser("prune", help="rank marks by leave-one-out fitness drop")
    p_prune.add_argument("genotype", help="genotype file (.npz)")
    _add_config_flags(p_prune)
    p_prune.add_argument("--top-k", type=int, default=10, dest="top_k")
    p_prune.set_defaults(func=cmd_prune)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
