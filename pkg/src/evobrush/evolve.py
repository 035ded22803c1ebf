"""Asynchronous binary-tournament evolution over a fixed-size population.

Every tournament evaluates two freshly sampled genotypes and overwrites the
loser's slot with a mutated copy of the winner.  Slots carry version
counters; writes are compare-on-version, so concurrent workers can never
tear a slot and a stale write is simply discarded.  All randomness for
tournament t derives from (master_seed, t), which makes single-worker runs
bit-reproducible and lets a resumed run continue the stream exactly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from evobrush.critic import CriticScore, style_cost
from evobrush.generator import decode
from evobrush.genome import Genotype, MutationConfig, mutate
from evobrush.raster import Canvas, rasterize, random_projective_transform

_STYLE_MODES = {"off": "off", "fewer": "reward-fewer", "more": "reward-more"}


@dataclass(frozen=True)
class EvalConfig:
    augment_strength: float = 0.0
    augment_transforms: int = 1
    style_mode: str = "off"  # off | fewer | more
    style_weight: float = 0.0

    def validate(self) -> None:
        if not (0.0 <= self.augment_strength <= 1.0):
            raise ValueError(f"augment_strength must be in [0, 1], got {self.augment_strength}")
        if self.augment_transforms < 1:
            raise ValueError("augment_transforms must be >= 1")
        if self.style_mode not in _STYLE_MODES:
            raise ValueError(f"unknown style mode {self.style_mode!r}")
        if self.style_weight < 0:
            raise ValueError("style_weight must be >= 0")


def evaluate(
    g: Genotype,
    critic,
    eval_cfg: EvalConfig = EvalConfig(),
    rng: np.random.Generator | None = None,
) -> tuple[float, Canvas]:
    """Decode -> rasterize -> (optional projective warp) -> score.

    Returns the fitness and the untransformed image.
    """
    cmds = decode(g)
    w, h = critic.eval_size
    img = rasterize(cmds, w, h)
    background = (1.0, 1.0, 1.0) if cmds.background is None else tuple(cmds.background)
    if eval_cfg.augment_strength > 0.0:
        if rng is None:
            raise ValueError("augmentation requires an rng")
        total = 0.0
        k = eval_cfg.augment_transforms
        for _ in range(k):
            warped = random_projective_transform(img, eval_cfg.augment_strength, rng,
                                                 background=background)
            total += critic.score(warped).fitness
        fitness = total / k
    else:
        fitness = critic.score(img).fitness
    if eval_cfg.style_mode != "off":
        fitness += style_cost(cmds, _STYLE_MODES[eval_cfg.style_mode],
                              eval_cfg.style_weight, stroke_cap=g.l_max * g.s1_max)
    return fitness, img


class Population:
    """Fixed-size genotype store with versioned, lock-protected slots."""

    def __init__(self, genotypes: list[Genotype]):
        if len(genotypes) < 2:
            raise ValueError("population size must be >= 2")
        self._slots = list(genotypes)
        self._versions = [0] * len(genotypes)
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return len(self._slots)

    def snapshot(self, index: int) -> tuple[Genotype, int]:
        with self._lock:
            return self._slots[index], self._versions[index]

    def snapshot_pair(self, i: int, j: int):
        with self._lock:
            return (self._slots[i], self._versions[i], self._slots[j], self._versions[j])

    def try_replace(self, index: int, expected_version: int, genotype: Genotype) -> bool:
        """Write only if the slot is unchanged since it was snapshotted."""
        with self._lock:
            if self._versions[index] != expected_version:
                return False
            self._slots[index] = genotype
            self._versions[index] += 1
            return True

    def snapshot_all(self) -> list[Genotype]:
        with self._lock:
            return list(self._slots)


@dataclass
class TournamentResult:
    winner_slot: int
    loser_slot: int
    winner_fitness: float
    loser_fitness: float
    tournament_index: int
    replaced: bool = True


@dataclass
class RunStats:
    """Best-so-far tracking; safe to update from many workers."""

    tournaments_done: int = 0
    best_fitness: float = float("-inf")
    best_genotype: Genotype | None = None
    history: list[tuple[int, float]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def observe(self, result: TournamentResult, winner: Genotype) -> bool:
        """Count one tournament; record and report a strict improvement."""
        with self._lock:
            self.tournaments_done += 1
            if result.winner_fitness > self.best_fitness:
                self.best_fitness = result.winner_fitness
                self.best_genotype = winner
                self.history.append((result.tournament_index, result.winner_fitness))
                return True
            return False

    def state_dict(self) -> dict:
        with self._lock:
            return {
                "tournaments_done": self.tournaments_done,
                "best_fitness": self.best_fitness,
                "history": [[int(t), float(f)] for t, f in self.history],
            }

    @staticmethod
    def from_state(state: dict, best_genotype: Genotype | None) -> "RunStats":
        stats = RunStats(
            tournaments_done=int(state["tournaments_done"]),
            best_fitness=float(state["best_fitness"]),
            best_genotype=best_genotype,
            history=[(int(t), float(f)) for t, f in state["history"]],
        )
        return stats


def tournament_rng(master_seed: int, index: int) -> np.random.Generator:
    """Random stream for tournament ``index``; derivation depends only on
    (seed, index), never on worker identity."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, 1, index))))


def init_rng(master_seed: int, slot: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, 0, slot))))


def run_tournament(
    pop: Population,
    critic,
    mcfg: MutationConfig,
    rng: np.random.Generator,
    eval_cfg: EvalConfig = EvalConfig(),
    tournament_index: int = 0,
    observer=None,
) -> TournamentResult:
    """One binary tournament: evaluate two distinct slots, overwrite the loser.

    Ties go to the first-sampled slot.  If the loser's slot changed while we
    were evaluating, the write is discarded and the tournament is a no-op.
    """
    p = pop.size
    i = int(rng.integers(p))
    j = int(rng.integers(p - 1))
    if j >= i:
        j += 1
    gi, vi, gj, vj = pop.snapshot_pair(i, j)
    fi, img_i = evaluate(gi, critic, eval_cfg, rng)
    fj, img_j = evaluate(gj, critic, eval_cfg, rng)
    if fi >= fj:
        winner_slot, loser_slot = i, j
        winner, winner_fitness, loser_fitness = gi, fi, fj
        winner_img, loser_version = img_i, vj
    else:
        winner_slot, loser_slot = j, i
        winner, winner_fitness, loser_fitness = gj, fj, fi
        winner_img, loser_version = img_j, vi
    mutant = mutate(winner, mcfg, rng)
    replaced = pop.try_replace(loser_slot, loser_version, mutant)
    result = TournamentResult(
        winner_slot=winner_slot,
        loser_slot=loser_slot,
        winner_fitness=winner_fitness,
        loser_fitness=loser_fitness,
        tournament_index=tournament_index,
        replaced=replaced,
    )
    if observer is not None:
        observer(result, winner, winner_img)
    return result


def run_tournaments(
    pop: Population,
    critic,
    mcfg: MutationConfig,
    master_seed: int,
    start_index: int,
    count: int,
    workers: int = 1,
    eval_cfg: EvalConfig = EvalConfig(),
    stats: RunStats | None = None,
    on_improvement=None,
    on_tournament=None,
    stop_event: threading.Event | None = None,
) -> RunStats:
    """Drive ``count`` tournaments across ``workers`` threads.

    ``on_improvement(result, genotype, image)`` fires on strict best-fitness
    improvements; ``on_tournament(result)`` after every tournament.  Both run
    under the issuing worker, serialized by the stats lock where they touch
    shared state.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    stats = stats if stats is not None else RunStats()
    counter = iter(range(start_index, start_index + count))
    counter_lock = threading.Lock()
    errors: list[BaseException] = []

    def observer(result: TournamentResult, winner: Genotype, image: Canvas):
        improved = stats.observe(result, winner)
        if improved and on_improvement is not None:
            on_improvement(result, winner, image)
        if on_tournament is not None:
            on_tournament(result)

    def work():
        try:
            while True:
                if stop_event is not None and stop_event.is_set():
                    return
                with counter_lock:
                    t = next(counter, None)
                if t is None:
                    return
                rng = tournament_rng(master_seed, t)
                run_tournament(pop, critic, mcfg, rng, eval_cfg, t, observer)
        except BaseException as exc:  # propagate to the caller
            errors.append(exc)
            if stop_event is not None:
                stop_event.set()

    if workers == 1:
        work()
    else:
        threads = [threading.Thread(target=work, name=f"tournament-worker-{k}")
                   for k in range(workers)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    if errors:
        raise errors[0]
    return stats


def run_evolution(cfg, critic, resume: dict | None = None,
                  stop_event: threading.Event | None = None,
                  progress=None) -> RunStats:
    """Full evolution run driven by a RunConfig.

    Dumps a frame image on every strict best-fitness improvement, writes a
    checkpoint every ``checkpoint_every`` tournaments and once at the end
    (also when halting on an error or a stop request).  Pass the mapping
    returned by ``checkpoint.load_checkpoint`` as ``resume`` to continue an
    interrupted run; the per-tournament seed derivation picks up exactly
    where it left off.
    """
    import pathlib

    from evobrush.checkpoint import config_hash, save_checkpoint
    from evobrush.genome import init_random

    cfg.validate()
    out = pathlib.Path(cfg.output_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    config_dict = cfg.to_dict()

    if resume is None:
        genotypes = [
            init_random(cfg.generator_config(), init_rng(cfg.seed, i))
            for i in range(cfg.population)
        ]
        pop = Population(genotypes)
        stats = RunStats()
        start = 0
    else:
        if resume["config_hash"] != config_hash(config_dict):
            raise ValueError("checkpoint was written by a different configuration")
        pop = Population(resume["genotypes"])
        stats = RunStats.from_state(resume["stats"], resume["best_genotype"])
        start = int(resume["next_tournament"])

    remaining = cfg.tournaments - start
    eval_cfg = EvalConfig(
        augment_strength=cfg.augment_strength,
        augment_transforms=cfg.augment_transforms,
        style_mode=cfg.style_mode,
        style_weight=cfg.style_weight,
    )
    ckpt_lock = threading.Lock()

    def write_checkpoint():
        with ckpt_lock:
            save_checkpoint(
                out / "checkpoint.npz",
                config_dict=config_dict,
                master_seed=cfg.seed,
                next_tournament=stats.tournaments_done,
                genotypes=pop.snapshot_all(),
                stats_state=stats.state_dict(),
                best_genotype=stats.best_genotype,
            )

    def on_improvement(result: TournamentResult, winner: Genotype, image: Canvas):
        image.save_png(frames_dir / f"{result.tournament_index:06d}.png")

    def on_tournament(result: TournamentResult):
        if (result.tournament_index + 1) % cfg.checkpoint_every == 0:
            write_checkpoint()
        if progress is not None:
            progress(result)

    if remaining > 0:
        try:
            run_tournaments(
                pop, critic, cfg.mutation, cfg.seed, start, remaining,
                workers=cfg.workers, eval_cfg=eval_cfg, stats=stats,
                on_improvement=on_improvement, on_tournament=on_tournament,
                stop_event=stop_event,
            )
        finally:
            write_checkpoint()
    else:
        write_checkpoint()
    return stats


def prune_importance(
    g: Genotype,
    critic,
    top_k: int,
    eval_cfg: EvalConfig = EvalConfig(),
) -> list[tuple[int, float]]:
    """Leave-one-out importance of each top-level element.

    Returns up to ``top_k`` (element index, fitness drop) pairs sorted by
    descending drop, ties broken by lower index.  Requires a deterministic
    fitness, so augmentation must be off.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if eval_cfg.augment_strength > 0.0:
        raise ValueError("pruning analysis requires augmentation to be disabled")
    if g.length <= 1:
        return []
    from evobrush.genome import remove_element

    baseline, _ = evaluate(g, critic, eval_cfg)
    drops = []
    for idx in range(g.length):
        pruned = remove_element(g, "object", idx)
        fit, _ = evaluate(pruned, critic, eval_cfg)
        drops.append((idx, baseline - fit))
    drops.sort(key=lambda pair: (-pair[1], pair[0]))
    return drops[:top_k]
