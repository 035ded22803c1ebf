from __future__ import annotations

import numpy as np
import pytest

from conftest import make_rng, small_flat_config, small_hier_config

from evobrush.checkpoint import (
    CheckpointFormatError,
    config_hash,
    load_checkpoint,
    load_genotype,
    save_checkpoint,
    save_genotype,
)
from evobrush.genome import GeneratorConfig, genotypes_equal, init_random


def test_genotype_roundtrip(tmp_path):
    for cfg, seed in ((small_flat_config(), 1), (small_hier_config(), 2),
                      (GeneratorConfig(allow_background_evolution=True), 3)):
        g = init_random(cfg, make_rng(seed))
        path = tmp_path / f"g{seed}.npz"
        save_genotype(path, g)
        back = load_genotype(path)
        assert genotypes_equal(g, back)
        assert (back.s_max, back.s1_max, back.l_max) == (g.s_max, g.s1_max, g.l_max)


def test_corrupt_file_reports_format_error(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"this is not a zip archive at all")
    with pytest.raises(CheckpointFormatError):
        load_genotype(path)


def test_wrong_kind_rejected(tmp_path):
    g = init_random(small_flat_config(), make_rng(5))
    gpath = tmp_path / "g.npz"
    save_genotype(gpath, g)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(gpath)


def test_truncated_archive_reports_error(tmp_path):
    g = init_random(small_flat_config(), make_rng(7))
    path = tmp_path / "g.npz"
    save_genotype(path, g)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointFormatError):
        load_genotype(path)


def test_checkpoint_roundtrip(tmp_path):
    cfg = small_hier_config()
    genotypes = [init_random(cfg, make_rng(i)) for i in range(4)]
    stats = {"tournaments_done": 17, "best_fitness": 0.25, "history": [[0, 0.1], [9, 0.25]]}
    path = tmp_path / "ckpt.npz"
    save_checkpoint(
        path,
        config_dict={"population": 4, "seed": 9},
        master_seed=9,
        next_tournament=17,
        genotypes=genotypes,
        stats_state=stats,
        best_genotype=genotypes[2],
    )
    back = load_checkpoint(path)
    assert back["master_seed"] == 9
    assert back["next_tournament"] == 17
    assert back["stats"] == stats
    assert back["config_hash"] == config_hash({"population": 4, "seed": 9})
    assert len(back["genotypes"]) == 4
    for orig, re in zip(genotypes, back["genotypes"]):
        assert genotypes_equal(orig, re)
    assert genotypes_equal(back["best_genotype"], genotypes[2])


def test_config_hash_stable_and_sensitive():
    a = {"seed": 1, "population": 8}
    b = {"population": 8, "seed": 1}
    c = {"seed": 2, "population": 8}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
