from __future__ import annotations

import math

import numpy as np
import pytest

from evobrush.genome import (
    FLAT_OUT_DIM,
    GENOME_DIM,
    GeneratorConfig,
    Genotype,
    LstmParams,
    _random_lstm,
)


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def random_lstm(rng, hidden_dim: int, out_dim: int, input_dim: int = GENOME_DIM) -> LstmParams:
    fan_in = input_dim + hidden_dim
    return LstmParams(
        rng.standard_normal((4, hidden_dim, fan_in)),
        rng.standard_normal((4, hidden_dim)) * 0.1,
        rng.standard_normal((out_dim, hidden_dim)),
        rng.standard_normal(out_dim) * 0.1,
    )


def bias_only_lstm(out_bias, hidden_dim: int = 2) -> LstmParams:
    """Zero weights, so the projection bias fully determines every output."""
    out_bias = np.asarray(out_bias, dtype=np.float64)
    return LstmParams(
        np.zeros((4, hidden_dim, GENOME_DIM + hidden_dim)),
        np.zeros((4, hidden_dim)),
        np.zeros((out_bias.size, hidden_dim)),
        out_bias.copy(),
    )


def flat_genotype(input_string, banks, s_max: int = 64, l_max: int = 200) -> Genotype:
    g = Genotype(
        mode="flat",
        input_string=np.asarray(input_string, dtype=np.float64),
        stroke_lstms=list(banks),
        s_max=s_max,
        l_max=l_max,
    )
    g.validate()
    return g


def small_flat_config(**kw) -> GeneratorConfig:
    base = dict(mode="flat", num_stroke_lstms=2, hidden_dim=6, s_max=8)
    base.update(kw)
    return GeneratorConfig(**base)


def small_hier_config(**kw) -> GeneratorConfig:
    base = dict(mode="hierarchical", num_stroke_lstms=2, num_top_lstms=2,
                hidden_dim=6, s_max=6, s1_max=4)
    base.update(kw)
    return GeneratorConfig(**base)


@pytest.fixture
def rng():
    return make_rng(12345)


__all__ = [
    "FLAT_OUT_DIM",
    "bias_only_lstm",
    "flat_genotype",
    "logit",
    "make_rng",
    "random_lstm",
    "small_flat_config",
    "small_hier_config",
    "_random_lstm",
]
