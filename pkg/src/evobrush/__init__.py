"""Evolutionary stroke painting: recurrent grammar genotypes scored by image critics.

A genotype is an evolved input string plus the weights of a small bank of
LSTMs.  Decoding a genotype yields a list of stroke draw commands, which a
deterministic rasterizer turns into an RGB canvas.  A critic maps the canvas
to a scalar fitness, and an asynchronous binary-tournament loop evolves the
population toward higher fitness.
"""

from evobrush.genome import (
    GeneratorConfig,
    Genotype,
    LstmParams,
    MutationConfig,
    init_random,
    mutate,
    remove_element,
)
from evobrush.generator import DrawCommandList, decode
from evobrush.raster import Canvas, rasterize
from evobrush.critic import (
    CriticScore,
    ExternalCritic,
    HistogramCritic,
    TargetImageCritic,
    cosine_similarity,
)
from evobrush.evolve import EvalConfig, Population, RunStats, run_evolution

__version__ = "0.1.0"

__all__ = [
    "Canvas",
    "CriticScore",
    "DrawCommandList",
    "EvalConfig",
    "ExternalCritic",
    "GeneratorConfig",
    "Genotype",
    "HistogramCritic",
    "LstmParams",
    "MutationConfig",
    "Population",
    "RunStats",
    "TargetImageCritic",
    "cosine_similarity",
    "decode",
    "init_random",
    "mutate",
    "rasterize",
    "remove_element",
    "run_evolution",
    "__version__",
]
