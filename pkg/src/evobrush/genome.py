"""Genotypes and mutation operators.

A genotype bundles a variable-length input string (L row vectors of length
10) with one or more banks of LSTM parameters.  Everything evolves: the
string values, the string length, and the network weights.  All operators
are pure functions of (inputs, rng); genotypes are treated as immutable
values after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GENOME_DIM = 10

# Projection widths per role: a flat stroke bank emits full line descriptors,
# a hierarchical stroke bank additionally emits curve fields and a selector,
# and a top bank emits vectors shaped like input vectors.
FLAT_OUT_DIM = 16
HIER_OUT_DIM = 24
TOP_OUT_DIM = 10

INIT_L_MIN = 10
INIT_L_MAX = 100


class ConfigError(ValueError):
    """Raised for invalid generator or run configuration."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of the generative system a genotype is initialised for."""

    mode: str = "hierarchical"  # "flat" | "hierarchical"
    num_stroke_lstms: int = 5
    num_top_lstms: int = 2  # hierarchical mode only
    hidden_dim: int = 40
    s_max: int = 64  # max lines per stroke
    s1_max: int = 32  # max intermediate vectors per object (hierarchical)
    l_max: int = 200
    allow_background_evolution: bool = False

    def validate(self) -> None:
        problems = []
        if self.mode not in ("flat", "hierarchical"):
            problems.append(f"mode must be 'flat' or 'hierarchical', got {self.mode!r}")
        if self.num_stroke_lstms < 1:
            problems.append("num_stroke_lstms must be >= 1")
        if self.mode == "hierarchical" and self.num_top_lstms < 1:
            problems.append("num_top_lstms must be >= 1 in hierarchical mode")
        if self.hidden_dim < 1:
            problems.append("hidden_dim must be >= 1")
        if self.s_max < 1:
            problems.append("s_max must be >= 1")
        if self.s1_max < 1:
            problems.append("s1_max must be >= 1")
        if self.l_max < 1:
            problems.append("l_max must be >= 1")
        if problems:
            raise ConfigError(problems)


@dataclass
class LstmParams:
    """Parameters of one LSTM plus its output projection.

    ``gate_weights[g]`` is the weight matrix of gate g over the concatenated
    ``[input, hidden]`` vector (input columns first); gate order is input,
    forget, output, candidate.
    """

    gate_weights: np.ndarray  # (4, hidden, input_dim + hidden) float64
    gate_biases: np.ndarray  # (4, hidden) float64
    out_weights: np.ndarray  # (out_dim, hidden) float64
    out_bias: np.ndarray  # (out_dim,) float64

    @property
    def hidden_dim(self) -> int:
        return self.gate_weights.shape[1]

    @property
    def input_dim(self) -> int:
        return self.gate_weights.shape[2] - self.gate_weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.out_weights.shape[0]

    def validate(self) -> None:
        h = self.hidden_dim
        if self.gate_weights.shape != (4, h, self.input_dim + h):
            raise ValueError(f"bad gate_weights shape {self.gate_weights.shape}")
        if self.gate_biases.shape != (4, h):
            raise ValueError(f"bad gate_biases shape {self.gate_biases.shape}")
        if self.out_weights.shape != (self.out_dim, h):
            raise ValueError(f"bad out_weights shape {self.out_weights.shape}")
        if self.out_bias.shape != (self.out_dim,):
            raise ValueError(f"bad out_bias shape {self.out_bias.shape}")
        for arr in (self.gate_weights, self.gate_biases, self.out_weights, self.out_bias):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite LSTM parameter")

    def copy(self) -> "LstmParams":
        return LstmParams(
            self.gate_weights.copy(),
            self.gate_biases.copy(),
            self.out_weights.copy(),
            self.out_bias.copy(),
        )


@dataclass
class Genotype:
    """Unit of selection: input string, LSTM banks, optional background."""

    mode: str
    input_string: np.ndarray  # (L, GENOME_DIM) float64
    stroke_lstms: list[LstmParams]
    top_lstms: list[LstmParams] = field(default_factory=list)
    background: np.ndarray | None = None  # (3,) float64 in [0, 1]
    s_max: int = 64
    s1_max: int = 32
    l_max: int = 200

    @property
    def length(self) -> int:
        return self.input_string.shape[0]

    @property
    def num_stroke_lstms(self) -> int:
        return len(self.stroke_lstms)

    @property
    def num_top_lstms(self) -> int:
        return len(self.top_lstms)

    def validate(self) -> None:
        if self.mode not in ("flat", "hierarchical"):
            raise ValueError(f"bad mode {self.mode!r}")
        L = self.length
        if not (1 <= L <= self.l_max):
            raise ValueError(f"string length {L} outside [1, {self.l_max}]")
        if self.input_string.shape != (L, GENOME_DIM):
            raise ValueError(f"bad input string shape {self.input_string.shape}")
        if not np.all(np.isfinite(self.input_string)):
            raise ValueError("non-finite genome value")
        if not self.stroke_lstms:
            raise ValueError("at least one stroke LSTM required")
        want_out = FLAT_OUT_DIM if self.mode == "flat" else HIER_OUT_DIM
        want_in = GENOME_DIM
        for p in self.stroke_lstms:
            p.validate()
            if p.out_dim != want_out or p.input_dim != want_in:
                raise ValueError("stroke LSTM has wrong projection shape for mode")
        if self.mode == "hierarchical":
            if not self.top_lstms:
                raise ValueError("hierarchical mode requires top LSTMs")
            for p in self.top_lstms:
                p.validate()
                if p.out_dim != TOP_OUT_DIM or p.input_dim != GENOME_DIM:
                    raise ValueError("top LSTM has wrong projection shape")
        elif self.top_lstms:
            raise ValueError("flat mode must not carry top LSTMs")
        if self.background is not None:
            bg = np.asarray(self.background)
            if bg.shape != (3,) or not np.all(np.isfinite(bg)):
                raise ValueError("bad background")
            if bg.min() < 0.0 or bg.max() > 1.0:
                raise ValueError("background outside [0, 1]")

    def copy(self) -> "Genotype":
        return Genotype(
            mode=self.mode,
            input_string=self.input_string.copy(),
            stroke_lstms=[p.copy() for p in self.stroke_lstms],
            top_lstms=[p.copy() for p in self.top_lstms],
            background=None if self.background is None else self.background.copy(),
            s_max=self.s_max,
            s1_max=self.s1_max,
            l_max=self.l_max,
        )


@dataclass(frozen=True)
class MutationConfig:
    per_gene_rate: float = 0.05
    gaussian_sigma: float = 0.05
    cauchy_gamma: float = 0.05
    cauchy_mix: float = 0.2
    p_add_vector: float = 0.05
    p_remove_vector: float = 0.05
    p_weight_rate: float = 0.01
    sigma_weights: float = 0.02

    def validate(self) -> None:
        problems = []
        for name in ("per_gene_rate", "cauchy_mix", "p_add_vector", "p_remove_vector", "p_weight_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                problems.append(f"{name} must be in [0, 1], got {v}")
        for name in ("gaussian_sigma", "cauchy_gamma", "sigma_weights"):
            v = getattr(self, name)
            if not (v > 0.0):
                problems.append(f"{name} must be > 0, got {v}")
        if problems:
            raise ConfigError(problems)


def _random_lstm(rng: np.random.Generator, hidden_dim: int, out_dim: int) -> LstmParams:
    fan_in = GENOME_DIM + hidden_dim
    gw = rng.standard_normal((4, hidden_dim, fan_in)) / math.sqrt(fan_in)
    gb = np.zeros((4, hidden_dim))
    pw = rng.standard_normal((out_dim, hidden_dim)) / math.sqrt(hidden_dim)
    pb = np.zeros(out_dim)
    return LstmParams(gw, gb, pw, pb)


def init_random(config: GeneratorConfig, rng: np.random.Generator) -> Genotype:
    """Draw a fresh genotype: string length uniform in {10..100}, values N(0,1),
    weights N(0, 1/sqrt(fan_in)), biases zero."""
    config.validate()
    lo = min(INIT_L_MIN, config.l_max)
    hi = min(INIT_L_MAX, config.l_max)
    L = int(rng.integers(lo, hi + 1))
    input_string = rng.standard_normal((L, GENOME_DIM))
    stroke_out = FLAT_OUT_DIM if config.mode == "flat" else HIER_OUT_DIM
    stroke_lstms = [
        _random_lstm(rng, config.hidden_dim, stroke_out)
        for _ in range(config.num_stroke_lstms)
    ]
    top_lstms = []
    if config.mode == "hierarchical":
        top_lstms = [
            _random_lstm(rng, config.hidden_dim, TOP_OUT_DIM)
            for _ in range(config.num_top_lstms)
        ]
    background = None
    if config.allow_background_evolution:
        background = rng.uniform(0.0, 1.0, 3)
    g = Genotype(
        mode=config.mode,
        input_string=input_string,
        stroke_lstms=stroke_lstms,
        top_lstms=top_lstms,
        background=background,
        s_max=config.s_max,
        s1_max=config.s1_max,
        l_max=config.l_max,
    )
    g.validate()
    return g


def pack_params(g: Genotype) -> np.ndarray:
    """All LSTM parameters as one flat vector (stroke banks then top banks,
    each bank in field order).  Inverse of :func:`unpack_params`."""
    parts = []
    for p in list(g.stroke_lstms) + list(g.top_lstms):
        parts.extend([p.gate_weights.ravel(), p.gate_biases.ravel(), p.out_weights.ravel(), p.out_bias.ravel()])
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)


def unpack_params(vec: np.ndarray, template: Genotype) -> tuple[list[LstmParams], list[LstmParams]]:
    """Rebuild LSTM banks shaped like ``template``'s from a flat vector."""
    pos = 0

    def take(shape):
        nonlocal pos
        n = int(np.prod(shape))
        out = vec[pos : pos + n].reshape(shape).copy()
        pos += n
        return out

    def rebuild(banks):
        out = []
        for p in banks:
            out.append(
                LstmParams(
                    take(p.gate_weights.shape),
                    take(p.gate_biases.shape),
                    take(p.out_weights.shape),
                    take(p.out_bias.shape),
                )
            )
        return out

    stroke = rebuild(template.stroke_lstms)
    top = rebuild(template.top_lstms)
    if pos != vec.size:
        raise ValueError(f"parameter vector length {vec.size} != expected {pos}")
    return stroke, top


def _perturbation(rng: np.random.Generator, shape, sigma: float, gamma: float,
                  cauchy_mix: float, clamp: float) -> np.ndarray:
    """Mixed Gaussian/Cauchy perturbations; Cauchy tails clamped to +-clamp."""
    use_cauchy = rng.random(shape) < cauchy_mix
    gauss = rng.normal(0.0, sigma, shape)
    cauchy = np.clip(rng.standard_cauchy(shape) * gamma, -clamp, clamp)
    return np.where(use_cauchy, cauchy, gauss)


def mutate(parent: Genotype, mcfg: MutationConfig, rng: np.random.Generator) -> Genotype:
    """Return a mutated copy of ``parent`` (the parent is never modified).

    Genome values are perturbed elementwise at ``per_gene_rate``; LSTM
    parameters at ``p_weight_rate``.  The string may grow by one
    copied-then-perturbed vector or shrink by one vector, within [1, l_max].
    """
    mcfg.validate()
    # Cauchy tails are clamped at ten times their own scale: rare long jumps
    # survive, but the values stay finite for invariant checking.
    gene_clamp = 10.0 * mcfg.cauchy_gamma
    weight_clamp = 10.0 * mcfg.sigma_weights

    values = parent.input_string.copy()
    mask = rng.random(values.shape) < mcfg.per_gene_rate
    delta = _perturbation(rng, values.shape, mcfg.gaussian_sigma, mcfg.cauchy_gamma,
                          mcfg.cauchy_mix, gene_clamp)
    values = values + np.where(mask, delta, 0.0)

    flat = pack_params(parent)
    wmask = rng.random(flat.shape) < mcfg.p_weight_rate
    wdelta = _perturbation(rng, flat.shape, mcfg.sigma_weights, mcfg.sigma_weights,
                           mcfg.cauchy_mix, weight_clamp)
    flat = flat + np.where(wmask, wdelta, 0.0)
    stroke_lstms, top_lstms = unpack_params(flat, parent)

    background = None
    if parent.background is not None:
        background = parent.background.copy()
        bmask = rng.random(3) < mcfg.per_gene_rate
        bdelta = _perturbation(rng, (3,), mcfg.gaussian_sigma, mcfg.cauchy_gamma,
                               mcfg.cauchy_mix, gene_clamp)
        background = np.clip(background + np.where(bmask, bdelta, 0.0), 0.0, 1.0)

    # Structural growth: insert a copied-then-perturbed vector.
    do_add = rng.random() < mcfg.p_add_vector
    do_remove = rng.random() < mcfg.p_remove_vector
    L = values.shape[0]
    if do_add and L < parent.l_max:
        src = int(rng.integers(L))
        vec = values[src] + _perturbation(rng, (GENOME_DIM,), mcfg.gaussian_sigma,
                                          mcfg.cauchy_gamma, mcfg.cauchy_mix, gene_clamp)
        at = int(rng.integers(L + 1))
        values = np.insert(values, at, vec, axis=0)
        L += 1
    if do_remove and L > 1:
        at = int(rng.integers(L))
        values = np.delete(values, at, axis=0)

    child = Genotype(
        mode=parent.mode,
        input_string=values,
        stroke_lstms=stroke_lstms,
        top_lstms=top_lstms,
        background=background,
        s_max=parent.s_max,
        s1_max=parent.s1_max,
        l_max=parent.l_max,
    )
    child.validate()
    return child


def remove_element(g: Genotype, level: str, index: int) -> Genotype:
    """Excise one top-level vector; used by the pruning analyzer.

    ``level`` accepts "object" and, for flat mode where every top-level
    vector encodes exactly one stroke, "stroke-slot" as a synonym.
    """
    if level not in ("object", "stroke-slot"):
        raise ValueError(f"unknown level {level!r}")
    if level == "stroke-slot" and g.mode != "flat":
        raise ValueError("stroke slots are not genome-addressable in hierarchical mode")
    L = g.length
    if not (0 <= index < L):
        raise ValueError(f"index {index} out of range for length {L}")
    if L == 1:
        raise ValueError("cannot remove the last vector")
    out = g.copy()
    out.input_string = np.delete(out.input_string, index, axis=0)
    return out


def genotypes_equal(a: Genotype, b: Genotype) -> bool:
    """Bit-exact structural equality (useful in tests and conflict checks)."""
    if a.mode != b.mode or a.length != b.length:
        return False
    if (a.background is None) != (b.background is None):
        return False
    if a.background is not None and not np.array_equal(a.background, b.background):
        return False
    if not np.array_equal(a.input_string, b.input_string):
        return False
    if len(a.stroke_lstms) != len(b.stroke_lstms) or len(a.top_lstms) != len(b.top_lstms):
        return False
    return np.array_equal(pack_params(a), pack_params(b))
