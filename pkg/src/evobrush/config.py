"""Run configuration: YAML file + flag overrides, validated as a whole."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import yaml

from evobrush.genome import ConfigError, GeneratorConfig, MutationConfig


@dataclass
class RunConfig:
    critic: str = "target"  # target | histogram | external
    prompt: str | None = None
    target: str | None = None  # path to a target PNG for the built-in critics
    endpoint: str | None = None
    tournaments: int = 100_000
    population: int = 100
    workers: int = 8
    seed: int = 0
    mode: str = "hierarchical"
    num_stroke_lstms: int = 5
    num_top_lstms: int = 2
    hidden_dim: int = 40
    s_max: int = 64
    s1_max: int = 32
    l_max: int = 200
    augment_strength: float = 0.0
    augment_transforms: int = 1
    style_mode: str = "off"  # off | fewer | more
    style_weight: float = 0.0
    allow_background_evolution: bool = False
    output_dir: str = "runs/out"
    checkpoint_every: int = 1000
    eval_resolution: int = 224
    export_resolution: int = 896
    mutation: MutationConfig = field(default_factory=MutationConfig)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            mode=self.mode,
            num_stroke_lstms=self.num_stroke_lstms,
            num_top_lstms=self.num_top_lstms,
            hidden_dim=self.hidden_dim,
            s_max=self.s_max,
            s1_max=self.s1_max,
            l_max=self.l_max,
            allow_background_evolution=self.allow_background_evolution,
        )

    def violations(self) -> list[str]:
        problems = []
        if self.critic not in ("target", "histogram", "external"):
            problems.append(f"critic must be target|histogram|external, got {self.critic!r}")
        if self.critic == "external":
            if not self.endpoint:
                problems.append("critic 'external' requires an endpoint")
            if not self.prompt:
                problems.append("critic 'external' requires a prompt")
        else:
            if not self.target:
                problems.append(f"critic {self.critic!r} requires a target image path")
        if self.tournaments < 1:
            problems.append(f"tournaments must be >= 1, got {self.tournaments}")
        if self.population < 2:
            problems.append(f"population must be >= 2, got {self.population}")
        if self.workers < 1:
            problems.append(f"workers must be >= 1, got {self.workers}")
        if not (0.0 <= self.augment_strength <= 1.0):
            problems.append(f"augment_strength must be in [0, 1], got {self.augment_strength}")
        if self.augment_transforms < 1:
            problems.append("augment_transforms must be >= 1")
        if self.style_mode not in ("off", "fewer", "more"):
            problems.append(f"style_mode must be off|fewer|more, got {self.style_mode!r}")
        if self.style_weight < 0:
            problems.append("style_weight must be >= 0")
        if self.checkpoint_every < 1:
            problems.append("checkpoint_every must be >= 1")
        if self.eval_resolution < 1:
            problems.append("eval_resolution must be >= 1")
        if self.export_resolution < 1:
            problems.append("export_resolution must be >= 1")
        try:
            self.generator_config().validate()
        except ConfigError as exc:
            problems.extend(exc.violations)
        try:
            self.mutation.validate()
        except ConfigError as exc:
            problems.extend(exc.violations)
        return problems

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out


_SCALAR_FIELDS = {f.name: f.type for f in fields(RunConfig) if f.name != "mutation"}
_MUTATION_FIELDS = {f.name for f in fields(MutationConfig)}
_INT_FIELDS = {
    "tournaments", "population", "workers", "seed", "num_stroke_lstms",
    "num_top_lstms", "hidden_dim", "s_max", "s1_max", "l_max",
    "augment_transforms", "checkpoint_every", "eval_resolution",
    "export_resolution",
}
_FLOAT_FIELDS = {"augment_strength", "style_weight"}
_BOOL_FIELDS = {"allow_background_evolution"}


def _coerce(name: str, value, problems: list[str]):
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{name} must be an integer, got {value!r}")
            return None
        return value
    if name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{name} must be a number, got {value!r}")
            return None
        return float(value)
    if name in _BOOL_FIELDS:
        if not isinstance(value, bool):
            problems.append(f"{name} must be a boolean, got {value!r}")
            return None
        return value
    if value is not None and not isinstance(value, str):
        problems.append(f"{name} must be a string, got {value!r}")
        return None
    return value


def config_from_mapping(data: dict, overrides: dict | None = None) -> RunConfig:
    """Build a config from a parsed file mapping plus typed flag overrides.

    Every unknown key, type error and cross-field violation is collected and
    reported in one ConfigError.
    """
    problems: list[str] = []
    values: dict = {}
    mutation_values: dict = {}
    for key, value in (data or {}).items():
        if key == "mutation":
            if not isinstance(value, dict):
                problems.append("mutation must be a mapping")
                continue
            for mkey, mval in value.items():
                if mkey not in _MUTATION_FIELDS:
                    problems.append(f"unknown mutation key {mkey!r}")
                elif isinstance(mval, bool) or not isinstance(mval, (int, float)):
                    problems.append(f"mutation.{mkey} must be a number, got {mval!r}")
                else:
                    mutation_values[mkey] = float(mval)
        elif key not in _SCALAR_FIELDS:
            problems.append(f"unknown config key {key!r}")
        else:
            coerced = _coerce(key, value, problems)
            if coerced is not None or value is None:
                values[key] = coerced
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "mutation":
            mutation_values.update(value)
        else:
            values[key] = value
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(mutation=MutationConfig(**mutation_values), **values)
    cfg.validate()
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Parse a YAML config file (flags in ``overrides`` win) and validate."""
    data = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError([f"{path}: config root must be a mapping"])
    return config_from_mapping(data, overrides)


def echo_config(cfg: RunConfig, path, extra: dict | None = None) -> None:
    """Write the effective configuration next to the run outputs."""
    payload = cfg.to_dict()
    if extra:
        payload = {**extra, **payload}
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(payload, f, sort_keys=False)
