"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List

from .errors import ParseError


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Later keys win."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        out[key] = value.strip()
    return out


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> List[int]:
    return [int(t) for t in text.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    scenario: str = "counterexample"
    space: str = "euclidean:1"
    family: str = "thresholds"
    distribution: str = "atoms -1:1:0.5 1:0:0.5"
    r: float = 0.9
    gamma: float = 0.1
    gammas: List[float] = field(default_factory=lambda: [0.1, 0.25, 0.5])
    sample_sizes: List[int] = field(default_factory=lambda: [200])
    replicates: int = 100
    seed: int = 0
    mode: str = "exact"
    vote_budget: int = 1000
    out: str = ""
    # learner comparison
    learners: List[str] = field(default_factory=lambda: ["tpas", "compression", "robust_erm"])
    trend_z: float = 2.326
    # bound tables
    zeta_d: List[float] = field(default_factory=lambda: [1.0, 2.0, 5.0])
    epsilons: List[float] = field(default_factory=lambda: [0.1, 0.05, 0.01])
    delta: float = 0.05
    vc: int = 1
    # verification suite sizes
    mass_instances: int = 1000
    finite_instances: int = 100
    corpus_size: int = 50
    epsnet_instances: int = 200

    def __post_init__(self):
        if self.replicates < 1:
            raise ParseError("replicates must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in kinds:
                raise ParseError(f"unknown config key {key!r}")
            default = kinds[key].default
            if kinds[key].default_factory is not dataclasses.MISSING:
                default = kinds[key].default_factory()
            try:
                if isinstance(default, list):
                    if key == "learners":
                        kwargs[key] = [t for t in value.replace(",", " ").split()]
                    elif default and isinstance(default[0], int):
                        kwargs[key] = _ints(value)
                    else:
                        kwargs[key] = _floats(value)
                elif isinstance(default, bool):
                    kwargs[key] = value.lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    kwargs[key] = int(value)
                elif isinstance(default, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
            except ValueError as exc:
                raise ParseError(f"bad value for {key!r}: {value!r} ({exc})") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(parse_config_text(fh.read()))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(parse_config_text(text))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in kw.items() if v is not None})
