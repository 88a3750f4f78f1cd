"""Experiment configuration: one YAML file, validated, fingerprinted.

Experiments have ~25 knobs; a single nested config beats flag soup.  Every
section has defaults (the training hyperparameters default to the values
that worked for the studied quench: batch 4000, lr 1e-3, gamma 0.5), every
validation failure names the offending key, and the resolved config hashes
to a fingerprint that checkpoints carry so stale artifacts are rejected on
load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the bad key."""


@dataclass(frozen=True)
class ModelSection:
    l: int = 8
    J: float = 1.0
    Delta: float = -1.0
    h: float = 0.0
    periodic: bool = True


@dataclass(frozen=True)
class SectorSection:
    n_up: int | None = None  # default: half filling


@dataclass(frozen=True)
class QuenchSection:
    initial_configuration: str | None = None  # bit-string; default: domain wall


@dataclass(frozen=True)
class NetworkSection:
    dilations: tuple[int, ...] = (1, 1, 2)
    kernel: int = 2
    channels: int = 32
    complex_output: bool = False


@dataclass(frozen=True)
class DecompositionSection:
    components: int = 4
    states: int = 4
    lambda_margin: float = 0.0
    ansatz: str = "dense"  # "dense" | "autoregressive"
    network: NetworkSection = field(default_factory=NetworkSection)


@dataclass(frozen=True)
class TrainSection:
    iterations: int = 1000
    batch: int = 4000
    lr: float = 1e-3
    seed: int = 0
    checkpoint_every: int = 0
    mode: str = "auto"  # "auto" | "exact" | "sampled"


@dataclass(frozen=True)
class SamplerSection:
    gamma: float = 0.5
    weight_refresh: int = 50


@dataclass(frozen=True)
class BreakdownSection:
    depth: int = 1
    threshold: float = 0.0
    backend: str = "exact"  # "exact" | "trained"
    components_per_level: tuple[int, ...] | None = None


@dataclass(frozen=True)
class TimesSection:
    max: float = 5.0
    steps: int = 51


@dataclass(frozen=True)
class OutputSection:
    directory: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    sector: SectorSection = field(default_factory=SectorSection)
    quench: QuenchSection = field(default_factory=QuenchSection)
    decomposition: DecompositionSection = field(default_factory=DecompositionSection)
    train: TrainSection = field(default_factory=TrainSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    breakdown: BreakdownSection = field(default_factory=BreakdownSection)
    times: TimesSection = field(default_factory=TimesSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def n_up(self) -> int:
        return self.model.l // 2 if self.sector.n_up is None else self.sector.n_up

    def initial_bits(self) -> np.ndarray:
        s = self.quench.initial_configuration
        if s is None:
            # Domain wall: down spins left, up spins right.
            n_up = self.n_up
            s = "0" * (self.model.l - n_up) + "1" * n_up
        return np.array([int(ch) for ch in s], dtype=np.uint8)

    def resolved(self) -> dict:
        out = asdict(self)
        out["sector"]["n_up"] = self.n_up
        out["quench"]["initial_configuration"] = "".join(map(str, self.initial_bits()))
        out["decomposition"]["network"]["dilations"] = list(
            self.decomposition.network.dilations
        )
        if self.breakdown.components_per_level is not None:
            out["breakdown"]["components_per_level"] = list(self.breakdown.components_per_level)
        return out

    def fingerprint(self) -> str:
        """Hash of the sections that define the experiment's identity.

        Covers model, sector, quench and decomposition: everything a
        checkpoint's arrays depend on.  Schedule knobs (iteration budget,
        learning rate, time grid, output paths) stay out, so a run can be
        resumed with a larger budget or analyzed under a different time
        grid without being rejected as a different experiment.
        """
        resolved = self.resolved()
        identity = {k: resolved[k] for k in ("model", "sector", "quench", "decomposition")}
        return hashlib.sha256(
            json.dumps(identity, sort_keys=True).encode()
        ).hexdigest()[:16]


_SECTIONS = {
    "model": ModelSection,
    "sector": SectorSection,
    "quench": QuenchSection,
    "decomposition": DecompositionSection,
    "train": TrainSection,
    "sampler": SamplerSection,
    "breakdown": BreakdownSection,
    "times": TimesSection,
    "output": OutputSection,
}
_KEY_ALIASES = {"complex": "complex_output"}
_TUPLE_KEYS = {"dilations", "components_per_level"}


def _build_section(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    kwargs = {}
    for key, value in data.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in fields:
            raise ConfigError(f"{where}.{key}: unknown key")
        if name == "network":
            value = _build_section(NetworkSection, value, f"{where}.network")
        elif name in _TUPLE_KEYS and value is not None:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{where}.{key}: expected a list")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data: dict | None) -> ExperimentConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping of sections")
    sections = {}
    for key, value in data.items():
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown section")
        sections[key] = _build_section(_SECTIONS[key], value or {}, key)
    cfg = ExperimentConfig(**sections)
    validate_config(cfg)
    return cfg


def load_config(path: Path | str) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return parse_config(data)


def validate_config(cfg: ExperimentConfig) -> None:
    m = cfg.model
    if not isinstance(m.l, int) or m.l < 2:
        raise ConfigError("model.l: need an integer chain length >= 2")
    if not np.isfinite(m.J) or m.J == 0:
        raise ConfigError("model.J: must be finite and nonzero")
    if not (np.isfinite(m.Delta) and np.isfinite(m.h)):
        raise ConfigError("model.Delta / model.h: must be finite")
    n_up = cfg.n_up
    if not 0 <= n_up <= m.l:
        raise ConfigError(f"sector.n_up: {n_up} outside 0..{m.l}")
    if cfg.quench.initial_configuration is not None:
        if set(cfg.quench.initial_configuration) - {"0", "1"}:
            raise ConfigError("quench.initial_configuration: bit-string of 0/1 expected")
    bits = cfg.initial_bits()
    if len(bits) != m.l:
        raise ConfigError(
            f"quench.initial_configuration: length {len(bits)} != model.l {m.l}"
        )
    if int(bits.sum()) != n_up:
        raise ConfigError(
            f"quench.initial_configuration: {int(bits.sum())} up spins but sector.n_up is {n_up}"
        )

    d = cfg.decomposition
    if d.components < 1:
        raise ConfigError("decomposition.components: need >= 1")
    if d.states < 1:
        raise ConfigError("decomposition.states: need >= 1")
    if d.lambda_margin < 0:
        raise ConfigError("decomposition.lambda_margin: must be nonnegative")
    if d.ansatz not in ("dense", "autoregressive"):
        raise ConfigError(f"decomposition.ansatz: unknown family {d.ansatz!r}")
    if d.ansatz == "autoregressive":
        if m.l % 4 != 0:
            raise ConfigError("decomposition.ansatz: autoregressive family needs model.l divisible by 4")
        net = d.network
        if net.kernel < 1 or net.channels < 1 or len(net.dilations) < 1:
            raise ConfigError("decomposition.network: kernel, channels, dilations must be positive")
        if any(int(x) < 1 for x in net.dilations):
            raise ConfigError("decomposition.network.dilations: entries must be >= 1")
        if net.complex_output:
            raise ConfigError(
                "decomposition.network.complex: complex amplitudes are not implemented; "
                "the studied quench uses real wavefunctions"
            )

    t = cfg.train
    if t.iterations < 0:
        raise ConfigError("train.iterations: must be nonnegative")
    if t.batch < 1:
        raise ConfigError("train.batch: must be positive")
    if t.lr <= 0:
        raise ConfigError("train.lr: must be positive")
    if t.checkpoint_every < 0:
        raise ConfigError("train.checkpoint_every: must be nonnegative")
    if t.mode not in ("auto", "exact", "sampled"):
        raise ConfigError(f"train.mode: unknown mode {t.mode!r}")
    if t.mode == "sampled" and d.ansatz == "dense":
        raise ConfigError("train.mode: the dense family has no sampler; use exact mode")

    s = cfg.sampler
    if not 0 < s.gamma <= 1:
        raise ConfigError("sampler.gamma: softening exponent must lie in (0, 1]")
    if s.weight_refresh < 1:
        raise ConfigError("sampler.weight_refresh: must be >= 1")

    b = cfg.breakdown
    if b.depth < 0:
        raise ConfigError("breakdown.depth: must be nonnegative")
    if b.threshold < 0:
        raise ConfigError("breakdown.threshold: must be nonnegative")
    if b.backend not in ("exact", "trained"):
        raise ConfigError(f"breakdown.backend: unknown backend {b.backend!r}")
    if b.components_per_level is not None:
        if len(b.components_per_level) != b.depth + 1:
            raise ConfigError(
                "breakdown.components_per_level: need depth+1 entries "
                f"({b.depth + 1}), got {len(b.components_per_level)}"
            )
        if any(int(n) < 1 for n in b.components_per_level):
            raise ConfigError("breakdown.components_per_level: entries must be >= 1")

    if cfg.times.max <= 0:
        raise ConfigError("times.max: must be positive")
    if cfg.times.steps < 1:
        raise ConfigError("times.steps: must be >= 1")
