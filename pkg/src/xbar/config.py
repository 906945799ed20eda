"""Run configuration: YAML schema, validation, presets wiring.

A run config is a small YAML document with five optional sections; every
field has a default so a bare `experiment:` line is a valid file. Unknown
keys fail validation (typos should not silently fall back to defaults).

    experiment: iris-train        # required (or given on the command line)
    seed: 0
    out_dir: results
    devices:
      preset: experimental_4x4    # experimental_4x4 | simulation_9x9 | ideal
      n: 4                        # array size for the ideal preset
      fabrication_sigma_nm: 0.0   # per-ring resonance spread
      random_mzi_phases: false    # sample MZI initial phases from the seed
    topology:
      variant: symmetric          # symmetric | legacy_asymmetric
    noise:
      enabled: false
      relative_sigma: 0.02
      time_average: 1
    training:
      backend: lut                # ideal | photonic | lut
      optimizer: sgd              # sgd | adam
      learning_rate: 0.5
      epochs: 100
      batch_size: 1
      loss: mse                   # mse | cross_entropy
      hidden: 4                   # MLP hidden width
      runs: 4                     # independent seeded trainings
    datasets:
      iris_csv: null              # null -> packaged copy
      mnist_dir: null             # directory holding the IDX files
      mnist_train: 10000
      mnist_test: 1000
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError

EXPERIMENTS = (
    "characterize-devices",
    "measure-matrix",
    "iris-inference",
    "iris-train",
    "mnist-train",
    "sweep-scaling",
)


def _from_mapping(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


@dataclass
class DeviceSection:
    preset: str = "experimental_4x4"
    n: int = 4
    fabrication_sigma_nm: float = 0.0
    random_mzi_phases: bool = False

    def validate(self):
        if self.preset not in ("experimental_4x4", "simulation_9x9", "ideal"):
            raise ConfigError(f"devices.preset: unknown preset {self.preset!r}")
        if self.n < 1:
            raise ConfigError("devices.n must be >= 1")
        if self.fabrication_sigma_nm < 0:
            raise ConfigError("devices.fabrication_sigma_nm must be >= 0")


@dataclass
class TopologySection:
    variant: str = "symmetric"

    def validate(self):
        if self.variant not in ("symmetric", "legacy_asymmetric"):
            raise ConfigError(f"topology.variant: unknown variant {self.variant!r}")


@dataclass
class NoiseSection:
    enabled: bool = False
    relative_sigma: float = 0.02
    time_average: int = 1

    def validate(self):
        if self.relative_sigma < 0:
            raise ConfigError("noise.relative_sigma must be >= 0")
        if self.time_average < 1:
            raise ConfigError("noise.time_average must be >= 1")


@dataclass
class TrainingSection:
    backend: str = "lut"
    optimizer: str = "sgd"
    learning_rate: float = 0.5
    epochs: int = 100
    batch_size: int = 1
    loss: str = "mse"
    hidden: int = 4
    runs: int = 4

    def validate(self):
        if self.backend not in ("ideal", "photonic", "lut"):
            raise ConfigError(f"training.backend: unknown backend {self.backend!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"training.optimizer: unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "cross_entropy"):
            raise ConfigError(f"training.loss: unknown loss {self.loss!r}")
        if self.learning_rate <= 0:
            raise ConfigError("training.learning_rate must be > 0")
        for name in ("epochs", "batch_size", "hidden", "runs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"training.{name} must be >= 1")


@dataclass
class DatasetSection:
    iris_csv: str | None = None
    mnist_dir: str | None = None
    mnist_train: int = 10000
    mnist_test: int = 1000

    def validate(self):
        if self.mnist_train < 1 or self.mnist_test < 1:
            raise ConfigError("datasets.mnist_train/mnist_test must be >= 1")


@dataclass
class RunConfig:
    experiment: str = ""
    seed: int = 0
    out_dir: str = "results"
    devices: DeviceSection = field(default_factory=DeviceSection)
    topology: TopologySection = field(default_factory=TopologySection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    datasets: DatasetSection = field(default_factory=DatasetSection)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment must be one of {', '.join(EXPERIMENTS)}; got {self.experiment!r}"
            )
        for section in (self.devices, self.topology, self.noise, self.training, self.datasets):
            section.validate()
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a mapping")
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        return cls(
            experiment=data.get("experiment", ""),
            seed=int(data.get("seed", 0)),
            out_dir=str(data.get("out_dir", "results")),
            devices=_from_mapping(DeviceSection, data.get("devices"), "devices"),
            topology=_from_mapping(TopologySection, data.get("topology"), "topology"),
            noise=_from_mapping(NoiseSection, data.get("noise"), "noise"),
            training=_from_mapping(TrainingSection, data.get("training"), "training"),
            datasets=_from_mapping(DatasetSection, data.get("datasets"), "datasets"),
        )

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()
