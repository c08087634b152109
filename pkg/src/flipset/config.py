"""Run configuration: one JSON-serializable description of dataset,
featurization, hyperparameters, and search settings, shared by the CLI
and the HTTP service. Round-trips losslessly through its file form.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional, Tuple

from .data import DatasetSplit
from .errors import ConfigError
from .ingest import (BowConfig, featurize_bow, load_corpus, load_embeddings,
                     make_synthetic, resolve_corpus_path)
from .ioutil import read_json, write_json
from .model import Hyperparams
from .search import DEFAULT_MAX_PASSES, GREEDY, ITERATIVE

DATASET_KINDS = ("corpus", "embeddings", "synthetic")
FEATURE_KINDS = {"corpus": "bow", "embeddings": "embedding", "synthetic": "synthetic"}


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic"
    path: Optional[str] = None
    format: Optional[str] = None
    seed: int = 0
    n_train: int = 1000
    n_test: int = 200
    dim: int = 10
    class_separation: float = 2.0
    noise_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}, got {self.kind!r}")
        if self.kind in ("corpus", "embeddings") and not self.path:
            raise ConfigError(f"dataset.kind={self.kind!r} requires dataset.path")
        if self.format is not None and self.format not in ("csv", "jsonl"):
            raise ConfigError(f"dataset.format must be 'csv' or 'jsonl', got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    bow: BowConfig = field(default_factory=BowConfig)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    algorithm: str = ITERATIVE
    max_passes: int = DEFAULT_MAX_PASSES
    seed: int = 0
    parallelism: int = 1
    out_dir: str = "runs/out"

    def __post_init__(self):
        if self.algorithm not in (GREEDY, ITERATIVE):
            raise ConfigError(f"algorithm must be '{GREEDY}' or '{ITERATIVE}', got {self.algorithm!r}")
        if self.max_passes < 1:
            raise ConfigError("max_passes must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    @property
    def feature_kind(self) -> str:
        return FEATURE_KINDS[self.dataset.kind]

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            dataset = _build(DatasetConfig, raw.get("dataset", {}), "dataset")
            bow = _build(BowConfig, raw.get("bow", {}), "bow")
            hyper = _build(Hyperparams, raw.get("hyper", {}), "hyper")
            return cls(dataset=dataset, bow=bow, hyper=hyper,
                       **{k: raw[k] for k in raw if k not in ("dataset", "bow", "hyper")})
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = read_json(path)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid json ({exc})") from exc
        return cls.from_dict(raw)

    def write(self, path) -> None:
        write_json(path, self.to_dict())

    def validate_paths(self) -> None:
        """Referenced paths must exist before a run starts."""
        if self.dataset.kind == "corpus":
            p = resolve_corpus_path(self.dataset.path)
            if not p.exists():
                raise ConfigError(f"dataset path does not exist: {p}")
        elif self.dataset.kind == "embeddings":
            p = Path(self.dataset.path)
            if not (p / "train.emb").exists() or not (p / "test.emb").exists():
                raise ConfigError(f"embeddings directory must hold train.emb and test.emb: {p}")


def _build(cls, raw: Dict, where: str):
    if isinstance(raw, cls):
        return raw
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} config: {exc}") from exc


def load_dataset(config: RunConfig) -> Tuple[DatasetSplit, DatasetSplit, Optional[Dict]]:
    """Materialize (train_split, test_split, vocab manifest or None) for a config."""
    ds = config.dataset
    if ds.kind == "corpus":
        train_records, test_records = load_corpus(ds.path, ds.format)
        return featurize_bow(train_records, test_records, config.bow)
    if ds.kind == "embeddings":
        train_split, test_split = load_embeddings(ds.path)
        return train_split, test_split, None
    train_split, test_split = make_synthetic(ds.seed, ds.n_train, ds.n_test, ds.dim,
                                             ds.class_separation, ds.noise_rate)
    return train_split, test_split, None
