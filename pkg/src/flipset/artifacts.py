"""On-disk model artifacts: weights, hyperparameters, featurized splits,
vocabulary manifest, and test metrics, all in deterministic formats so a
rerun of the same config reproduces byte-identical files.

Sparse matrices are stored as separate .npy arrays (data/indices/indptr)
because np.savez archives embed timestamps.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from .config import RunConfig, load_dataset
from .data import TEST, TRAIN, DatasetSplit
from .errors import DataError
from .ioutil import atomic_write_bytes, read_json, write_json
from .metrics import summarize
from .model import Hyperparams, TrainedModel, train

MODEL_FILE = "model.json"
THETA_FILE = "theta.npy"
VOCAB_FILE = "vocab.json"


@dataclass(frozen=True)
class ModelBundle:
    """A trained model together with the data it was trained on."""

    model: TrainedModel
    train_split: DatasetSplit
    test_split: DatasetSplit
    manifest: Optional[Dict]
    metrics: Dict[str, float]
    config: RunConfig


def train_from_config(config: RunConfig) -> ModelBundle:
    train_split, test_split, manifest = load_dataset(config)
    model = train(train_split, config.hyper)
    if test_split.n:
        metrics = summarize(test_split.y, model.probabilities(test_split.X), config.hyper.tau)
    else:
        metrics = {"accuracy": None, "f1": None, "auc": None}
    return ModelBundle(model=model, train_split=train_split, test_split=test_split,
                       manifest=manifest, metrics=metrics, config=config)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, arr)
    return buf.getvalue()


def _save_array(path: Path, arr: np.ndarray) -> None:
    atomic_write_bytes(path, _npy_bytes(arr))


def _save_matrix(dir_path: Path, name: str, X) -> Dict:
    if sp.issparse(X):
        X = X.tocsr()
        _save_array(dir_path / f"{name}_data.npy", X.data)
        _save_array(dir_path / f"{name}_indices.npy", X.indices)
        _save_array(dir_path / f"{name}_indptr.npy", X.indptr)
        return {"format": "csr", "shape": list(X.shape)}
    _save_array(dir_path / f"{name}.npy", np.asarray(X))
    return {"format": "dense", "shape": list(X.shape)}


def _load_matrix(dir_path: Path, name: str, meta: Dict):
    if meta["format"] == "csr":
        data = np.load(dir_path / f"{name}_data.npy")
        indices = np.load(dir_path / f"{name}_indices.npy")
        indptr = np.load(dir_path / f"{name}_indptr.npy")
        return sp.csr_matrix((data, indices, indptr), shape=tuple(meta["shape"]))
    return np.load(dir_path / f"{name}.npy")


def _save_split(dir_path: Path, name: str, split: DatasetSplit) -> Dict:
    meta = _save_matrix(dir_path, f"{name}_X", split.X)
    _save_array(dir_path / f"{name}_y.npy", split.y)
    meta["has_texts"] = split.texts is not None
    if split.texts is not None:
        payload = json.dumps(list(split.texts), sort_keys=True) + "\n"
        atomic_write_bytes(dir_path / f"{name}_texts.json", payload.encode("utf-8"))
    return meta


def _load_split(dir_path: Path, name: str, kind: str, meta: Dict) -> DatasetSplit:
    X = _load_matrix(dir_path, f"{name}_X", meta)
    y = np.load(dir_path / f"{name}_y.npy")
    texts = None
    if meta.get("has_texts"):
        with open(dir_path / f"{name}_texts.json", encoding="utf-8") as fh:
            texts = tuple(json.load(fh))
    return DatasetSplit(X=X, y=y, kind=kind, texts=texts)


def save_bundle(dir_path, bundle: ModelBundle) -> None:
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    _save_array(dir_path / THETA_FILE, bundle.model.theta)
    if bundle.manifest is not None:
        write_json(dir_path / VOCAB_FILE, bundle.manifest)
    train_meta = _save_split(dir_path, "train", bundle.train_split)
    test_meta = _save_split(dir_path, "test", bundle.test_split)
    model_doc = {
        "hyper": {
            "lam": bundle.model.hyper.lam,
            "tau": bundle.model.hyper.tau,
            "newton_tol": bundle.model.hyper.newton_tol,
            "newton_max_iter": bundle.model.hyper.newton_max_iter,
            "solver_tol": bundle.model.hyper.solver_tol,
        },
        "final_grad_norm": bundle.model.final_grad_norm,
        "iterations": bundle.model.iterations,
        "dimension": bundle.model.dimension,
        "feature_kind": bundle.config.feature_kind,
        "metrics": bundle.metrics,
        "config": bundle.config.to_dict(),
        "theta_file": THETA_FILE,
        "vocab_file": VOCAB_FILE if bundle.manifest is not None else None,
        "splits": {"train": train_meta, "test": test_meta},
        "n_train": bundle.train_split.n,
        "n_test": bundle.test_split.n,
    }
    write_json(dir_path / MODEL_FILE, model_doc)


def load_bundle(dir_path) -> ModelBundle:
    dir_path = Path(dir_path)
    doc_path = dir_path / MODEL_FILE
    if not doc_path.exists():
        raise DataError(f"no model artifact at {dir_path}")
    doc = read_json(doc_path)
    hyper = Hyperparams(**doc["hyper"])
    theta = np.load(dir_path / doc["theta_file"])
    model = TrainedModel(theta=theta, hyper=hyper,
                         final_grad_norm=doc["final_grad_norm"],
                         iterations=doc["iterations"])
    manifest = read_json(dir_path / doc["vocab_file"]) if doc.get("vocab_file") else None
    train_split = _load_split(dir_path, "train", TRAIN, doc["splits"]["train"])
    test_split = _load_split(dir_path, "test", TEST, doc["splits"]["test"])
    config = RunConfig.from_dict(doc["config"])
    return ModelBundle(model=model, train_split=train_split, test_split=test_split,
                       manifest=manifest, metrics=doc["metrics"], config=config)
