"""Experiment sweeps: flipset search + exact verification over a test set,
and the attribution removal sweep, with resumable on-disk reports.

Report files: one JSON-lines record per test point (resumable), a
deterministic summary JSON (timing deliberately lives in a separate
timing.json so reruns are byte-identical), and CSV exports feeding the
k-histogram and k-vs-confidence charts.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import DatasetSplit
from .errors import DegenerateRemainderError, FlipsetError, InputError
from .influence import METHODS, attribution, sweep_order
from .ioutil import atomic_write_text, read_jsonl, write_json, write_jsonl
from .model import Hyperparams, TrainedModel, hessian_operator, train
from .search import (FLIPPED, GREEDY, ITERATIVE, DEFAULT_MAX_PASSES,
                     FlipsetResult, greedy_flipset, iterative_flipset)
from .verification import retrain_without, verify_flip

RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.json"
TIMING_FILE = "timing.json"
K_HIST_FILE = "k_histogram.csv"
K_CONF_FILE = "k_vs_confidence.csv"
SWEEP_FILE = "attribution_sweep.csv"


@dataclass(frozen=True)
class PointRecord:
    """Everything persisted about one test point's search + verification."""

    test_index: int
    original_prob: float
    original_label: int
    found: bool
    k: int
    members: Tuple[int, ...]
    estimated_prob: float
    outer_passes: int
    verified: Optional[str]
    retrained_prob: Optional[float]
    error: Optional[str]

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["members"] = list(self.members)
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "PointRecord":
        return cls(test_index=int(d["test_index"]), original_prob=float(d["original_prob"]),
                   original_label=int(d["original_label"]), found=bool(d["found"]),
                   k=int(d["k"]), members=tuple(int(i) for i in d["members"]),
                   estimated_prob=float(d["estimated_prob"]),
                   outer_passes=int(d["outer_passes"]), verified=d.get("verified"),
                   retrained_prob=d.get("retrained_prob"), error=d.get("error"))


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregate sweep outcome (rates over ALL test points, k stats over found)."""

    dataset_name: str
    feature_kind: str
    algorithm: str
    n_test: int
    found_rate: float
    flip_rate: float
    flip_rate_given_found: Optional[float]
    k_values: Tuple[int, ...]
    k_vs_confidence: Tuple[Tuple[int, float], ...]
    mean_outer_passes: Optional[float]
    wall_time_seconds: float

    @property
    def n_found(self) -> int:
        return len(self.k_values)


@dataclass(frozen=True)
class AttributionSweepReport:
    """Mean |retrained prediction shift| per method over a shared k grid."""

    k_grid: Tuple[int, ...]
    curves: Dict[str, Tuple[float, ...]]
    n_test: int


def _search_point(model: TrainedModel, train_split: DatasetSplit, x_t,
                  algorithm: str, max_passes: int, test_index: int, op) -> FlipsetResult:
    if algorithm == GREEDY:
        return greedy_flipset(model, train_split, x_t, test_index=test_index, op=op)
    if algorithm == ITERATIVE:
        return iterative_flipset(model, train_split, x_t, max_passes=max_passes,
                                 test_index=test_index, op=op)
    raise InputError(f"algorithm must be '{GREEDY}' or '{ITERATIVE}', got {algorithm!r}")


def flipset_point_record(model: TrainedModel, train_split: DatasetSplit,
                         test_split: DatasetSplit, test_index: int, algorithm: str,
                         max_passes: int = DEFAULT_MAX_PASSES, op=None) -> PointRecord:
    """Search + verify one test point, capturing failures instead of raising."""
    x_t = test_split.feature_row(test_index)
    try:
        result = _search_point(model, train_split, x_t, algorithm, max_passes, test_index, op)
        if result.found:
            result = verify_flip(result, train_split, x_t, model.hyper)
        return PointRecord(test_index=test_index, original_prob=result.original_prob,
                           original_label=result.original_label, found=result.found,
                           k=result.k, members=result.members,
                           estimated_prob=result.estimated_prob,
                           outer_passes=result.outer_passes, verified=result.verified,
                           retrained_prob=result.retrained_prob, error=None)
    except FlipsetError as exc:
        p0 = model.predict_proba(x_t)
        return PointRecord(test_index=test_index, original_prob=p0,
                           original_label=int(p0 > model.hyper.tau), found=False, k=0,
                           members=(), estimated_prob=p0, outer_passes=0,
                           verified=None, retrained_prob=None,
                           error=f"{type(exc).__name__}: {exc}")


def aggregate(records: Sequence[PointRecord], *, dataset_name: str, feature_kind: str,
              algorithm: str, wall_time_seconds: float = 0.0) -> ExperimentReport:
    """Pure reduction of point records into an ExperimentReport (idempotent)."""
    n_test = len(records)
    found = [r for r in records if r.found]
    flipped = [r for r in found if r.verified == FLIPPED]
    passes = [r.outer_passes for r in records if r.error is None and r.outer_passes > 0]
    return ExperimentReport(
        dataset_name=dataset_name, feature_kind=feature_kind, algorithm=algorithm,
        n_test=n_test,
        found_rate=len(found) / n_test if n_test else 0.0,
        flip_rate=len(flipped) / n_test if n_test else 0.0,
        flip_rate_given_found=len(flipped) / len(found) if found else None,
        k_values=tuple(r.k for r in found),
        k_vs_confidence=tuple((r.k, abs(r.original_prob - 0.5)) for r in found),
        mean_outer_passes=float(np.mean(passes)) if passes else None,
        wall_time_seconds=wall_time_seconds)


def run_experiment(train_split: DatasetSplit, test_split: DatasetSplit,
                   hyper: Hyperparams, algorithm: str, *, dataset_name: str,
                   feature_kind: str, max_passes: int = DEFAULT_MAX_PASSES,
                   parallelism: int = 1, out_dir=None,
                   model: Optional[TrainedModel] = None) -> ExperimentReport:
    """Run the chosen search over every test point, verifying every found set.

    Per-point failures are recorded on the point, never abort the sweep.
    With ``out_dir`` set, existing records are reused (resume) and report
    files are rewritten atomically.
    """
    started = time.perf_counter()
    model = train(train_split, hyper) if model is None else model
    op = hessian_operator(model, train_split)
    op.solve(np.ones(model.dimension))  # warm the factorization before fan-out

    done: Dict[int, PointRecord] = {}
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None and (out_path / RECORDS_FILE).exists():
        for row in read_jsonl(out_path / RECORDS_FILE):
            rec = PointRecord.from_dict(row)
            done[rec.test_index] = rec

    todo = [t for t in range(test_split.n) if t not in done]

    def work(t: int) -> PointRecord:
        return flipset_point_record(model, train_split, test_split, t, algorithm,
                                    max_passes=max_passes, op=op)

    if parallelism > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for rec in pool.map(work, todo):
                done[rec.test_index] = rec
    else:
        for t in todo:
            done[t] = work(t)

    records = [done[t] for t in sorted(done)]
    wall = time.perf_counter() - started
    report = aggregate(records, dataset_name=dataset_name, feature_kind=feature_kind,
                       algorithm=algorithm, wall_time_seconds=wall)
    if out_path is not None:
        write_report(report, records, out_path)
    return report


def summary_dict(report: ExperimentReport) -> Dict:
    """Deterministic summary payload (timing excluded by design)."""
    ks = np.array(report.k_values, dtype=np.int64)
    return {
        "dataset_name": report.dataset_name,
        "feature_kind": report.feature_kind,
        "algorithm": report.algorithm,
        "n_test": report.n_test,
        "n_found": report.n_found,
        "found_rate": report.found_rate,
        "flip_rate": report.flip_rate,
        "flip_rate_given_found": report.flip_rate_given_found,
        "mean_k": float(ks.mean()) if ks.size else None,
        "median_k": float(np.median(ks)) if ks.size else None,
        "mean_outer_passes": report.mean_outer_passes,
        "k_values": list(report.k_values),
        "k_vs_confidence": [[k, m] for k, m in report.k_vs_confidence],
    }


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_report(report: ExperimentReport, records: Sequence[PointRecord], out_dir) -> None:
    out_dir = Path(out_dir)
    write_jsonl(out_dir / RECORDS_FILE, (r.to_dict() for r in records))
    write_json(out_dir / SUMMARY_FILE, summary_dict(report))
    write_json(out_dir / TIMING_FILE, {"wall_time_seconds": report.wall_time_seconds})
    point_rows = [(r.test_index, r.k, r.original_prob, abs(r.original_prob - 0.5))
                  for r in records if r.found]
    header = ("test_index", "k", "prob", "abs_margin")
    atomic_write_text(out_dir / K_HIST_FILE, _csv_text(header, point_rows))
    atomic_write_text(out_dir / K_CONF_FILE, _csv_text(header, point_rows))


def load_records(out_dir) -> List[PointRecord]:
    return [PointRecord.from_dict(row) for row in read_jsonl(Path(out_dir) / RECORDS_FILE)]


def attribution_sweep(train_split: DatasetSplit, test_split: DatasetSplit,
                      hyper: Hyperparams, methods: Sequence[str],
                      k_grid: Sequence[int], *, test_indices: Optional[Sequence[int]] = None,
                      seed: int = 0, out_dir=None,
                      model: Optional[TrainedModel] = None) -> AttributionSweepReport:
    """Remove each method's top-k per test point, retrain exactly, and
    average the absolute prediction shift.

    Influence methods are ordered toward flipping the current prediction;
    similarity and gradient baselines remove their highest scores first.
    """
    for method in methods:
        if method not in METHODS:
            raise InputError(f"unknown attribution method {method!r}")
    k_grid = [int(k) for k in k_grid]
    if any(k < 0 for k in k_grid):
        raise InputError("k grid entries must be >= 0")
    if any(k >= train_split.n for k in k_grid):
        raise InputError("k grid entries must be smaller than the training set")
    model = train(train_split, hyper) if model is None else model
    indices = list(range(test_split.n)) if test_indices is None else [int(t) for t in test_indices]

    sums = {m: np.zeros(len(k_grid)) for m in methods}
    counts = {m: np.zeros(len(k_grid), dtype=np.int64) for m in methods}
    for t in indices:
        z_t = test_split.instance(t)
        p0 = model.predict_proba(z_t.features)
        positive = p0 > hyper.tau
        for method in methods:
            scores = attribution(method, model, train_split, z_t, seed=seed + t)
            order = sweep_order(scores, positive)
            for j, k in enumerate(k_grid):
                try:
                    retrained = retrain_top_k(train_split, order, k, hyper)
                except DegenerateRemainderError:
                    continue  # recorded by a lower count; never aborts the sweep
                shift = abs(retrained.predict_proba(z_t.features) - p0)
                sums[method][j] += shift
                counts[method][j] += 1

    curves = {}
    for method in methods:
        with np.errstate(invalid="ignore"):
            means = np.where(counts[method] > 0, sums[method] / np.maximum(counts[method], 1), np.nan)
        curves[method] = tuple(float(v) for v in means)
    report = AttributionSweepReport(k_grid=tuple(k_grid), curves=curves, n_test=len(indices))
    if out_dir is not None:
        rows = [(m, k, report.curves[m][j])
                for m in sorted(report.curves) for j, k in enumerate(report.k_grid)]
        atomic_write_text(Path(out_dir) / SWEEP_FILE,
                          _csv_text(("method", "k", "mean_abs_delta"), rows))
    return report


def retrain_top_k(train_split: DatasetSplit, order: np.ndarray, k: int,
                  hyper: Hyperparams) -> TrainedModel:
    if k == 0:
        return train(train_split, hyper)
    return retrain_without(train_split, order[:k].tolist(), hyper)
