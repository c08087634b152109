"""HTTP JSON API for the contestation loop: train models, inspect
predictions, compute flipsets, dispute members in a session, and run
what-if retrains without the disputed points.

Models and sessions persist as JSON + binary weights under the data
directory and survive restarts. The base model is immutable: what-if
retrains never touch it. Errors use the envelope
{"code": ..., "message": ..., "detail": ...}.
"""

from __future__ import annotations

import itertools
import threading
import uuid
from pathlib import Path
from typing import Dict, List, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .artifacts import ModelBundle, load_bundle, save_bundle, train_from_config
from .config import RunConfig
from .errors import (ConfigError, DataError, DegenerateRemainderError,
                     FlipsetError, InputError, NumericalError, TrainingError)
from .ioutil import read_json, write_json
from .search import GREEDY, ITERATIVE, FlipsetResult, greedy_flipset, iterative_flipset
from .verification import retrain_without

WHATIF_POOL_SIZE = 2


class TrainRequest(BaseModel):
    dataset: dict
    bow: dict = Field(default_factory=dict)
    hyper: dict = Field(default_factory=dict)


class FlipsetRequest(BaseModel):
    test_index: int
    algorithm: str = ITERATIVE
    max_passes: int = 25


class SessionRequest(BaseModel):
    model_id: str
    test_index: int


class DisputeRequest(BaseModel):
    add: List[int] = Field(default_factory=list)
    remove: List[int] = Field(default_factory=list)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


def _error_response(status: int, code: str, message: str, detail: Optional[str] = None):
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message, "detail": detail})


class ModelStore:
    """Disk-backed model registry with an in-memory bundle cache."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: Dict[str, ModelBundle] = {}
        self._lock = threading.Lock()

    def create(self, config: RunConfig) -> str:
        bundle = train_from_config(config)
        model_id = uuid.uuid4().hex[:12]
        save_bundle(self.root / model_id, bundle)
        with self._lock:
            self._cache[model_id] = bundle
        return model_id

    def ids(self) -> List[str]:
        return sorted(p.name for p in self.root.iterdir()
                      if (p / "model.json").exists())

    def get(self, model_id: str) -> ModelBundle:
        with self._lock:
            if model_id in self._cache:
                return self._cache[model_id]
        path = self.root / model_id
        if not (path / "model.json").exists():
            raise ApiError(404, "not_found", f"no model {model_id!r}")
        bundle = load_bundle(path)
        with self._lock:
            self._cache[model_id] = bundle
        return bundle

    def dir_of(self, model_id: str) -> Path:
        return self.root / model_id


class SessionStore:
    """Sessions persisted one JSON file each; mutations serialized per session."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self, model_id: str, test_index: int) -> dict:
        session = {"id": uuid.uuid4().hex[:12], "model_id": model_id,
                   "test_index": test_index, "disputed": [], "history": []}
        self.save(session)
        return session

    def path_of(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def load(self, session_id: str) -> dict:
        path = self.path_of(session_id)
        if not path.exists():
            raise ApiError(404, "not_found", f"no session {session_id!r}")
        return read_json(path)

    def save(self, session: dict) -> None:
        write_json(self.path_of(session["id"]), session)


def _flipset_payload(result: FlipsetResult, bundle: ModelBundle) -> dict:
    members = []
    for idx, delta in zip(result.members, result.member_deltas):
        members.append({
            "index": idx,
            "label": int(bundle.train_split.y[idx]),
            "delta": delta,
            "text": bundle.train_split.text_of(idx),
        })
    return {
        "test_index": result.test_index,
        "algorithm": result.algorithm,
        "found": result.found,
        "k": result.k,
        "original_prob": result.original_prob,
        "original_label": result.original_label,
        "estimated_prob": result.estimated_prob,
        "outer_passes": result.outer_passes,
        "members": members,
        "tau": bundle.model.hyper.tau,
    }


def create_app(data_dir: Path, ui_dir: Optional[Path] = None) -> FastAPI:
    data_dir = Path(data_dir)
    app = FastAPI(title="flipset contestation service")
    models = ModelStore(data_dir / "models")
    sessions = SessionStore(data_dir / "sessions")
    inflight_flipsets: set = set()
    inflight_lock = threading.Lock()
    whatif_slots = threading.Semaphore(WHATIF_POOL_SIZE)
    app.state.models = models
    app.state.sessions = sessions
    app.state.inflight_flipsets = inflight_flipsets
    app.state.inflight_lock = inflight_lock
    app.state.whatif_slots = whatif_slots

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return _error_response(exc.status, exc.code, exc.message, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error_response(400, "bad_request", "invalid request body", str(exc))

    @app.exception_handler(FlipsetError)
    async def flipset_error_handler(request: Request, exc: FlipsetError):
        status, code = 500, "internal"
        if isinstance(exc, ConfigError):
            status, code = 400, "config"
        elif isinstance(exc, (DataError, InputError)):
            status, code = 422, "data"
        elif isinstance(exc, (TrainingError, NumericalError)):
            status, code = 500, "numerical"
        return _error_response(status, code, str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/models", status_code=201)
    def create_model(req: TrainRequest):
        try:
            config = RunConfig.from_dict({"dataset": req.dataset, "bow": req.bow,
                                          "hyper": req.hyper})
            config.validate_paths()
        except ConfigError as exc:
            raise ApiError(400, "config", str(exc)) from exc
        model_id = models.create(config)
        bundle = models.get(model_id)
        return {"model_id": model_id, "metrics": bundle.metrics,
                "n_train": bundle.train_split.n, "n_test": bundle.test_split.n,
                "dimension": bundle.model.dimension, "feature_kind": config.feature_kind}

    @app.get("/models")
    def list_models():
        out = []
        for model_id in models.ids():
            bundle = models.get(model_id)
            out.append({"model_id": model_id, "metrics": bundle.metrics,
                        "n_train": bundle.train_split.n, "n_test": bundle.test_split.n,
                        "feature_kind": bundle.config.feature_kind})
        return {"models": out}

    @app.get("/models/{model_id}")
    def get_model(model_id: str):
        bundle = models.get(model_id)
        return {"model_id": model_id, "metrics": bundle.metrics,
                "n_train": bundle.train_split.n, "n_test": bundle.test_split.n,
                "dimension": bundle.model.dimension,
                "feature_kind": bundle.config.feature_kind,
                "hyper": {"lam": bundle.model.hyper.lam, "tau": bundle.model.hyper.tau}}

    def _cached_k(model_id: str, test_index: int) -> Optional[int]:
        for algo in (ITERATIVE, GREEDY):
            path = models.dir_of(model_id) / "flipsets" / f"{algo}_{test_index}.json"
            if path.exists():
                doc = read_json(path)
                if doc.get("found"):
                    return doc.get("k")
        return None

    @app.get("/models/{model_id}/predictions")
    def list_predictions(model_id: str):
        bundle = models.get(model_id)
        probs = bundle.model.probabilities(bundle.test_split.X)
        tau = bundle.model.hyper.tau
        rows = []
        for t in range(bundle.test_split.n):
            p = float(probs[t])
            rows.append({"test_index": t, "prob": p, "label": int(p > tau),
                         "margin": abs(p - 0.5), "k": _cached_k(model_id, t),
                         "text": bundle.test_split.text_of(t),
                         "true_label": int(bundle.test_split.y[t])})
        return {"predictions": rows, "tau": tau}

    @app.get("/models/{model_id}/predictions/{test_index}")
    def get_prediction(model_id: str, test_index: int):
        bundle = models.get(model_id)
        if not 0 <= test_index < bundle.test_split.n:
            raise ApiError(404, "not_found",
                           f"test index {test_index} out of range (n_test={bundle.test_split.n})")
        # same vectorized path as the listing so the two agree bitwise
        p = float(bundle.model.probabilities(bundle.test_split.X)[test_index])
        return {"test_index": test_index, "prob": p,
                "label": int(p > bundle.model.hyper.tau), "margin": abs(p - 0.5)}

    @app.post("/models/{model_id}/flipset")
    def compute_flipset(model_id: str, req: FlipsetRequest):
        bundle = models.get(model_id)
        if req.algorithm not in (GREEDY, ITERATIVE):
            raise ApiError(400, "config", f"algorithm must be '{GREEDY}' or '{ITERATIVE}'")
        if not 0 <= req.test_index < bundle.test_split.n:
            raise ApiError(404, "not_found", f"test index {req.test_index} out of range")
        key = (model_id, req.test_index, req.algorithm)
        with inflight_lock:
            if key in inflight_flipsets:
                raise ApiError(409, "conflict",
                               "a flipset job for this model/test/algorithm is already running")
            inflight_flipsets.add(key)
        try:
            x_t = bundle.test_split.feature_row(req.test_index)
            if req.algorithm == GREEDY:
                result = greedy_flipset(bundle.model, bundle.train_split, x_t,
                                        test_index=req.test_index)
            else:
                result = iterative_flipset(bundle.model, bundle.train_split, x_t,
                                           max_passes=req.max_passes,
                                           test_index=req.test_index)
            payload = _flipset_payload(result, bundle)
            cache = models.dir_of(model_id) / "flipsets" / f"{req.algorithm}_{req.test_index}.json"
            write_json(cache, payload)
            return payload
        finally:
            with inflight_lock:
                inflight_flipsets.discard(key)

    @app.get("/models/{model_id}/experiment")
    def get_experiment(model_id: str):
        path = models.dir_of(model_id) / "experiment" / "summary.json"
        if not path.exists():
            raise ApiError(404, "not_found",
                           "no experiment report for this model; run `flipset experiment` "
                           f"with out_dir={models.dir_of(model_id) / 'experiment'}")
        return read_json(path)

    @app.post("/sessions", status_code=201)
    def create_session(req: SessionRequest):
        bundle = models.get(req.model_id)
        if not 0 <= req.test_index < bundle.test_split.n:
            raise ApiError(422, "data", f"test index {req.test_index} out of range")
        return sessions.create(req.model_id, req.test_index)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return sessions.load(session_id)

    @app.patch("/sessions/{session_id}/disputed")
    def patch_disputed(session_id: str, req: DisputeRequest):
        with sessions.lock_for(session_id):
            session = sessions.load(session_id)
            bundle = models.get(session["model_id"])
            n_train = bundle.train_split.n
            for idx in itertools.chain(req.add, req.remove):
                if not 0 <= idx < n_train:
                    raise ApiError(422, "data", f"train index {idx} out of range (n_train={n_train})")
            disputed = set(session["disputed"])
            disputed.update(req.add)
            disputed.difference_update(req.remove)
            session["disputed"] = sorted(disputed)
            sessions.save(session)
            return {"id": session_id, "disputed": session["disputed"]}

    @app.post("/sessions/{session_id}/whatif")
    def whatif(session_id: str):
        if not whatif_slots.acquire(blocking=False):
            raise ApiError(503, "saturated", "what-if retrain pool is saturated; retry shortly")
        try:
            with sessions.lock_for(session_id):
                session = sessions.load(session_id)
                disputed = list(session["disputed"])
                if not disputed:
                    raise ApiError(422, "data", "disputed set is empty")
                bundle = models.get(session["model_id"])
                x_t = bundle.test_split.feature_row(session["test_index"])
                try:
                    retrained = retrain_without(bundle.train_split, disputed, bundle.model.hyper)
                except DegenerateRemainderError as exc:
                    raise ApiError(422, "data", str(exc)) from exc
                prob = retrained.predict_proba(x_t)
                tau = bundle.model.hyper.tau
                base_label = int(bundle.model.predict_proba(x_t) > tau)
                entry = {"seq": len(session["history"]), "disputed": sorted(disputed),
                         "retrained_prob": prob, "flipped": int(prob > tau) != base_label}
                session["history"].append(entry)
                sessions.save(session)
                return {"retrained_prob": prob, "flipped": entry["flipped"],
                        "history_entry": entry}
        finally:
            whatif_slots.release()

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
