"""HTTP conduct of a live trial: event-sourced records with replayable state.

Every mutation appends to a per-trial newline-delimited JSON log and fsyncs
before the response goes out.  Restarting the process replays the logs and
reproduces the exact in-memory state: chain seeds and direction draws derive
from the trial seed and the count of accepted submissions, never from clock
or process state.  The same derivation powers hypothetical previews, so a
what-if for the pending cohort returns byte-for-byte what the real
submission will return.  Reads are served from memory and never touch the
log.
"""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import APIRouter, Depends, FastAPI, Header, HTTPException, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import (
    STATUS_RUNNING,
    STATUS_STOPPED,
    DesignConfig,
    TrialState,
    advance,
    record_outcomes,
    start_trial,
)
from .errors import ConfigurationError, DomainError, DualDoseError, ProtocolError
from .lattice import DoseIndex, GridDims, ShapeGrid
from .recommend import RecommenderConfig, recommend_with_diagnostics
from .sampler import ChainSummary, GibbsConfig, run_chain, tail_probability
from .scenarios import get_preset

__all__ = ["create_app", "TrialStore"]


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _grid(a: np.ndarray) -> list[list]:
    return np.asarray(a).tolist()


def _design_to_doc(cfg: DesignConfig) -> dict:
    return {
        "theta": cfg.theta,
        "n_max": cfg.n_max,
        "gamma": cfg.gamma,
        "epsilon": cfg.epsilon,
        "rho": cfg.rho,
        "first_cohort_size": cfg.first_cohort_size,
        "second_cohort_size": cfg.second_cohort_size,
        "later_cohort_size": cfg.later_cohort_size,
        "safety_multiplier": cfg.safety_multiplier,
        "gibbs": {"n_keep": cfg.gibbs.n_keep, "n_burn": cfg.gibbs.n_burn},
    }


def _design_from_doc(doc: dict) -> DesignConfig:
    doc = dict(doc)
    gibbs = doc.pop("gibbs", None)
    if gibbs is not None:
        doc["gibbs"] = GibbsConfig(**gibbs)
    try:
        return DesignConfig(**doc)
    except TypeError as exc:
        raise ConfigurationError(f"bad design config: {exc}") from exc


def _rec_to_doc(cfg: RecommenderConfig) -> dict:
    return {
        "delta_l": cfg.delta_l,
        "delta_u": cfg.delta_u,
        "l0": cfg.l0,
        "u0": cfg.u0,
        "gamma_l": cfg.gamma_l,
        "gamma_u": cfg.gamma_u,
        "eta_u": cfg.eta_u,
    }


def _rec_from_doc(doc: dict | None) -> RecommenderConfig:
    try:
        return RecommenderConfig(**(doc or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad recommender config: {exc}") from exc


def _request_hash(obj: Any) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _advance_rng(seed: int, version: int) -> np.random.Generator:
    # all randomness for the transition to `version` comes from here, so a
    # replayed log or a what-if preview reproduces the live trial exactly
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, version])))


def _prior_chain_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 0]).generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class TrialRecord:
    """One live trial: immutable engine state plus service bookkeeping."""

    trial_id: str
    cfg: DesignConfig
    prior: ShapeGrid
    rec_cfg: RecommenderConfig
    dims: GridDims
    seed: int
    created_at: str
    state: TrialState
    version: int = 0  # count of accepted cohort submissions
    updated_at: str = ""
    create_response: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    submission_keys: dict[str, tuple[str, dict]] = field(default_factory=dict)
    posterior_cache: dict[int, dict] = field(default_factory=dict)
    prior_summary: ChainSummary | None = None

    @property
    def log_path_name(self) -> str:
        return f"{self.trial_id}.ndjson"


class TrialStore:
    """Registry of trial records backed by per-trial append-only logs."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.records: dict[str, TrialRecord] = {}
        self.create_keys: dict[str, tuple[str, str]] = {}  # key -> (hash, trial_id)
        self.lock = threading.Lock()

    def path_for(self, record: TrialRecord) -> Path:
        return self.state_dir / record.log_path_name

    def append(self, record: TrialRecord, lines: list[dict]) -> None:
        """Persist lines with fsync; runs before any state commit."""
        payload = "".join(json.dumps(line, separators=(",", ":")) + "\n" for line in lines)
        with open(self.path_for(record), "a", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())

    def get(self, trial_id: str) -> TrialRecord:
        record = self.records.get(trial_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown trial {trial_id!r}")
        return record

    # -- replay ----------------------------------------------------------

    def replay_all(self) -> int:
        count = 0
        for path in sorted(self.state_dir.glob("*.ndjson")):
            self._replay_file(path)
            count += 1
        return count

    def _replay_file(self, path: Path) -> None:
        lines = []
        with open(path, encoding="utf-8") as fh:
            raw = fh.read().split("\n")
        for idx, text in enumerate(raw):
            if not text:
                continue
            try:
                lines.append(json.loads(text))
            except json.JSONDecodeError:
                # a crash mid-append leaves at most one partial trailing
                # line; anything torn mid-file is real corruption
                if idx == len(raw) - 1 or all(not t for t in raw[idx + 1 :]):
                    break
                raise ConfigurationError(f"corrupt event log {path.name} at line {idx + 1}")
        if not lines or lines[0].get("kind") != "created":
            raise ConfigurationError(f"event log {path.name} does not start with a created event")

        head = lines[0]
        dims = GridDims(head["dims"]["n_rows"], head["dims"]["n_cols"])
        cfg = _design_from_doc(head["config"])
        prior = ShapeGrid.from_flat(head["prior"]["alpha"], head["prior"]["beta"], dims)
        rec_cfg = _rec_from_doc(head["recommender"])
        record = TrialRecord(
            trial_id=head["trial_id"],
            cfg=cfg,
            prior=prior,
            rec_cfg=rec_cfg,
            dims=dims,
            seed=head["seed"],
            created_at=head["created_at"],
            state=start_trial(cfg, prior, dims),
            updated_at=head["created_at"],
            create_response=head["response"],
        )
        if head.get("idempotency_key"):
            self.create_keys[head["idempotency_key"]] = (head["request_hash"], record.trial_id)

        for line in lines[1:]:
            if line.get("kind") != "submission":
                continue  # engine lines are an audit copy; replay regenerates them
            version = line["version"]
            outcomes = [(DoseIndex(r, c), bool(dlt)) for r, c, dlt in line["outcomes"]]
            state = record_outcomes(record.state, outcomes)
            record.state = advance(state, cfg, prior, _advance_rng(record.seed, version))
            record.version = version
            record.updated_at = line["submitted_at"]
            record.posterior_cache[version] = line["response"]["posterior"]
            if line.get("idempotency_key"):
                record.submission_keys[line["idempotency_key"]] = (
                    line["request_hash"],
                    line["response"],
                )
        self.records[record.trial_id] = record


# -- request bodies -------------------------------------------------------


class PriorIn(BaseModel):
    n_rows: int
    n_cols: int
    alpha: list[float]
    beta: list[float]


class CreateIn(BaseModel):
    preset: str | None = None
    config: dict | None = None
    prior: PriorIn | None = None
    recommender: dict | None = None
    seed: int | None = None
    idempotency_key: str | None = None


class OutcomeIn(BaseModel):
    dose: tuple[int, int]
    dlt: bool


class CohortIn(BaseModel):
    outcomes: list[OutcomeIn]
    idempotency_key: str | None = None


class WhatIfIn(BaseModel):
    outcomes: list[OutcomeIn] = []


# -- response builders ----------------------------------------------------


def _pending_doc(state: TrialState) -> list[dict]:
    return [{"patient": p, "dose": [d.row, d.col]} for p, d in state.pending]


def _posterior_doc(
    record: TrialRecord, state: TrialState, summary: ChainSummary, version: int, omega: float | None
) -> dict:
    samples = summary.samples
    if samples is None:
        raise ProtocolError("posterior summary lacks retained draws")
    shape = (record.dims.n_rows, record.dims.n_cols)
    lo, hi = np.percentile(samples, [2.5, 97.5], axis=0)
    return {
        "state_version": version,
        "theta": record.cfg.theta,
        "omega": omega,
        "medians": _grid(summary.medians),
        "variances": _grid(samples.var(axis=0).reshape(shape)),
        "ci_lower": _grid(lo.reshape(shape)),
        "ci_upper": _grid(hi.reshape(shape)),
        "tail_probability_lowest": tail_probability(
            summary, DoseIndex(1, 1), record.cfg.theta + record.cfg.gamma
        ),
        "n": _grid(state.data.n),
        "z": _grid(state.data.z),
    }


def _last_omega(state: TrialState) -> float | None:
    for event in reversed(state.events):
        if event.kind == "stop_check":
            return event.payload["omega"]
    return None


def _prior_summary(record: TrialRecord) -> ChainSummary:
    if record.prior_summary is None:
        gibbs = replace(record.cfg.gibbs, seed=_prior_chain_seed(record.seed))
        record.prior_summary = run_chain(record.prior, gibbs, keep_samples=True)
    return record.prior_summary


def _current_summary(record: TrialRecord) -> tuple[ChainSummary, float | None]:
    """Latest chain for the record: the prior chain until data arrives."""
    if record.version == 0:
        return _prior_summary(record), None
    summary = record.state.last_summary
    if summary is None:
        raise ProtocolError("trial state lacks a posterior summary")
    return summary, _last_omega(record.state)


def _current_posterior(record: TrialRecord) -> dict:
    """Posterior document at the current version; call under record.lock."""
    cached = record.posterior_cache.get(record.version)
    if cached is None:
        summary, omega = _current_summary(record)
        cached = _posterior_doc(record, record.state, summary, record.version, omega)
        record.posterior_cache[record.version] = cached
    return cached


def _recommendation_doc(
    record: TrialRecord, state: TrialState, summary: ChainSummary, version: int
) -> dict:
    doses, diag = recommend_with_diagnostics(
        summary.medians, state.data, record.cfg.theta, record.rec_cfg
    )
    return {
        "state_version": version,
        "status": state.status,
        "recommended": sorted([d.row, d.col] for d in doses),
        "diagnostics": {
            "toxic_scenario": diag.toxic_scenario,
            "window_lower": diag.window_lower,
            "window_upper": diag.window_upper,
            "path": diag.path,
        },
    }


def _transition_doc(
    record: TrialRecord, state: TrialState, version: int, hypothetical: bool
) -> dict:
    summary = state.last_summary
    doc = {
        "trial_id": record.trial_id,
        "hypothetical": hypothetical,
        "state_version": version,
        "status": state.status,
        "stopped": state.status == STATUS_STOPPED,
        # chains run synchronously inside the request
        "progress": "complete",
        "posterior": _posterior_doc(record, state, summary, version, _last_omega(state)),
        "next_allocations": _pending_doc(state) if state.status == STATUS_RUNNING else None,
        "recommendation": None,
    }
    if state.status != STATUS_RUNNING:
        doc["recommendation"] = _recommendation_doc(record, state, summary, version)
    return doc


def _status_doc(record: TrialRecord) -> dict:
    state = record.state
    pair = state.current_pair
    return {
        "trial_id": record.trial_id,
        "status": state.status,
        "state_version": record.version,
        "cohort": state.cohort_index,
        "enrolled": state.enrolled,
        "n_allocated": state.n_allocated,
        "n_max": record.cfg.n_max,
        "theta": record.cfg.theta,
        "dims": {"n_rows": record.dims.n_rows, "n_cols": record.dims.n_cols},
        "pending": _pending_doc(state),
        "current_pair": None if pair is None else [[d.row, d.col] for d in pair],
        "n": _grid(state.data.n),
        "z": _grid(state.data.z),
        "created_at": record.created_at,
        "updated_at": record.updated_at,
        "n_events": len(state.events),
    }


def _engine_lines(state: TrialState, start: int) -> list[dict]:
    return [
        {"kind": "engine", "seq": e.seq, "event": e.kind, "cohort": e.cohort, "payload": e.payload}
        for e in state.events[start:]
    ]


def _parse_outcomes(outcomes: list[OutcomeIn], record: TrialRecord) -> list[tuple[DoseIndex, bool]]:
    parsed = []
    for item in outcomes:
        try:
            dose = DoseIndex(item.dose[0], item.dose[1])
            dose.validate(record.dims)
        except (DomainError, ConfigurationError) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        parsed.append((dose, bool(item.dlt)))
    return parsed


def _conflict(exc: Exception, record: TrialRecord) -> HTTPException:
    return HTTPException(
        status_code=409,
        detail={
            "error": str(exc),
            "expected": _pending_doc(record.state),
        },
    )


def _apply_submission(
    record: TrialRecord, outcomes: list[OutcomeIn], hypothetical: bool
) -> tuple[TrialState, dict]:
    """Run one full transition against the record's current state."""
    state = record.state
    pending = state.pending
    if len(outcomes) != len(pending):
        raise _conflict(
            ProtocolError(
                f"cohort submission must cover all {len(pending)} pending patients, "
                f"got {len(outcomes)} outcomes"
            ),
            record,
        )
    parsed = _parse_outcomes(outcomes, record)
    version = record.version + 1
    try:
        staged = record_outcomes(state, parsed)
        new_state = advance(staged, record.cfg, record.prior, _advance_rng(record.seed, version))
    except (ProtocolError, DomainError) as exc:
        raise _conflict(exc, record)
    return new_state, _transition_doc(record, new_state, version, hypothetical)


def _require_live(record: TrialRecord) -> None:
    if record.state.status != STATUS_RUNNING:
        raise HTTPException(
            status_code=410,
            detail=f"trial {record.trial_id} is terminal ({record.state.status})",
        )


def _canonical_outcomes(outcomes: list[OutcomeIn]) -> list[list]:
    return [[item.dose[0], item.dose[1], bool(item.dlt)] for item in outcomes]


def _bearer_guard(token: str | None):
    def check(authorization: str | None = Header(default=None)):
        if token is None:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    return check


def create_app(
    state_dir: str | os.PathLike,
    token: str | None = None,
    static_dir: str | os.PathLike | None = None,
) -> FastAPI:
    """Build the service: replays any logs in state_dir, then serves /v1."""
    store = TrialStore(Path(state_dir))
    store.replay_all()

    app = FastAPI(title="dualdose trial service")
    app.state.store = store
    router = APIRouter(prefix="/v1", dependencies=[Depends(_bearer_guard(token))])

    @app.exception_handler(DualDoseError)
    async def _domain_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @router.post("/trials", status_code=201)
    def create_trial(
        body: CreateIn,
        response: Response,
        header_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        key = header_key or body.idempotency_key
        request_doc = body.model_dump(exclude={"idempotency_key"})
        request_hash = _request_hash(request_doc)

        if body.preset is not None:
            if body.config is not None or body.prior is not None:
                raise HTTPException(
                    status_code=400, detail="give either a preset or explicit config and prior"
                )
            preset = get_preset(body.preset)
            cfg, prior, dims = preset.design, preset.prior, preset.dims
        else:
            if body.config is None or body.prior is None:
                raise HTTPException(
                    status_code=400, detail="config and prior are required without a preset"
                )
            dims = GridDims(body.prior.n_rows, body.prior.n_cols)
            cfg = _design_from_doc(body.config)
            prior = ShapeGrid.from_flat(body.prior.alpha, body.prior.beta, dims)
        rec_cfg = _rec_from_doc(body.recommender)
        seed = body.seed if body.seed is not None else secrets.randbits(62)

        with store.lock:
            if key is not None and key in store.create_keys:
                seen_hash, trial_id = store.create_keys[key]
                if seen_hash != request_hash:
                    raise HTTPException(
                        status_code=409,
                        detail="idempotency key reused with a different request",
                    )
                response.status_code = 200
                return store.records[trial_id].create_response

            trial_id = uuid.uuid4().hex
            created_at = _utcnow()
            state = start_trial(cfg, prior, dims)
            record = TrialRecord(
                trial_id=trial_id,
                cfg=cfg,
                prior=prior,
                rec_cfg=rec_cfg,
                dims=dims,
                seed=seed,
                created_at=created_at,
                state=state,
                updated_at=created_at,
            )
            record.create_response = {
                "trial_id": trial_id,
                "status": state.status,
                "state_version": 0,
                "cohort": state.cohort_index,
                "allocations": _pending_doc(state),
                "dims": {"n_rows": dims.n_rows, "n_cols": dims.n_cols},
                "created_at": created_at,
            }
            head = {
                "kind": "created",
                "trial_id": trial_id,
                "created_at": created_at,
                "seed": seed,
                "dims": {"n_rows": dims.n_rows, "n_cols": dims.n_cols},
                "config": _design_to_doc(cfg),
                "prior": {
                    "alpha": prior.flat_alpha().tolist(),
                    "beta": prior.flat_beta().tolist(),
                },
                "recommender": _rec_to_doc(rec_cfg),
                "idempotency_key": key,
                "request_hash": request_hash,
                "response": record.create_response,
            }
            store.append(record, [head] + _engine_lines(state, 0))
            store.records[trial_id] = record
            if key is not None:
                store.create_keys[key] = (request_hash, trial_id)
        return record.create_response

    @router.get("/trials/{trial_id}")
    def get_trial(trial_id: str):
        return _status_doc(store.get(trial_id))

    @router.post("/trials/{trial_id}/cohorts")
    def submit_cohort(
        trial_id: str,
        body: CohortIn,
        header_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ):
        record = store.get(trial_id)
        key = header_key or body.idempotency_key
        request_hash = _request_hash(_canonical_outcomes(body.outcomes))
        with record.lock:
            if key is not None and key in record.submission_keys:
                seen_hash, stored = record.submission_keys[key]
                if seen_hash != request_hash:
                    raise HTTPException(
                        status_code=409,
                        detail="idempotency key reused with a different request",
                    )
                return stored
            _require_live(record)
            new_state, doc = _apply_submission(record, body.outcomes, hypothetical=False)
            version = doc["state_version"]
            submission_line = {
                "kind": "submission",
                "version": version,
                "submitted_at": _utcnow(),
                "idempotency_key": key,
                "request_hash": request_hash,
                "outcomes": _canonical_outcomes(body.outcomes),
                "response": doc,
            }
            engine_lines = _engine_lines(new_state, len(record.state.events))
            store.append(record, [submission_line] + engine_lines)
            record.state = new_state
            record.version = version
            record.updated_at = submission_line["submitted_at"]
            record.posterior_cache[version] = doc["posterior"]
            if key is not None:
                record.submission_keys[key] = (request_hash, doc)
        return doc

    @router.get("/trials/{trial_id}/posterior")
    def get_posterior(trial_id: str):
        record = store.get(trial_id)
        with record.lock:
            return _current_posterior(record)

    @router.get("/trials/{trial_id}/recommendation")
    def get_recommendation(trial_id: str):
        record = store.get(trial_id)
        with record.lock:
            summary, _ = _current_summary(record)
            return _recommendation_doc(record, record.state, summary, record.version)

    @router.post("/trials/{trial_id}/what-if")
    def what_if(trial_id: str, body: WhatIfIn):
        record = store.get(trial_id)
        with record.lock:
            _require_live(record)
            if not body.outcomes:
                return {
                    "trial_id": record.trial_id,
                    "hypothetical": True,
                    "state_version": record.version,
                    "status": record.state.status,
                    "posterior": _current_posterior(record),
                }
            _, doc = _apply_submission(record, body.outcomes, hypothetical=True)
        return doc

    @router.get("/trials/{trial_id}/events")
    def get_events(trial_id: str):
        record = store.get(trial_id)
        events = [
            {"seq": e.seq, "kind": e.kind, "cohort": e.cohort, "payload": e.payload}
            for e in record.state.events
        ]
        return {"trial_id": trial_id, "count": len(events), "events": events}

    app.include_router(router)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {"service": "dualdose trial service", "api": "/v1"}

    return app
