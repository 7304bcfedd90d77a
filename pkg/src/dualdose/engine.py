"""Adaptive trial engine: cohort scheduling, allocation, stopping.

The design enrolls a first cohort at the minimum combination, a second
cohort split between the first row and first column at the doses whose
posterior medians sit closest to the target, and thereafter cohorts of two,
one patient continuing from each dose of the previous pair.  Each
continuation fixes one agent and varies the other: the direction is drawn
at random, overridden toward the safer axis when the chosen direction's
minimum dose already looks too toxic (median above 1.5x target).  Within
the chosen line the next dose is the median closest to the target among
the levels at most one above the current dose, so escalation walks through
untried combinations one step at a time while de-escalation may drop any
distance.  After every posterior update the trial stops if the minimum
combination is too likely to exceed the target by more than the stopping
margin.

All transitions are pure (state in, state out) and consume randomness only
from the caller's generator, so identical seeds replay identical trials.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ProtocolError
from .lattice import DoseIndex, GridDims, ShapeGrid
from .sampler import (
    ChainSummary,
    GibbsConfig,
    ObservedData,
    compute_omega,
    pseudo_posterior_shapes,
    run_chain,
    tail_probability,
)

__all__ = [
    "ContinuationChoice",
    "DesignConfig",
    "TrialEvent",
    "TrialState",
    "STATUS_RUNNING",
    "STATUS_STOPPED",
    "STATUS_COMPLETED",
    "start_trial",
    "second_cohort_doses",
    "next_cohort_doses",
    "record_outcomes",
    "check_stopping",
    "advance",
]

STATUS_RUNNING = "running"
STATUS_STOPPED = "stopped_for_toxicity"
STATUS_COMPLETED = "completed"


@dataclass(frozen=True)
class DesignConfig:
    """Design parameters: target, sample size, stopping rule, cohort sizes."""

    theta: float
    n_max: int
    gamma: float = 0.1
    epsilon: float = 0.8
    rho: float = 2.0
    first_cohort_size: int = 4
    second_cohort_size: int = 4
    later_cohort_size: int = 2
    safety_multiplier: float = 1.5
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise ConfigurationError("theta must lie in (0, 1)")
        # epsilon = 1 disables early stopping (a tail probability cannot
        # exceed 1), so the closed upper endpoint is allowed
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigurationError("epsilon must lie in (0, 1]")
        if self.gamma < 0.0:
            raise ConfigurationError("gamma must be >= 0")
        if self.rho <= 0.0:
            raise ConfigurationError("rho must be > 0")
        if self.first_cohort_size < 1 or self.second_cohort_size < 2 or self.later_cohort_size < 1:
            raise ConfigurationError("cohort sizes too small")
        if self.n_max < self.first_cohort_size + self.second_cohort_size:
            raise ConfigurationError("n_max must cover the first two cohorts")
        if self.safety_multiplier <= 0.0:
            raise ConfigurationError("safety_multiplier must be > 0")


@dataclass(frozen=True)
class TrialEvent:
    """One audit-log entry; seq is a monotone logical timestamp."""

    seq: int
    kind: str  # allocation | outcome | stop_check | termination
    cohort: int
    payload: dict


@dataclass(frozen=True)
class TrialState:
    """Complete dynamic state of one trial."""

    dims: GridDims
    data: ObservedData
    cohort_index: int
    current_pair: tuple[DoseIndex, DoseIndex]
    pending: tuple[tuple[int, DoseIndex], ...]  # (patient id, dose) awaiting outcome
    status: str
    events: tuple[TrialEvent, ...]
    last_summary: ChainSummary | None = None

    @property
    def enrolled(self) -> int:
        return self.data.total_enrolled

    @property
    def n_allocated(self) -> int:
        return self.enrolled + len(self.pending)


def _dose_payload(d: DoseIndex) -> list[int]:
    return [d.row, d.col]


def _alloc_events(
    start_seq: int,
    cohort: int,
    start_patient: int,
    doses: Sequence[tuple[DoseIndex, DoseIndex | None, dict | None]],
) -> tuple[list[TrialEvent], list[tuple[int, DoseIndex]]]:
    events = []
    pending = []
    for offset, (dose, source, audit) in enumerate(doses):
        patient = start_patient + offset
        payload = {
            "patient": patient,
            "dose": _dose_payload(dose),
            "source": _dose_payload(source) if source is not None else None,
        }
        if audit is not None:
            payload.update(audit)
        events.append(
            TrialEvent(
                seq=start_seq + offset,
                kind="allocation",
                cohort=cohort,
                payload=payload,
            )
        )
        pending.append((patient, dose))
    return events, pending


def start_trial(cfg: DesignConfig, prior: ShapeGrid, dims: GridDims) -> TrialState:
    """Allocate cohort 1: first_cohort_size patients at the minimum dose."""
    if prior.dims != dims:
        raise ConfigurationError("prior grid does not match the trial dimensions")
    base = DoseIndex(1, 1)
    events, pending = _alloc_events(
        0, 1, 1, [(base, None, None)] * cfg.first_cohort_size
    )
    return TrialState(
        dims=dims,
        data=ObservedData.empty(dims),
        cohort_index=1,
        current_pair=(base, base),
        pending=tuple(pending),
        status=STATUS_RUNNING,
        events=tuple(events),
    )


def _line_argmin(line: np.ndarray, theta: float, cap: int) -> int:
    """0-based index of the median closest to theta among line[0..cap].

    The cap is the no-skip bound: one level above the current dose.  Ties
    break toward the smaller index (np.argmin keeps the first minimum).
    """
    return int(np.argmin(np.abs(line[: cap + 1] - theta)))


def second_cohort_doses(
    summary: ChainSummary, theta: float, dims: GridDims
) -> tuple[DoseIndex, DoseIndex]:
    """Doses for cohort 2: closest-to-target medians along row 1 and column 1.

    Only (1, 1) has been treated, so the no-skip rule limits both lines to
    their first two levels.  Ties break toward the smaller index.
    """
    med = summary.medians
    j_star = _line_argmin(med[0, :], theta, min(dims.n_cols - 1, 1)) + 1
    i_star = _line_argmin(med[:, 0], theta, min(dims.n_rows - 1, 1)) + 1
    return DoseIndex(1, j_star), DoseIndex(i_star, 1)


@dataclass(frozen=True)
class ContinuationChoice:
    """One continuation step with its audit trail: the uniform that picked
    the search direction and whether the safety override changed it."""

    dose: DoseIndex
    direction: str  # "horizontal" or "vertical", after any override
    draw: float
    overridden: bool

    def audit(self) -> dict:
        return {
            "direction": self.direction,
            "draw": self.draw,
            "overridden": self.overridden,
        }


def _continue_from(
    dose: DoseIndex, summary: ChainSummary, cfg: DesignConfig, rng: np.random.Generator
) -> ContinuationChoice:
    """One continuation: random direction, safety override, capped line argmin."""
    med = summary.medians
    # each direction's safety proxy: the median at the minimum dose of the
    # line that direction would search (free coordinate = 1)
    q_horizontal = float(med[dose.row - 1, 0])
    q_vertical = float(med[0, dose.col - 1])
    draw = float(rng.random())
    horizontal = draw < 0.5
    drawn = horizontal
    limit = cfg.safety_multiplier * cfg.theta
    q_chosen = q_horizontal if horizontal else q_vertical
    if q_chosen > limit:
        if q_horizontal < q_vertical:
            horizontal = True
        elif q_vertical < q_horizontal:
            horizontal = False
        # equal minima: the random choice stands
    # candidates: every lower level, plus at most one level above the
    # current dose, so escalation cannot skip an untried combination
    if horizontal:
        line = med[dose.row - 1, :]
        j = _line_argmin(line, cfg.theta, min(line.size - 1, dose.col)) + 1
        chosen = DoseIndex(dose.row, j)
    else:
        line = med[:, dose.col - 1]
        i = _line_argmin(line, cfg.theta, min(line.size - 1, dose.row)) + 1
        chosen = DoseIndex(i, dose.col)
    return ContinuationChoice(
        dose=chosen,
        direction="horizontal" if horizontal else "vertical",
        draw=draw,
        overridden=horizontal != drawn,
    )


def next_cohort_doses(
    state: TrialState,
    summary: ChainSummary,
    cfg: DesignConfig,
    rng: np.random.Generator,
) -> tuple[ContinuationChoice, ContinuationChoice]:
    """Continuation choices for cohorts >= 3, one per dose of the current pair.

    Consumes exactly one uniform per pair dose (the direction draw); the
    safety override uses no extra randomness.
    """
    if state.cohort_index < 2:
        raise ProtocolError("continuation requires the second cohort to exist")
    a, b = state.current_pair
    return _continue_from(a, summary, cfg, rng), _continue_from(b, summary, cfg, rng)


def record_outcomes(
    state: TrialState, assignments: Sequence[tuple[DoseIndex, bool]]
) -> TrialState:
    """Record DLT outcomes for allocated patients, matching doses to pending slots."""
    if state.status != STATUS_RUNNING:
        raise ProtocolError(f"cannot record outcomes on a {state.status} trial")
    pending = list(state.pending)
    events = list(state.events)
    seq = len(events)
    data = state.data
    for dose, dlt in assignments:
        dose.validate(state.dims)
        slot = next((idx for idx, (_, d) in enumerate(pending) if d == dose), None)
        if slot is None:
            raise ProtocolError(f"dose ({dose.row}, {dose.col}) has no pending allocation")
        patient, _ = pending.pop(slot)
        data = data.add(dose, 1, 1 if dlt else 0)
        events.append(
            TrialEvent(
                seq=seq,
                kind="outcome",
                cohort=state.cohort_index,
                payload={"patient": patient, "dose": _dose_payload(dose), "dlt": bool(dlt)},
            )
        )
        seq += 1
    return replace(state, data=data, pending=tuple(pending), events=tuple(events))


def check_stopping(summary: ChainSummary, cfg: DesignConfig) -> tuple[bool, float]:
    """Stop when P(p_11 > theta + gamma | data) exceeds epsilon."""
    tail = tail_probability(summary, DoseIndex(1, 1), cfg.theta + cfg.gamma)
    return tail > cfg.epsilon, tail


def advance(
    state: TrialState,
    cfg: DesignConfig,
    prior: ShapeGrid,
    rng: np.random.Generator,
) -> TrialState:
    """One engine step: posterior update, stop check, then next allocation.

    Requires all allocated outcomes to be recorded.  Terminates with
    stopped_for_toxicity when the stopping rule fires (checked before the
    sample-size condition), with completed when n_max is reached.
    """
    if state.status != STATUS_RUNNING:
        raise ProtocolError(f"cannot advance a {state.status} trial")
    if state.pending:
        raise ProtocolError("outcomes pending for allocated patients")
    if state.data.total_enrolled == 0:
        raise ProtocolError("no outcomes recorded yet")
    if prior.dims != state.dims:
        raise ConfigurationError("prior grid does not match the trial dimensions")

    omega = compute_omega(prior, state.data, cfg.rho)
    shapes = pseudo_posterior_shapes(prior, state.data, omega)
    chain_seed = int(rng.integers(0, 2**63))
    summary = run_chain(shapes, replace(cfg.gibbs, seed=chain_seed), keep_samples=True)
    stop, tail = check_stopping(summary, cfg)
    # samples stay on the summary: posterior spread and tail queries read
    # them later without rerunning the chain

    events = list(state.events)
    events.append(
        TrialEvent(
            seq=len(events),
            kind="stop_check",
            cohort=state.cohort_index,
            payload={"tail": tail, "stop": bool(stop), "omega": omega, "chain_seed": chain_seed},
        )
    )

    if stop:
        events.append(
            TrialEvent(
                seq=len(events),
                kind="termination",
                cohort=state.cohort_index,
                payload={"reason": "toxicity", "enrolled": state.enrolled},
            )
        )
        return replace(
            state, status=STATUS_STOPPED, events=tuple(events), last_summary=summary
        )

    if state.enrolled >= cfg.n_max:
        events.append(
            TrialEvent(
                seq=len(events),
                kind="termination",
                cohort=state.cohort_index,
                payload={"reason": "completed", "enrolled": state.enrolled},
            )
        )
        return replace(
            state, status=STATUS_COMPLETED, events=tuple(events), last_summary=summary
        )

    next_cohort = state.cohort_index + 1
    remaining = cfg.n_max - state.enrolled
    if next_cohort == 2:
        row_dose, col_dose = second_cohort_doses(summary, cfg.theta, state.dims)
        source = DoseIndex(1, 1)
        per = cfg.second_cohort_size // 2
        extra = cfg.second_cohort_size % 2
        plan = [(row_dose, source, None)] * (per + extra) + [(col_dose, source, None)] * per
        pair = (row_dose, col_dose)
    else:
        choice_a, choice_b = next_cohort_doses(state, summary, cfg, rng)
        sources = state.current_pair
        plan = [
            (
                (choice_a.dose, sources[0], choice_a.audit())
                if i % 2 == 0
                else (choice_b.dose, sources[1], choice_b.audit())
            )
            for i in range(cfg.later_cohort_size)
        ]
        pair = (choice_a.dose, choice_b.dose)
    plan = plan[:remaining]

    alloc_events, pending = _alloc_events(len(events), next_cohort, state.enrolled + 1, plan)
    events.extend(alloc_events)
    return replace(
        state,
        cohort_index=next_cohort,
        current_pair=pair,
        pending=tuple(pending),
        status=STATUS_RUNNING,
        events=tuple(events),
        last_summary=summary,
    )
