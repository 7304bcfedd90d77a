"""Trial replication and operating-characteristics aggregation.

One replicate runs the adaptive engine against a true toxicity surface,
drawing each patient's DLT as a Bernoulli outcome at the assigned dose.
Aggregation mirrors the published table layout: recommendation and
experimentation percentages by distance-from-target category, plus
safety metrics over the replicate set.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import (STATUS_COMPLETED, STATUS_RUNNING, STATUS_STOPPED,
                     DesignConfig, advance, record_outcomes, start_trial)
from .errors import DomainError
from .lattice import DoseIndex, GridDims, ShapeGrid, flat_index
from .recommend import RecommenderConfig, recommend
from .scenarios import Scenario

__all__ = [
    "TrialResult",
    "OperatingCharacteristics",
    "StudySpec",
    "classify_dose",
    "is_overtoxic",
    "simulate_trial",
    "aggregate",
    "run_study",
    "write_report_json",
    "write_report_csv",
    "format_report_table",
]

AT_THETA = "at_theta"
WITHIN_10 = "within_10"
BEYOND_10 = "beyond_10"

# Scenario tables hold 2-decimal constants that sit exactly on the
# category boundaries; the guard absorbs decimal-to-binary drift.
_BOUNDARY_GUARD = 1e-9


def classify_dose(p_star: float, theta: float) -> str:
    """Category of a true DLT probability relative to the target."""
    if p_star == theta:
        return AT_THETA
    if abs(p_star - theta) <= 0.1 + _BOUNDARY_GUARD:
        return WITHIN_10
    return BEYOND_10


def is_overtoxic(p_star: float, theta: float, delta: float = 0.1) -> bool:
    """Whether a true DLT probability exceeds theta + delta."""
    return p_star > theta + delta + _BOUNDARY_GUARD


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one simulated trial."""

    recommended: frozenset[DoseIndex]
    allocation: np.ndarray  # flat patient counts, row-major
    dlt_total: int
    enrolled: int
    stopped_early: bool
    seed: int

    def __post_init__(self) -> None:
        alloc = np.asarray(self.allocation, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "allocation", alloc)
        object.__setattr__(self, "recommended", frozenset(self.recommended))
        if self.enrolled != int(alloc.sum()):
            raise DomainError("enrolled must equal the allocation total")
        if not 0 <= self.dlt_total <= self.enrolled:
            raise DomainError("dlt_total must lie in [0, enrolled]")


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Percentages over a replicate set, all on a 0-100 scale."""

    rec_at_theta: float
    rec_within_10: float
    rec_beyond_10: float
    rec_none: float
    exp_at_theta: float
    exp_within_10: float
    exp_beyond_10: float
    exp_none: float
    rec_overtoxic: float
    alloc_overtoxic: float
    mean_dlt_rate: float
    pct_trials_excess_dlt: float
    replicates: int

    def __post_init__(self) -> None:
        rec = (self.rec_at_theta, self.rec_within_10, self.rec_beyond_10, self.rec_none)
        exp = (self.exp_at_theta, self.exp_within_10, self.exp_beyond_10, self.exp_none)
        for group in (rec, exp):
            if abs(sum(group) - 100.0) > 0.1:
                raise DomainError("category percentages must sum to 100")
        for name in (
            "rec_at_theta", "rec_within_10", "rec_beyond_10", "rec_none",
            "exp_at_theta", "exp_within_10", "exp_beyond_10", "exp_none",
            "rec_overtoxic", "alloc_overtoxic", "mean_dlt_rate",
            "pct_trials_excess_dlt",
        ):
            value = getattr(self, name)
            if not -1e-9 <= value <= 100.0 + 1e-9:
                raise DomainError(f"{name} must lie in [0, 100]")


def simulate_trial(
    scenario: Scenario,
    cfg: DesignConfig,
    prior: ShapeGrid,
    rec_cfg: RecommenderConfig,
    seed: int,
) -> TrialResult:
    """Run one trial to termination under a true toxicity surface.

    The seed splits into independent engine and outcome streams, so the
    whole trajectory is a pure function of (scenario, cfg, prior,
    rec_cfg, seed).  Early-stopped trials recommend nothing.
    """
    if scenario.dims != prior.dims:
        raise DomainError("scenario and prior dimensions differ")
    engine_ss, outcome_ss = np.random.SeedSequence(seed).spawn(2)
    engine_rng = np.random.Generator(np.random.Philox(engine_ss))
    outcome_rng = np.random.Generator(np.random.Philox(outcome_ss))
    grid = scenario.grid

    state = start_trial(cfg, prior, scenario.dims)
    while state.status == STATUS_RUNNING:
        if state.pending:
            assignments = []
            for _, dose in state.pending:
                p_star = grid[dose.row - 1, dose.col - 1]
                assignments.append((dose, bool(outcome_rng.random() < p_star)))
            state = record_outcomes(state, assignments)
        else:
            state = advance(state, cfg, prior, engine_rng)

    if state.status == STATUS_COMPLETED:
        recommended = frozenset(
            recommend(state.last_summary.medians, state.data, cfg.theta, rec_cfg)
        )
    else:
        recommended = frozenset()
    return TrialResult(
        recommended=recommended,
        allocation=state.data.n.reshape(-1),
        dlt_total=int(state.data.z.sum()),
        enrolled=int(state.data.n.sum()),
        stopped_early=state.status == STATUS_STOPPED,
        seed=seed,
    )


def aggregate(
    results: list[TrialResult],
    scenario: Scenario,
    theta: float,
    delta: float = 0.1,
) -> OperatingCharacteristics:
    """Fold replicate results into operating characteristics.

    Each trial's recommendation weight of 1 splits equally among its
    recommended doses; experimentation shares are patient-weighted over
    all trials.  exp_none stays 0 unless a trial enrolls no patients.
    """
    if not results:
        raise DomainError("cannot aggregate zero trial results")
    n_replicates = len(results)
    categories = [classify_dose(p, theta) for p in scenario.true_p]
    overtoxic = np.array([is_overtoxic(p, theta, delta) for p in scenario.true_p])

    rec_weight = {AT_THETA: 0.0, WITHIN_10: 0.0, BEYOND_10: 0.0}
    rec_none_count = 0.0
    rec_over = 0.0
    for result in results:
        if not result.recommended:
            rec_none_count += 1.0
            continue
        weight = 1.0 / len(result.recommended)
        for dose in result.recommended:
            k = flat_index(dose, scenario.dims) - 1
            rec_weight[categories[k]] += weight
            if overtoxic[k]:
                rec_over += weight

    alloc = np.vstack([result.allocation for result in results])
    per_dose = alloc.sum(axis=0).astype(float)
    total_patients = float(per_dose.sum())
    if total_patients > 0.0:
        cat_share = {
            name: 100.0 * per_dose[[c == name for c in categories]].sum() / total_patients
            for name in (AT_THETA, WITHIN_10, BEYOND_10)
        }
        exp_none = 0.0
        alloc_over = 100.0 * per_dose[overtoxic].sum() / total_patients
    else:
        cat_share = {AT_THETA: 0.0, WITHIN_10: 0.0, BEYOND_10: 0.0}
        exp_none = 100.0
        alloc_over = 0.0

    rates = np.array(
        [r.dlt_total / r.enrolled for r in results if r.enrolled > 0], dtype=float
    )
    excess_level = theta + delta + _BOUNDARY_GUARD
    scale = 100.0 / n_replicates
    return OperatingCharacteristics(
        rec_at_theta=scale * rec_weight[AT_THETA],
        rec_within_10=scale * rec_weight[WITHIN_10],
        rec_beyond_10=scale * rec_weight[BEYOND_10],
        rec_none=scale * rec_none_count,
        exp_at_theta=cat_share[AT_THETA],
        exp_within_10=cat_share[WITHIN_10],
        exp_beyond_10=cat_share[BEYOND_10],
        exp_none=exp_none,
        rec_overtoxic=scale * rec_over,
        alloc_overtoxic=alloc_over,
        mean_dlt_rate=100.0 * float(rates.mean()) if rates.size else 0.0,
        pct_trials_excess_dlt=100.0 * float((rates > excess_level).mean())
        if rates.size
        else 0.0,
        replicates=n_replicates,
    )


@dataclass(frozen=True)
class StudySpec:
    """One design applied to a list of scenarios for R replicates."""

    scenarios: tuple[Scenario, ...]
    design: DesignConfig
    prior: ShapeGrid
    replicates: int
    master_seed: int = 0
    workers: int = 1
    recommender: RecommenderConfig = field(default_factory=RecommenderConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise DomainError("study needs at least one scenario")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")
        for scenario in self.scenarios:
            if scenario.dims != self.prior.dims:
                raise DomainError(
                    f"scenario {scenario.name} dims do not match the prior grid"
                )


def _replicate_seed(master_seed: int, scenario_index: int, replicate: int) -> int:
    words = np.random.SeedSequence(
        [master_seed, scenario_index, replicate]
    ).generate_state(1, np.uint64)
    return int(words[0] >> np.uint64(1))


def _run_replicate(args) -> TrialResult:
    scenario, cfg, prior, rec_cfg, seed = args
    return simulate_trial(scenario, cfg, prior, rec_cfg, seed)


def run_study(spec: StudySpec) -> dict:
    """Replicate every scenario and build the machine-readable report.

    Each scenario runs under the design with theta replaced by the
    scenario's own target, so conduct and classification always agree.
    Replicate seeds derive from (master_seed, scenario index, replicate
    index) alone, and results merge in replicate order, so the report is
    identical for any worker count.
    """
    scenario_blocks = []
    for s_idx, scenario in enumerate(spec.scenarios):
        cfg = replace(spec.design, theta=scenario.theta)
        tasks = [
            (
                scenario,
                cfg,
                spec.prior,
                spec.recommender,
                _replicate_seed(spec.master_seed, s_idx, r),
            )
            for r in range(spec.replicates)
        ]
        if spec.workers > 1:
            chunk = max(1, spec.replicates // (4 * spec.workers))
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                results = list(pool.map(_run_replicate, tasks, chunksize=chunk))
        else:
            results = [_run_replicate(task) for task in tasks]
        oc = aggregate(results, scenario, scenario.theta)
        scenario_blocks.append(
            {
                "name": scenario.name,
                "theta": scenario.theta,
                "n_rows": scenario.dims.n_rows,
                "n_cols": scenario.dims.n_cols,
                "true_p": scenario.true_p.tolist(),
                "stopped_early_pct": 100.0
                * sum(r.stopped_early for r in results)
                / len(results),
                "operating_characteristics": _oc_dict(oc),
            }
        )

    design = spec.design
    return {
        "schema": "dualdose-report-v1",
        "master_seed": spec.master_seed,
        "replicates": spec.replicates,
        "design": {
            "theta": design.theta,
            "n_max": design.n_max,
            "gamma": design.gamma,
            "epsilon": design.epsilon,
            "rho": design.rho,
            "first_cohort_size": design.first_cohort_size,
            "second_cohort_size": design.second_cohort_size,
            "later_cohort_size": design.later_cohort_size,
            "safety_multiplier": design.safety_multiplier,
            "chain_keep": design.gibbs.n_keep,
            "chain_burn": design.gibbs.n_burn,
        },
        "prior": {
            "n_rows": spec.prior.dims.n_rows,
            "n_cols": spec.prior.dims.n_cols,
            "alpha": spec.prior.flat_alpha().tolist(),
            "beta": spec.prior.flat_beta().tolist(),
        },
        "scenarios": scenario_blocks,
    }


_OC_FIELDS = (
    "rec_at_theta",
    "rec_within_10",
    "rec_beyond_10",
    "rec_none",
    "exp_at_theta",
    "exp_within_10",
    "exp_beyond_10",
    "exp_none",
    "rec_overtoxic",
    "alloc_overtoxic",
    "mean_dlt_rate",
    "pct_trials_excess_dlt",
    "replicates",
)


def _oc_dict(oc: OperatingCharacteristics) -> dict:
    return {name: getattr(oc, name) for name in _OC_FIELDS}


def write_report_json(report: dict, path: str) -> None:
    """Write the full-precision report; identical inputs give identical bytes."""
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


CSV_COLUMNS = ("scenario", "theta") + _OC_FIELDS + ("stopped_early_pct",)


def write_report_csv(report: dict, path: str) -> None:
    """One row per scenario with the documented fixed column order."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for block in report["scenarios"]:
            oc = block["operating_characteristics"]
            writer.writerow(
                [block["name"], repr(block["theta"])]
                + [repr(oc[name]) for name in _OC_FIELDS]
                + [repr(block["stopped_early_pct"])]
            )


def format_report_table(report: dict) -> str:
    """Fixed-width summary table in the published column layout."""
    header = (
        f"{'scenario':<10}{'rec at':>8}{'rec 1-10':>10}{'rec >10':>9}"
        f"{'rec none':>10}{'exp at':>8}{'exp 1-10':>10}{'exp >10':>9}"
        f"{'DLT %':>8}{'excess %':>10}"
    )
    lines = [header, "-" * len(header)]
    for block in report["scenarios"]:
        oc = block["operating_characteristics"]
        lines.append(
            f"{block['name']:<10}"
            f"{oc['rec_at_theta']:>8.1f}{oc['rec_within_10']:>10.1f}"
            f"{oc['rec_beyond_10']:>9.1f}{oc['rec_none']:>10.1f}"
            f"{oc['exp_at_theta']:>8.1f}{oc['exp_within_10']:>10.1f}"
            f"{oc['exp_beyond_10']:>9.1f}"
            f"{oc['mean_dlt_rate']:>8.1f}{oc['pct_trials_excess_dlt']:>10.1f}"
        )
    return "\n".join(lines)
