"""Trial engine mechanics: allocation, recording, stopping, determinism."""

import numpy as np
import pytest

from dualdose.engine import (
    STATUS_COMPLETED,
    STATUS_RUNNING,
    STATUS_STOPPED,
    DesignConfig,
    advance,
    check_stopping,
    next_cohort_doses,
    record_outcomes,
    second_cohort_doses,
    start_trial,
)
from dualdose.errors import ConfigurationError, ProtocolError
from dualdose.lattice import DoseIndex, GridDims, ShapeGrid
from dualdose.sampler import ChainSummary, GibbsConfig

DIMS = GridDims(2, 2)
PRIOR = ShapeGrid.from_flat([1.0, 0.5, 0.5, 0.3], [4.0, 2.0, 2.0, 3.0], DIMS)
FAST_GIBBS = GibbsConfig(n_keep=400, n_burn=100, seed=0)


def make_cfg(**kw):
    base = dict(theta=0.2, n_max=12, gamma=0.1, epsilon=0.8, gibbs=FAST_GIBBS)
    base.update(kw)
    return DesignConfig(**base)


def fake_summary(medians):
    med = np.asarray(medians, dtype=float)
    dims = GridDims(*med.shape)
    return ChainSummary(
        medians=med, means=med, dims=dims, n_keep=1, n_burn=0, seed=0
    )


class FakeRng:
    """Deterministic stand-in feeding preset uniforms to direction draws."""

    def __init__(self, uniforms):
        self.uniforms = list(uniforms)

    def random(self):
        return self.uniforms.pop(0)

    def integers(self, low, high=None):
        return 12345


def run_trial(cfg, true_p, master_seed):
    """Drive a trial to termination, Bernoulli outcomes from true_p."""
    rng = np.random.default_rng(master_seed)
    state = start_trial(cfg, PRIOR, DIMS)
    while state.status == STATUS_RUNNING:
        outcomes = [
            (dose, bool(rng.random() < true_p[dose.row - 1, dose.col - 1]))
            for _, dose in state.pending
        ]
        state = record_outcomes(state, outcomes)
        state = advance(state, cfg, PRIOR, rng)
    return state


def test_start_trial_allocates_first_cohort():
    cfg = make_cfg()
    state = start_trial(cfg, PRIOR, DIMS)
    assert state.status == STATUS_RUNNING
    assert state.enrolled == 0
    assert state.n_allocated == 4
    assert [d for _, d in state.pending] == [DoseIndex(1, 1)] * 4
    assert [p for p, _ in state.pending] == [1, 2, 3, 4]
    allocs = [e for e in state.events if e.kind == "allocation"]
    assert len(allocs) == 4
    assert all(e.payload["dose"] == [1, 1] for e in allocs)

    single = start_trial(make_cfg(first_cohort_size=1, n_max=12), PRIOR, DIMS)
    assert single.n_allocated == 1


def test_record_outcomes_updates_counts():
    cfg = make_cfg()
    state = start_trial(cfg, PRIOR, DIMS)
    state = record_outcomes(
        state, [(DoseIndex(1, 1), True)] + [(DoseIndex(1, 1), False)] * 3
    )
    assert state.enrolled == 4
    assert state.data.n[0, 0] == 4
    assert state.data.z[0, 0] == 1
    assert not state.pending
    outcome_events = [e for e in state.events if e.kind == "outcome"]
    assert len(outcome_events) == 4
    assert sum(e.payload["dlt"] for e in outcome_events) == 1


def test_record_outcomes_protocol_errors():
    cfg = make_cfg()
    state = start_trial(cfg, PRIOR, DIMS)
    with pytest.raises(ProtocolError):
        record_outcomes(state, [(DoseIndex(2, 2), False)])
    state = record_outcomes(state, [(DoseIndex(1, 1), False)] * 4)
    with pytest.raises(ProtocolError):
        record_outcomes(state, [(DoseIndex(1, 1), False)])  # nothing pending
    # empty assignment list is a no-op
    assert record_outcomes(start_trial(cfg, PRIOR, DIMS), []).enrolled == 0


def test_advance_preconditions():
    cfg = make_cfg()
    rng = np.random.default_rng(0)
    state = start_trial(cfg, PRIOR, DIMS)
    with pytest.raises(ProtocolError):
        advance(state, cfg, PRIOR, rng)  # outcomes still pending
    empty = record_outcomes(state, [])
    with pytest.raises(ProtocolError):
        advance(empty, cfg, PRIOR, rng)


def test_second_cohort_doses_examples():
    med = np.array(
        [
            [0.10, 0.19, 0.31, 0.40],
            [0.21, 0.30, 0.42, 0.52],
            [0.35, 0.44, 0.55, 0.65],
            [0.50, 0.60, 0.70, 0.80],
        ]
    )
    row_dose, col_dose = second_cohort_doses(fake_summary(med), 0.2, GridDims(4, 4))
    assert row_dose == DoseIndex(1, 2)
    assert col_dose == DoseIndex(2, 1)

    # exact float tie: |0.25 - 0.5| == |0.75 - 0.5|, smaller index wins
    tie = np.array([[0.25, 0.75], [0.8, 0.9]])
    row_dose, col_dose = second_cohort_doses(fake_summary(tie), 0.5, DIMS)
    assert row_dose == DoseIndex(1, 1)
    assert col_dose == DoseIndex(1, 1)


def test_second_cohort_split_patients():
    cfg = make_cfg(theta=0.2)
    state = start_trial(cfg, PRIOR, DIMS)
    state = record_outcomes(state, [(DoseIndex(1, 1), False)] * 4)
    state = advance(state, cfg, PRIOR, np.random.default_rng(1))
    assert state.cohort_index == 2
    assert len(state.pending) == 4
    patients = [p for p, _ in state.pending]
    assert patients == [5, 6, 7, 8]
    row_dose, col_dose = state.current_pair
    # patients 5,6 on the row-1 dose, 7,8 on the column-1 dose
    assert [d for _, d in state.pending] == [row_dose, row_dose, col_dose, col_dose]
    assert row_dose.row == 1
    assert col_dose.col == 1


def make_state_with_pair(pair, cohort=3):
    cfg = make_cfg()
    state = start_trial(cfg, PRIOR, DIMS)
    object.__setattr__(state, "current_pair", pair)
    object.__setattr__(state, "cohort_index", cohort)
    return state


def test_next_cohort_doses_follows_drawn_direction():
    # p = [[0.05, 0.15], [0.25, 0.40]]: safe minima, no override
    med = np.array([[0.05, 0.15], [0.25, 0.40]])
    state = make_state_with_pair((DoseIndex(1, 1), DoseIndex(1, 1)))
    cfg = make_cfg(theta=0.2)
    a, b = next_cohort_doses(state, fake_summary(med), cfg, FakeRng([0.3, 0.7]))
    assert a.dose == DoseIndex(1, 2)  # horizontal: row 1 line, 0.15 closest to 0.2
    assert b.dose == DoseIndex(2, 1)  # vertical: column 1 line, 0.25 closest
    assert (a.direction, a.draw, a.overridden) == ("horizontal", 0.3, False)
    assert (b.direction, b.draw, b.overridden) == ("vertical", 0.7, False)


def test_next_cohort_doses_safety_override():
    # horizontal minimum 0.35 > 1.5 * 0.2, vertical minimum 0.10: override
    med = np.array([[0.10, 0.12], [0.35, 0.55]])
    state = make_state_with_pair((DoseIndex(2, 2), DoseIndex(2, 2)))
    cfg = make_cfg(theta=0.2)
    a, b = next_cohort_doses(state, fake_summary(med), cfg, FakeRng([0.3, 0.3]))
    # both drawn horizontal (q = med[1,0] = 0.35 > 0.3) -> forced vertical,
    # column 2 line = (0.12, 0.55), closest to 0.2 is 0.12 at row 1
    assert a.dose == DoseIndex(1, 2)
    assert b.dose == DoseIndex(1, 2)
    assert a.direction == "vertical" and a.overridden


def test_next_cohort_doses_both_over_limit_takes_smaller():
    med = np.array([[0.45, 0.55], [0.35, 0.65]])
    state = make_state_with_pair((DoseIndex(2, 2), DoseIndex(2, 2)))
    cfg = make_cfg(theta=0.2)
    # q_horizontal = med[1,0] = 0.35, q_vertical = med[0,1] = 0.55: both over
    # 0.30, horizontal is smaller regardless of the draw
    for u in (0.3, 0.7):
        a, _ = next_cohort_doses(state, fake_summary(med), cfg, FakeRng([u, u]))
        assert a.dose == DoseIndex(2, 1)  # row 2 line = (0.35, 0.65), argmin at col 1


def test_second_cohort_cannot_skip_levels():
    # the globally closest medians sit at level 3 of each line, but with
    # only (1, 1) treated the reachable candidates stop at level 2
    med = np.array(
        [
            [0.05, 0.08, 0.19, 0.30],
            [0.10, 0.15, 0.30, 0.45],
            [0.20, 0.30, 0.45, 0.60],
            [0.35, 0.45, 0.60, 0.75],
        ]
    )
    row_dose, col_dose = second_cohort_doses(fake_summary(med), 0.2, GridDims(4, 4))
    assert row_dose == DoseIndex(1, 2)  # 0.08 beats 0.05; 0.19 is out of reach
    assert col_dose == DoseIndex(2, 1)  # 0.10 beats 0.05; the exact 0.20 is not


def test_next_cohort_escalation_capped_one_level():
    # from (1, 1) the row-1 argmin lies at column 4, but escalation may
    # climb at most one level per cohort
    med = np.array([[0.02, 0.05, 0.10, 0.19], [0.30, 0.40, 0.50, 0.60]])
    state = make_state_with_pair((DoseIndex(1, 1), DoseIndex(1, 1)))
    cfg = make_cfg(theta=0.2)
    a, _ = next_cohort_doses(state, fake_summary(med), cfg, FakeRng([0.3, 0.3]))
    assert a.dose == DoseIndex(1, 2)


def test_next_cohort_deescalation_unrestricted():
    # from (1, 4) the best median sits three levels down; de-escalation
    # takes it in a single step
    med = np.array([[0.19, 0.28, 0.40, 0.55], [0.45, 0.55, 0.65, 0.75]])
    state = make_state_with_pair((DoseIndex(1, 4), DoseIndex(1, 4)))
    cfg = make_cfg(theta=0.2)
    a, _ = next_cohort_doses(state, fake_summary(med), cfg, FakeRng([0.3, 0.3]))
    assert a.dose == DoseIndex(1, 1)


def test_check_stopping_thresholds():
    samples = np.column_stack([np.linspace(0.01, 0.99, 100)] * 4)
    summary = ChainSummary(
        medians=np.full((2, 2), 0.5),
        means=np.full((2, 2), 0.5),
        dims=DIMS,
        n_keep=100,
        n_burn=0,
        seed=0,
        samples=samples,
    )
    # threshold 0.3: ~70% of the kept draws lie above
    cfg = make_cfg(theta=0.2, gamma=0.1, epsilon=0.6)
    stop, tail = check_stopping(summary, cfg)
    assert stop and tail == pytest.approx(0.7, abs=0.02)
    calm = make_cfg(theta=0.2, gamma=0.1, epsilon=0.71)
    assert check_stopping(summary, calm)[0] is False
    never = make_cfg(theta=0.2, gamma=0.1, epsilon=1.0)
    assert check_stopping(summary, never)[0] is False


def test_trial_completes_under_safe_scenario():
    cfg = make_cfg(theta=0.2, n_max=12, epsilon=1.0)
    true_p = np.array([[0.05, 0.1], [0.1, 0.2]])
    state = run_trial(cfg, true_p, master_seed=11)
    assert state.status == STATUS_COMPLETED
    assert state.enrolled == 12
    assert state.events[-1].payload["reason"] == "completed"


def test_trial_stops_under_hot_scenario():
    cfg = make_cfg(theta=0.2, n_max=30, epsilon=0.7)
    true_p = np.array([[0.75, 0.85], [0.85, 0.95]])
    state = run_trial(cfg, true_p, master_seed=5)
    assert state.status == STATUS_STOPPED
    assert state.enrolled < 30
    assert state.events[-1].payload["reason"] == "toxicity"


def test_event_log_conservation_and_legality():
    cfg = make_cfg(theta=0.2, n_max=16, epsilon=1.0)
    true_p = np.array([[0.1, 0.25], [0.25, 0.4]])
    state = run_trial(cfg, true_p, master_seed=3)
    outcomes = [e for e in state.events if e.kind == "outcome"]
    assert len(outcomes) == state.data.n.sum()
    assert sum(e.payload["dlt"] for e in outcomes) == state.data.z.sum()
    for e in state.events:
        if e.kind == "allocation" and e.payload["source"] is not None:
            (r1, c1), (r2, c2) = e.payload["dose"], e.payload["source"]
            assert (r1 == r2) or (c1 == c2)  # never a diagonal move
    seqs = [e.seq for e in state.events]
    assert seqs == sorted(seqs) == list(range(len(seqs)))


def test_trial_determinism():
    cfg = make_cfg(theta=0.2, n_max=12, epsilon=1.0)
    true_p = np.array([[0.1, 0.2], [0.2, 0.35]])
    s1 = run_trial(cfg, true_p, master_seed=42)
    s2 = run_trial(cfg, true_p, master_seed=42)
    s3 = run_trial(cfg, true_p, master_seed=43)
    assert s1.events == s2.events
    assert s1.events != s3.events


def test_final_cohort_truncated_to_n_max():
    cfg = make_cfg(theta=0.2, n_max=9, epsilon=1.0)
    true_p = np.array([[0.1, 0.2], [0.2, 0.35]])
    state = run_trial(cfg, true_p, master_seed=8)
    assert state.status == STATUS_COMPLETED
    assert state.enrolled == 9


def test_advance_on_terminal_state_raises():
    cfg = make_cfg(theta=0.2, n_max=12, epsilon=1.0)
    true_p = np.array([[0.05, 0.1], [0.1, 0.2]])
    state = run_trial(cfg, true_p, master_seed=11)
    with pytest.raises(ProtocolError):
        advance(state, cfg, PRIOR, np.random.default_rng(0))
    with pytest.raises(ProtocolError):
        record_outcomes(state, [])


def test_design_config_validation():
    with pytest.raises(ConfigurationError):
        make_cfg(theta=0.0)
    with pytest.raises(ConfigurationError):
        make_cfg(epsilon=0.0)
    with pytest.raises(ConfigurationError):
        make_cfg(epsilon=1.2)
    with pytest.raises(ConfigurationError):
        make_cfg(gamma=-0.1)
    with pytest.raises(ConfigurationError):
        make_cfg(n_max=7)  # below first + second cohort sizes
    with pytest.raises(ConfigurationError):
        make_cfg(rho=0.0)
    assert make_cfg(epsilon=1.0).epsilon == 1.0
