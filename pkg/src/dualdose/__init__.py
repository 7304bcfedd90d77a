"""Adaptive dose finding for dual-agent trials with a lattice-restricted beta model."""

from .engine import (
    STATUS_COMPLETED,
    STATUS_RUNNING,
    STATUS_STOPPED,
    DesignConfig,
    TrialEvent,
    TrialState,
    advance,
    check_stopping,
    record_outcomes,
    start_trial,
)
from .errors import (
    ConfigurationError,
    DomainError,
    DualDoseError,
    ProtocolError,
    SearchFailure,
)
from .hyperparam import (
    GridSearchConfig,
    PriorCriteria,
    ShapeTemplate,
    build_shape_vectors,
    grid_search,
    solve_order_stat_shapes,
)
from .lattice import DoseIndex, GridDims, ShapeGrid
from .recommend import (
    RecommenderConfig,
    is_toxic_scenario,
    recommend,
    recommend_with_diagnostics,
)
from .sampler import (
    ChainSummary,
    GibbsConfig,
    ObservedData,
    compute_omega,
    pseudo_posterior_shapes,
    run_chain,
    sample_truncated_beta,
    tail_probability,
)
from .scenarios import (
    PRESET_NAMES,
    Scenario,
    builtin_scenarios,
    get_preset,
    get_scenario,
    load_scenario,
)
from .simulate import (
    OperatingCharacteristics,
    StudySpec,
    TrialResult,
    aggregate,
    run_study,
    simulate_trial,
    write_report_csv,
    write_report_json,
)

__version__ = "0.1.0"

__all__ = [
    "STATUS_COMPLETED",
    "STATUS_RUNNING",
    "STATUS_STOPPED",
    "ChainSummary",
    "ConfigurationError",
    "DesignConfig",
    "DomainError",
    "DoseIndex",
    "DualDoseError",
    "GibbsConfig",
    "GridDims",
    "GridSearchConfig",
    "ObservedData",
    "OperatingCharacteristics",
    "PRESET_NAMES",
    "PriorCriteria",
    "ProtocolError",
    "RecommenderConfig",
    "Scenario",
    "SearchFailure",
    "ShapeGrid",
    "ShapeTemplate",
    "StudySpec",
    "TrialEvent",
    "TrialResult",
    "TrialState",
    "advance",
    "aggregate",
    "build_shape_vectors",
    "builtin_scenarios",
    "check_stopping",
    "compute_omega",
    "get_preset",
    "get_scenario",
    "grid_search",
    "is_toxic_scenario",
    "load_scenario",
    "pseudo_posterior_shapes",
    "recommend",
    "recommend_with_diagnostics",
    "record_outcomes",
    "run_chain",
    "run_study",
    "sample_truncated_beta",
    "simulate_trial",
    "solve_order_stat_shapes",
    "start_trial",
    "tail_probability",
    "write_report_csv",
    "write_report_json",
]
