"""Final dose recommendation: expanding asymmetric window around the target.

Starting from a window [theta - l0, theta + u0] over the posterior medians
of experimented doses, the margins grow stepwise until some candidate falls
inside or both margin budgets are spent.  Doses never tried are not
candidates: their medians are prior-dominated, so letting them halt the
expansion would mask nearby doses with real data.  The lower margin grows
faster and farther than the upper one (overdosing is worse than
underdosing), and when at least half the doses look above-target the upper
margin grows even more slowly.  Among candidates in the final window, those
treated more than once are recommended; doses treated exactly once are the
fallback; when no experimented dose ever enters, nothing is recommended.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .lattice import DoseIndex
from .sampler import ObservedData

__all__ = [
    "RecommendationDiagnostics",
    "RecommenderConfig",
    "is_toxic_scenario",
    "recommend",
    "recommend_with_diagnostics",
]


@dataclass(frozen=True)
class RecommenderConfig:
    """Window margins and growth steps; derived defaults follow the deltas."""

    delta_l: float = 0.1
    delta_u: float = 0.05
    l0: float = 0.05
    u0: float = 0.0
    gamma_l: float | None = None  # default delta_l / 2
    gamma_u: float | None = None  # default delta_u / 2
    eta_u: float | None = None  # default delta_u / 5

    def __post_init__(self):
        if self.gamma_l is None:
            object.__setattr__(self, "gamma_l", self.delta_l / 2)
        if self.gamma_u is None:
            object.__setattr__(self, "gamma_u", self.delta_u / 2)
        if self.eta_u is None:
            object.__setattr__(self, "eta_u", self.delta_u / 5)
        if min(self.delta_l, self.delta_u, self.l0, self.u0) < 0.0:
            raise ConfigurationError("margins must be non-negative")
        if self.delta_u > self.delta_l:
            raise ConfigurationError("delta_u must not exceed delta_l")
        # positive steps guarantee the loop's termination bound
        if min(self.gamma_l, self.gamma_u, self.eta_u) <= 0.0:
            raise ConfigurationError("growth steps must be positive")


def is_toxic_scenario(medians: np.ndarray, theta: float) -> bool:
    """True iff at least half the doses have posterior median above theta."""
    med = np.asarray(medians, dtype=float).reshape(-1)
    return bool(np.mean(med > theta) >= 0.5)


@dataclass(frozen=True)
class RecommendationDiagnostics:
    """How the final set was reached: scenario call, applied window margins,
    and which experimented-dose filter produced the result."""

    toxic_scenario: bool
    window_lower: float  # final l applied to the selection
    window_upper: float  # final u applied to the selection
    path: str  # "multi", "single", or "none"


def recommend_with_diagnostics(
    medians: np.ndarray,
    data: ObservedData,
    theta: float,
    cfg: RecommenderConfig | None = None,
) -> tuple[set[DoseIndex], RecommendationDiagnostics]:
    """Expanding-window selection plus a trace of how it concluded."""
    if cfg is None:
        cfg = RecommenderConfig()
    med = np.asarray(medians, dtype=float)
    if med.shape != (data.dims.n_rows, data.dims.n_cols):
        raise DomainError("medians grid does not match the data dimensions")

    # the toxic flag reads the whole grid, the window only experimented doses
    toxic = is_toxic_scenario(med, theta)
    experimented = data.n >= 1
    selected = np.zeros_like(med, dtype=bool)
    l = cfg.l0
    u = cfg.u0
    l_used, u_used = l, u
    while (not selected.any()) and (l <= cfg.delta_l or u <= cfg.delta_u):
        diff = med - theta
        selected = experimented & (diff >= -l) & (diff <= u)
        l_used, u_used = l, u
        if l <= cfg.delta_l:
            l += cfg.gamma_l
        if u <= cfg.delta_u:
            u += cfg.eta_u if toxic else cfg.gamma_u

    if not selected.any():
        diag = RecommendationDiagnostics(toxic, l_used, u_used, "none")
        return set(), diag
    multi = selected & (data.n > 1)
    if multi.any():
        chosen, path = multi, "multi"
    else:
        # every selected dose was experimented, so what is not multi is single
        chosen, path = selected & (data.n == 1), "single"
    doses = {DoseIndex(int(i) + 1, int(j) + 1) for i, j in np.argwhere(chosen)}
    return doses, RecommendationDiagnostics(toxic, l_used, u_used, path)


def recommend(
    medians: np.ndarray,
    data: ObservedData,
    theta: float,
    cfg: RecommenderConfig | None = None,
) -> set[DoseIndex]:
    """Run the expanding-window selection over experimented doses.

    Returns the doses in the final window treated more than once; if none
    were, those treated exactly once; the empty set when the window never
    captures an experimented dose.
    """
    return recommend_with_diagnostics(medians, data, theta, cfg)[0]
