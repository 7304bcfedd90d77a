"""Built-in true-toxicity scenarios and named design presets.

Scenario grids are transcribed from the published simulation studies:
seven 4x4 grids (A-G), seven 4x5 grids (II-1..II-7), and five 2x3
grids for the gemcitabine/CB-839 trial design (real-1..real-5).  Rows
index the first agent's levels, columns the second agent's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .engine import DesignConfig
from .errors import ConfigurationError, DomainError
from .lattice import GridDims, ShapeGrid

__all__ = [
    "Scenario",
    "Preset",
    "builtin_scenarios",
    "get_scenario",
    "load_scenario",
    "get_preset",
    "PRESET_NAMES",
]


@dataclass(frozen=True)
class Scenario:
    """One true dose-toxicity surface with its target DLT probability."""

    name: str
    dims: GridDims
    true_p: np.ndarray  # flat, row-major
    theta: float

    def __post_init__(self) -> None:
        p = np.asarray(self.true_p, dtype=float).reshape(-1)
        if p.size != self.dims.n_doses:
            raise DomainError(
                f"scenario {self.name}: {p.size} entries for {self.dims.n_doses} doses"
            )
        if not np.all((p > 0.0) & (p < 1.0)):
            raise DomainError(f"scenario {self.name}: probabilities must lie in (0, 1)")
        grid = p.reshape(self.dims.n_rows, self.dims.n_cols)
        if np.any(np.diff(grid, axis=0) < 0.0) or np.any(np.diff(grid, axis=1) < 0.0):
            raise DomainError(
                f"scenario {self.name}: toxicity must be non-decreasing in each agent"
            )
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"scenario {self.name}: theta must lie in (0, 1)")
        object.__setattr__(self, "true_p", p)

    @property
    def grid(self) -> np.ndarray:
        return self.true_p.reshape(self.dims.n_rows, self.dims.n_cols)


def _scenario(name: str, theta: float, rows: list[list[float]]) -> Scenario:
    arr = np.array(rows, dtype=float)
    dims = GridDims(arr.shape[0], arr.shape[1])
    return Scenario(name=name, dims=dims, true_p=arr.reshape(-1), theta=theta)


_STUDY1 = {
    "A": [
        [0.04, 0.08, 0.12, 0.16],
        [0.10, 0.14, 0.18, 0.22],
        [0.16, 0.20, 0.24, 0.28],
        [0.22, 0.26, 0.30, 0.34],
    ],
    "B": [
        [0.02, 0.04, 0.06, 0.08],
        [0.05, 0.07, 0.09, 0.11],
        [0.08, 0.10, 0.12, 0.14],
        [0.11, 0.13, 0.15, 0.17],
    ],
    "C": [
        [0.10, 0.20, 0.30, 0.40],
        [0.25, 0.35, 0.45, 0.55],
        [0.40, 0.50, 0.60, 0.70],
        [0.55, 0.65, 0.75, 0.85],
    ],
    "D": [
        [0.44, 0.48, 0.52, 0.56],
        [0.50, 0.54, 0.58, 0.62],
        [0.56, 0.60, 0.64, 0.68],
        [0.62, 0.66, 0.70, 0.74],
    ],
    "E": [
        [0.08, 0.18, 0.28, 0.29],
        [0.09, 0.19, 0.29, 0.30],
        [0.10, 0.20, 0.30, 0.31],
        [0.11, 0.21, 0.31, 0.41],
    ],
    "F": [
        [0.12, 0.13, 0.14, 0.15],
        [0.16, 0.18, 0.20, 0.22],
        [0.44, 0.45, 0.46, 0.47],
        [0.50, 0.52, 0.54, 0.55],
    ],
    "G": [
        [0.01, 0.02, 0.03, 0.04],
        [0.04, 0.10, 0.15, 0.20],
        [0.06, 0.15, 0.30, 0.45],
        [0.10, 0.30, 0.50, 0.80],
    ],
}

_STUDY2 = {
    "II-1": [
        [0.05, 0.07, 0.11, 0.16, 0.23],
        [0.07, 0.12, 0.17, 0.24, 0.33],
        [0.12, 0.18, 0.25, 0.33, 0.43],
        [0.18, 0.27, 0.35, 0.43, 0.50],
    ],
    "II-2": [
        [0.01, 0.03, 0.07, 0.09, 0.11],
        [0.04, 0.06, 0.08, 0.10, 0.22],
        [0.09, 0.13, 0.22, 0.25, 0.27],
        [0.12, 0.16, 0.23, 0.28, 0.30],
    ],
    "II-3": [
        [0.30, 0.35, 0.40, 0.50, 0.55],
        [0.40, 0.55, 0.65, 0.75, 0.85],
        [0.50, 0.60, 0.70, 0.80, 0.90],
        [0.55, 0.70, 0.75, 0.85, 0.95],
    ],
    "II-4": [
        [0.01, 0.03, 0.08, 0.12, 0.15],
        [0.02, 0.05, 0.10, 0.16, 0.30],
        [0.07, 0.09, 0.15, 0.25, 0.35],
        [0.10, 0.26, 0.30, 0.33, 0.50],
    ],
    "II-5": [
        [0.07, 0.12, 0.20, 0.25, 0.30],
        [0.10, 0.18, 0.23, 0.30, 0.35],
        [0.30, 0.48, 0.56, 0.65, 0.68],
        [0.40, 0.55, 0.60, 0.66, 0.70],
    ],
    "II-6": [
        [0.10, 0.15, 0.20, 0.30, 0.45],
        [0.11, 0.20, 0.30, 0.40, 0.50],
        [0.15, 0.30, 0.35, 0.50, 0.60],
        [0.30, 0.40, 0.50, 0.60, 0.65],
    ],
    "II-7": [
        [0.11, 0.12, 0.13, 0.14, 0.15],
        [0.14, 0.20, 0.25, 0.30, 0.35],
        [0.16, 0.25, 0.40, 0.55, 0.60],
        [0.20, 0.40, 0.60, 0.90, 0.95],
    ],
}

_REAL = {
    "real-1": [
        [0.05, 0.10, 0.20],
        [0.10, 0.20, 0.30],
    ],
    "real-2": [
        [0.05, 0.20, 0.33],
        [0.15, 0.33, 0.50],
    ],
    "real-3": [
        [0.01, 0.03, 0.07],
        [0.03, 0.07, 0.10],
    ],
    "real-4": [
        [0.30, 0.40, 0.50],
        [0.40, 0.55, 0.65],
    ],
    "real-5": [
        [0.30, 0.50, 0.60],
        [0.54, 0.58, 0.65],
    ],
}


def builtin_scenarios() -> list[Scenario]:
    """All 19 published scenarios in study order."""
    out = [_scenario(name, 0.2, rows) for name, rows in _STUDY1.items()]
    out += [_scenario(name, 0.3, rows) for name, rows in _STUDY2.items()]
    out += [_scenario(name, 0.33, rows) for name, rows in _REAL.items()]
    return out


def get_scenario(name: str) -> Scenario:
    for scenario in builtin_scenarios():
        if scenario.name == name:
            return scenario
    known = ", ".join(s.name for s in builtin_scenarios())
    raise ConfigurationError(f"unknown scenario {name!r}; built-ins: {known}")


def load_scenario(path: str) -> Scenario:
    """Read a scenario from a JSON file with keys name, I, J, theta, p."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        name = doc["name"]
        dims = GridDims(int(doc["I"]), int(doc["J"]))
        theta = float(doc["theta"])
        p = np.asarray(doc["p"], dtype=float)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    return Scenario(name=str(name), dims=dims, true_p=p, theta=theta)


# Calibrated prior shapes.  Each preset freezes one template
# (m, t, M, s, l, u): first cell Beta(m(1-t), mt), last cell
# Beta(Ms, M(1-s)), every other cell Beta(l, u).  The first study uses
# the published vector; the other two were calibrated against their
# extreme-dose median targets (0.05/0.50 and 0.05/0.30) plus the
# study-specific constraints noted below.
_STUDY1_ALPHA = [4.52] + [0.4] * 14 + [0.2]
_STUDY1_BETA = [0.74] + [2.23] * 14 + [13.77]

# The second study's prior guess is its first scenario, so this vector
# was calibrated so the whole induced median grid, not just the corner
# doses, tracks that scenario: template (m, t, M, s, l, u) =
# (8.6, 0.24, 10.2, 0.045, 0.396, 1.804), interior mean 0.18.  Induced
# medians match the first scenario within 0.03 everywhere, extremes
# (0.0552, 0.4961) against targets 0.05/0.50 (chain 10000+1000).
_STUDY2_ALPHA: list[float] | None = [6.536] + [0.396] * 18 + [0.459]
_STUDY2_BETA: list[float] | None = [2.064] + [1.804] * 18 + [9.741]

# The 2x3 trial grid carries heavier anchors: a firm minimum cell
# Beta(2.4, 21.6) and a top cell Beta(0.2, 9.8) that keeps a late run of
# observed toxicities from drifting the top-dose median into the
# recommendation window when the true surface is uniformly safe.
# Template (m, t, M, s, l, u) = (24, 0.9, 10, 0.02, 0.9, 1.6); induced
# extreme-dose medians (0.0470, 0.3036) at chain 10000+1000.
_TRIAL_ALPHA: list[float] | None = [2.4] + [0.9] * 4 + [0.2]
_TRIAL_BETA: list[float] | None = [21.6] + [1.6] * 4 + [9.8]


@dataclass(frozen=True)
class Preset:
    """A named study configuration: design, calibrated prior, scenarios."""

    name: str
    dims: GridDims
    design: DesignConfig
    prior: ShapeGrid
    scenarios: tuple[Scenario, ...] = field(repr=False)


def _prior(alpha: list[float] | None, beta: list[float] | None, dims: GridDims,
           name: str) -> ShapeGrid:
    if alpha is None or beta is None:
        raise ConfigurationError(f"preset {name}: prior calibration pending")
    return ShapeGrid.from_flat(np.array(alpha), np.array(beta), dims)


def get_preset(name: str) -> Preset:
    if name == "study1":
        dims = GridDims(4, 4)
        return Preset(
            name=name,
            dims=dims,
            design=DesignConfig(theta=0.2, n_max=50, gamma=0.1, epsilon=0.8),
            prior=_prior(_STUDY1_ALPHA, _STUDY1_BETA, dims, name),
            scenarios=tuple(_scenario(n, 0.2, rows) for n, rows in _STUDY1.items()),
        )
    if name == "study2":
        dims = GridDims(4, 5)
        return Preset(
            name=name,
            dims=dims,
            # epsilon = 1 disables early termination, matching the
            # second study's no-stopping comparison.
            design=DesignConfig(theta=0.3, n_max=50, gamma=0.1, epsilon=1.0),
            prior=_prior(_STUDY2_ALPHA, _STUDY2_BETA, dims, name),
            scenarios=tuple(_scenario(n, 0.3, rows) for n, rows in _STUDY2.items()),
        )
    if name == "trial":
        dims = GridDims(2, 3)
        return Preset(
            name=name,
            dims=dims,
            design=DesignConfig(theta=0.33, n_max=36, gamma=0.1, epsilon=0.8),
            prior=_prior(_TRIAL_ALPHA, _TRIAL_BETA, dims, name),
            scenarios=tuple(_scenario(n, 0.33, rows) for n, rows in _REAL.items()),
        )
    raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


PRESET_NAMES = ("study1", "study2", "trial")
