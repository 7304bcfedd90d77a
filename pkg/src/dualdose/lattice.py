"""Dose lattice geometry: indexing, partial order and neighbour bounds.

A dual-agent trial lays doses out on an I x J grid where row i is the level
of the first agent and column j is the level of the second.  Toxicity
probabilities must increase strictly along every row and every column;
off-diagonal pairs are incomparable and may tie.  Grids are stored as
numpy arrays of shape (I, J); public dose coordinates are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "GridDims",
    "DoseIndex",
    "flat_index",
    "dose_index",
    "satisfies_partial_order",
    "neighbor_bounds",
    "validate_prob_grid",
    "ShapeGrid",
]


@dataclass(frozen=True)
class GridDims:
    """Dimensions of the dose grid: n_rows levels of agent A, n_cols of agent B."""

    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise DomainError(f"grid dimensions must be >= 1, got {self.n_rows}x{self.n_cols}")

    @property
    def n_doses(self) -> int:
        return self.n_rows * self.n_cols


@dataclass(frozen=True, order=True)
class DoseIndex:
    """A dose combination, 1-based: row = agent-A level, col = agent-B level."""

    row: int
    col: int

    def validate(self, dims: GridDims) -> None:
        if not (1 <= self.row <= dims.n_rows and 1 <= self.col <= dims.n_cols):
            raise DomainError(f"dose {self} outside {dims.n_rows}x{dims.n_cols} grid")


def flat_index(dose: DoseIndex, dims: GridDims) -> int:
    """Row-major position of a dose, 1-based: (row-1)*n_cols + col."""
    dose.validate(dims)
    return (dose.row - 1) * dims.n_cols + dose.col


def dose_index(k: int, dims: GridDims) -> DoseIndex:
    """Inverse of flat_index."""
    if not (1 <= k <= dims.n_doses):
        raise DomainError(f"flat index {k} outside 1..{dims.n_doses}")
    return DoseIndex(row=(k - 1) // dims.n_cols + 1, col=(k - 1) % dims.n_cols + 1)


def validate_prob_grid(p: np.ndarray, dims: GridDims) -> np.ndarray:
    """Check shape and open-interval membership; returns p as a float array."""
    p = np.asarray(p, dtype=float)
    if p.shape != (dims.n_rows, dims.n_cols):
        raise DomainError(f"grid shape {p.shape} != ({dims.n_rows}, {dims.n_cols})")
    if not np.all(np.isfinite(p)):
        raise DomainError("probability grid contains non-finite values")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    return p


def satisfies_partial_order(p: np.ndarray, dims: GridDims) -> bool:
    """True iff p increases strictly along every row and every column.

    Adjacent comparisons suffice: strictness is transitive, and doses that
    differ in both coordinates in opposite directions are incomparable.
    """
    p = validate_prob_grid(p, dims)
    if dims.n_rows > 1 and not np.all(np.diff(p, axis=0) > 0.0):
        return False
    if dims.n_cols > 1 and not np.all(np.diff(p, axis=1) > 0.0):
        return False
    return True


def neighbor_bounds(k: int, p: np.ndarray, dims: GridDims) -> tuple[float, float]:
    """Open interval the k-th coordinate must occupy given its neighbours.

    Lower bound is the max of the doses one step below in each agent
    (0 when the dose is minimal in both), upper bound the min of the doses
    one step above (1 when maximal in both).  Only adjacent cells matter;
    farther cells are implied by transitivity.
    """
    d = dose_index(k, dims)
    p = np.asarray(p, dtype=float)
    i, j = d.row - 1, d.col - 1  # 0-based
    lower = 0.0
    if i > 0:
        lower = max(lower, p[i - 1, j])
    if j > 0:
        lower = max(lower, p[i, j - 1])
    upper = 1.0
    if i < dims.n_rows - 1:
        upper = min(upper, p[i + 1, j])
    if j < dims.n_cols - 1:
        upper = min(upper, p[i, j + 1])
    return lower, upper


@dataclass(frozen=True)
class ShapeGrid:
    """Per-dose beta shape parameters, stored as (n_rows, n_cols) arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    dims: GridDims

    def __post_init__(self):
        for name, arr in (("alpha", self.alpha), ("beta", self.beta)):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (self.dims.n_rows, self.dims.n_cols):
                raise DomainError(f"{name} shape {arr.shape} != grid {self.dims}")
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
                raise DomainError(f"{name} entries must be finite and > 0")
            object.__setattr__(self, name, arr)

    @classmethod
    def from_flat(cls, alpha, beta, dims: GridDims) -> "ShapeGrid":
        """Build from row-major flat vectors (same order as flat_index)."""
        shape = (dims.n_rows, dims.n_cols)
        return cls(
            alpha=np.asarray(alpha, dtype=float).reshape(shape),
            beta=np.asarray(beta, dtype=float).reshape(shape),
            dims=dims,
        )

    def flat_alpha(self) -> np.ndarray:
        return self.alpha.reshape(-1).copy()

    def flat_beta(self) -> np.ndarray:
        return self.beta.reshape(-1).copy()

    def total_mass(self) -> float:
        """Sum of alpha + beta over all doses (prior pseudo-count total)."""
        return float(np.sum(self.alpha) + np.sum(self.beta))
