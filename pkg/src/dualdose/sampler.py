"""Posterior sampling for the lattice-restricted beta model.

The model places an independent beta(alpha_ij, beta_ij) density on every
dose's DLT probability and truncates the product to the set of grids that
respect the partial order (strictly increasing along rows and columns).
Conditioned on its neighbours, each coordinate is a beta distribution
truncated to the open interval from neighbor_bounds, so a systematic-scan
Gibbs sampler draws each coordinate in flat-index order via the inverse CDF

    x = F^{-1}(F(a) + U (F(b) - F(a)))

with F the regularized incomplete beta function.

Binomial dose outcomes are conjugate: observing z DLTs in n patients at a
dose adds (z, n - z) to its shapes.  Because the truncation couples doses,
a prior that looks weak marginally can swamp small samples, so updates are
tempered: the data enter with weight omega >= 1, chosen so the effective
evidence scales with the prior mass relative to the accrued sample size.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import nextafter

import numpy as np
from scipy.special import betainc, betaincinv

from . import _tables
from .errors import ConfigurationError, DomainError
from .lattice import (
    DoseIndex,
    GridDims,
    ShapeGrid,
    flat_index,
    neighbor_bounds,
    satisfies_partial_order,
    validate_prob_grid,
)

__all__ = [
    "GibbsConfig",
    "ObservedData",
    "ChainSummary",
    "sample_truncated_beta",
    "gibbs_sweep",
    "default_init",
    "run_chain",
    "compute_omega",
    "pseudo_posterior_shapes",
    "tail_probability",
]


@dataclass(frozen=True)
class GibbsConfig:
    """Chain length settings: n_keep retained states after n_burn discarded."""

    n_keep: int = 10000
    n_burn: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_keep < 1:
            raise ConfigurationError("n_keep must be >= 1")
        if self.n_burn < 0:
            raise ConfigurationError("n_burn must be >= 0")
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")


@dataclass(frozen=True)
class ObservedData:
    """Per-dose enrolment counts n and DLT counts z, shape (n_rows, n_cols)."""

    n: np.ndarray
    z: np.ndarray
    dims: GridDims

    def __post_init__(self):
        shape = (self.dims.n_rows, self.dims.n_cols)
        n = np.asarray(self.n)
        z = np.asarray(self.z)
        if n.shape != shape or z.shape != shape:
            raise DomainError(f"count grids must have shape {shape}")
        if not (np.issubdtype(n.dtype, np.integer) and np.issubdtype(z.dtype, np.integer)):
            raise DomainError("counts must be integer arrays")
        if np.any(n < 0) or np.any(z < 0) or np.any(z > n):
            raise DomainError("counts must satisfy 0 <= z <= n")
        object.__setattr__(self, "n", n.astype(np.int64))
        object.__setattr__(self, "z", z.astype(np.int64))

    @classmethod
    def empty(cls, dims: GridDims) -> "ObservedData":
        shape = (dims.n_rows, dims.n_cols)
        return cls(n=np.zeros(shape, dtype=np.int64), z=np.zeros(shape, dtype=np.int64), dims=dims)

    @property
    def total_enrolled(self) -> int:
        return int(self.n.sum())

    @property
    def total_dlt(self) -> int:
        return int(self.z.sum())

    def add(self, dose: DoseIndex, n_patients: int, n_dlt: int) -> "ObservedData":
        """Return a copy with n_patients (n_dlt of them with DLT) at dose."""
        if n_patients < 0 or not (0 <= n_dlt <= n_patients):
            raise DomainError("need 0 <= n_dlt <= n_patients")
        dose.validate(self.dims)
        n = self.n.copy()
        z = self.z.copy()
        n[dose.row - 1, dose.col - 1] += n_patients
        z[dose.row - 1, dose.col - 1] += n_dlt
        return ObservedData(n=n, z=z, dims=self.dims)


@dataclass(frozen=True)
class ChainSummary:
    """Posterior summaries from one chain.

    medians and means have grid shape; samples, when retained, is the
    (n_keep, n_doses) matrix of kept states in flat-index order.
    """

    medians: np.ndarray
    means: np.ndarray
    dims: GridDims
    n_keep: int
    n_burn: int
    seed: int
    samples: np.ndarray | None = None


def sample_truncated_beta(
    alpha: float,
    beta: float,
    lower: float,
    upper: float,
    rng: np.random.Generator,
) -> float:
    """One exact inverse-CDF draw from beta(alpha, beta) truncated to (lower, upper).

    Falls back to a uniform proposal with one rejection test, then the
    midpoint, when the truncation mass underflows.  The result is strictly
    inside (lower, upper).
    """
    if not (alpha > 0.0 and beta > 0.0):
        raise DomainError("shape parameters must be > 0")
    if not (0.0 <= lower < upper <= 1.0):
        raise DomainError(f"need 0 <= lower < upper <= 1, got ({lower}, {upper})")
    fa = betainc(alpha, beta, lower) if lower > 0.0 else 0.0
    fb = betainc(alpha, beta, upper) if upper < 1.0 else 1.0
    u = rng.random()
    mass = fb - fa
    if mass > 1e-14:
        x = float(betaincinv(alpha, beta, fa + u * mass))
    else:
        x = lower + u * (upper - lower)
        logf = lambda v: (alpha - 1.0) * np.log(v) + (beta - 1.0) * np.log1p(-v)
        pad = 1e-9 * (upper - lower)
        env = max(logf(lower + pad), logf(upper - pad))
        if alpha > 1.0 and beta > 1.0:
            mode = (alpha - 1.0) / (alpha + beta - 2.0)
            if lower < mode < upper:
                env = max(env, logf(mode))
        if not (np.log(rng.random()) <= logf(x) - env):
            x = lower + 0.5 * (upper - lower)
    if x <= lower:
        x = nextafter(lower, 1.0)
    if x >= upper:
        x = nextafter(upper, 0.0)
    if x <= lower:
        x = lower + 0.5 * (upper - lower)
    return x


def default_init(dims: GridDims) -> np.ndarray:
    """Canonical strictly order-respecting start: p_ij = (i + j) / (I + J + 2)."""
    i = np.arange(1, dims.n_rows + 1)[:, None]
    j = np.arange(1, dims.n_cols + 1)[None, :]
    return (i + j) / (dims.n_rows + dims.n_cols + 2)


def gibbs_sweep(
    p: np.ndarray,
    shapes: ShapeGrid,
    rng: np.random.Generator,
) -> np.ndarray:
    """One systematic-scan sweep: redraw every coordinate in flat-index order.

    Reference implementation built on sample_truncated_beta; run_chain uses
    a compiled kernel that must stay distributionally identical to this.
    """
    dims = shapes.dims
    p = validate_prob_grid(p, dims)
    if not satisfies_partial_order(p, dims):
        raise DomainError("state violates the lattice partial order")
    out = p.copy()
    for k in range(1, dims.n_doses + 1):
        lower, upper = neighbor_bounds(k, out, dims)
        i = (k - 1) // dims.n_cols
        j = (k - 1) % dims.n_cols
        out[i, j] = sample_truncated_beta(
            float(shapes.alpha[i, j]), float(shapes.beta[i, j]), lower, upper, rng
        )
    return out


def _neighbor_arrays(dims: GridDims):
    """Flat 0-based neighbour indices for each coordinate, -1 when absent."""
    n_rows, n_cols = dims.n_rows, dims.n_cols
    size = n_rows * n_cols
    lo1 = np.full(size, -1, dtype=np.int64)
    lo2 = np.full(size, -1, dtype=np.int64)
    up1 = np.full(size, -1, dtype=np.int64)
    up2 = np.full(size, -1, dtype=np.int64)
    for k in range(size):
        i, j = divmod(k, n_cols)
        if i > 0:
            lo1[k] = (i - 1) * n_cols + j
        if j > 0:
            lo2[k] = i * n_cols + (j - 1)
        if i < n_rows - 1:
            up1[k] = (i + 1) * n_cols + j
        if j < n_cols - 1:
            up2[k] = i * n_cols + (j + 1)
    return lo1, lo2, up1, up2


def run_chain(
    shapes: ShapeGrid,
    config: GibbsConfig,
    init: np.ndarray | None = None,
    keep_samples: bool = False,
) -> ChainSummary:
    """Run a full Gibbs chain and summarize the kept states.

    Same config (including seed) gives bit-identical output.  All kept
    states respect the lattice partial order strictly.
    """
    dims = shapes.dims
    if init is None:
        init = default_init(dims)
    init = validate_prob_grid(init, dims)
    if not satisfies_partial_order(init, dims):
        raise DomainError("init must satisfy the lattice partial order")

    tables = _tables.build_tables(shapes.flat_alpha(), shapes.flat_beta())
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    total = config.n_burn + config.n_keep
    uni = rng.random((total, dims.n_doses))
    ufb = rng.random(4096)

    p = init.reshape(-1).copy()
    keep = np.empty((config.n_keep, dims.n_doses))
    lo1, lo2, up1, up2 = _neighbor_arrays(dims)
    _tables.run_chain_kernel(
        tables.x,
        tables.slope,
        tables.tails,
        tables.shapes,
        tables.pair_of,
        lo1,
        lo2,
        up1,
        up2,
        p,
        uni,
        ufb,
        config.n_burn,
        keep,
    )

    grid_shape = (dims.n_rows, dims.n_cols)
    return ChainSummary(
        medians=np.median(keep, axis=0).reshape(grid_shape),
        means=keep.mean(axis=0).reshape(grid_shape),
        dims=dims,
        n_keep=config.n_keep,
        n_burn=config.n_burn,
        seed=config.seed,
        samples=keep if keep_samples else None,
    )


def compute_omega(shapes: ShapeGrid, data: ObservedData, rho: float = 2.0) -> float:
    """Tempering weight omega = 1 + rho * sum(alpha + beta) / sum(n).

    Recomputed from cumulative totals at every update; requires at least
    one enrolled patient.
    """
    if rho <= 0.0:
        raise ConfigurationError("rho must be > 0")
    total_n = data.total_enrolled
    if total_n == 0:
        raise DomainError("omega is undefined before any patient is enrolled")
    return 1.0 + rho * shapes.total_mass() / total_n


def pseudo_posterior_shapes(prior: ShapeGrid, data: ObservedData, omega: float) -> ShapeGrid:
    """Tempered conjugate update: (alpha + omega z, beta + omega (n - z))."""
    if omega < 1.0:
        raise DomainError("omega must be >= 1")
    if prior.dims != data.dims:
        raise DomainError("prior and data grids differ in shape")
    return ShapeGrid(
        alpha=prior.alpha + omega * data.z,
        beta=prior.beta + omega * (data.n - data.z),
        dims=prior.dims,
    )


def tail_probability(summary: ChainSummary, dose: DoseIndex, threshold: float) -> float:
    """Posterior P(p_dose > threshold) as the fraction of kept draws above it."""
    if summary.samples is None:
        raise DomainError("summary was built without retained samples")
    k = flat_index(dose, summary.dims)
    return float(np.mean(summary.samples[:, k - 1] > threshold))
