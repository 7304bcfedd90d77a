"""Prior calibration for the lattice model.

The prior shapes follow a structured template: the first and last doses
get dedicated beta shapes while every interior dose shares a single
pair.  An order-statistics heuristic turns the two target medians into
a reference shape pair (alpha0, beta0) whose mass bounds the template's
search ranges.  A deterministic grid search then keeps the templates
whose constrained prior medians at the extreme doses match the targets
and returns the feasible candidate with the largest total prior
variance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize, special

from .errors import ConfigurationError, DomainError, SearchFailure
from .lattice import DoseIndex, GridDims, ShapeGrid
from .sampler import GibbsConfig, run_chain

__all__ = [
    "ShapeTemplate",
    "PriorCriteria",
    "GridSearchConfig",
    "CandidateEval",
    "solve_order_stat_shapes",
    "build_shape_vectors",
    "grid_search",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShapeTemplate:
    """Structured shape assignment with shared interior hyperparameters.

    m and M are the effective sample sizes (alpha + beta) of the first
    and last dose.  t is the share of the first dose's mass placed on
    its second shape, s the share of the last dose's mass placed on its
    first shape, so the first dose gets beta(m*(1-t), m*t) and the last
    beta(M*s, M*(1-s)).  Interior doses all share beta(l, u).
    """

    m: float
    M: float
    t: float
    s: float
    l: float
    u: float

    def __post_init__(self) -> None:
        for name in ("m", "M", "l", "u"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"template field {name} must be finite and > 0")
        for name in ("t", "s"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise DomainError(f"template field {name} must lie in (0, 1)")
        if self.u + self.l > min(self.m, self.M):
            raise DomainError(
                "interior mass u + l exceeds min(m, M); the interior prior "
                "would outweigh the extreme doses"
            )


@dataclass(frozen=True)
class PriorCriteria:
    """Feasibility targets for the constrained prior medians.

    A candidate is feasible when the prior-chain median at the first
    dose is within tolerance of target_min, the median at the last dose
    is within tolerance of target_max, and every extra upper bound
    holds strictly.
    """

    target_min: float
    target_max: float
    tolerance: float = 0.01
    extra_upper_bounds: tuple[tuple[DoseIndex, float], ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 < self.target_min < self.target_max < 1.0):
            raise DomainError("need 0 < target_min < target_max < 1")
        if not self.tolerance > 0.0:
            raise DomainError("tolerance must be > 0")
        object.__setattr__(
            self, "extra_upper_bounds", tuple(self.extra_upper_bounds)
        )
        for dose, bound in self.extra_upper_bounds:
            if not isinstance(dose, DoseIndex):
                raise DomainError("extra bound keys must be DoseIndex values")
            if not (0.0 < bound < 1.0):
                raise DomainError("extra bound values must lie in (0, 1)")


@dataclass(frozen=True)
class GridSearchConfig:
    """Grid geometry and chain settings for the template search.

    n_m points are used for each of m and M, n_t for each of t and s,
    and n_l for l.  The l grid spans l_range_factor times min(m, M) of
    the candidate under evaluation, and u is tied to l through
    u = min(m, M) / 2 - l, so the upper factor must stay below 0.5 to
    keep u positive.  gibbs configures the per-candidate chains; the
    winner is re-checked at production length with 3 fresh seeds.
    """

    n_m: int = 15
    n_t: int = 10
    n_l: int = 3
    t_range: tuple[float, float] = (0.2, 0.5)
    s_range: tuple[float, float] = (0.2, 0.5)
    l_range_factor: tuple[float, float] = (0.2, 0.4)
    gibbs: GibbsConfig = field(
        default_factory=lambda: GibbsConfig(n_keep=5000, n_burn=500, seed=0)
    )

    def __post_init__(self) -> None:
        for name in ("n_m", "n_t", "n_l"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in ("t_range", "s_range"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo <= hi < 1.0):
                raise ConfigurationError(f"{name} must be ordered within (0, 1)")
        lo, hi = self.l_range_factor
        if not (0.0 < lo <= hi < 0.5):
            raise ConfigurationError(
                "l_range_factor must be ordered within (0, 0.5) so that "
                "u = min(m, M)/2 - l stays positive"
            )


@dataclass(frozen=True)
class CandidateEval:
    """One evaluated template, in grid enumeration order.

    median_first/median_last are the candidate-chain medians at the
    extreme doses; total_variance sums the per-dose sample variances.
    confirmed marks the winner that survived the re-evaluation seeds.
    """

    index: int
    template: ShapeTemplate
    median_first: float
    median_last: float
    total_variance: float
    feasible: bool
    confirmed: bool = False


def solve_order_stat_shapes(
    target_min: float, target_max: float, K: int
) -> tuple[float, float]:
    """Find beta shapes whose K-sample extreme order statistics have the target medians.

    Solves F(target_min; a, b) = 1 - 2**(-1/K) and
    F(target_max; a, b) = 2**(-1/K) for (a, b), where F is the
    regularized incomplete beta CDF, so that the minimum and maximum of
    K iid beta(a, b) draws have medians target_min and target_max.
    """
    if not (0.0 < target_min < target_max < 1.0):
        raise DomainError("need 0 < target_min < target_max < 1")
    if K < 2:
        raise DomainError("order statistics need K >= 2 draws")
    q_max = 2.0 ** (-1.0 / K)
    q_min = 1.0 - q_max

    def residual(log_shapes: np.ndarray) -> np.ndarray:
        a, b = np.exp(log_shapes)
        return np.array(
            [
                special.betainc(a, b, target_min) - q_min,
                special.betainc(a, b, target_max) - q_max,
            ]
        )

    # Moment-matched start: treat the targets as normal quantiles at the
    # order-statistic levels and back out a beta mean and variance.
    z = special.ndtri(q_max)
    mu = 0.5 * (target_min + target_max)
    sigma = max((target_max - target_min) / (2.0 * z), 1e-3)
    nu = max(mu * (1.0 - mu) / sigma**2 - 1.0, 0.5)
    starts = [
        (mu * nu, (1.0 - mu) * nu),
        (1.0, 1.0),
        (0.5, 0.5),
        (5.0, 5.0),
        (2.0 * mu, 2.0 * (1.0 - mu)),
    ]
    best_norm = math.inf
    for a0, b0 in starts:
        guess = np.log([max(a0, 0.05), max(b0, 0.05)])
        sol = optimize.root(residual, guess, method="hybr")
        resid = np.max(np.abs(sol.fun))
        best_norm = min(best_norm, resid)
        if resid < 1e-9:
            a, b = (float(v) for v in np.exp(sol.x))
            return a, b
    raise ConfigurationError(
        "no beta shape pair matches the order-statistic medians "
        f"(targets {target_min}/{target_max}, K={K}, best residual {best_norm:.3g})"
    )


def build_shape_vectors(tpl: ShapeTemplate, dims: GridDims) -> ShapeGrid:
    """Expand a template into per-dose shapes in flat-index order.

    alpha = [m*(1-t), l, ..., l, M*s] and beta = [m*t, u, ..., u, M*(1-s)].
    Deterministic; no chains involved.
    """
    K = dims.n_doses
    if K < 2:
        raise DomainError("template needs distinct first and last doses (K >= 2)")
    alpha = np.full(K, tpl.l)
    beta = np.full(K, tpl.u)
    alpha[0] = tpl.m * (1.0 - tpl.t)
    beta[0] = tpl.m * tpl.t
    alpha[-1] = tpl.M * tpl.s
    beta[-1] = tpl.M * (1.0 - tpl.s)
    return ShapeGrid.from_flat(alpha, beta, dims)


def _enumerate_templates(
    cfg: GridSearchConfig, alpha0: float, beta0: float
) -> Iterator[ShapeTemplate]:
    """Yield candidate templates in lexicographic (m, M, t, s, l) order."""
    mass_lo = min(alpha0, beta0)
    mass_hi = alpha0 + beta0
    m_grid = np.linspace(mass_lo, mass_hi, cfg.n_m)
    t_grid = np.linspace(*cfg.t_range, cfg.n_t)
    s_grid = np.linspace(*cfg.s_range, cfg.n_t)
    f_lo, f_hi = cfg.l_range_factor
    for m in m_grid:
        for M in m_grid:
            shared = min(m, M)
            l_grid = np.linspace(f_lo * shared, f_hi * shared, cfg.n_l)
            for t in t_grid:
                for s in s_grid:
                    for l in l_grid:
                        yield ShapeTemplate(
                            m=float(m),
                            M=float(M),
                            t=float(t),
                            s=float(s),
                            l=float(l),
                            u=float(shared / 2.0 - l),
                        )


def _evaluate(
    tpl: ShapeTemplate,
    index: int,
    criteria: PriorCriteria,
    gibbs: GibbsConfig,
    dims: GridDims,
) -> tuple[CandidateEval, float]:
    """Run one prior chain and score the template.

    Returns the evaluation row and the feasibility distance: the worst
    median miss against the targets plus any extra-bound excess (0 when
    feasible by margin).
    """
    shapes = build_shape_vectors(tpl, dims)
    summary = run_chain(shapes, gibbs, keep_samples=True)
    med_first = float(summary.medians[0, 0])
    med_last = float(summary.medians[-1, -1])
    total_var = float(np.var(summary.samples, axis=0).sum())
    miss = max(
        abs(med_first - criteria.target_min),
        abs(med_last - criteria.target_max),
    )
    excess = 0.0
    ok_bounds = True
    for dose, bound in criteria.extra_upper_bounds:
        med = float(summary.medians[dose.row - 1, dose.col - 1])
        if not med < bound:
            ok_bounds = False
            excess += med - bound
    feasible = miss < criteria.tolerance and ok_bounds
    row = CandidateEval(
        index=index,
        template=tpl,
        median_first=med_first,
        median_last=med_last,
        total_variance=total_var,
        feasible=feasible,
    )
    return row, miss + excess


def grid_search(
    criteria: PriorCriteria,
    cfg: GridSearchConfig,
    dims: GridDims,
) -> tuple[ShapeGrid, list[CandidateEval]]:
    """Search the template grid for the max-variance feasible prior.

    Every candidate chain shares cfg.gibbs.seed so the scan is
    deterministic; ties in total variance break toward the earlier
    enumeration index.  The provisional winner is re-evaluated at
    production chain length under 3 derived seeds and must stay
    feasible in all of them; if it does not, the next-best feasible
    candidate is tried, and so on.  Returns the winning shapes and the
    feasible candidates (winner marked confirmed) in enumeration order.
    """
    for dose, _ in criteria.extra_upper_bounds:
        dose.validate(dims)
    alpha0, beta0 = solve_order_stat_shapes(
        criteria.target_min, criteria.target_max, dims.n_doses
    )
    feasible_rows: list[CandidateEval] = []
    closest: CandidateEval | None = None
    closest_distance = math.inf
    n_total = cfg.n_m * cfg.n_m * cfg.n_t * cfg.n_t * cfg.n_l
    for index, tpl in enumerate(_enumerate_templates(cfg, alpha0, beta0)):
        row, distance = _evaluate(tpl, index, criteria, cfg.gibbs, dims)
        if row.feasible:
            feasible_rows.append(row)
        elif distance < closest_distance:
            closest = row
            closest_distance = distance
        if (index + 1) % 2000 == 0 or index + 1 == n_total:
            logger.info(
                "scanned %d/%d candidates, %d feasible",
                index + 1,
                n_total,
                len(feasible_rows),
            )
    if not feasible_rows:
        raise SearchFailure(
            f"no feasible template among {n_total} candidates "
            f"(closest miss {closest_distance:.4f} from the targets)",
            best_candidate=closest,
            best_distance=closest_distance,
        )

    confirm_gibbs = GibbsConfig(
        n_keep=max(cfg.gibbs.n_keep, 10000),
        n_burn=max(cfg.gibbs.n_burn, 1000),
        seed=cfg.gibbs.seed,
    )
    seed_words = np.random.SeedSequence([cfg.gibbs.seed, 1]).generate_state(
        3, np.uint64
    )
    confirm_seeds = [int(word >> np.uint64(1)) for word in seed_words]
    ranked = sorted(feasible_rows, key=lambda row: (-row.total_variance, row.index))
    for row in ranked:
        if _confirm(row.template, criteria, confirm_gibbs, confirm_seeds, dims):
            winner = replace(row, confirmed=True)
            diagnostics = [
                winner if r.index == row.index else r for r in feasible_rows
            ]
            logger.info(
                "winner at index %d confirmed; %d feasible candidates",
                row.index,
                len(feasible_rows),
            )
            return build_shape_vectors(row.template, dims), diagnostics
    raise SearchFailure(
        f"all {len(feasible_rows)} feasible candidates failed re-evaluation "
        "with fresh seeds; the criteria sit at the edge of chain noise",
        best_candidate=ranked[0],
        best_distance=0.0,
    )


def _confirm(
    tpl: ShapeTemplate,
    criteria: PriorCriteria,
    gibbs: GibbsConfig,
    seeds: Sequence[int],
    dims: GridDims,
) -> bool:
    """Check that a template stays feasible under every confirmation seed."""
    for seed in seeds:
        row, _ = _evaluate(
            tpl, -1, criteria, replace(gibbs, seed=seed), dims
        )
        if not row.feasible:
            return False
    return True
