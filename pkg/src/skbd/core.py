"""Key construction, dose-transition decisions, decision tables, and final
MTD selection.

The decision rule is interval-based: the unit interval is tiled into keys of
equal width around the target toxicity interval, the posterior at the
current dose picks out the strongest key, and the dose moves toward the
target. With the kronecker kernel the posterior uses only the current dose's
own data; with a Gaussian kernel it uses kernel-weighted pseudo-counts, so
neighbouring evidence shifts the boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .kernels import (
    KRONECKER,
    DoseGrid,
    KernelSpec,
    pseudo_counts,
    symmetric_kernel,
)
from .numerics import BetaParams, reg_inc_beta

__all__ = [
    "Action",
    "KeyPartition",
    "TrialData",
    "TrialState",
    "DesignConfig",
    "InvalidDesign",
    "DecisionTable",
    "build_keys",
    "strongest_key",
    "decide",
    "decision_table",
    "select_mtd",
]

# Absolute tolerance for treating posterior key probabilities as tied.
_TIE_TOL = 1e-12
# Tolerance for float drift when tiling key boundaries.
_EDGE_TOL = 1e-9


class Action(enum.Enum):
    """Dose-transition decision after a cohort's outcomes are in."""

    ESCALATE = "escalate"
    STAY = "stay"
    DE_ESCALATE = "de_escalate"
    ELIMINATE = "eliminate_and_de_escalate"
    TERMINATE = "terminate"


class InvalidDesign(ValueError):
    """Design parameter validation failure; names the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.field = fieldname


@dataclass(frozen=True, slots=True)
class KeyPartition:
    """Tiling of (0, 1) into toxicity intervals around the target key."""

    phi: float
    eps1: float
    eps2: float
    boundaries: tuple[float, ...]
    target_index: int

    @property
    def n_keys(self) -> int:
        return len(self.boundaries) - 1

    def key_bounds(self, index: int) -> tuple[float, float]:
        return self.boundaries[index], self.boundaries[index + 1]


@dataclass(frozen=True, slots=True)
class TrialData:
    """Per-dose treated counts and DLT counts, the trial's sufficient data."""

    n: tuple[int, ...]
    y: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if len(self.n) != len(self.y):
            raise ValueError("n and y must have equal length")
        for nj, yj in zip(self.n, self.y):
            if nj < 0 or yj < 0 or yj > nj:
                raise ValueError(f"need 0 <= y <= n per dose, got (n={nj}, y={yj})")

    @classmethod
    def empty(cls, n_doses: int) -> "TrialData":
        return cls(n=(0,) * n_doses, y=(0,) * n_doses)

    def with_cohort(self, dose: int, n_new: int, y_new: int) -> "TrialData":
        n = list(self.n)
        y = list(self.y)
        n[dose] += n_new
        y[dose] += y_new
        return TrialData(n=tuple(n), y=tuple(y))


@dataclass(frozen=True, slots=True)
class DesignConfig:
    """Design parameters: target interval, priors, kernel, and safety rules."""

    phi: float
    kernel: KernelSpec
    eps1: float = 0.05
    eps2: float = 0.05
    prior: BetaParams = BetaParams(1.0, 1.0)
    elimination_cutoff: float = 0.95
    elimination_min_n: int = 3
    cohort_size: int = 3
    max_n: int = 30
    selection_prior: BetaParams = BetaParams(0.01, 0.01)
    selection_kernel_value: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 < self.phi < 1.0:
            raise InvalidDesign("phi", f"target rate must lie in (0, 1), got {self.phi}")
        if self.eps1 <= 0 or self.phi - self.eps1 <= 0:
            raise InvalidDesign("eps1", f"need 0 < phi - eps1, got eps1={self.eps1}")
        if self.eps2 <= 0 or self.phi + self.eps2 >= 1:
            raise InvalidDesign("eps2", f"need phi + eps2 < 1, got eps2={self.eps2}")
        if not 0.0 < self.elimination_cutoff < 1.0:
            raise InvalidDesign(
                "elimination_cutoff",
                f"must lie in (0, 1), got {self.elimination_cutoff}",
            )
        if self.elimination_min_n < 1:
            raise InvalidDesign("elimination_min_n", "must be a positive integer")
        if self.cohort_size < 1:
            raise InvalidDesign("cohort_size", "must be a positive integer")
        if self.max_n < 1:
            raise InvalidDesign("max_n", "must be a positive integer")
        if not 0.0 < self.selection_kernel_value < 1.0:
            raise InvalidDesign(
                "selection_kernel_value",
                f"must lie in (0, 1), got {self.selection_kernel_value}",
            )

    def keys(self) -> KeyPartition:
        return build_keys(self.phi, self.eps1, self.eps2)


@dataclass(frozen=True, slots=True)
class TrialState:
    """Snapshot of a trial between cohorts.

    ``eliminated_from`` is the lowest barred dose index: that dose and all
    higher ones are off-limits. ``actual_n`` carries enrolled headcounts
    when ``data`` holds fractional effective counts (time-to-event interims);
    the elimination rule's minimum-sample qualifier counts actual patients.
    """

    grid: DoseGrid
    data: TrialData
    current: int
    eliminated_from: Optional[int] = None
    actual_n: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if not 0 <= self.current < len(self.grid):
            raise ValueError(f"current dose index {self.current} outside the grid")
        if self.eliminated_from is not None and self.current >= self.eliminated_from:
            raise ValueError("current dose must lie below the eliminated range")

    @property
    def enrolled(self) -> float:
        counts = self.actual_n if self.actual_n is not None else self.data.n
        return sum(counts)


@lru_cache(maxsize=64)
def build_keys(phi: float, eps1: float, eps2: float) -> KeyPartition:
    """Tile (0, 1) with keys of width eps1 + eps2 around the target key.

    The target key is (phi - eps1, phi + eps2); full-width keys extend
    outward in both directions and the first and last keys are truncated at
    0 and 1.
    """
    if not (0.0 < phi - eps1 and phi + eps2 < 1.0):
        raise InvalidDesign("phi", f"target key ({phi - eps1}, {phi + eps2}) must lie inside (0, 1)")
    width = eps1 + eps2
    lower: list[float] = []
    edge = phi - eps1
    while edge > _EDGE_TOL:
        lower.append(edge)
        edge -= width
    upper: list[float] = []
    edge = phi + eps2
    while edge < 1.0 - _EDGE_TOL:
        upper.append(edge)
        edge += width
    boundaries = (0.0, *reversed(lower), *upper, 1.0)
    return KeyPartition(
        phi=phi,
        eps1=eps1,
        eps2=eps2,
        boundaries=boundaries,
        target_index=len(lower),
    )


def strongest_key(posterior: BetaParams, keys: KeyPartition) -> int:
    """Index of the key with the largest posterior probability.

    Probabilities tied within an absolute 1e-12 resolve to the highest
    (most toxic) key, which avoids optimistic escalation on ties.
    """
    cdf = [reg_inc_beta(b, posterior) for b in keys.boundaries]
    probs = [hi - lo for lo, hi in zip(cdf, cdf[1:])]
    best = max(probs)
    for index in range(len(probs) - 1, -1, -1):
        if probs[index] >= best - _TIE_TOL:
            return index
    raise AssertionError("unreachable: at least one key exists")


def bkp_posterior(config: DesignConfig, state: TrialState) -> tuple[BetaParams, float, float]:
    """Posterior at the current dose from kernel-weighted pseudo-counts.

    Returns (posterior, y_prime, n_prime). With the kronecker kernel this
    reduces to the plain beta-binomial posterior on the dose's own data. The
    kernel is recalibrated to the working grid's current neighbour gap, so
    inserted doses tighten the decay rates rather than inflating borrowing.
    """
    pc = pseudo_counts(
        config.kernel.for_grid(state.grid),
        state.grid,
        state.data,
        state.grid.std_doses[state.current],
    )
    posterior = BetaParams(
        config.prior.alpha + pc.y_prime,
        config.prior.beta + pc.n_prime - pc.y_prime,
    )
    return posterior, pc.y_prime, pc.n_prime


def decide(config: DesignConfig, state: TrialState) -> Action:
    """Dose-transition decision at the current dose.

    The over-toxicity elimination rule is checked first: when the posterior
    probability of exceeding the target passes the cutoff (and enough
    patients have actually been treated at the dose), the dose and all
    higher doses are barred; elimination at the lowest working dose
    terminates the trial. Otherwise the strongest key is compared with the
    target key, with escalation capped at the top non-eliminated dose and
    de-escalation capped at the lowest.
    """
    j = state.current
    if state.data.n[j] <= 0:
        raise ValueError("no data recorded at the current dose")
    posterior, _, _ = bkp_posterior(config, state)

    counts = state.actual_n if state.actual_n is not None else state.data.n
    if counts[j] >= config.elimination_min_n:
        p_over = 1.0 - reg_inc_beta(config.phi, posterior)
        if p_over > config.elimination_cutoff:
            return Action.TERMINATE if j == 0 else Action.ELIMINATE

    keys = config.keys()
    strongest = strongest_key(posterior, keys)
    top = (
        state.eliminated_from - 1
        if state.eliminated_from is not None
        else len(state.grid) - 1
    )
    if strongest < keys.target_index:
        return Action.ESCALATE if j < top else Action.STAY
    if strongest > keys.target_index:
        return Action.DE_ESCALATE if j > 0 else Action.STAY
    return Action.STAY


@dataclass(frozen=True)
class DecisionTable:
    """Pre-tabulated boundaries: one row of y-thresholds per sample size.

    ``escalate_le[i]`` is the largest DLT count still escalating at
    ``n_values[i]`` patients, ``deescalate_ge[i]`` the smallest count that
    de-escalates, ``eliminate_ge[i]`` the smallest that eliminates; ``None``
    marks sample sizes at which the action never occurs.
    """

    phi: float
    n_values: tuple[int, ...]
    escalate_le: tuple[Optional[int], ...]
    deescalate_ge: tuple[Optional[int], ...]
    eliminate_ge: tuple[Optional[int], ...]


def decision_table(
    config: DesignConfig,
    context: TrialData,
    current: int,
    n_range: tuple[int, int],
    grid: Optional[DoseGrid] = None,
) -> DecisionTable:
    """Tabulate decision boundaries at a dose, conditional on other-dose data.

    ``context`` holds the interim data at the other doses and must be empty
    at ``current``; the tabulation sweeps the current dose's sample size
    over ``n_range`` (inclusive) and its DLT count over 0..n. A de-escalation
    threshold of zero would mean "de-escalate regardless of the observed
    count"; such a row is reported as absent, matching the convention that a
    boundary marks where the action begins within the observable counts.
    """
    if context.n[current] != 0 or context.y[current] != 0:
        raise ValueError("context must have no data recorded at the current dose")
    lo, hi = n_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid sample-size range {n_range}")
    if grid is None:
        grid = _rank_grid(len(context.n))

    n_values: list[int] = []
    esc: list[Optional[int]] = []
    dee: list[Optional[int]] = []
    eli: list[Optional[int]] = []
    for n in range(lo, hi + 1):
        esc_bound: Optional[int] = None
        dee_bound: Optional[int] = None
        eli_bound: Optional[int] = None
        for y in range(n + 1):
            state = TrialState(
                grid=grid,
                data=context.with_cohort(current, n, y),
                current=current,
            )
            action = decide(config, state)
            if action is Action.ESCALATE:
                esc_bound = y
            if action in (Action.DE_ESCALATE, Action.ELIMINATE, Action.TERMINATE):
                if dee_bound is None:
                    dee_bound = y
            if action in (Action.ELIMINATE, Action.TERMINATE):
                if eli_bound is None:
                    eli_bound = y
        if dee_bound == 0:
            dee_bound = None
        if eli_bound == 0:
            eli_bound = None
        n_values.append(n)
        esc.append(esc_bound)
        dee.append(dee_bound)
        eli.append(eli_bound)
    return DecisionTable(
        phi=config.phi,
        n_values=tuple(n_values),
        escalate_le=tuple(esc),
        deescalate_ge=tuple(dee),
        eliminate_ge=tuple(eli),
    )


@lru_cache(maxsize=8)
def _rank_grid(n_doses: int) -> DoseGrid:
    """Equally spaced grid of dose ranks 1..J."""
    from .kernels import standardize_doses

    return standardize_doses([float(j) for j in range(1, n_doses + 1)])


def select_mtd(
    config: DesignConfig,
    grid: DoseGrid,
    data: TrialData,
    eliminated_from: Optional[int] = None,
) -> Optional[int]:
    """Final MTD selection after the trial completes.

    Per-tried-dose posterior means are computed under the weak selection
    prior with symmetric-kernel pseudo-counts (no directional bias in the
    final estimates; the kronecker kernel keeps its no-borrowing behaviour),
    made monotone by the pooled-adjacent-violators fit weighted by pseudo
    sample size plus prior mass, and the tried, non-eliminated dose with
    adjusted mean closest to the target is selected. Doses pooled into one
    block carry identical adjusted means; such ties resolve toward the
    target (the highest dose of a block sitting below the target, the
    lowest of a block above it), realized by the conventional +1e-10 per
    dose-index perturbation. Returns ``None`` when the trial ended with the
    lowest dose eliminated.
    """
    if eliminated_from == 0:
        return None
    tried = [j for j in range(len(grid)) if data.n[j] > 0]
    if not tried:
        return None
    if config.kernel.kind == KRONECKER:
        sel_kernel = KernelSpec.kronecker()
    else:
        sel_kernel = symmetric_kernel(grid, config.selection_kernel_value)
    prior = config.selection_prior
    prior_mass = prior.alpha + prior.beta
    means: list[float] = []
    weights: list[float] = []
    for j in tried:
        pc = pseudo_counts(sel_kernel, grid, data, grid.std_doses[j])
        means.append((prior.alpha + pc.y_prime) / (prior_mass + pc.n_prime))
        weights.append(pc.n_prime + prior_mass)
    from .numerics import pava

    adjusted = pava(means, weights, "nondecreasing")
    best_j: Optional[int] = None
    best_gap = float("inf")
    for j, mean in zip(tried, adjusted):
        if eliminated_from is not None and j >= eliminated_from:
            continue
        gap = abs(mean + (j + 1) * 1e-10 - config.phi)
        if gap < best_gap:
            best_gap = gap
            best_j = j
    return best_j
