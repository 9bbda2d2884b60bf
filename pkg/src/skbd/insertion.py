"""Adaptive dose insertion: trigger evaluation, candidate optimization, and
working-grid augmentation.

When the evidence shows the working grid misses the target toxicity region,
a new dose is proposed: below the lowest dose when even it looks too toxic,
inside an adjacent pair that brackets the target region, or above the
highest dose when everything looks subtherapeutic. Candidate locations are
scored with the same kernel-weighted posterior used for dose transitions,
under a symmetric kernel and a Jeffreys-style prior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .core import TrialState
from .kernels import DoseGrid, pseudo_counts, symmetric_kernel
from .numerics import BetaParams, beta_interval_prob, pava, reg_inc_beta

__all__ = [
    "InsertionConfig",
    "TriggerKind",
    "InsertionTrigger",
    "insertion_posterior",
    "check_insertion",
    "choose_interior_dose",
    "boundary_dose",
    "augment_grid",
    "DuplicateDose",
]


class TriggerKind(enum.Enum):
    NONE = "none"
    LOWER_BOUNDARY = "lower_boundary"
    INTERIOR = "interior"
    UPPER_BOUNDARY = "upper_boundary"


class DuplicateDose(ValueError):
    """Proposed dose already sits on the working grid; insertion suppressed."""


@dataclass(frozen=True, slots=True)
class InsertionConfig:
    """Cutoffs, prior, and search resolution for dose insertion.

    With the default cutoffs c1 + c2 > 1, at most one adjacent interval can
    satisfy the interior condition at any interim. The candidate-location
    kernel is deliberately narrow (nearest-neighbour value 0.05): the
    trigger probabilities must react to each dose's own outcomes, and a
    wide kernel lets a benign neighbour mask an overdosed one. Insertions
    are uncapped by default; repeated augmentation is how the design walks
    the grid onto the target region.
    """

    c1: float = 0.6
    c2: float = 0.6
    prior: BetaParams = BetaParams(0.5, 0.5)
    candidate_points: int = 199
    symmetric_kernel_value: float = 0.05
    max_insertions: Optional[int] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.c1 < 1.0 and 0.0 < self.c2 < 1.0):
            raise ValueError("insertion cutoffs must lie in (0, 1)")
        if self.candidate_points < 1:
            raise ValueError("candidate_points must be at least 1")
        if self.max_insertions is not None and self.max_insertions < 0:
            raise ValueError("max_insertions must be nonnegative")

    def budget_left(self, inserted_so_far: int) -> bool:
        return self.max_insertions is None or inserted_so_far < self.max_insertions


@dataclass(frozen=True, slots=True)
class InsertionTrigger:
    kind: TriggerKind
    interval_index: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.kind is TriggerKind.INTERIOR) != (self.interval_index is not None):
            raise ValueError("interval_index is set exactly for interior triggers")

    def fired(self) -> bool:
        return self.kind is not TriggerKind.NONE


def insertion_posterior(
    d: float, grid: DoseGrid, data, cfg: InsertionConfig
) -> BetaParams:
    """Candidate-location posterior from symmetric-kernel pseudo-counts.

    ``d`` is a standardized dose (possibly outside [0, 1] for boundary
    candidates); weights are normalized over the observed doses.
    """
    kernel = symmetric_kernel(grid, cfg.symmetric_kernel_value)
    pc = pseudo_counts(kernel, grid, data, d)
    return BetaParams(
        cfg.prior.alpha + pc.y_prime, cfg.prior.beta + pc.n_prime - pc.y_prime
    )


def check_insertion(
    state: TrialState,
    cfg: InsertionConfig,
    phi: float,
    eps1: float,
    eps2: float,
) -> InsertionTrigger:
    """Evaluate the three insertion conditions at the current interim.

    Per-dose probabilities of lying above the target key (nondecreasing in
    dose) and below it (nonincreasing) are monotone-adjusted before the
    cutoffs are applied. A lower-boundary trigger requires the trial to sit
    at the lowest working dose, an upper-boundary trigger at the highest.
    """
    grid = state.grid
    m = len(grid)
    hi = phi + eps2
    lo = phi - eps1
    p_over_raw = []
    p_under_raw = []
    for std in grid.std_doses:
        post = insertion_posterior(std, grid, state.data, cfg)
        p_over_raw.append(1.0 - reg_inc_beta(hi, post))
        p_under_raw.append(reg_inc_beta(lo, post))
    p_over = pava(p_over_raw, direction="nondecreasing")
    p_under = pava(p_under_raw, direction="nonincreasing")

    if state.current == 0 and p_over[0] > cfg.c2:
        return InsertionTrigger(TriggerKind.LOWER_BOUNDARY)
    for r in range(m - 1):
        if p_under[r] > cfg.c1 and p_over[r + 1] > cfg.c2:
            return InsertionTrigger(TriggerKind.INTERIOR, interval_index=r)
    if state.current == m - 1 and p_under[m - 1] > cfg.c1:
        return InsertionTrigger(TriggerKind.UPPER_BOUNDARY)
    return InsertionTrigger(TriggerKind.NONE)


def choose_interior_dose(
    r: int,
    grid: DoseGrid,
    data,
    cfg: InsertionConfig,
    phi: float,
    eps1: float,
    eps2: float,
) -> float:
    """Standardized dose inside (d_(r), d_(r+1)) maximizing the target-key
    probability.

    The posterior target-key probability q(d) is evaluated on equally spaced
    interior candidates; ties resolve to the candidate nearest the interval
    midpoint, then to the lower dose.
    """
    lo = grid.std_doses[r]
    hi = grid.std_doses[r + 1]
    width = hi - lo
    if width < 1e-9:
        raise ValueError(f"degenerate insertion interval ({lo}, {hi})")
    count = cfg.candidate_points
    points = [lo + width * (i + 1) / (count + 1) for i in range(count)]
    scores = [
        beta_interval_prob(
            insertion_posterior(d, grid, data, cfg), phi - eps1, phi + eps2
        )
        for d in points
    ]
    best = max(scores)
    mid = (lo + hi) / 2.0
    winner = min(
        (i for i, q in enumerate(scores) if q >= best - 1e-12),
        key=lambda i: (abs(points[i] - mid), points[i]),
    )
    return points[winner]


def boundary_dose(kind: TriggerKind, grid: DoseGrid) -> float:
    """Raw dose for a boundary insertion.

    Lower: half the current minimum dose (which may itself be inserted).
    Upper: 1.5x the highest *prespecified* dose, anchored so that repeated
    upper triggers never extrapolate multiplicatively; a repeat therefore
    reproduces the same dose and raises ``DuplicateDose``.
    """
    if kind is TriggerKind.LOWER_BOUNDARY:
        new_raw = grid.raw_doses[0] / 2.0
    elif kind is TriggerKind.UPPER_BOUNDARY:
        new_raw = 1.5 * grid.prespecified_max_raw
    else:
        raise ValueError(f"not a boundary trigger: {kind}")
    for existing in grid.raw_doses:
        if abs(existing - new_raw) <= 1e-9 * max(abs(existing), abs(new_raw)):
            raise DuplicateDose(f"dose {new_raw} already on the working grid")
    return new_raw


def augment_grid(grid: DoseGrid, new_raw: float) -> DoseGrid:
    """Insert a raw dose into the working grid, flagged as inserted.

    The caller extends its per-dose data with (0, 0) at the new position and
    assigns the next cohort to the new dose.
    """
    if new_raw <= 0:
        raise ValueError(f"inserted dose must be positive, got {new_raw}")
    try:
        return grid.with_dose(new_raw)
    except ValueError as err:
        raise DuplicateDose(str(err)) from None
