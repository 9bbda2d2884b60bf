"""Single-trial simulation and Monte Carlo operating characteristics.

Every replicate draws from its own counter-based random stream derived
purely from (seed, replicate index), so results are bit-identical whether
replicates run serially or across a process pool, in any order. Decision
rules are pure functions of the interim data, which makes them safe to
memoize across the replicates of a scenario; trial paths revisit the same
interim states constantly, so the cache removes most posterior evaluations.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    Action,
    DesignConfig,
    TrialData,
    TrialState,
    decide,
    select_mtd,
)
from .insertion import (
    DuplicateDose,
    InsertionConfig,
    TriggerKind,
    augment_grid,
    boundary_dose,
    check_insertion,
    choose_interior_dose,
)
from .kernels import KRONECKER, DoseGrid, standardize_doses
from .scenarios import Scenario
from .tite import PatientRecord, effective_data

__all__ = [
    "TiteConfig",
    "InsertionEvent",
    "TrialRecord",
    "OCSummary",
    "ScenarioMismatch",
    "replicate_rng",
    "run_trial",
    "run_replicates",
    "run_trials",
    "oc_metrics",
]

_MASK64 = (1 << 64) - 1
_TOL = 1e-9


class ScenarioMismatch(ValueError):
    """Design configuration does not fit the scenario's dose grid."""


@dataclass(frozen=True, slots=True)
class TiteConfig:
    """Time-to-event settings: assessment window (months) and accrual rate
    (patients per month)."""

    tau: float = 3.0
    accrual_rate: float = 2.0

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("assessment window must be positive")
        if self.accrual_rate <= 0:
            raise ValueError("accrual rate must be positive")


@dataclass(frozen=True, slots=True)
class InsertionEvent:
    raw_dose: float
    std_dose: float
    kind: str
    cohort: int


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One simulated trial: final working grid, counts, path, and selection."""

    selected_mtd: Optional[int]
    doses: tuple[float, ...]
    inserted_flags: tuple[bool, ...]
    allocations: tuple[int, ...]
    dlts: tuple[int, ...]
    path: tuple[tuple[int, int, str], ...]
    insertions: tuple[InsertionEvent, ...]
    terminated_early: bool
    realized_n: int

    @property
    def selected_dose(self) -> Optional[float]:
        if self.selected_mtd is None:
            return None
        return self.doses[self.selected_mtd]


@dataclass(frozen=True)
class OCSummary:
    """Aggregated operating characteristics over replicates.

    Percentages are on the 0..100 scale; insertion metrics are ``None``
    unless dose insertion was enabled for the run.
    """

    pcs: float
    pca: float
    above_mtd: float
    rod: float
    per_dose_selection: tuple[float, ...]
    per_dose_allocation: tuple[float, ...]
    none_selected: float
    replicates: int
    seed: int
    modification_rate: Optional[float] = None
    inserted_mean: Optional[float] = None
    inserted_sd: Optional[float] = None
    inserted_selection: Optional[float] = None
    inserted_allocation: Optional[float] = None


class DecisionCache:
    """Memo for the pure per-interim computations of one (design, scenario)."""

    __slots__ = ("actions", "triggers", "selections")

    def __init__(self) -> None:
        self.actions: dict = {}
        self.triggers: dict = {}
        self.selections: dict = {}


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent counter-based stream for one replicate.

    The Philox key is a pure function of (seed, replicate), so any subset of
    replicates can be generated in any order, on any worker, with identical
    results.
    """
    if seed < 0 or replicate < 0:
        raise ValueError("seed and replicate index must be nonnegative")
    key = ((seed & _MASK64) << 64) | (replicate & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def _check_kernel(design: DesignConfig, grid: DoseGrid) -> None:
    if design.kernel.kind == KRONECKER:
        return
    sigma = grid.prespecified_sigma()
    if abs(design.kernel.sigma - sigma) > 1e-9:
        raise ScenarioMismatch(
            f"kernel calibrated for neighbour gap {design.kernel.sigma} but the "
            f"scenario grid has gap {sigma}; recalibrate the design for this grid"
        )


def _tox_at(scenario: Scenario, grid: DoseGrid, raw: float) -> float:
    """True toxicity at a raw dose, for doses not on the scenario grid.

    Scenarios generated from a curve evaluate it directly; otherwise the
    toxicity is interpolated linearly in standardized dose, clamped to the
    end values outside the prespecified range (which keeps it monotone).
    """
    if scenario.curve is not None:
        return scenario.curve.at(raw)
    xs = [grid.standardize(d) for d in scenario.raw_doses]
    return float(np.interp(grid.standardize(raw), xs, scenario.tox))


def _cached_decide(cache: DecisionCache, design: DesignConfig, state: TrialState) -> Action:
    key = (
        state.grid.raw_doses,
        state.data.n,
        state.data.y,
        state.current,
        state.eliminated_from,
    )
    action = cache.actions.get(key)
    if action is None:
        action = decide(design, state)
        cache.actions[key] = action
    return action


def _cached_insertion(
    cache: DecisionCache,
    state: TrialState,
    insertion: InsertionConfig,
    design: DesignConfig,
) -> tuple[TriggerKind, Optional[float]]:
    """Insertion trigger plus proposed raw dose (None when suppressed)."""
    key = (
        state.grid.raw_doses,
        state.data.n,
        state.data.y,
        state.current,
    )
    hit = cache.triggers.get(key)
    if hit is not None:
        return hit
    trigger = check_insertion(state, insertion, design.phi, design.eps1, design.eps2)
    new_raw: Optional[float] = None
    if trigger.kind is TriggerKind.INTERIOR:
        std = choose_interior_dose(
            trigger.interval_index,
            state.grid,
            state.data,
            insertion,
            design.phi,
            design.eps1,
            design.eps2,
        )
        new_raw = state.grid.unstandardize(std)
    elif trigger.fired():
        try:
            new_raw = boundary_dose(trigger.kind, state.grid)
        except DuplicateDose:
            new_raw = None
    result = (trigger.kind, new_raw)
    cache.triggers[key] = result
    return result


def _cached_select(
    cache: DecisionCache,
    design: DesignConfig,
    grid: DoseGrid,
    data: TrialData,
    eliminated_from: Optional[int],
) -> Optional[int]:
    key = (grid.raw_doses, data.n, data.y, eliminated_from)
    if key in cache.selections:
        return cache.selections[key]
    choice = select_mtd(design, grid, data, eliminated_from)
    cache.selections[key] = choice
    return choice


def run_trial(
    design: DesignConfig,
    scenario: Scenario,
    rng: np.random.Generator,
    *,
    insertion: Optional[InsertionConfig] = None,
    tite: Optional[TiteConfig] = None,
    scale: str = "linear",
    cache: Optional[DecisionCache] = None,
) -> TrialRecord:
    """Simulate one trial from the first cohort through final selection."""
    if insertion is not None and tite is not None:
        raise ValueError("dose insertion is not combined with time-to-event conduct")
    if cache is None:
        cache = DecisionCache()
    if tite is not None:
        return _run_tite(design, scenario, rng, tite, scale, cache)
    return _run_plain(design, scenario, rng, insertion, scale, cache)


def _run_plain(
    design: DesignConfig,
    scenario: Scenario,
    rng: np.random.Generator,
    insertion: Optional[InsertionConfig],
    scale: str,
    cache: DecisionCache,
) -> TrialRecord:
    grid = standardize_doses(scenario.raw_doses, scale)
    _check_kernel(design, grid)
    tox = list(scenario.tox)
    data = TrialData.empty(len(grid))
    current = 0
    eliminated_from: Optional[int] = None
    path: list[tuple[int, int, str]] = []
    events: list[InsertionEvent] = []
    terminated = False
    cohort = 0

    while True:
        cohort += 1
        y_new = int(rng.binomial(design.cohort_size, tox[current]))
        data = data.with_cohort(current, design.cohort_size, y_new)
        state = TrialState(grid, data, current, eliminated_from)
        more_capacity = sum(data.n) + design.cohort_size <= design.max_n
        next_dose = current
        label = None

        # Insertion is considered before the transition step: a toxic lowest
        # dose triggers a lower-boundary insertion rather than immediate
        # termination (the grid grows downward, so it is no longer lowest),
        # and the safety stopping rule applies in the no-insertion branch.
        inserted_raw: Optional[float] = None
        kind = TriggerKind.NONE
        if (
            insertion is not None
            and more_capacity
            and insertion.budget_left(len(events))
        ):
            kind, inserted_raw = _cached_insertion(cache, state, insertion, design)
            if inserted_raw is not None and eliminated_from is not None:
                pos0 = bisect.bisect_left(grid.raw_doses, inserted_raw)
                if pos0 > eliminated_from:
                    # The proposed dose sits above a barred dose; never
                    # assign the next cohort inside the barred range.
                    inserted_raw = None
        if inserted_raw is not None:
            grid = augment_grid(grid, inserted_raw)
            pos = grid.raw_doses.index(inserted_raw)
            n = list(data.n)
            y = list(data.y)
            n.insert(pos, 0)
            y.insert(pos, 0)
            data = TrialData(n=tuple(n), y=tuple(y))
            tox.insert(pos, _tox_at(scenario, grid, inserted_raw))
            if eliminated_from is not None and pos <= eliminated_from:
                eliminated_from += 1
            events.append(
                InsertionEvent(
                    raw_dose=inserted_raw,
                    std_dose=grid.std_doses[pos],
                    kind=kind.value,
                    cohort=cohort,
                )
            )
            label = kind.value
            next_dose = pos
        else:
            action = _cached_decide(cache, design, state)
            label = action.value
            if action is Action.TERMINATE:
                eliminated_from = 0
                terminated = True
            elif action is Action.ELIMINATE:
                eliminated_from = current
                next_dose = current - 1
            elif action is Action.ESCALATE:
                next_dose = current + 1
            elif action is Action.DE_ESCALATE:
                next_dose = current - 1

        path.append((cohort, current, label))
        if terminated or not more_capacity:
            break
        current = next_dose

    selected = _cached_select(cache, design, grid, data, eliminated_from)
    return TrialRecord(
        selected_mtd=selected,
        doses=grid.raw_doses,
        inserted_flags=grid.inserted,
        allocations=data.n,
        dlts=data.y,
        path=tuple(path),
        insertions=tuple(events),
        terminated_early=terminated,
        realized_n=sum(data.n),
    )


def _run_tite(
    design: DesignConfig,
    scenario: Scenario,
    rng: np.random.Generator,
    tite: TiteConfig,
    scale: str,
    cache: DecisionCache,
) -> TrialRecord:
    grid = standardize_doses(scenario.raw_doses, scale)
    _check_kernel(design, grid)
    n_doses = len(grid)
    tau = tite.tau
    interval = 1.0 / tite.accrual_rate
    patients: list[PatientRecord] = []
    current = 0
    eliminated_from: Optional[int] = None
    terminated = False
    path: list[tuple[int, int, str]] = []
    cohort = 0
    enrolled = 0
    clock = 0.0

    def decide_at(when: float) -> Action:
        snapshot = [
            replace(p, followup=min(tau, max(0.0, when - p.enroll_time)))
            for p in patients
        ]
        eff = effective_data(snapshot, n_doses, tau)
        actual = [0] * n_doses
        for p in patients:
            actual[p.dose_index] += 1
        state = TrialState(
            grid=grid,
            data=eff,
            current=current,
            eliminated_from=eliminated_from,
            actual_n=tuple(actual),
        )
        return decide(design, state)

    while not terminated:
        cohort += 1
        for slot in range(design.cohort_size):
            dlt = bool(rng.random() < scenario.tox[current])
            # Uniform DLT time on (0, tau].
            dlt_time = tau * (1.0 - rng.random()) if dlt else math.inf
            patients.append(
                PatientRecord(
                    dose_index=current,
                    enroll_time=clock + slot * interval,
                    dlt=dlt,
                    dlt_time=dlt_time,
                    followup=0.0,
                )
            )
            enrolled += 1

        more_capacity = enrolled + design.cohort_size <= design.max_n
        # The interim decision falls due when the next patient would arrive;
        # after the last cohort everyone is followed through the full window.
        decision_time = (
            clock + design.cohort_size * interval if more_capacity else math.inf
        )
        action = decide_at(decision_time)
        if action is Action.ESCALATE and more_capacity:
            # Escalation requires two completed assessments at the current
            # dose. If they are pending, accrual is suspended until the
            # second outcome is ascertained and the decision re-evaluated on
            # the follow-up accrued by then.
            finish_times = sorted(
                p.enroll_time + (p.dlt_time if p.dlt else tau)
                for p in patients
                if p.dose_index == current
            )
            cleared = finish_times[1]
            if cleared > decision_time:
                decision_time = cleared
                action = decide_at(decision_time)

        label = action.value
        next_dose = current
        if action is Action.TERMINATE:
            eliminated_from = 0
            terminated = True
        elif action is Action.ELIMINATE:
            eliminated_from = current
            next_dose = current - 1
        elif action is Action.ESCALATE:
            next_dose = current + 1
        elif action is Action.DE_ESCALATE:
            next_dose = current - 1

        path.append((cohort, current, label))
        if not more_capacity:
            break
        current = next_dose
        clock = decision_time

    # Complete-data counts after full follow-up.
    n_final = [0] * n_doses
    y_final = [0] * n_doses
    for p in patients:
        n_final[p.dose_index] += 1
        if p.dlt:
            y_final[p.dose_index] += 1
    data = TrialData(n=tuple(n_final), y=tuple(y_final))
    selected = _cached_select(cache, design, grid, data, eliminated_from)
    return TrialRecord(
        selected_mtd=selected,
        doses=grid.raw_doses,
        inserted_flags=grid.inserted,
        allocations=data.n,
        dlts=data.y,
        path=tuple(path),
        insertions=(),
        terminated_early=terminated,
        realized_n=enrolled,
    )


def run_replicates(
    design: DesignConfig,
    scenario: Scenario,
    seed: int,
    start: int,
    stop: int,
    *,
    insertion: Optional[InsertionConfig] = None,
    tite: Optional[TiteConfig] = None,
    scale: str = "linear",
    cache: Optional[DecisionCache] = None,
) -> list[TrialRecord]:
    """Run replicates [start, stop) on their per-replicate streams."""
    if cache is None:
        cache = DecisionCache()
    return [
        run_trial(
            design,
            scenario,
            replicate_rng(seed, rep),
            insertion=insertion,
            tite=tite,
            scale=scale,
            cache=cache,
        )
        for rep in range(start, stop)
    ]


def _block_worker(args) -> tuple[int, list[TrialRecord]]:
    design, scenario, seed, start, stop, insertion, tite, scale = args
    return start, run_replicates(
        design, scenario, seed, start, stop, insertion=insertion, tite=tite, scale=scale
    )


def collect_records(
    design: DesignConfig,
    scenario: Scenario,
    replicates: int,
    seed: int,
    *,
    insertion: Optional[InsertionConfig] = None,
    tite: Optional[TiteConfig] = None,
    threads: int = 1,
    scale: str = "linear",
    progress: Optional[Callable[[int, int], None]] = None,
) -> list[TrialRecord]:
    """All replicate records in replicate order, serial or pooled.

    The per-replicate streams make the output independent of both the
    worker count and the completion order.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    if threads <= 1:
        cache = DecisionCache()
        records: list[TrialRecord] = []
        block = max(1, min(200, replicates // 20 or 1))
        done = 0
        while done < replicates:
            stop = min(replicates, done + block)
            records.extend(
                run_replicates(
                    design,
                    scenario,
                    seed,
                    done,
                    stop,
                    insertion=insertion,
                    tite=tite,
                    scale=scale,
                    cache=cache,
                )
            )
            done = stop
            if progress is not None:
                progress(done, replicates)
        return records

    blocks = []
    per_block = max(1, math.ceil(replicates / (threads * 4)))
    start = 0
    while start < replicates:
        stop = min(replicates, start + per_block)
        blocks.append((design, scenario, seed, start, stop, insertion, tite, scale))
        start = stop
    results: dict[int, list[TrialRecord]] = {}
    done = 0
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for block_start, block_records in pool.map(_block_worker, blocks):
            results[block_start] = block_records
            done += len(block_records)
            if progress is not None:
                progress(done, replicates)
    records = []
    for block_start in sorted(results):
        records.extend(results[block_start])
    return records


def run_trials(
    design: DesignConfig,
    scenario: Scenario,
    replicates: int,
    seed: int,
    *,
    insertion: Optional[InsertionConfig] = None,
    tite: Optional[TiteConfig] = None,
    threads: int = 1,
    scale: str = "linear",
    rod_threshold: float = 0.6,
    rod_inclusive: bool = False,
    progress: Optional[Callable[[int, int], None]] = None,
) -> OCSummary:
    """Operating characteristics over independent replicates."""
    records = collect_records(
        design,
        scenario,
        replicates,
        seed,
        insertion=insertion,
        tite=tite,
        threads=threads,
        scale=scale,
        progress=progress,
    )
    return oc_metrics(
        records,
        scenario,
        replicates=replicates,
        seed=seed,
        insertion_enabled=insertion is not None,
        rod_threshold=rod_threshold,
        rod_inclusive=rod_inclusive,
    )


def oc_metrics(
    records: Sequence[TrialRecord],
    scenario: Scenario,
    *,
    replicates: Optional[int] = None,
    seed: int = 0,
    insertion_enabled: Optional[bool] = None,
    rod_threshold: float = 0.6,
    rod_inclusive: bool = False,
) -> OCSummary:
    """Aggregate records into operating characteristics.

    The true MTD is the scenario's continuous dose when present, else the
    dose at its MTD level; allocations and selections are attributed by dose
    value, so doses inserted above the continuous MTD count toward the
    overdose measures. The overdosing-risk threshold is strict by default
    (a trial with exactly 60% of patients above the MTD does not count);
    pass ``rod_inclusive=True`` for the boundary-inclusive variant.
    """
    if not records:
        raise ValueError("no trial records to aggregate")
    if scenario.mtd_dose is not None:
        mtd_value = scenario.mtd_dose
    elif scenario.mtd_index is not None:
        mtd_value = scenario.raw_doses[scenario.mtd_index - 1]
    else:
        raise ValueError("scenario does not define a true MTD")
    if insertion_enabled is None:
        insertion_enabled = any(r.insertions for r in records)

    total = len(records)
    pcs_hits = 0
    none_hits = 0
    pca_shares = []
    above_shares = []
    rod_hits = 0
    sel_counts = [0] * scenario.n_doses
    alloc_shares = [0.0] * scenario.n_doses
    inserting = 0
    first_inserted: list[float] = []
    inserted_sel = 0
    inserted_alloc_shares = []

    for rec in records:
        sel_value = rec.selected_dose
        if sel_value is None:
            none_hits += 1
        elif abs(sel_value - mtd_value) <= _TOL:
            pcs_hits += 1
        at_mtd = 0
        above = 0
        inserted_alloc = 0
        for dose, alloc, flag in zip(rec.doses, rec.allocations, rec.inserted_flags):
            if abs(dose - mtd_value) <= _TOL:
                at_mtd += alloc
            elif dose > mtd_value:
                above += alloc
            if flag:
                inserted_alloc += alloc
        pca_shares.append(at_mtd / rec.realized_n)
        share_above = above / rec.realized_n
        above_shares.append(share_above)
        if rod_inclusive:
            overdosed = share_above >= rod_threshold - 1e-12
        else:
            overdosed = share_above > rod_threshold + 1e-12
        if overdosed:
            rod_hits += 1
        for k, dose in enumerate(scenario.raw_doses):
            if sel_value is not None and abs(sel_value - dose) <= _TOL:
                sel_counts[k] += 1
            pos = rec.doses.index(dose) if dose in rec.doses else None
            if pos is not None:
                alloc_shares[k] += rec.allocations[pos] / rec.realized_n
        if rec.insertions:
            inserting += 1
            first_inserted.append(rec.insertions[0].raw_dose)
        if sel_value is not None and rec.inserted_flags[rec.selected_mtd]:
            inserted_sel += 1
        inserted_alloc_shares.append(inserted_alloc / rec.realized_n)

    pct = lambda count: 100.0 * count / total
    summary = OCSummary(
        pcs=pct(pcs_hits),
        pca=100.0 * sum(pca_shares) / total,
        above_mtd=100.0 * sum(above_shares) / total,
        rod=pct(rod_hits),
        per_dose_selection=tuple(pct(c) for c in sel_counts),
        per_dose_allocation=tuple(100.0 * s / total for s in alloc_shares),
        none_selected=pct(none_hits),
        replicates=replicates if replicates is not None else total,
        seed=seed,
    )
    if not insertion_enabled:
        return summary
    if first_inserted:
        mean = sum(first_inserted) / len(first_inserted)
        if len(first_inserted) > 1:
            var = sum((v - mean) ** 2 for v in first_inserted) / (len(first_inserted) - 1)
            sd = math.sqrt(var)
        else:
            sd = 0.0
    else:
        mean = None
        sd = None
    return replace(
        summary,
        modification_rate=pct(inserting),
        inserted_mean=mean,
        inserted_sd=sd,
        inserted_selection=pct(inserted_sel),
        inserted_allocation=100.0 * sum(inserted_alloc_shares) / total,
    )
