"""Dose standardization, kernel calibration, and kernel-weighted pseudo-counts.

This is the information-sharing core: inference at a dose borrows from its
neighbours through distance-decaying kernel weights, normalized over the set
of doses with observed outcomes. The asymmetric kernel decays faster toward
lower doses so that toxicity seen at the nearest higher dose carries more
weight than the same evidence one step below (overdose control).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Protocol, Sequence

__all__ = [
    "DoseGrid",
    "KernelSpec",
    "PseudoCounts",
    "standardize_doses",
    "calibrate_kernel",
    "symmetric_kernel",
    "kernel_eval",
    "pseudo_counts",
]

ASYMMETRIC = "asymmetric_gaussian"
SYMMETRIC = "symmetric_gaussian"
KRONECKER = "kronecker"


class DoseCounts(Protocol):
    """Per-dose treated and DLT counts (integer or effective)."""

    @property
    def n(self) -> Sequence[float]: ...

    @property
    def y(self) -> Sequence[float]: ...


@dataclass(frozen=True, slots=True)
class DoseGrid:
    """Working dose grid: raw doses plus their standardized locations.

    The affine standardization map is anchored at the first and last
    prespecified doses (on the log scale when ``scale == "log"``) and stays
    frozen for the life of the trial, so doses inserted later reuse the same
    anchors and may standardize below 0 or above 1.
    """

    raw_doses: tuple[float, ...]
    std_doses: tuple[float, ...]
    scale: str
    inserted: tuple[bool, ...]
    prespecified_max_raw: float
    anchor_lo: float
    anchor_hi: float

    def __len__(self) -> int:
        return len(self.raw_doses)

    def _transform(self, raw: float) -> float:
        if self.scale == "log":
            if raw <= 0:
                raise ValueError(f"log-scale dose must be positive, got {raw}")
            return math.log(raw)
        return raw

    def standardize(self, raw: float) -> float:
        """Map a raw dose through the frozen anchor map."""
        return (self._transform(raw) - self.anchor_lo) / (self.anchor_hi - self.anchor_lo)

    def unstandardize(self, std: float) -> float:
        value = self.anchor_lo + std * (self.anchor_hi - self.anchor_lo)
        return math.exp(value) if self.scale == "log" else value

    def min_gap(self) -> float:
        """Smallest standardized gap between neighbouring working doses.

        Kernel scales are calibrated against this gap; once a dose is
        inserted, the gap shrinks and the decay rates are recalibrated so
        the nearest neighbours keep their intended borrowing weights.
        """
        gaps = [b - a for a, b in zip(self.std_doses, self.std_doses[1:])]
        sigma = min(gaps)
        if sigma <= 0:
            raise ValueError("degenerate grid: zero gap between doses")
        return sigma

    def prespecified_sigma(self) -> float:
        """Smallest standardized gap between neighbouring prespecified doses."""
        std = [s for s, ins in zip(self.std_doses, self.inserted) if not ins]
        gaps = [b - a for a, b in zip(std, std[1:])]
        sigma = min(gaps)
        if sigma <= 0:
            raise ValueError("degenerate grid: zero gap between doses")
        return sigma

    def with_dose(self, new_raw: float) -> "DoseGrid":
        """Return a new grid with ``new_raw`` inserted in sorted position."""
        for existing in self.raw_doses:
            if math.isclose(existing, new_raw, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(f"dose {new_raw} already present in the working grid")
        pos = bisect.bisect_left(self.raw_doses, new_raw)
        return replace(
            self,
            raw_doses=self.raw_doses[:pos] + (new_raw,) + self.raw_doses[pos:],
            std_doses=self.std_doses[:pos]
            + (self.standardize(new_raw),)
            + self.std_doses[pos:],
            inserted=self.inserted[:pos] + (True,) + self.inserted[pos:],
        )


@dataclass(frozen=True, slots=True)
class KernelSpec:
    """Kernel family plus decay rates per squared standardized distance.

    ``theta1`` governs decay toward lower doses, ``theta2`` toward higher
    doses; ``sigma`` records the neighbour gap the rates were calibrated
    against. The kronecker kind ignores all three and recovers the plain
    no-borrowing design.
    """

    kind: str
    theta1: float
    theta2: float
    sigma: float

    def __post_init__(self) -> None:
        if self.kind not in (ASYMMETRIC, SYMMETRIC, KRONECKER):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind != KRONECKER:
            if not (self.theta1 > 0 and self.theta2 > 0):
                raise ValueError("kernel decay rates must be positive")
            if self.kind == SYMMETRIC and self.theta1 != self.theta2:
                raise ValueError("symmetric kernel requires theta1 == theta2")

    @classmethod
    def kronecker(cls) -> "KernelSpec":
        return cls(kind=KRONECKER, theta1=1.0, theta2=1.0, sigma=1.0)

    def for_grid(self, grid: "DoseGrid") -> "KernelSpec":
        """This kernel recalibrated to the grid's current neighbour gap.

        The nearest-neighbour weights exp(-theta * sigma**2) are preserved
        while sigma tracks the working grid, so insertion tightens the decay
        rates instead of letting the new dose's close neighbours dominate.
        """
        if self.kind == KRONECKER:
            return self
        sigma = grid.min_gap()
        if sigma == self.sigma:
            return self
        ratio = (self.sigma / sigma) ** 2
        return KernelSpec(
            kind=self.kind,
            theta1=self.theta1 * ratio,
            theta2=self.theta2 * ratio,
            sigma=sigma,
        )


class PseudoCounts(NamedTuple):
    """Kernel-weighted DLT count and sample size at a query dose."""

    y_prime: float
    n_prime: float


def standardize_doses(raw: Sequence[float], scale: str = "linear") -> DoseGrid:
    """Map prespecified doses onto [0, 1], first dose to 0 and last to 1.

    On the log scale the doses are log-transformed before the affine map,
    which turns fold-change spacing into even spacing. The anchors are
    recorded so that later insertions standardize consistently.
    """
    doses = [float(d) for d in raw]
    if len(doses) < 2:
        raise ValueError("at least two doses are required")
    if any(b <= a for a, b in zip(doses, doses[1:])):
        raise ValueError("doses must be strictly increasing")
    if any(d <= 0 for d in doses):
        raise ValueError("doses must be positive")
    if scale not in ("linear", "log"):
        raise ValueError(f"unknown scale {scale!r}")
    transformed = [math.log(d) for d in doses] if scale == "log" else doses
    lo, hi = transformed[0], transformed[-1]
    std = tuple((t - lo) / (hi - lo) for t in transformed)
    return DoseGrid(
        raw_doses=tuple(doses),
        std_doses=std,
        scale=scale,
        inserted=(False,) * len(doses),
        prespecified_max_raw=doses[-1],
        anchor_lo=lo,
        anchor_hi=hi,
    )


def calibrate_kernel(grid: DoseGrid, k_lower: float, k_upper: float) -> KernelSpec:
    """Calibrate decay rates from nearest-neighbour kernel values.

    ``k_lower`` is the weight the nearest lower dose receives (sets theta1)
    and ``k_upper`` the weight of the nearest higher dose (sets theta2),
    both measured at one neighbour gap sigma. Equal values give a symmetric
    kernel.
    """
    if not (0.0 < k_lower < 1.0 and 0.0 < k_upper < 1.0):
        raise ValueError("nearest-neighbour kernel values must lie in (0, 1)")
    sigma = grid.min_gap()
    theta1 = -math.log(k_lower) / sigma**2
    theta2 = -math.log(k_upper) / sigma**2
    kind = SYMMETRIC if k_lower == k_upper else ASYMMETRIC
    return KernelSpec(kind=kind, theta1=theta1, theta2=theta2, sigma=sigma)


def symmetric_kernel(grid: DoseGrid, k_value: float) -> KernelSpec:
    """Symmetric kernel with nearest-neighbour value ``k_value``."""
    return calibrate_kernel(grid, k_value, k_value)


def kernel_eval(spec: KernelSpec, d: float, d_prime: float) -> float:
    """Kernel weight between standardized doses ``d`` (query) and ``d_prime``."""
    if spec.kind == KRONECKER:
        return 1.0 if d == d_prime else 0.0
    delta = d - d_prime
    theta = spec.theta1 if d_prime <= d else spec.theta2
    return math.exp(-theta * delta * delta)


def pseudo_counts(
    spec: KernelSpec, grid: DoseGrid, data: DoseCounts, query: float
) -> PseudoCounts:
    """Kernel-weighted pseudo-counts at a standardized query dose.

    Weights are normalized over the observed set {s : n_s > 0}, so the
    weighted sample size is an average of the accrued per-dose sample sizes
    rather than a sum; posterior precision therefore does not inflate with
    the number of explored doses.
    """
    n, y = data.n, data.y
    if len(n) != len(grid):
        raise ValueError(
            f"data covers {len(n)} doses but the grid has {len(grid)}"
        )
    observed = [s for s in range(len(grid)) if n[s] > 0]
    if not observed:
        raise ValueError("no dose has observed outcomes")
    if spec.kind == KRONECKER:
        weights = [kernel_eval(spec, query, grid.std_doses[s]) for s in observed]
        total = sum(weights)
        if total <= 0.0:
            raise ValueError(
                "kronecker kernel places no mass on the observed doses at this query"
            )
    else:
        # Normalize in log space: with sharply recalibrated decay rates the
        # raw kernel values can underflow, but the weights relative to the
        # best-matching dose never do.
        logs = []
        for s in observed:
            delta = query - grid.std_doses[s]
            theta = spec.theta1 if grid.std_doses[s] <= query else spec.theta2
            logs.append(-theta * delta * delta)
        peak = max(logs)
        weights = [math.exp(v - peak) for v in logs]
        total = sum(weights)
    y_prime = 0.0
    n_prime = 0.0
    for w, s in zip(weights, observed):
        w /= total
        y_prime += w * y[s]
        n_prime += w * n[s]
    return PseudoCounts(y_prime=y_prime, n_prime=n_prime)
