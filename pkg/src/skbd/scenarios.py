"""Scenario catalogs and generators for operating-characteristic studies.

Provides the twenty-scenario fixed catalog (dose ranks with a target rate of
0.2 for the first ten and 0.3 for the rest), six insertion scenarios backed
by sigmoidal Emax curves so toxicity is defined at any inserted dose, and a
pseudo-uniform random generator that places the MTD uniformly over levels
and rejection-samples monotone curves against admissibility constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Scenario",
    "EmaxParams",
    "emax_curve",
    "fit_emax",
    "fixed_scenarios",
    "insertion_scenarios",
    "random_scenario",
    "scenario_to_dict",
    "scenario_from_dict",
]


@dataclass(frozen=True, slots=True)
class EmaxParams:
    """Sigmoidal Emax dose-toxicity curve parameters."""

    ec50: float
    gamma: float
    e0: float = 0.0
    emax: float = 1.0

    def __post_init__(self) -> None:
        if self.ec50 <= 0:
            raise ValueError("ec50 must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.e0 < 0 or self.emax <= 0 or self.e0 + self.emax > 1.0 + 1e-12:
            raise ValueError("need 0 <= e0 and e0 + emax <= 1 for probabilities")

    def at(self, dose: float) -> float:
        if dose <= 0:
            return self.e0
        # Logistic in log-dose: emax * r / (1 + r) with r = (d / ec50)^gamma.
        z = self.gamma * (math.log(dose) - math.log(self.ec50))
        return self.e0 + self.emax / (1.0 + math.exp(-z))

    def inverse(self, prob: float) -> float:
        """Dose at which the curve crosses ``prob``."""
        frac = (prob - self.e0) / self.emax
        if not 0.0 < frac < 1.0:
            raise ValueError(f"probability {prob} outside the curve's range")
        return self.ec50 * math.exp(math.log(frac / (1.0 - frac)) / self.gamma)


def emax_curve(params: EmaxParams, doses: Sequence[float]) -> list[float]:
    """Evaluate the Emax curve at each dose."""
    return [params.at(float(d)) for d in doses]


@dataclass(frozen=True, slots=True)
class Scenario:
    """A dose-toxicity truth for simulation.

    ``mtd_index`` is the 1-based dose level whose toxicity is closest to the
    target (absent when the true MTD lies off-grid); ``mtd_dose`` is the
    continuous MTD in raw dose units for insertion studies; ``curve`` is the
    generating curve when one exists, used to evaluate toxicity at inserted
    doses.
    """

    name: str
    raw_doses: tuple[float, ...]
    tox: tuple[float, ...]
    phi: float
    mtd_index: Optional[int] = None
    mtd_dose: Optional[float] = None
    curve: Optional[EmaxParams] = None

    def __post_init__(self) -> None:
        if len(self.raw_doses) != len(self.tox):
            raise ValueError("doses and toxicities must have equal length")
        if any(b <= a for a, b in zip(self.raw_doses, self.raw_doses[1:])):
            raise ValueError("doses must be strictly increasing")
        if any(not 0.0 <= t <= 1.0 for t in self.tox):
            raise ValueError("toxicities must lie in [0, 1]")
        if any(b < a - 1e-12 for a, b in zip(self.tox, self.tox[1:])):
            raise ValueError("toxicities must be nondecreasing")
        if not 0.0 < self.phi < 1.0:
            raise ValueError("phi must lie in (0, 1)")
        if self.mtd_index is not None:
            want = self.implied_mtd_level()
            if self.mtd_index != want:
                raise ValueError(
                    f"mtd_index {self.mtd_index} disagrees with argmin level {want}"
                )

    def implied_mtd_level(self) -> int:
        """1-based level closest to the target, lowest on ties."""
        gaps = [abs(t - self.phi) for t in self.tox]
        return gaps.index(min(gaps)) + 1

    @property
    def n_doses(self) -> int:
        return len(self.raw_doses)


def fit_emax(
    doses: Sequence[float],
    tox: Sequence[float],
    phi: float,
    mtd_dose: float,
) -> EmaxParams:
    """Recover (ec50, gamma) from published toxicities and a continuous MTD.

    The curve is constrained to pass exactly through (mtd_dose, phi), which
    pins ec50 given gamma; gamma is then chosen by least squares against the
    published per-dose toxicities. Direct two-point inversion is too
    ill-conditioned here: the published probabilities are rounded to two
    decimals and the logit scale amplifies that rounding badly near zero.
    """
    logit_phi = math.log(phi / (1.0 - phi))
    log_mtd = math.log(mtd_dose)

    def curve_for(gamma: float) -> EmaxParams:
        return EmaxParams(ec50=math.exp(log_mtd - logit_phi / gamma), gamma=gamma)

    def sse(gamma: float) -> float:
        params = curve_for(gamma)
        return sum((params.at(d) - t) ** 2 for d, t in zip(doses, tox))

    # Coarse scan over log-gamma, then golden-section refinement.
    grid = [math.exp(g) for g in np.linspace(math.log(0.05), math.log(20.0), 200)]
    best = min(grid, key=sse)
    idx = grid.index(best)
    lo = grid[max(0, idx - 1)]
    hi = grid[min(len(grid) - 1, idx + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = sse(c), sse(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = sse(d)
    return curve_for((a + b) / 2.0)


# Fixed catalog: five dose levels represented by their ranks; the first ten
# target a DLT rate of 0.2, the last ten 0.3.
_FIXED_TOX: tuple[tuple[float, ...], ...] = (
    (0.20, 0.26, 0.40, 0.45, 0.46),
    (0.20, 0.29, 0.35, 0.50, 0.58),
    (0.10, 0.20, 0.25, 0.35, 0.40),
    (0.08, 0.20, 0.30, 0.45, 0.65),
    (0.04, 0.06, 0.20, 0.32, 0.50),
    (0.01, 0.10, 0.20, 0.26, 0.35),
    (0.05, 0.06, 0.07, 0.20, 0.31),
    (0.02, 0.04, 0.10, 0.20, 0.25),
    (0.01, 0.02, 0.07, 0.08, 0.20),
    (0.01, 0.02, 0.03, 0.04, 0.20),
    (0.30, 0.36, 0.42, 0.45, 0.46),
    (0.30, 0.40, 0.55, 0.60, 0.70),
    (0.08, 0.30, 0.38, 0.42, 0.52),
    (0.13, 0.30, 0.42, 0.50, 0.80),
    (0.04, 0.07, 0.30, 0.35, 0.42),
    (0.01, 0.12, 0.30, 0.41, 0.55),
    (0.06, 0.07, 0.12, 0.30, 0.40),
    (0.02, 0.05, 0.16, 0.30, 0.36),
    (0.01, 0.02, 0.04, 0.06, 0.30),
    (0.06, 0.07, 0.08, 0.12, 0.30),
)

_RANK_DOSES = (1.0, 2.0, 3.0, 4.0, 5.0)

# Insertion scenarios: (doses, published toxicities, continuous MTD).
_INSERTION_SPECS: tuple[tuple[tuple[float, ...], tuple[float, ...], float], ...] = (
    ((5.0, 15.0, 25.0, 35.0, 45.0), (0.14, 0.45, 0.63, 0.74, 0.80), 9.6),
    ((5.0, 10.0, 20.0, 35.0, 60.0), (0.03, 0.14, 0.45, 0.75, 0.91), 15.1),
    ((5.0, 7.5, 15.0, 30.0, 60.0), (0.03, 0.06, 0.20, 0.50, 0.80), 19.6),
    ((1.0, 1.5, 3.0, 5.0, 10.0), (0.02, 0.03, 0.09, 0.20, 0.45), 6.8),
    ((10.0, 20.0, 30.0, 40.0, 50.0), (0.45, 0.55, 0.61, 0.65, 0.68), 3.2),
    ((5.0, 10.0, 20.0, 35.0, 50.0), (0.03, 0.05, 0.09, 0.15, 0.20), 86.8),
)


@lru_cache(maxsize=1)
def fixed_scenarios() -> tuple[Scenario, ...]:
    """The twenty-scenario fixed catalog on dose ranks 1..5."""
    out = []
    for i, tox in enumerate(_FIXED_TOX, start=1):
        phi = 0.2 if i <= 10 else 0.3
        gaps = [abs(t - phi) for t in tox]
        out.append(
            Scenario(
                name=f"fixed-{i}",
                raw_doses=_RANK_DOSES,
                tox=tox,
                phi=phi,
                mtd_index=gaps.index(min(gaps)) + 1,
            )
        )
    return tuple(out)


@lru_cache(maxsize=1)
def insertion_scenarios() -> tuple[Scenario, ...]:
    """Six insertion scenarios with their recovered Emax curves attached.

    The continuous MTD lies off the prespecified grid in every scenario, so
    ``mtd_index`` is absent and toxicity at inserted doses comes from the
    curve.
    """
    out = []
    for i, (doses, tox, mtd) in enumerate(_INSERTION_SPECS, start=1):
        curve = fit_emax(doses, tox, phi=0.3, mtd_dose=mtd)
        out.append(
            Scenario(
                name=f"emax-{i}",
                raw_doses=doses,
                tox=tuple(curve.at(d) for d in doses),
                phi=0.3,
                mtd_dose=mtd,
                curve=curve,
            )
        )
    return tuple(out)


def random_scenario(
    j_levels: int,
    phi: float,
    rng: np.random.Generator,
    *,
    eps1: float = 0.05,
    eps2: float = 0.05,
    max_increment: float = 0.3,
    mtd_window: float = 0.05,
    max_attempts: int = 100_000,
    name: str = "random",
) -> Scenario:
    """Draw one admissible random dose-toxicity scenario.

    The MTD level is drawn uniformly, an upper toxicity bound B is drawn as
    phi + (1-phi)*M with M ~ Beta(max(J-j, 0.5), 1), and sorted uniforms on
    [0, B] are resampled until the drawn level is the strict MTD, its
    toxicity falls within ``mtd_window`` of the target, and the increments
    to adjacent doses lie in [eps1|eps2, max_increment]. Because the level
    is fixed before rejection, accepted MTD locations are exactly uniform.
    """
    if j_levels < 2:
        raise ValueError("need at least two dose levels")
    j = int(rng.integers(1, j_levels + 1))
    pivot = j - 1
    shape = max(j_levels - j, 0.5)
    attempts = 0
    batch = 128
    while attempts < max_attempts:
        size = min(batch, max_attempts - attempts)
        m = rng.beta(shape, 1.0, size=size)
        bound = phi + (1.0 - phi) * m
        tox = np.sort(rng.uniform(0.0, 1.0, size=(size, j_levels)), axis=1)
        tox *= bound[:, None]
        gaps = np.abs(tox - phi)
        others = np.delete(gaps, pivot, axis=1)
        ok = np.all(others > gaps[:, [pivot]], axis=1)
        ok &= gaps[:, pivot] <= mtd_window
        if pivot > 0:
            step = tox[:, pivot] - tox[:, pivot - 1]
            ok &= (step >= eps1) & (step <= max_increment)
        if pivot < j_levels - 1:
            step = tox[:, pivot + 1] - tox[:, pivot]
            ok &= (step >= eps2) & (step <= max_increment)
        hits = np.flatnonzero(ok)
        if hits.size:
            row = tox[hits[0]]
            return Scenario(
                name=name,
                raw_doses=tuple(float(k) for k in range(1, j_levels + 1)),
                tox=tuple(float(t) for t in row),
                phi=phi,
                mtd_index=j,
            )
        attempts += size
    raise RuntimeError(
        f"no admissible scenario found in {max_attempts} attempts "
        f"(J={j_levels}, phi={phi}, level={j})"
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    out: dict = {
        "name": scenario.name,
        "doses": list(scenario.raw_doses),
        "tox": list(scenario.tox),
        "phi": scenario.phi,
    }
    if scenario.mtd_index is not None:
        out["mtd_index"] = scenario.mtd_index
    if scenario.mtd_dose is not None:
        out["mtd_dose"] = scenario.mtd_dose
    if scenario.curve is not None:
        out["curve"] = {
            "ec50": scenario.curve.ec50,
            "gamma": scenario.curve.gamma,
            "e0": scenario.curve.e0,
            "emax": scenario.curve.emax,
        }
    return out


def scenario_from_dict(payload: dict, default_name: str = "scenario") -> Scenario:
    known = {"name", "doses", "tox", "phi", "mtd_index", "mtd_dose", "curve"}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
    for required in ("doses", "tox", "phi"):
        if required not in payload:
            raise ValueError(f"scenario is missing required field {required!r}")
    curve = None
    if payload.get("curve") is not None:
        curve = EmaxParams(**payload["curve"])
    return Scenario(
        name=str(payload.get("name", default_name)),
        raw_doses=tuple(float(d) for d in payload["doses"]),
        tox=tuple(float(t) for t in payload["tox"]),
        phi=float(payload["phi"]),
        mtd_index=payload.get("mtd_index"),
        mtd_dose=payload.get("mtd_dose"),
        curve=curve,
    )
