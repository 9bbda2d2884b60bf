"""Time-to-event handling: fractional follow-up weights, effective counts,
and the escalation-suspension rule.

Pending patients contribute their accrued DLT-free follow-up as a fraction
of the assessment window, which converts partially observed outcomes into
effective binomial statistics. Those effective counts drop into the sharing
and decision machinery exactly where complete counts would go, and reduce
to them once every outcome is ascertained.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

__all__ = [
    "PatientRecord",
    "EffectiveCounts",
    "EffectiveData",
    "follow_up_weight",
    "effective_counts",
    "escalation_permitted",
    "effective_data",
]


@dataclass(frozen=True, slots=True)
class PatientRecord:
    """One patient's enrollment, latent outcome, and current follow-up.

    ``dlt_time`` is measured from enrollment and is infinity when no DLT
    occurs within the assessment window; ``followup`` is the observed
    follow-up at the interim, capped at the window length.
    """

    dose_index: int
    enroll_time: float
    dlt: bool
    dlt_time: float
    followup: float

    def is_ascertained(self, tau: float) -> bool:
        if self.followup > tau + 1e-12:
            raise ValueError(f"follow-up {self.followup} exceeds the window {tau}")
        if self.dlt and self.dlt_time <= self.followup:
            return True
        return self.followup >= tau

    def observed_dlt(self, tau: float) -> bool:
        return self.dlt and self.dlt_time <= min(self.followup, tau)


class EffectiveCounts(NamedTuple):
    """Effective DLT count and effective sample size at one dose."""

    y_eff: float
    n_eff: float


class EffectiveData(NamedTuple):
    """Per-dose effective counts in the layout the kernels expect."""

    n: tuple[float, ...]
    y: tuple[float, ...]


def follow_up_weight(p: PatientRecord, tau: float) -> float:
    """Information weight of one patient at the interim.

    Ascertained outcomes (DLT already observed, or the window completed
    without one) carry full weight; pending outcomes carry followup/tau,
    the probability of the DLT having been seen by now under a uniform
    event-time working assumption.
    """
    if tau <= 0:
        raise ValueError("assessment window must be positive")
    if p.is_ascertained(tau):
        return 1.0
    return p.followup / tau


def effective_counts(patients: Sequence[PatientRecord], tau: float) -> EffectiveCounts:
    """Effective binomial statistics for the patients at one dose.

    Observed DLTs count fully; completed DLT-free windows count fully toward
    the non-DLT side; pending patients add their fractional weight to the
    non-DLT side. With everything ascertained this reduces to the exact
    complete-data counts.
    """
    y_eff = 0.0
    m_eff = 0.0
    for p in patients:
        if p.observed_dlt(tau):
            y_eff += 1.0
        elif p.is_ascertained(tau):
            m_eff += 1.0
        else:
            m_eff += p.followup / tau
    return EffectiveCounts(y_eff=y_eff, n_eff=y_eff + m_eff)


def escalation_permitted(patients: Sequence[PatientRecord], tau: float) -> bool:
    """Suspension rule: escalation requires two ascertained outcomes.

    Applies only to a proposed escalation; when it fails, the next cohort is
    treated at the current dose instead. Other transitions are unaffected.
    """
    completed = sum(1 for p in patients if p.is_ascertained(tau))
    return completed >= 2


def effective_data(
    patients: Sequence[PatientRecord], n_doses: int, tau: float
) -> EffectiveData:
    """Stack per-dose effective counts into grid-shaped vectors."""
    buckets: list[list[PatientRecord]] = [[] for _ in range(n_doses)]
    for p in patients:
        buckets[p.dose_index].append(p)
    counts = [effective_counts(group, tau) for group in buckets]
    return EffectiveData(
        n=tuple(c.n_eff for c in counts), y=tuple(c.y_eff for c in counts)
    )
