"""Special-function and monotone-regression primitives.

Everything here is a pure function of its arguments and safe to call
concurrently. The incomplete beta evaluator is the workhorse behind every
posterior interval probability in the decision rules, so it is implemented
directly (continued fraction, modified Lentz) rather than pulled from a
heavier dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = ["BetaParams", "reg_inc_beta", "beta_interval_prob", "pava"]

# Continued-fraction convergence settings. The shapes that arise in trial
# conduct stay below ~60 (prior mass + max sample size), where the Lentz
# recursion converges in well under 100 iterations.
_CF_TOL = 1e-14
_CF_MAX_ITER = 500
_TINY = 1e-300


@dataclass(frozen=True, slots=True)
class BetaParams:
    """Shape parameters (alpha, beta) of a Beta distribution, both > 0."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0) or not (self.beta > 0.0):
            raise ValueError(
                f"Beta shapes must be positive, got ({self.alpha}, {self.beta})"
            )

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta, evaluated with the
    # modified Lentz algorithm.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x}"
    )


def reg_inc_beta(x: float, p: BetaParams) -> float:
    """Regularized incomplete beta function I_x(alpha, beta).

    This is the CDF of a Beta(alpha, beta) distribution at ``x``. The
    continued fraction is applied on whichever tail converges fastest
    (switching at x = (alpha+1)/(alpha+beta+2)) and the result is exact to
    well below 1e-10 absolute error.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    a, b = p.alpha, p.beta
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        value = front * _betacf(a, b, x) / a
    else:
        value = 1.0 - front * _betacf(b, a, 1.0 - x) / b
    # Guard against sub-ulp excursions outside [0, 1].
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return value


def beta_interval_prob(p: BetaParams, lo: float, hi: float) -> float:
    """Posterior probability that a Beta(p) variate falls in (lo, hi]."""
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError(f"need 0 <= lo < hi <= 1, got ({lo}, {hi})")
    value = reg_inc_beta(hi, p) - reg_inc_beta(lo, p)
    if value < 0.0:
        return 0.0
    if value > 1.0:
        return 1.0
    return value


def pava(
    values: Sequence[float],
    weights: Sequence[float] | None = None,
    direction: str = "nondecreasing",
) -> list[float]:
    """Weighted least-squares monotone fit via pooled adjacent violators.

    Runs the linear-time stack formulation: adjacent blocks violating the
    requested ordering are merged into their weighted mean. The output
    minimizes sum(w_i * (out_i - values_i)**2) over all sequences monotone
    in ``direction``. The nonincreasing direction is realized by negating
    the values.
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if weights is None:
        wts = None
    else:
        wts = [float(w) for w in weights]
        if len(wts) != n:
            raise ValueError(
                f"values and weights must have equal length, got {n} and {len(wts)}"
            )
        if any(not (w > 0.0) for w in wts):
            raise ValueError("weights must be strictly positive")
    if direction == "nonincreasing":
        return [-v for v in pava([-v for v in vals], wts, "nondecreasing")]
    if direction != "nondecreasing":
        raise ValueError(f"unknown direction {direction!r}")
    if n <= 1:
        return vals

    # Stack of pooled blocks as parallel lists: mean, total weight, size.
    means: list[float] = []
    bw: list[float] = []
    sizes: list[int] = []
    push_m = means.append
    push_w = bw.append
    push_s = sizes.append
    for i, cur_m in enumerate(vals):
        cur_w = 1.0 if wts is None else wts[i]
        cur_s = 1
        while means and means[-1] > cur_m:
            pw = bw.pop()
            tw = pw + cur_w
            cur_m = (means.pop() * pw + cur_m * cur_w) / tw
            cur_w = tw
            cur_s += sizes.pop()
        push_m(cur_m)
        push_w(cur_w)
        push_s(cur_s)

    out: list[float] = []
    for m, s in zip(means, sizes):
        out.extend([m] * s)
    return out
