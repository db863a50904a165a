"""Certification tests, per-group flagging tests, confidence intervals,
and step-up multiple-testing control for group disparity audits.

The certification test asks whether every group's disparity equals a
hypothesized vector and reports a chi-square p-value with one degree of
freedom per group.  The per-group flagging tests handle point, one-sided,
and interval null hypotheses about a single group's disparity; one-sided
and interval statistics are referenced against an equal mixture of a point
mass at zero and a chi-square with one degree of freedom, evaluated at the
least favorable boundary of the null.  Confidence intervals invert the
point and one-sided tests by bisection.  Flagging across many groups feeds
the per-group p-values through the Benjamini-Hochberg step-up rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disparity import EstimatingSystem
from .exceptions import (
    BracketFailureError,
    DegenerateVarianceError,
    InvalidIntervalError,
)
from .likelihood import el_log_ratio, eel_log_ratio
from .numerics import DistributionRef, chi2_cdf, chi2_quantile, half_mixture_sf

__all__ = [
    "HypothesisSpec",
    "TestResult",
    "CertificationReport",
    "ConfidenceInterval",
    "FlagReport",
    "certify",
    "test_point",
    "test_at_least",
    "test_at_most",
    "test_interval",
    "confidence_interval",
    "elbh_flag",
    "flag_groups",
]

_HYPOTHESIS_KINDS = ("point", "at_least", "at_most", "interval")
_CI_KINDS = ("two_sided", "lower_one_sided", "upper_one_sided")

# Bisection settings for test inversion: the initial bracket extends four
# in-group standard errors from the point estimate and doubles on failure.
_BRACKET_DOUBLINGS = 60
_BISECT_TOL = 1e-10
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class HypothesisSpec:
    """A null hypothesis about one group's disparity.

    ``point`` tests equality with ``eps0``; ``at_least`` tests that the
    disparity is at least ``eps0``; ``at_most`` that it is at most
    ``eps0``; ``interval`` that it lies in ``[eps1, eps2]``.
    """

    kind: str
    eps0: float | None = None
    eps1: float | None = None
    eps2: float | None = None

    def __post_init__(self):
        if self.kind not in _HYPOTHESIS_KINDS:
            raise ValueError(
                f"kind must be one of {_HYPOTHESIS_KINDS}, got {self.kind!r}"
            )
        if self.kind == "interval":
            if self.eps1 is None or self.eps2 is None:
                raise InvalidIntervalError("interval hypothesis needs eps1 and eps2")
            if not (float(self.eps1) < float(self.eps2)):
                raise InvalidIntervalError(
                    f"interval requires eps1 < eps2, got [{self.eps1}, {self.eps2}]"
                )
            object.__setattr__(self, "eps1", float(self.eps1))
            object.__setattr__(self, "eps2", float(self.eps2))
        else:
            if self.eps0 is None:
                raise ValueError(f"{self.kind} hypothesis needs eps0")
            if not math.isfinite(float(self.eps0)):
                raise ValueError("eps0 must be finite")
            object.__setattr__(self, "eps0", float(self.eps0))

    @classmethod
    def point(cls, eps0: float) -> "HypothesisSpec":
        return cls(kind="point", eps0=eps0)

    @classmethod
    def at_least(cls, eps0: float) -> "HypothesisSpec":
        return cls(kind="at_least", eps0=eps0)

    @classmethod
    def at_most(cls, eps0: float) -> "HypothesisSpec":
        return cls(kind="at_most", eps0=eps0)

    @classmethod
    def interval(cls, eps1: float, eps2: float) -> "HypothesisSpec":
        return cls(kind="interval", eps1=eps1, eps2=eps2)


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single-group hypothesis test."""

    statistic: float
    reference: DistributionRef
    p_value: float
    reject: bool
    alpha: float
    epsilon_hat: float

    def __post_init__(self):
        if math.isnan(self.statistic) or self.statistic < 0.0:
            raise ValueError("statistic must be a nonnegative extended real")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.reject != (self.p_value < self.alpha):
            raise ValueError("reject must equal (p_value < alpha)")


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of the joint all-groups certification test."""

    method: str
    statistic: float
    df: int
    p_value: float
    certified: bool
    alpha: float

    def __post_init__(self):
        if self.method not in ("el", "eel"):
            raise ValueError(f"method must be 'el' or 'eel', got {self.method!r}")
        if math.isnan(self.statistic) or self.statistic < 0.0:
            raise ValueError("statistic must be a nonnegative extended real")
        if self.df < 1:
            raise ValueError("df must be a positive integer")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.certified != (self.p_value >= self.alpha):
            raise ValueError("certified must equal (p_value >= alpha)")


@dataclass(frozen=True)
class ConfidenceInterval:
    """Disparity values not rejected by the inverted test.

    ``two_sided`` intervals are bounded on both ends; ``lower_one_sided``
    has ``upper = +inf`` and ``upper_one_sided`` has ``lower = -inf``.
    """

    kind: str
    alpha: float
    lower: float
    upper: float
    epsilon_hat: float

    def __post_init__(self):
        if self.kind not in _CI_KINDS:
            raise ValueError(f"kind must be one of {_CI_KINDS}, got {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.lower <= self.epsilon_hat <= self.upper:
            raise ValueError("interval must contain the point estimate")

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class FlagReport:
    """Outcome of step-up multiple testing across groups."""

    group_ids: tuple[str, ...]
    p_values: tuple[float, ...]
    bh_alpha: float
    k_star: int
    flagged: tuple[bool, ...]
    overlap_warning: bool

    def __post_init__(self):
        m = len(self.group_ids)
        if len(self.p_values) != m or len(self.flagged) != m:
            raise ValueError("group_ids, p_values and flagged must share length")
        if not 0.0 < self.bh_alpha < 1.0:
            raise ValueError("bh_alpha must lie in (0, 1)")
        if not 0 <= self.k_star <= m:
            raise ValueError("k_star must lie in [0, number of groups]")

    @property
    def flagged_ids(self) -> tuple[str, ...]:
        return tuple(g for g, f in zip(self.group_ids, self.flagged) if f)


def certify(
    system: EstimatingSystem,
    eps0,
    alpha: float,
    method: str = "el",
) -> CertificationReport:
    """Test jointly that every group's disparity equals ``eps0``.

    The statistic is the likelihood log-ratio at ``eps0`` referenced to a
    chi-square with one degree of freedom per group.  Certification holds
    when the p-value is at least ``alpha``; a hypothesized vector outside
    the convex hull of the data yields an infinite statistic and p = 0.
    """
    _check_alpha(alpha)
    if method not in ("el", "eel"):
        raise ValueError(f"method must be 'el' or 'eel', got {method!r}")
    evaluate = el_log_ratio if method == "el" else eel_log_ratio
    eps = np.asarray(eps0, dtype=float)
    if eps.ndim == 0:
        eps = np.full(system.m, float(eps))
    ev = evaluate(system, eps)
    statistic = float(ev.log_ratio)
    df = system.m
    p_value = 0.0 if math.isinf(statistic) else 1.0 - chi2_cdf(statistic, df)
    return CertificationReport(
        method=method,
        statistic=statistic,
        df=df,
        p_value=p_value,
        certified=p_value >= alpha,
        alpha=alpha,
    )


def _point_statistic(system: EstimatingSystem, j: int, eps0: float) -> float:
    """Single-group log-ratio statistic at ``eps0``, ignoring other groups."""
    sub = system.restrict(j)
    return float(el_log_ratio(sub, [eps0]).log_ratio)


def test_point(
    system: EstimatingSystem, j: int, eps0: float, alpha: float
) -> TestResult:
    """Test that group ``j``'s disparity equals ``eps0``."""
    _check_alpha(alpha)
    statistic = _point_statistic(system, j, eps0)
    p_value = 1.0 - chi2_cdf(statistic, 1)
    return TestResult(
        statistic=statistic,
        reference=DistributionRef(kind="chi_square", df=1),
        p_value=p_value,
        reject=p_value < alpha,
        alpha=alpha,
        epsilon_hat=_group_epsilon_hat(system, j),
    )


def test_at_least(
    system: EstimatingSystem, j: int, eps0: float, alpha: float
) -> TestResult:
    """Test that group ``j``'s disparity is at least ``eps0``.

    The statistic is the point statistic gated by the estimate falling
    below ``eps0``: samples with an in-group mean on the null side carry a
    zero statistic and p-value one.
    """
    _check_alpha(alpha)
    eps_hat = _group_epsilon_hat(system, j)
    statistic = _point_statistic(system, j, eps0) if eps_hat < eps0 else 0.0
    return _one_sided_result(system, j, statistic, alpha, eps_hat)


def test_at_most(
    system: EstimatingSystem, j: int, eps0: float, alpha: float
) -> TestResult:
    """Test that group ``j``'s disparity is at most ``eps0``."""
    _check_alpha(alpha)
    eps_hat = _group_epsilon_hat(system, j)
    statistic = _point_statistic(system, j, eps0) if eps_hat > eps0 else 0.0
    return _one_sided_result(system, j, statistic, alpha, eps_hat)


def test_interval(
    system: EstimatingSystem, j: int, eps1: float, eps2: float, alpha: float
) -> TestResult:
    """Test that group ``j``'s disparity lies in ``[eps1, eps2]``."""
    _check_alpha(alpha)
    if not (float(eps1) < float(eps2)):
        raise InvalidIntervalError(
            f"interval requires eps1 < eps2, got [{eps1}, {eps2}]"
        )
    eps_hat = _group_epsilon_hat(system, j)
    if eps_hat < eps1:
        statistic = _point_statistic(system, j, eps1)
    elif eps_hat > eps2:
        statistic = _point_statistic(system, j, eps2)
    else:
        statistic = 0.0
    return _one_sided_result(system, j, statistic, alpha, eps_hat)


def _one_sided_result(
    system: EstimatingSystem,
    j: int,
    statistic: float,
    alpha: float,
    eps_hat: float,
) -> TestResult:
    p_value = half_mixture_sf(statistic)
    return TestResult(
        statistic=statistic,
        reference=DistributionRef(kind="half_mixture_chi2_1"),
        p_value=p_value,
        reject=p_value < alpha,
        alpha=alpha,
        epsilon_hat=eps_hat,
    )


def confidence_interval(
    system: EstimatingSystem,
    j: int,
    alpha: float,
    kind: str = "two_sided",
) -> ConfidenceInterval:
    """Invert the point or one-sided tests into a confidence interval.

    The two-sided interval collects the values whose point statistic stays
    below the upper chi-square quantile; one-sided intervals invert the
    gated statistics, whose null distribution at the boundary halves the
    tail and so uses the 1 - 2*alpha quantile.  Endpoints are located by
    bisection between the point estimate and an expanding outer bracket.
    """
    _check_alpha(alpha)
    if kind not in _CI_KINDS:
        raise ValueError(f"kind must be one of {_CI_KINDS}, got {kind!r}")
    sub = system.restrict(j)
    eps_hat = float(sub.epsilon_hat()[0])
    spread = sub.group_std(0)
    if not (spread > 0.0) or not math.isfinite(spread):
        raise DegenerateVarianceError(
            system.group_ids[j], float(system.scores[system.masks[:, j]][0])
        )
    size = int(sub.group_sizes[0])
    step = 4.0 * spread / math.sqrt(size)

    if kind == "two_sided":
        threshold = chi2_quantile(1.0 - alpha, 1)
    else:
        threshold = chi2_quantile(1.0 - 2.0 * alpha, 1)

    def statistic(eps: float) -> float:
        return float(el_log_ratio(sub, [eps]).log_ratio)

    lower = -math.inf
    upper = math.inf
    if kind in ("two_sided", "lower_one_sided"):
        lower = _invert_side(statistic, eps_hat, -step, threshold)
    if kind in ("two_sided", "upper_one_sided"):
        upper = _invert_side(statistic, eps_hat, +step, threshold)
    return ConfidenceInterval(
        kind=kind, alpha=alpha, lower=lower, upper=upper, epsilon_hat=eps_hat
    )


def _invert_side(statistic, center: float, step: float, threshold: float) -> float:
    """Find the point where the statistic crosses ``threshold``.

    The statistic is zero at ``center``, continuous and increasing away
    from it on the feasible range, and infinite beyond; bisection between
    ``center`` and any outer point at or above the threshold converges to
    the crossing.
    """
    outer = center + step
    for _ in range(_BRACKET_DOUBLINGS):
        if statistic(outer) >= threshold:
            break
        step *= 2.0
        outer = center + step
    else:
        raise BracketFailureError(
            f"no bracket for the confidence bound after {_BRACKET_DOUBLINGS} "
            "doublings"
        )
    inner = center
    for _ in range(_BISECT_MAX_ITER):
        if abs(outer - inner) <= _BISECT_TOL * max(1.0, abs(inner), abs(outer)):
            break
        mid = 0.5 * (inner + outer)
        if statistic(mid) >= threshold:
            outer = mid
        else:
            inner = mid
    return 0.5 * (inner + outer)


def elbh_flag(
    p_values,
    alpha: float,
    group_ids=None,
    overlap: bool = False,
) -> FlagReport:
    """Benjamini-Hochberg step-up over per-group p-values.

    Sorts the p-values ascending (ties broken by group position), finds
    the largest k with p_(k) <= k * alpha / m, and flags every hypothesis
    with a p-value at or below that threshold.  ``overlap`` marks reports
    whose false-discovery guarantee is weakened by shared rows between
    groups.
    """
    _check_alpha(alpha)
    p = [float(v) for v in p_values]
    m = len(p)
    if group_ids is None:
        group_ids = tuple(str(i) for i in range(m))
    group_ids = tuple(str(g) for g in group_ids)
    if len(group_ids) != m:
        raise ValueError("group_ids must match p_values in length")
    for v in p:
        if math.isnan(v) or not 0.0 <= v <= 1.0:
            raise ValueError(f"p-values must lie in [0, 1], got {v}")
    if m == 0:
        return FlagReport(
            group_ids=(),
            p_values=(),
            bh_alpha=alpha,
            k_star=0,
            flagged=(),
            overlap_warning=bool(overlap),
        )

    order = sorted(range(m), key=lambda i: (p[i], i))
    k_star = 0
    for rank, idx in enumerate(order, start=1):
        if p[idx] <= rank * alpha / m:
            k_star = rank
    if k_star == 0:
        flagged = tuple(False for _ in range(m))
    else:
        cutoff = p[order[k_star - 1]]
        flagged = tuple(v <= cutoff for v in p)
    return FlagReport(
        group_ids=group_ids,
        p_values=tuple(p),
        bh_alpha=alpha,
        k_star=k_star,
        flagged=flagged,
        overlap_warning=bool(overlap),
    )


def flag_groups(
    system: EstimatingSystem,
    hypothesis: HypothesisSpec,
    alpha: float,
) -> FlagReport:
    """Run one hypothesis test per group and apply the step-up rule.

    Each group is tested on its own restricted system; the report carries
    an overlap warning when groups share rows, since the step-up guarantee
    assumes disjoint groups.
    """
    _check_alpha(alpha)
    p_values = []
    for j in range(system.m):
        if hypothesis.kind == "point":
            result = test_point(system, j, hypothesis.eps0, alpha)
        elif hypothesis.kind == "at_least":
            result = test_at_least(system, j, hypothesis.eps0, alpha)
        elif hypothesis.kind == "at_most":
            result = test_at_most(system, j, hypothesis.eps0, alpha)
        else:
            result = test_interval(system, j, hypothesis.eps1, hypothesis.eps2, alpha)
        p_values.append(result.p_value)
    return elbh_flag(
        p_values,
        alpha,
        group_ids=system.group_ids,
        overlap=system.has_overlap(),
    )


def _group_epsilon_hat(system: EstimatingSystem, j: int) -> float:
    if not 0 <= j < system.m:
        raise IndexError(f"group index {j} out of range")
    return float(system.scores[system.masks[:, j]].mean() - system.theta)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < float(alpha) < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
