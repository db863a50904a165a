"""Log likelihood ratio statistics for hypothesized disparity vectors.

Given an estimating system with matrix g(eps), the empirical likelihood (EL)
ratio profiles row weights p_i over the probability simplex subject to
sum_i p_i g_i(eps) = 0.  The log ratio

    l(eps) = -2 max { sum_i log(n p_i) : p in simplex, sum p_i g_i = 0 }
           = 2 sum_i log(1 + lam'g_i)

is finite exactly when zero is interior to the convex hull of the g rows and
equals 0 at the unconstrained optimum eps-hat.  The Euclidean variant (EEL)
replaces the log terms by their quadratic expansion, which yields a closed
form in one linear solve; its weights may be negative but still sum to one
and satisfy the moment constraint exactly.

Both statistics are asymptotically chi-square with m degrees of freedom at
the true disparity vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disparity import AuditDataset, EstimatingSystem, GroupSpec, MetricSpec, TargetSpec, build_system
from .exceptions import DegenerateVarianceError, SingularCovarianceError
from .numerics import solve_lagrange

_COND_LIMIT = 1e12
_PROFILE_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ElEvaluation:
    """A single statistic evaluation.

    ``log_ratio`` is +inf exactly when ``feasible`` is False (EL only; the
    Euclidean statistic is always finite).  ``lam`` and ``weights`` are None
    for infeasible evaluations.
    """

    log_ratio: float
    lam: np.ndarray | None
    weights: np.ndarray | None
    feasible: bool


def _check_degenerate(system: EstimatingSystem, eps: np.ndarray) -> None:
    # a group whose scores are all equal supports only the disparity equal to
    # that constant minus theta; anywhere else the statistic is undefined
    for j in range(system.m):
        vals = system.scores[system.masks[:, j]]
        first = vals[0]
        if (vals == first).all():
            if eps[j] != first - system.theta:
                raise DegenerateVarianceError(system.group_ids[j], float(first))


def _as_eps(system: EstimatingSystem, eps) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(eps, dtype=float))
    if arr.shape != (system.m,):
        raise ValueError(f"eps must have {system.m} entries, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("eps must be finite")
    return arr


def el_log_ratio(system: EstimatingSystem, eps) -> ElEvaluation:
    """Empirical likelihood log ratio at the hypothesized disparity vector."""
    eps = _as_eps(system, eps)
    _check_degenerate(system, eps)
    g = system.build_matrix(eps)
    sol = solve_lagrange(g)
    if not sol.feasible:
        return ElEvaluation(math.inf, None, None, False)
    z = 1.0 + g @ sol.lam
    log_ratio = 2.0 * float(np.log(z).sum())
    weights = 1.0 / (system.n * z)
    return ElEvaluation(max(log_ratio, 0.0), sol.lam, weights, True)


def eel_log_ratio(system: EstimatingSystem, eps) -> ElEvaluation:
    """Euclidean likelihood log ratio; closed form, finite everywhere.

    Raises SingularCovarianceError when the estimating-function covariance is
    numerically singular (condition number beyond 1e12).
    """
    eps = _as_eps(system, eps)
    g = system.build_matrix(eps)
    n = system.n
    gbar = g.mean(axis=0)
    cov = g.T @ g / n - np.outer(gbar, gbar)
    if np.linalg.cond(cov) > _COND_LIMIT:
        raise SingularCovarianceError(
            f"estimating covariance condition number exceeds {_COND_LIMIT:.0e}"
        )
    t = np.linalg.solve(cov, gbar)
    log_ratio = float(n * gbar @ t)
    # p_i = 1/n * (1 + t'(gbar - g_i)); may be negative, sums to one and
    # satisfies the moment constraint exactly
    weights = (1.0 + float(gbar @ t) - g @ t) / n
    return ElEvaluation(max(log_ratio, 0.0), t, weights, True)


def plugin_el_log_ratio(
    data: AuditDataset,
    metric: MetricSpec,
    groups: list[GroupSpec],
    target: TargetSpec,
    eps,
) -> ElEvaluation:
    """EL log ratio with the target estimated from the same sample.

    The target must be ``population_mean`` or ``reference_group``; with a
    known target the plain ``el_log_ratio`` is the right entry point.
    """
    if not target.is_plugin:
        raise ValueError("plugin evaluation requires an estimated target")
    system = build_system(data, metric, groups, target)
    return el_log_ratio(system, eps)


def profile_el2(system: EstimatingSystem, j: int, eps_j: float) -> float:
    """Profile log ratio for group j with the other disparities maximized out.

    For disjoint groups the joint problem separates, so the profile equals
    the single-group statistic.  With overlapping groups the nuisance
    disparities are minimized by cyclic coordinate descent with golden
    section line searches, stopping when a full cycle improves the log ratio
    by less than 1e-9.
    """
    if not 0 <= j < system.m:
        raise IndexError(f"group index {j} out of range")
    eps_j = float(eps_j)
    if system.m == 1:
        return el_log_ratio(system, [eps_j]).log_ratio
    if not system.has_overlap():
        return el_log_ratio(system.restrict(j), [eps_j]).log_ratio

    eps = system.epsilon_hat()
    eps[j] = eps_j

    def value(vec: np.ndarray) -> float:
        try:
            return el_log_ratio(system, vec).log_ratio
        except DegenerateVarianceError:
            return math.inf

    current = value(eps)
    if math.isinf(current):
        # the nuisance start is the group optimum, so infeasibility can only
        # come from the fixed coordinate; no nuisance move recovers it
        return current
    for _ in range(200):
        previous = current
        for k in range(system.m):
            if k == j:
                continue
            vals = system.scores[system.masks[:, k]] - system.theta
            lo = float(vals.min())
            hi = float(vals.max())
            if lo == hi:
                continue
            current = _golden_min(value, eps, k, lo, hi, current)
        if previous - current < _PROFILE_TOL:
            break
    return current


def _golden_min(objective, eps: np.ndarray, k: int, lo: float, hi: float, current: float):
    """Minimize over coordinate k on (lo, hi); updates eps in place."""
    span = hi - lo
    a = lo + 1e-12 * span
    b = hi - 1e-12 * span
    keep = eps[k]

    def at(x: float) -> float:
        eps[k] = x
        return objective(eps)

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = at(c)
    fd = at(d)
    for _ in range(200):
        if b - a <= 1e-10 * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = at(d)
    best, fbest = (c, fc) if fc <= fd else (d, fd)
    if fbest < current:
        eps[k] = best
        return fbest
    eps[k] = keep
    return current
