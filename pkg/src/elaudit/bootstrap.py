"""Row-resampling bootstrap baseline for per-group disparity intervals.

This comparator resamples dataset rows with replacement, recomputes every
group's disparity estimate (re-estimating a plug-in target inside each
resample), and turns the resampled estimates into per-group intervals by
one of two documented schemes:

``pairs_percentile``
    The intersection of two one-sided percentile bounds, each built to
    hold jointly across groups at level ``1 - alpha``: group ``j``'s
    interval runs from the ``alpha/m`` to the ``1 - alpha/m`` quantile of
    its resampled estimates (a per-side Bonferroni split), with endpoints
    taken as order statistics under the inverted-CDF convention.  Each
    side controls its own error at ``alpha``, so the two-sided region is
    anti-conservative: with one group its asymptotic coverage is
    ``1 - 2*alpha``, not ``1 - alpha``.

``max_t``
    Simultaneous intervals from the largest studentized deviation across
    groups: the interval half-width is the upper ``alpha`` quantile of
    ``max_j |e*_j - e_j| / se_j`` scaled by each group's standard error.

Resamples that leave any required group empty are redrawn from the same
per-resample stream, up to ten times the resample budget in total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .disparity import (
    AuditDataset,
    EstimatingSystem,
    GroupSpec,
    MetricSpec,
    TargetSpec,
    build_system,
)
from .exceptions import ResampleCapError

__all__ = ["BootstrapConfig", "BootstrapReport", "bootstrap_region", "order_statistic"]

_SCHEMES = ("pairs_percentile", "max_t")
_REDRAW_FACTOR = 10


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings for a bootstrap run."""

    resamples: int = 1000
    alpha: float = 0.05
    seed: int = 0
    scheme: str = "pairs_percentile"

    def __post_init__(self):
        if int(self.resamples) != self.resamples or self.resamples < 100:
            raise ValueError(f"resamples must be an integer >= 100, got {self.resamples}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        object.__setattr__(self, "resamples", int(self.resamples))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class BootstrapReport:
    """Per-group bootstrap intervals and the resampled estimates behind them."""

    scheme: str
    alpha: float
    resamples: int
    seed: int
    group_ids: tuple[str, ...]
    epsilon_hat: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    redraws: int
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = len(self.group_ids)
        if not (len(self.epsilon_hat) == len(self.lower) == len(self.upper) == m):
            raise ValueError("per-group fields must share one length")
        for lo, hi in zip(self.lower, self.upper):
            if not lo <= hi:
                raise ValueError("each interval needs lower <= upper")

    def interval(self, j: int) -> tuple[float, float]:
        return (self.lower[j], self.upper[j])

    def covers(self, eps0) -> bool:
        """True when every group's interval contains its entry of ``eps0``."""
        eps0 = np.asarray(eps0, dtype=float)
        if eps0.shape != (len(self.group_ids),):
            raise ValueError(
                f"eps0 must have one entry per group, got shape {eps0.shape}"
            )
        return all(
            lo <= e <= hi for lo, hi, e in zip(self.lower, self.upper, eps0)
        )


def order_statistic(values, q: float) -> float:
    """Quantile as an order statistic under the inverted-CDF convention.

    Returns the ceil(q*B)-th smallest value (1-indexed), clamped to the
    smallest value at q = 0.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("values must be nonempty")
    rank = max(1, math.ceil(q * ordered.size))
    return float(ordered[rank - 1])


def bootstrap_region(
    data: AuditDataset,
    metric: MetricSpec,
    groups: list[GroupSpec],
    target: TargetSpec,
    config: BootstrapConfig,
) -> BootstrapReport:
    """Bootstrap per-group disparity intervals from dataset rows."""
    system = build_system(data, metric, groups, target)
    scores = system.scores
    masks = system.masks
    n, m = scores.size, system.m
    eps_hat = system.epsilon_hat()

    reference_mask = None
    if target.kind == "reference_group":
        reference_mask = target.group.mask(data)

    resamples = config.resamples
    cap = _REDRAW_FACTOR * resamples
    redraws = 0
    estimates = np.empty((resamples, m))
    streams = np.random.SeedSequence(config.seed).spawn(resamples)
    for b in range(resamples):
        rng = np.random.default_rng(streams[b])
        while True:
            idx = rng.integers(0, n, size=n)
            counts = masks[idx].sum(axis=0)
            usable = counts.min() > 0
            if usable and reference_mask is not None:
                usable = bool(reference_mask[idx].any())
            if usable:
                break
            redraws += 1
            if redraws > cap:
                raise ResampleCapError(
                    f"gave up after {cap} redraws of resamples with an empty group"
                )
        resampled_scores = scores[idx]
        if target.kind == "known":
            theta = system.theta
        elif target.kind == "population_mean":
            theta = float(resampled_scores.mean())
        else:
            theta = float(resampled_scores[reference_mask[idx]].mean())
        sums = resampled_scores @ masks[idx]
        estimates[b] = sums / counts - theta

    if config.scheme == "pairs_percentile":
        lower, upper = _pairs_percentile(estimates, config.alpha)
    else:
        lower, upper = _max_t(estimates, eps_hat, system, config.alpha)

    return BootstrapReport(
        scheme=config.scheme,
        alpha=config.alpha,
        resamples=resamples,
        seed=config.seed,
        group_ids=system.group_ids,
        epsilon_hat=tuple(float(v) for v in eps_hat),
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        redraws=redraws,
        samples=estimates,
    )


def _pairs_percentile(estimates: np.ndarray, alpha: float):
    m = estimates.shape[1]
    q_side = alpha / m
    lower = [order_statistic(estimates[:, j], q_side) for j in range(m)]
    upper = [order_statistic(estimates[:, j], 1.0 - q_side) for j in range(m)]
    return lower, upper


def _max_t(estimates: np.ndarray, eps_hat: np.ndarray, system: EstimatingSystem, alpha: float):
    m = estimates.shape[1]
    se = np.array(
        [system.group_std(j) / math.sqrt(int(system.group_sizes[j])) for j in range(m)]
    )
    deviations = np.abs(estimates - eps_hat[None, :])
    scaled = np.empty_like(deviations)
    for j in range(m):
        if se[j] > 0.0:
            scaled[:, j] = deviations[:, j] / se[j]
        else:
            # A zero-spread group only ever reproduces its own estimate;
            # any other deviation is infinitely surprising.
            scaled[:, j] = np.where(deviations[:, j] == 0.0, 0.0, np.inf)
    statistic = scaled.max(axis=1)
    width = order_statistic(statistic, 1.0 - alpha) * se
    return list(eps_hat - width), list(eps_hat + width)
