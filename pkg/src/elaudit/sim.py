"""Monte-Carlo harness for synthetic disparity-audit experiments.

Three synthetic data models share a common shape: rows carry a feature x
uniform on [0, 1), an outcome y, and a model prediction, with groups given
by the m equal-width bins of [0, 1) and a known target of zero.

``homoskedastic``
    y ~ Normal(beta0 * x, 1); the prediction is beta_hat * x with beta_hat
    fit by ordinary least squares through the origin on a fresh training
    sample of the same size; the per-row score is the squared prediction
    error.  Every bin's true disparity is 1.

``heteroskedastic``
    Same fit and score, but Var(y | x) = x; bin j of m has true disparity
    (2j - 1) / (2m).

``location_shift``
    y = beta0 * x + noise and the prediction uses the fixed slope
    beta0 - 2 * tau, so the residual score y - prediction has mean
    2 * tau * x; bin j has true disparity (2j - 1) * tau / m.  The noise is
    standard normal or a centered unit exponential.

Every replication draws from derived random streams keyed by
(seed, replication, purpose), so results are reproducible and independent
of execution order.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audit import (
    certify,
    elbh_flag,
    test_at_least,
    test_at_most,
    test_interval,
    test_point,
)
from .bootstrap import BootstrapConfig, bootstrap_region
from .disparity import (
    AuditDataset,
    Clause,
    EstimatingSystem,
    GroupSpec,
    MetricSpec,
    TargetSpec,
    build_system,
)
from .exceptions import AuditError
from .likelihood import el_log_ratio, eel_log_ratio
from .numerics import chi2_cdf, chi2_quantile

__all__ = [
    "ModelSpec",
    "SimSummary",
    "PowerRow",
    "FdrRow",
    "RuntimeReport",
    "generate",
    "generate_system",
    "model_metric",
    "model_groups",
    "model_target",
    "true_epsilon",
    "run_coverage",
    "run_qq",
    "run_power",
    "run_fdr",
    "run_runtime",
    "chi_square_quantiles",
    "ks_to_chi_square",
    "save_rows",
    "save_manifest",
]

_MODEL_KINDS = ("homoskedastic", "heteroskedastic", "location_shift")
_NOISE_KINDS = ("gaussian", "centered_exponential")

_TRAIN_STREAM = 0
_AUDIT_STREAM = 1
_BOOTSTRAP_STREAM = 2


@dataclass(frozen=True)
class ModelSpec:
    """One synthetic data model with its sampling seed."""

    kind: str
    n: int
    m: int
    beta0: float = 2.0
    tau: float | None = None
    noise: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _MODEL_KINDS:
            raise ValueError(f"kind must be one of {_MODEL_KINDS}, got {self.kind!r}")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.n < 2 * self.m:
            raise ValueError(f"n must be at least 2*m, got n={self.n}, m={self.m}")
        if self.noise not in _NOISE_KINDS:
            raise ValueError(f"noise must be one of {_NOISE_KINDS}, got {self.noise!r}")
        if self.kind == "location_shift":
            if self.tau is None:
                raise ValueError("location_shift needs tau")
            object.__setattr__(self, "tau", float(self.tau))
        else:
            if self.tau is not None:
                raise ValueError(f"{self.kind} takes no tau")
            if self.noise != "gaussian":
                raise ValueError(f"{self.kind} noise is always gaussian")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def prediction_slope_offset(self) -> float:
        """Slope of the fixed prediction rule in the location-shift model."""
        if self.kind != "location_shift":
            raise ValueError("only the location_shift model fixes its slope")
        return self.beta0 - 2.0 * self.tau


@dataclass(frozen=True)
class SimSummary:
    """A Monte-Carlo proportion with its uncertainty and cost."""

    replications: int
    estimate: float
    mc_se: float
    wall_time: float
    errors: int = 0

    @classmethod
    def from_proportion(
        cls, hits: int, replications: int, wall_time: float, errors: int = 0
    ) -> "SimSummary":
        valid = replications - errors
        if valid <= 0:
            raise AuditError("every replication failed; nothing to summarize")
        estimate = hits / valid
        mc_se = math.sqrt(estimate * (1.0 - estimate) / valid)
        return cls(
            replications=replications,
            estimate=estimate,
            mc_se=mc_se,
            wall_time=wall_time,
            errors=errors,
        )


@dataclass(frozen=True)
class PowerRow:
    """Rejection rates at one grid point of the power sweep."""

    tau: float
    true_epsilon: float
    el_rate: float
    z_rate: float
    replications: int


@dataclass(frozen=True)
class FdrRow:
    """False-discovery rate and power at one grid point."""

    tau: float
    true_epsilon: tuple[float, ...]
    fdr: float
    power: float
    replications: int


@dataclass(frozen=True)
class RuntimeReport:
    """Wall time of repeated certification by method, same replications."""

    n: int
    m: int
    replications: int
    el_seconds: float
    eel_seconds: float
    bootstrap_seconds: float
    bootstrap_resamples: int

    @property
    def el_over_eel(self) -> float:
        return self.el_seconds / self.eel_seconds

    @property
    def bootstrap_over_eel(self) -> float:
        return self.bootstrap_seconds / self.eel_seconds


def _stream(seed: int, replication: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(replication), int(purpose)])
    )


def _draw_xy(spec: ModelSpec, rng: np.random.Generator):
    x = rng.uniform(0.0, 1.0, size=spec.n)
    if spec.kind == "homoskedastic":
        y = rng.normal(spec.beta0 * x, 1.0)
    elif spec.kind == "heteroskedastic":
        y = rng.normal(spec.beta0 * x, np.sqrt(x))
    else:
        if spec.noise == "gaussian":
            noise = rng.normal(0.0, 1.0, size=spec.n)
        else:
            noise = rng.exponential(1.0, size=spec.n) - 1.0
        y = spec.beta0 * x + noise
    return x, y


def true_epsilon(spec: ModelSpec) -> np.ndarray:
    """Population disparity of each bin under the model."""
    j = np.arange(1, spec.m + 1, dtype=float)
    if spec.kind == "homoskedastic":
        return np.ones(spec.m)
    if spec.kind == "heteroskedastic":
        return (2.0 * j - 1.0) / (2.0 * spec.m)
    return (2.0 * j - 1.0) * spec.tau / spec.m


def model_metric(spec: ModelSpec) -> MetricSpec:
    if spec.kind == "location_shift":
        return MetricSpec(kind="residual", pred="pred", outcome="y")
    return MetricSpec(kind="squared_error", pred="pred", outcome="y")


def model_groups(m: int) -> list[GroupSpec]:
    groups = []
    for j in range(1, m + 1):
        groups.append(
            GroupSpec(
                group_id=f"bin{j}",
                clauses=(
                    Clause("x", "ge", (j - 1) / m),
                    Clause("x", "lt", j / m),
                ),
            )
        )
    return groups


def model_target() -> TargetSpec:
    return TargetSpec(kind="known", value=0.0)


def generate(spec: ModelSpec, replication: int = 0):
    """Draw one replication: (dataset, true disparity vector, target).

    The homoskedastic and heteroskedastic models first fit the prediction
    slope on a fresh training sample from an independent derived stream;
    the location-shift model uses its fixed slope.
    """
    audit_rng = _stream(spec.seed, replication, _AUDIT_STREAM)
    x, y = _draw_xy(spec, audit_rng)
    if spec.kind == "location_shift":
        slope = spec.prediction_slope_offset
    else:
        train_rng = _stream(spec.seed, replication, _TRAIN_STREAM)
        xt, yt = _draw_xy(spec, train_rng)
        slope = float(xt @ yt) / float(xt @ xt)
    data = AuditDataset.from_dict({"x": x, "y": y, "pred": slope * x})
    return data, true_epsilon(spec), 0.0


def generate_system(spec: ModelSpec, replication: int = 0):
    """Like ``generate`` but already assembled for likelihood evaluation."""
    data, eps_true, _ = generate(spec, replication)
    system = build_system(data, model_metric(spec), model_groups(spec.m), model_target())
    return system, eps_true, data


def _bootstrap_seed(spec: ModelSpec, replication: int) -> int:
    sequence = np.random.SeedSequence(
        [spec.seed, int(replication), _BOOTSTRAP_STREAM]
    )
    return int(sequence.generate_state(1, np.uint64)[0])


def run_coverage(
    spec: ModelSpec,
    method: str,
    alpha: float,
    reps: int,
    bootstrap_resamples: int = 1000,
) -> SimSummary:
    """Fraction of replications whose region contains the true disparity.

    ``el`` and ``eel`` regions contain the true vector exactly when the
    certification test at that vector does not reject; the bootstrap
    region is checked coordinate-wise. Replication-level errors are
    counted and excluded from the proportion rather than hidden.
    """
    if method not in ("el", "eel", "bootstrap"):
        raise ValueError(f"method must be el, eel or bootstrap, got {method!r}")
    if reps < 100:
        raise ValueError(f"reps must be at least 100, got {reps}")
    hits = 0
    errors = 0
    start = time.perf_counter()
    for r in range(reps):
        try:
            if method == "bootstrap":
                data, eps_true, _ = generate(spec, r)
                config = BootstrapConfig(
                    resamples=bootstrap_resamples,
                    alpha=alpha,
                    seed=_bootstrap_seed(spec, r),
                )
                report = bootstrap_region(
                    data,
                    model_metric(spec),
                    model_groups(spec.m),
                    model_target(),
                    config,
                )
                hits += report.covers(eps_true)
            else:
                system, eps_true, _ = generate_system(spec, r)
                hits += certify(system, eps_true, alpha, method=method).certified
        except AuditError:
            errors += 1
    wall = time.perf_counter() - start
    return SimSummary.from_proportion(hits, reps, wall, errors)


def run_qq(spec: ModelSpec, reps: int, method: str = "el") -> np.ndarray:
    """Sorted log-ratio statistics at the true disparity, one per replication."""
    if method not in ("el", "eel"):
        raise ValueError(f"method must be el or eel, got {method!r}")
    evaluate = el_log_ratio if method == "el" else eel_log_ratio
    values = np.empty(reps)
    for r in range(reps):
        system, eps_true, _ = generate_system(spec, r)
        values[r] = evaluate(system, eps_true).log_ratio
    values.sort()
    return values


def chi_square_quantiles(count: int, df: int) -> np.ndarray:
    """Plotting-position quantiles (i - 0.5)/count of the reference law."""
    return np.array(
        [chi2_quantile((i - 0.5) / count, df) for i in range(1, count + 1)]
    )


def ks_to_chi_square(sample: np.ndarray, df: int) -> float:
    """Kolmogorov-Smirnov distance between a sample and the reference law."""
    ordered = np.sort(np.asarray(sample, dtype=float))
    n = ordered.size
    if n == 0:
        raise ValueError("sample must be nonempty")
    gap = 0.0
    for i, value in enumerate(ordered, start=1):
        cdf = chi2_cdf(value, df) if math.isfinite(value) else 1.0
        gap = max(gap, abs(i / n - cdf), abs((i - 1) / n - cdf))
    return gap


def _z_threshold(alpha: float, two_sided: bool) -> float:
    # The square of a standard normal is chi-square with df 1, so the
    # normal quantile falls out of the chi-square quantile.
    if two_sided:
        return math.sqrt(chi2_quantile(1.0 - alpha, 1))
    return math.sqrt(chi2_quantile(1.0 - 2.0 * alpha, 1))


def _z_reject(values: np.ndarray, hypothesis_kind: str, eps0, alpha: float) -> bool:
    """Large-sample normal test on the in-group scores, same hypotheses."""
    n = values.size
    se = values.std(ddof=1) / math.sqrt(n)
    if se == 0.0:
        return False
    mean = values.mean()
    if hypothesis_kind == "point":
        return abs(mean - eps0) / se > _z_threshold(alpha, two_sided=True)
    c = _z_threshold(alpha, two_sided=False)
    if hypothesis_kind == "at_least":
        return (mean - eps0) / se < -c
    if hypothesis_kind == "at_most":
        return (mean - eps0) / se > c
    eps1, eps2 = eps0
    return (mean - eps1) / se < -c or (mean - eps2) / se > c


def _el_reject(system, hypothesis_kind: str, eps0, alpha: float) -> bool:
    if hypothesis_kind == "point":
        return test_point(system, 0, eps0, alpha).reject
    if hypothesis_kind == "at_least":
        return test_at_least(system, 0, eps0, alpha).reject
    if hypothesis_kind == "at_most":
        return test_at_most(system, 0, eps0, alpha).reject
    eps1, eps2 = eps0
    return test_interval(system, 0, eps1, eps2, alpha).reject


def run_power(
    taus,
    hypothesis_kind: str,
    eps0,
    n: int,
    reps: int,
    alpha: float = 0.05,
    noise: str = "gaussian",
    seed: int = 0,
    beta0: float = 2.0,
) -> list[PowerRow]:
    """Rejection rate of the one-group test across a grid of true disparities.

    Uses the location-shift model with m = 1, whose true disparity is tau,
    and reports alongside a large-sample normal test on the same scores.
    ``eps0`` is a scalar for point and one-sided kinds and an
    (eps1, eps2) pair for the interval kind.
    """
    if hypothesis_kind not in ("point", "at_least", "at_most", "interval"):
        raise ValueError(f"unknown hypothesis kind {hypothesis_kind!r}")
    rows = []
    for tau in taus:
        spec = ModelSpec(
            kind="location_shift",
            n=n,
            m=1,
            beta0=beta0,
            tau=float(tau),
            noise=noise,
            seed=seed,
        )
        el_hits = 0
        z_hits = 0
        for r in range(reps):
            system, _, _ = generate_system(spec, r)
            el_hits += _el_reject(system, hypothesis_kind, eps0, alpha)
            z_hits += _z_reject(system.scores, hypothesis_kind, eps0, alpha)
        rows.append(
            PowerRow(
                tau=float(tau),
                true_epsilon=float(tau),
                el_rate=float(el_hits) / reps,
                z_rate=float(z_hits) / reps,
                replications=reps,
            )
        )
    return rows


def run_fdr(
    taus,
    n: int,
    reps: int,
    eps0: float = 0.05,
    alpha: float = 0.05,
    m: int = 2,
    noise: str = "gaussian",
    seed: int = 0,
    beta0: float = 2.0,
) -> list[FdrRow]:
    """Empirical FDR and power of step-up flagging on the at-most test.

    For each grid point, groups with true disparity at most ``eps0`` are
    true nulls; the false-discovery proportion divides wrongly flagged
    groups by the number flagged (floored at one), and power divides
    correctly flagged groups by the number of false nulls (floored at
    one, so grids with no false nulls report power zero).
    """
    rows = []
    for tau in taus:
        spec = ModelSpec(
            kind="location_shift",
            n=n,
            m=m,
            beta0=beta0,
            tau=float(tau),
            noise=noise,
            seed=seed,
        )
        eps_true = true_epsilon(spec)
        null_true = eps_true <= eps0
        false_null_count = int((~null_true).sum())
        fdp_sum = 0.0
        power_sum = 0.0
        for r in range(reps):
            system, _, _ = generate_system(spec, r)
            p_values = [
                test_at_most(system, j, eps0, alpha).p_value for j in range(m)
            ]
            report = elbh_flag(p_values, alpha, group_ids=system.group_ids)
            flagged = np.array(report.flagged)
            rejected = int(flagged.sum())
            wrong = int((flagged & null_true).sum())
            right = int((flagged & ~null_true).sum())
            fdp_sum += wrong / max(rejected, 1)
            power_sum += right / max(false_null_count, 1)
        rows.append(
            FdrRow(
                tau=float(tau),
                true_epsilon=tuple(float(v) for v in eps_true),
                fdr=fdp_sum / reps,
                power=power_sum / reps,
                replications=reps,
            )
        )
    return rows


def run_runtime(
    spec: ModelSpec,
    alpha: float = 0.05,
    reps: int = 20,
    bootstrap_resamples: int = 1000,
) -> RuntimeReport:
    """Time repeated certification at the true disparity, method by method.

    Datasets are generated once outside the timed sections so the three clocks
    measure only each method's evaluation cost on identical replications.
    """
    replications = []
    for r in range(reps):
        system, eps_true, data = generate_system(spec, r)
        replications.append((system, eps_true, data, r))

    start = time.perf_counter()
    for system, eps_true, _, _ in replications:
        certify(system, eps_true, alpha, method="el")
    el_seconds = time.perf_counter() - start

    start = time.perf_counter()
    for system, eps_true, _, _ in replications:
        certify(system, eps_true, alpha, method="eel")
    eel_seconds = time.perf_counter() - start

    metric = model_metric(spec)
    groups = model_groups(spec.m)
    target = model_target()
    start = time.perf_counter()
    for system, eps_true, data, r in replications:
        config = BootstrapConfig(
            resamples=bootstrap_resamples,
            alpha=alpha,
            seed=_bootstrap_seed(spec, r),
        )
        bootstrap_region(data, metric, groups, target, config)
    bootstrap_seconds = time.perf_counter() - start

    return RuntimeReport(
        n=spec.n,
        m=spec.m,
        replications=reps,
        el_seconds=el_seconds,
        eel_seconds=eel_seconds,
        bootstrap_seconds=bootstrap_seconds,
        bootstrap_resamples=bootstrap_resamples,
    )


def save_rows(path, rows, columns) -> None:
    """Write dict rows as a tab-separated table with a header line."""
    path = Path(path)
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_format_cell(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_manifest(path, payload: dict) -> None:
    """Write a machine-readable run manifest next to a result table."""
    path = Path(path)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
