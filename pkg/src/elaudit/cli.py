"""Command-line runner for disparity audits.

Subcommands:

* ``certify`` — joint test that every group disparity equals a stated value.
* ``flag`` — per-group hypothesis tests followed by step-up multiple testing.
* ``ci`` — per-group confidence intervals.
* ``simulate`` — Monte-Carlo studies (coverage, qq, power, fdr, runtime).
* ``compas-prepare`` — build clean audit tables from the raw COMPAS export.

Audit commands read a TOML configuration whose keys mirror ``AuditConfig``
field names exactly; unknown keys are rejected. Command-line flags override
file values. Reports are JSON with sorted keys and no timestamps, so a rerun
with identical inputs is byte-identical. Exit codes: 0 success (certified,
for ``certify``), 3 not certified, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np
import tomli

from .audit import (
    HypothesisSpec,
    certify,
    confidence_interval,
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
    GroupSpec,
    MetricSpec,
    TargetSpec,
    build_system,
)
from .exceptions import AuditError, ConfigError, DatasetError
from .sim import (
    ModelSpec,
    chi_square_quantiles,
    ks_to_chi_square,
    run_coverage,
    run_fdr,
    run_power,
    run_qq,
    run_runtime,
    save_manifest,
    save_rows,
)

_METHODS = ("el", "eel", "bootstrap")
_CI_KINDS = ("two_sided", "lower_one_sided", "upper_one_sided")
_MAX_SEED = 2**64 - 1

_TOP_KEYS = frozenset(
    {
        "dataset_path",
        "metric",
        "groups",
        "target",
        "hypothesis",
        "alpha",
        "method",
        "seed",
        "output_path",
    }
)
_METRIC_KEYS = frozenset({"kind", "name", "pred", "outcome", "threshold"})
_CLAUSE_KEYS = frozenset({"column", "op", "value"})
_GROUP_KEYS = frozenset({"group_id", "clauses"})
_TARGET_KEYS = frozenset({"kind", "value", "group"})
_HYPOTHESIS_KEYS = frozenset({"kind", "eps0", "eps1", "eps2"})

_MODEL_BY_NUMBER = {
    "1": "homoskedastic",
    "2": "heteroskedastic",
    "3": "location_shift",
}

_COMPAS_REQUIRED_COLUMNS = (
    "race",
    "sex",
    "age",
    "decile_score",
    "two_year_recid",
    "days_b_screening_arrest",
    "is_recid",
    "c_charge_degree",
    "score_text",
)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AuditConfig:
    """One fully-resolved audit run: data source, question, and output."""

    dataset_path: str
    metric: MetricSpec
    groups: tuple[GroupSpec, ...]
    target: TargetSpec
    hypothesis: HypothesisSpec
    alpha: float = 0.05
    method: str = "el"
    seed: int = 0
    output_path: str = "report.json"

    def __post_init__(self):
        if not self.dataset_path:
            raise ConfigError("dataset_path must be non-empty")
        if not (0.0 < self.alpha <= 0.5):
            raise ConfigError(f"alpha must lie in (0, 0.5], got {self.alpha}")
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ConfigError("at least one group is required")
        if self.method not in _METHODS:
            raise ConfigError(
                f"method must be one of {', '.join(_METHODS)}, got {self.method!r}"
            )
        if not (0 <= self.seed <= _MAX_SEED):
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if not self.output_path:
            raise ConfigError("output_path must be non-empty")


def _check_keys(table, allowed, where: str) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"{where} must be a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _build(factory, table, where: str):
    try:
        return factory(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_metric(table, where: str = "metric") -> MetricSpec:
    _check_keys(table, _METRIC_KEYS, where)
    return _build(MetricSpec, table, where)


def _parse_clause(table, where: str) -> Clause:
    _check_keys(table, _CLAUSE_KEYS, where)
    return _build(Clause, table, where)


def _parse_group(table, where: str) -> GroupSpec:
    _check_keys(table, _GROUP_KEYS, where)
    clauses = table.get("clauses", [])
    if not isinstance(clauses, list):
        raise ConfigError(f"{where}.clauses must be an array of tables")
    parsed = tuple(
        _parse_clause(clause, f"{where}.clauses[{i}]")
        for i, clause in enumerate(clauses)
    )
    rest = {k: v for k, v in table.items() if k != "clauses"}
    return _build(functools.partial(GroupSpec, clauses=parsed), rest, where)


def _parse_target(table, where: str = "target") -> TargetSpec:
    _check_keys(table, _TARGET_KEYS, where)
    rest = dict(table)
    if "group" in rest:
        rest["group"] = _parse_group(rest["group"], f"{where}.group")
    return _build(TargetSpec, rest, where)


def _parse_hypothesis(table, where: str = "hypothesis") -> HypothesisSpec:
    _check_keys(table, _HYPOTHESIS_KEYS, where)
    return _build(HypothesisSpec, table, where)


def load_config(path: str, overrides: dict | None = None) -> AuditConfig:
    """Parse a TOML audit configuration, then apply command-line overrides."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    _check_keys(doc, _TOP_KEYS, "config")

    for key in ("dataset_path", "metric", "groups", "target"):
        if key not in doc:
            raise ConfigError(f"config is missing required key {key!r}")
    if not isinstance(doc["groups"], list) or not doc["groups"]:
        raise ConfigError("groups must be a non-empty array of tables")

    fields: dict = {
        "dataset_path": doc["dataset_path"],
        "metric": _parse_metric(doc["metric"]),
        "groups": tuple(
            _parse_group(g, f"groups[{i}]") for i, g in enumerate(doc["groups"])
        ),
        "target": _parse_target(doc["target"]),
        "hypothesis": (
            _parse_hypothesis(doc["hypothesis"])
            if "hypothesis" in doc
            else HypothesisSpec.point(0.0)
        ),
    }
    for key in ("alpha", "method", "seed", "output_path"):
        if key in doc:
            fields[key] = doc[key]
    for key, value in (overrides or {}).items():
        if value is not None:
            fields[key] = value
    return _build(AuditConfig, fields, "config")


def config_digest(config: AuditConfig) -> str:
    """SHA-256 of the canonical JSON form of the resolved configuration.

    The report destination is excluded so the digest identifies the audit
    question itself; rerunning the same audit into a different file keeps
    the same hash.
    """
    payload = dataclasses.asdict(config)
    payload.pop("output_path")
    blob = json.dumps(payload, sort_keys=True, default=list)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# report plumbing


def _num(value):
    """JSON-safe number: non-finite floats become strings."""
    value = float(value)
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "NaN"
    return "Infinity" if value > 0 else "-Infinity"


def _reference_payload(reference) -> dict:
    payload = {"kind": reference.kind}
    if reference.df is not None:
        payload["df"] = int(reference.df)
    return payload


def write_report(path: str, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    target = Path(path)
    if target.parent != Path(""):
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def _base_payload(command: str, config: AuditConfig) -> dict:
    return {
        "command": command,
        "config_sha256": config_digest(config),
        "seed": config.seed,
        "alpha": config.alpha,
        "method": config.method,
        "dataset_path": config.dataset_path,
    }


def _group_rows(system) -> list[dict]:
    eps = system.epsilon_hat()
    return [
        {
            "group_id": gid,
            "size": int(system.group_sizes[j]),
            "epsilon_hat": _num(eps[j]),
        }
        for j, gid in enumerate(system.group_ids)
    ]


def _load_system(config: AuditConfig):
    data = AuditDataset.from_csv(config.dataset_path)
    system = build_system(data, config.metric, list(config.groups), config.target)
    return data, system


def _run_group_test(system, j: int, hypothesis: HypothesisSpec, alpha: float):
    if hypothesis.kind == "point":
        return test_point(system, j, hypothesis.eps0, alpha)
    if hypothesis.kind == "at_least":
        return test_at_least(system, j, hypothesis.eps0, alpha)
    if hypothesis.kind == "at_most":
        return test_at_most(system, j, hypothesis.eps0, alpha)
    return test_interval(system, j, hypothesis.eps1, hypothesis.eps2, alpha)


def _hypothesis_payload(hypothesis: HypothesisSpec) -> dict:
    payload = {"kind": hypothesis.kind}
    if hypothesis.kind == "interval":
        payload["eps1"] = hypothesis.eps1
        payload["eps2"] = hypothesis.eps2
    else:
        payload["eps0"] = hypothesis.eps0
    return payload


def _guarded(fn):
    """Map domain and I/O failures onto exit code 1 with a diagnostic."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (AuditError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(1) from exc

    return wrapper


def _audit_options(fn):
    for option in reversed(
        (
            click.option(
                "--config",
                "config_path",
                required=True,
                type=click.Path(exists=True, dir_okay=False),
                help="TOML audit configuration.",
            ),
            click.option(
                "--seed",
                type=click.IntRange(0, _MAX_SEED),
                default=None,
                help="Override the config seed.",
            ),
            click.option(
                "--alpha",
                type=float,
                default=None,
                help="Override the config test level.",
            ),
            click.option(
                "--output",
                type=click.Path(dir_okay=False),
                default=None,
                help="Override the report path.",
            ),
            click.option(
                "--method",
                type=click.Choice(_METHODS),
                default=None,
                help="Override the config method.",
            ),
            click.option(
                "--reps",
                type=click.IntRange(min=100),
                default=None,
                help="Bootstrap resamples (bootstrap method only).",
            ),
        )
    ):
        fn = option(fn)
    return fn


def _resolve(config_path, seed, alpha, output, method) -> AuditConfig:
    overrides = {
        "seed": seed,
        "alpha": alpha,
        "output_path": output,
        "method": method,
    }
    return load_config(config_path, overrides)


# --------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Distribution-free audits of group-wise performance disparities."""


@main.command("certify")
@_audit_options
@_guarded
def cmd_certify(config_path, seed, alpha, output, method, reps):
    """Test whether every group disparity equals the configured value."""
    config = _resolve(config_path, seed, alpha, output, method)
    if config.hypothesis.kind != "point":
        raise ConfigError(
            "certify needs a point hypothesis; set hypothesis.kind = 'point'"
        )
    eps0 = config.hypothesis.eps0
    data, system = _load_system(config)
    payload = _base_payload("certify", config)
    payload["eps0"] = eps0
    payload["n"] = system.n
    payload["groups"] = _group_rows(system)
    payload["warnings"] = (
        ["groups overlap; joint calibration assumes the stated group structure"]
        if system.has_overlap()
        else []
    )

    if config.method == "bootstrap":
        bconfig = BootstrapConfig(
            resamples=reps or 1000,
            alpha=config.alpha,
            seed=config.seed,
            scheme="pairs_percentile",
        )
        region = bootstrap_region(
            data, config.metric, list(config.groups), config.target, bconfig
        )
        certified = region.covers(np.full(system.m, eps0))
        payload["statistic"] = None
        payload["p_value"] = None
        payload["reference"] = {
            "kind": "bootstrap_pairs_percentile",
            "resamples": bconfig.resamples,
        }
        for row, j in zip(payload["groups"], range(system.m)):
            lower, upper = region.interval(j)
            row["lower"] = _num(lower)
            row["upper"] = _num(upper)
    else:
        report = certify(system, eps0, config.alpha, config.method)
        certified = report.certified
        payload["statistic"] = _num(report.statistic)
        payload["p_value"] = _num(report.p_value)
        payload["reference"] = {"kind": "chi_square", "df": report.df}

    payload["certified"] = bool(certified)
    payload["decision"] = "certified" if certified else "not certified"
    write_report(config.output_path, payload)
    click.echo(f"{payload['decision']}; report written to {config.output_path}")
    if not certified:
        raise SystemExit(3)


@main.command("flag")
@_audit_options
@_guarded
def cmd_flag(config_path, seed, alpha, output, method, reps):
    """Flag groups whose disparity violates the configured hypothesis."""
    config = _resolve(config_path, seed, alpha, output, method)
    if config.method != "el":
        raise ConfigError("flagging uses the el method; set method = 'el'")
    data, system = _load_system(config)
    results = [
        _run_group_test(system, j, config.hypothesis, config.alpha)
        for j in range(system.m)
    ]
    report = elbh_flag(
        [r.p_value for r in results],
        config.alpha,
        group_ids=system.group_ids,
        overlap=system.has_overlap(),
    )

    payload = _base_payload("flag", config)
    payload["hypothesis"] = _hypothesis_payload(config.hypothesis)
    payload["n"] = system.n
    payload["k_star"] = report.k_star
    payload["flagged"] = list(report.flagged_ids)
    payload["groups"] = _group_rows(system)
    for row, result, is_flagged in zip(payload["groups"], results, report.flagged):
        row["statistic"] = _num(result.statistic)
        row["reference"] = _reference_payload(result.reference)
        row["p_value"] = _num(result.p_value)
        row["flagged"] = bool(is_flagged)
    payload["warnings"] = (
        ["groups overlap; the false-discovery guarantee assumes disjoint groups"]
        if report.overlap_warning
        else []
    )
    write_report(config.output_path, payload)
    click.echo(
        f"flagged {len(payload['flagged'])} of {system.m} group(s); "
        f"report written to {config.output_path}"
    )


@main.command("ci")
@_audit_options
@click.option(
    "--kind",
    type=click.Choice(_CI_KINDS),
    default="two_sided",
    show_default=True,
    help="Interval sidedness (el/eel methods).",
)
@click.option(
    "--scheme",
    type=click.Choice(("pairs_percentile", "max_t")),
    default="pairs_percentile",
    show_default=True,
    help="Bootstrap scheme (bootstrap method only).",
)
@_guarded
def cmd_ci(config_path, seed, alpha, output, method, reps, kind, scheme):
    """Confidence interval for each group's disparity."""
    config = _resolve(config_path, seed, alpha, output, method)
    data, system = _load_system(config)
    payload = _base_payload("ci", config)
    payload["n"] = system.n
    payload["groups"] = _group_rows(system)
    payload["statistic"] = None
    payload["p_value"] = None
    payload["warnings"] = []

    if config.method == "bootstrap":
        bconfig = BootstrapConfig(
            resamples=reps or 1000,
            alpha=config.alpha,
            seed=config.seed,
            scheme=scheme,
        )
        region = bootstrap_region(
            data, config.metric, list(config.groups), config.target, bconfig
        )
        payload["kind"] = "simultaneous_two_sided"
        payload["reference"] = {"kind": f"bootstrap_{scheme}", "resamples": bconfig.resamples}
        for j, row in enumerate(payload["groups"]):
            lower, upper = region.interval(j)
            row["lower"] = _num(lower)
            row["upper"] = _num(upper)
    else:
        if config.method != "el":
            raise ConfigError("confidence intervals use the el or bootstrap method")
        payload["kind"] = kind
        payload["reference"] = {"kind": "chi_square", "df": 1}
        for j, row in enumerate(payload["groups"]):
            interval = confidence_interval(system, j, config.alpha, kind)
            row["lower"] = _num(interval.lower)
            row["upper"] = _num(interval.upper)

    write_report(config.output_path, payload)
    click.echo(f"report written to {config.output_path}")


# --------------------------------------------------------------------------
# simulations


@main.group("simulate")
def simulate_group():
    """Monte-Carlo studies; each writes a TSV table plus a JSON manifest."""


def _model_options(fn):
    for option in reversed(
        (
            click.option(
                "--model",
                type=click.Choice(tuple(_MODEL_BY_NUMBER)),
                default="1",
                show_default=True,
                help="1 unit shift, 2 increasing variance, 3 trained-in shift.",
            ),
            click.option("--n", type=click.IntRange(min=2), required=True),
            click.option("--m", type=click.IntRange(min=1), default=1, show_default=True),
            click.option("--tau", type=float, default=None, help="Model 3 shift size."),
            click.option(
                "--noise",
                type=click.Choice(("gaussian", "centered_exponential")),
                default=None,
                help="Model 3 noise family.",
            ),
            click.option("--seed", type=click.IntRange(0, _MAX_SEED), default=0),
        )
    ):
        fn = option(fn)
    return fn


def _model_spec(model, n, m, tau, noise, seed) -> ModelSpec:
    kind = _MODEL_BY_NUMBER[model]
    if kind != "location_shift":
        if tau is not None:
            raise click.UsageError("--tau only applies to --model 3")
        if noise is not None:
            raise click.UsageError("--noise only applies to --model 3")
        return ModelSpec(kind=kind, n=n, m=m, seed=seed)
    if tau is None:
        raise click.UsageError("--model 3 requires --tau")
    return ModelSpec(
        kind=kind, n=n, m=m, tau=tau, noise=noise or "gaussian", seed=seed
    )


def _model_payload(spec: ModelSpec) -> dict:
    payload = {"model": spec.kind, "n": spec.n, "m": spec.m, "seed": spec.seed}
    if spec.kind == "location_shift":
        payload["tau"] = spec.tau
        payload["noise"] = spec.noise
    return payload


def _emit_tables(output: str, rows, columns, manifest: dict) -> None:
    save_rows(output, rows, columns)
    manifest_path = f"{output}.manifest.json"
    save_manifest(manifest_path, manifest)
    click.echo(f"wrote {output} and {manifest_path}")


@simulate_group.command("coverage")
@_model_options
@click.option("--method", type=click.Choice(_METHODS), default="el", show_default=True)
@click.option("--reps", type=click.IntRange(min=100), default=2000, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option(
    "--bootstrap-resamples",
    type=click.IntRange(min=100),
    default=1000,
    show_default=True,
)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_sim_coverage(
    model, n, m, tau, noise, seed, method, reps, alpha, bootstrap_resamples, output
):
    """Coverage of the level-(1-alpha) certification across replications."""
    spec = _model_spec(model, n, m, tau, noise, seed)
    summary = run_coverage(
        spec, method, alpha, reps, bootstrap_resamples=bootstrap_resamples
    )
    row = {
        **_model_payload(spec),
        "method": method,
        "alpha": alpha,
        "replications": summary.replications,
        "coverage": summary.estimate,
        "mc_se": summary.mc_se,
        "errors": summary.errors,
        "wall_seconds": summary.wall_time,
    }
    manifest = {
        "command": "simulate coverage",
        **row,
        "bootstrap_resamples": bootstrap_resamples if method == "bootstrap" else None,
    }
    _emit_tables(output, [row], list(row), manifest)
    click.echo(f"coverage {summary.estimate:.4f} (mc se {summary.mc_se:.4f})")


@simulate_group.command("qq")
@_model_options
@click.option("--method", type=click.Choice(("el", "eel")), default="el", show_default=True)
@click.option("--reps", type=click.IntRange(min=100), default=2000, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_sim_qq(model, n, m, tau, noise, seed, method, reps, output):
    """Ordered log-ratio statistics against chi-square quantiles."""
    spec = _model_spec(model, n, m, tau, noise, seed)
    values = run_qq(spec, reps, method=method)
    grid = chi_square_quantiles(reps, spec.m)
    rows = [
        {
            "rank": i + 1,
            "statistic": float(values[i]),
            "chi_square_quantile": float(grid[i]),
        }
        for i in range(reps)
    ]
    ks = ks_to_chi_square(values, spec.m)
    manifest = {
        "command": "simulate qq",
        **_model_payload(spec),
        "method": method,
        "replications": reps,
        "ks_distance": ks,
    }
    _emit_tables(output, rows, ["rank", "statistic", "chi_square_quantile"], manifest)
    click.echo(f"ks distance to chi-square({spec.m}): {ks:.4f}")


@simulate_group.command("power")
@click.option("--taus", required=True, help="Comma-separated shift sizes.")
@click.option(
    "--hypothesis",
    "hypothesis_kind",
    type=click.Choice(("point", "at_least", "at_most", "interval")),
    default="at_least",
    show_default=True,
)
@click.option("--eps0", type=float, default=0.05, show_default=True)
@click.option("--eps1", type=float, default=None, help="Interval lower bound.")
@click.option("--eps2", type=float, default=None, help="Interval upper bound.")
@click.option("--n", type=click.IntRange(min=2), required=True)
@click.option("--reps", type=click.IntRange(min=100), default=2000, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option(
    "--noise",
    type=click.Choice(("gaussian", "centered_exponential")),
    default="gaussian",
    show_default=True,
)
@click.option("--seed", type=click.IntRange(0, _MAX_SEED), default=0)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_sim_power(
    taus, hypothesis_kind, eps0, eps1, eps2, n, reps, alpha, noise, seed, output
):
    """Rejection rate of the single-group test across shift sizes."""
    tau_list = _parse_floats(taus, "--taus")
    if hypothesis_kind == "interval":
        if eps1 is None or eps2 is None:
            raise click.UsageError("interval hypothesis requires --eps1 and --eps2")
        bound = (eps1, eps2)
    else:
        bound = eps0
    rows_out = run_power(
        tau_list, hypothesis_kind, bound, n=n, reps=reps, alpha=alpha,
        noise=noise, seed=seed,
    )
    rows = [
        {
            "tau": r.tau,
            "true_epsilon": r.true_epsilon,
            "el_rate": r.el_rate,
            "z_rate": r.z_rate,
            "replications": r.replications,
        }
        for r in rows_out
    ]
    manifest = {
        "command": "simulate power",
        "hypothesis": hypothesis_kind,
        "bound": list(bound) if isinstance(bound, tuple) else bound,
        "taus": tau_list,
        "n": n,
        "replications": reps,
        "alpha": alpha,
        "noise": noise,
        "seed": seed,
    }
    _emit_tables(
        output, rows, ["tau", "true_epsilon", "el_rate", "z_rate", "replications"],
        manifest,
    )


@simulate_group.command("fdr")
@click.option("--taus", required=True, help="Comma-separated shift sizes.")
@click.option("--n", type=click.IntRange(min=4), required=True)
@click.option("--reps", type=click.IntRange(min=100), default=2000, show_default=True)
@click.option("--eps0", type=float, default=0.05, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--m", type=click.IntRange(min=1), default=2, show_default=True)
@click.option(
    "--noise",
    type=click.Choice(("gaussian", "centered_exponential")),
    default="gaussian",
    show_default=True,
)
@click.option("--seed", type=click.IntRange(0, _MAX_SEED), default=0)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_sim_fdr(taus, n, reps, eps0, alpha, m, noise, seed, output):
    """False-discovery rate and power of the step-up flagging procedure."""
    tau_list = _parse_floats(taus, "--taus")
    rows_out = run_fdr(
        tau_list, n=n, reps=reps, eps0=eps0, alpha=alpha, m=m, noise=noise, seed=seed
    )
    rows = [
        {
            "tau": r.tau,
            "true_epsilon": ",".join(repr(v) for v in r.true_epsilon),
            "fdr": r.fdr,
            "power": r.power,
            "replications": r.replications,
        }
        for r in rows_out
    ]
    manifest = {
        "command": "simulate fdr",
        "taus": tau_list,
        "n": n,
        "m": m,
        "replications": reps,
        "eps0": eps0,
        "alpha": alpha,
        "noise": noise,
        "seed": seed,
    }
    _emit_tables(
        output, rows, ["tau", "true_epsilon", "fdr", "power", "replications"], manifest
    )


@simulate_group.command("runtime")
@_model_options
@click.option("--reps", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option(
    "--bootstrap-resamples",
    type=click.IntRange(min=100),
    default=1000,
    show_default=True,
)
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@_guarded
def cmd_sim_runtime(
    model, n, m, tau, noise, seed, reps, alpha, bootstrap_resamples, output
):
    """Wall-clock comparison of the certification methods."""
    spec = _model_spec(model, n, m, tau, noise, seed)
    report = run_runtime(
        spec, alpha=alpha, reps=reps, bootstrap_resamples=bootstrap_resamples
    )
    row = {
        **_model_payload(spec),
        "replications": report.replications,
        "el_seconds": report.el_seconds,
        "eel_seconds": report.eel_seconds,
        "bootstrap_seconds": report.bootstrap_seconds,
        "bootstrap_resamples": report.bootstrap_resamples,
        "el_over_eel": report.el_over_eel,
        "bootstrap_over_eel": report.bootstrap_over_eel,
    }
    manifest = {"command": "simulate runtime", **row}
    _emit_tables(output, [row], list(row), manifest)
    click.echo(
        f"el/eel {report.el_over_eel:.1f}x, bootstrap/eel {report.bootstrap_over_eel:.1f}x"
    )


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise click.UsageError(f"{flag} must be comma-separated numbers") from exc
    if not values:
        raise click.UsageError(f"{flag} must be non-empty")
    return values


# --------------------------------------------------------------------------
# COMPAS preparation


@main.command("compas-prepare")
@click.argument("raw_csv", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--output-dir",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
    help="Directory for the prepared tables and manifest.",
)
@click.option(
    "--threshold",
    type=click.IntRange(min=1, max=10),
    default=5,
    show_default=True,
    help="Decile score at or above which the prediction counts as positive.",
)
@click.option(
    "--races",
    default="African-American,Caucasian",
    show_default=True,
    help="Comma-separated race pair kept in the race-restricted table.",
)
@_guarded
def cmd_compas_prepare(raw_csv, output_dir, threshold, races):
    """Filter the raw two-year recidivism export into clean audit tables.

    Keeps rows passing the standard screening filters, marks a positive
    prediction when the decile score is at or above the threshold, and writes
    two tables restricted to positive predictions: one limited to the
    configured race pair and one covering every race. A JSON manifest records
    the row counts at each stage.
    """
    race_pair = tuple(part.strip() for part in races.split(",") if part.strip())
    if len(race_pair) != 2:
        raise click.UsageError("--races needs exactly two comma-separated values")

    raw_rows, screened = _read_compas(raw_csv)
    positive = [row for row in screened if row["decile_score"] >= threshold]
    pair_rows = [row for row in positive if row["race"] in race_pair]

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ppv_path = out / "compas_ppv.csv"
    sex_age_path = out / "compas_sex_age.csv"
    manifest_path = out / "compas_manifest.json"

    _write_compas_table(ppv_path, pair_rows)
    _write_compas_table(sex_age_path, positive)
    save_manifest(
        manifest_path,
        {
            "command": "compas-prepare",
            "source": str(raw_csv),
            "threshold": threshold,
            "races": list(race_pair),
            "raw_rows": raw_rows,
            "screened_rows": len(screened),
            "positive_rows": len(positive),
            "ppv_rows": len(pair_rows),
            "sex_age_rows": len(positive),
            "tables": {"ppv": str(ppv_path), "sex_age": str(sex_age_path)},
        },
    )
    click.echo(
        f"screened {len(screened)} of {raw_rows} rows; "
        f"ppv table n={len(pair_rows)}, sex-age table n={len(positive)}"
    )


def _read_compas(path: str) -> tuple[int, list[dict]]:
    """Read the raw export, apply the standard screening filters.

    A row is kept when the screening date sits within 30 days of the arrest,
    the recidivism flag is recorded, the charge degree is an ordinary one,
    and a score label is present.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in _COMPAS_REQUIRED_COLUMNS if c not in header]
        if missing:
            raise DatasetError(
                f"raw file is missing expected column(s): {', '.join(missing)}"
            )
        raw_rows = 0
        kept: list[dict] = []
        for record in reader:
            raw_rows += 1
            days = record["days_b_screening_arrest"]
            if days in ("", None):
                continue
            try:
                days_value = float(days)
                is_recid = int(record["is_recid"])
                decile = int(record["decile_score"])
                recid = int(record["two_year_recid"])
                age = int(record["age"])
            except ValueError as exc:
                raise DatasetError(
                    f"row {raw_rows}: malformed numeric field ({exc})"
                ) from exc
            if not (-30.0 <= days_value <= 30.0):
                continue
            if is_recid == -1:
                continue
            if record["c_charge_degree"] == "O":
                continue
            if record["score_text"] in ("", "N/A"):
                continue
            kept.append(
                {
                    "race": record["race"],
                    "sex": record["sex"],
                    "age": age,
                    "decile_score": decile,
                    "two_year_recid": recid,
                }
            )
        return raw_rows, kept


def _write_compas_table(path: Path, rows: list[dict]) -> None:
    if not rows:
        raise DatasetError(f"no rows survive the filters for {path.name}")
    data = AuditDataset.from_dict(
        {
            "race": [row["race"] for row in rows],
            "sex": [row["sex"] for row in rows],
            "age": np.array([row["age"] for row in rows], dtype=float),
            "decile_score": np.array(
                [row["decile_score"] for row in rows], dtype=float
            ),
            "two_year_recid": np.array(
                [row["two_year_recid"] for row in rows], dtype=float
            ),
        }
    )
    data.to_csv(path)


if __name__ == "__main__":
    main()
