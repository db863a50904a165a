"""Tests for the command-line front end."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from elaudit.audit import HypothesisSpec, confidence_interval
from elaudit.audit import test_at_most as at_most_test
from elaudit.cli import (
    AuditConfig,
    config_digest,
    load_config,
    main,
)
from elaudit.disparity import (
    AuditDataset,
    Clause,
    GroupSpec,
    MetricSpec,
    TargetSpec,
    build_system,
)
from elaudit.exceptions import ConfigError


@pytest.fixture
def runner():
    return CliRunner()


def write_dataset(path: Path, shift: float = 0.0, n: int = 300, seed: int = 8) -> None:
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    score = rng.normal(size=n) + np.where(x >= 0.5, shift, 0.0)
    AuditDataset.from_dict({"x": x, "score": score}).to_csv(path)


def write_config(path: Path, dataset: str, **top) -> Path:
    lines = [f'dataset_path = "{dataset}"']
    for key, value in top.items():
        lines.append(f"{key} = {value!r}" if isinstance(value, str) else f"{key} = {value}")
    lines += [
        "",
        "[metric]",
        'kind = "column"',
        'name = "score"',
        "",
        "[[groups]]",
        'group_id = "low"',
        "[[groups.clauses]]",
        'column = "x"',
        'op = "lt"',
        "value = 0.5",
        "",
        "[[groups]]",
        'group_id = "high"',
        "[[groups.clauses]]",
        'column = "x"',
        'op = "ge"',
        "value = 0.5",
        "",
        "[target]",
        'kind = "known"',
        "value = 0.0",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestConfigParsing:
    def test_full_round_trip(self, tmp_path):
        config_text = """
dataset_path = "data.csv"
alpha = 0.1
method = "eel"
seed = 42
output_path = "out.json"

[metric]
kind = "squared_error"
pred = "pred"
outcome = "y"

[[groups]]
group_id = "g1"
[[groups.clauses]]
column = "race"
op = "in_set"
value = ["a", "b"]

[target]
kind = "reference_group"
[target.group]
group_id = "ref"
[[target.group.clauses]]
column = "race"
op = "eq"
value = "c"

[hypothesis]
kind = "interval"
eps1 = -0.1
eps2 = 0.1
"""
        path = tmp_path / "full.toml"
        path.write_text(config_text)
        config = load_config(str(path))
        assert config.metric == MetricSpec(kind="squared_error", pred="pred", outcome="y")
        assert config.groups == (
            GroupSpec("g1", (Clause("race", "in_set", ("a", "b")),)),
        )
        assert config.target == TargetSpec(
            kind="reference_group",
            group=GroupSpec("ref", (Clause("race", "eq", "c"),)),
        )
        assert config.hypothesis == HypothesisSpec.interval(-0.1, 0.1)
        assert config.alpha == 0.1
        assert config.method == "eel"
        assert config.seed == 42
        assert config.output_path == "out.json"

    def test_defaults(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "data.csv")
        config = load_config(str(path))
        assert config.alpha == 0.05
        assert config.method == "el"
        assert config.seed == 0
        assert config.hypothesis == HypothesisSpec.point(0.0)

    @pytest.mark.parametrize(
        "snippet,fragment",
        [
            ("bogus = 1", "config"),
            ("[metric]\nkind = 'column'\nname = 'score'\nbogus = 1", "metric"),
            ("[[groups]]\ngroup_id = 'g'\nbogus = 1", "groups[0]"),
            (
                "[[groups]]\ngroup_id = 'g'\n[[groups.clauses]]\ncolumn = 'x'\nop = 'lt'\nvalue = 1\nbogus = 2",
                "clauses[0]",
            ),
            ("[target]\nkind = 'population_mean'\nbogus = 1", "target"),
            ("[hypothesis]\nkind = 'point'\neps0 = 0.0\nbogus = 1", "hypothesis"),
        ],
    )
    def test_unknown_keys_rejected(self, tmp_path, snippet, fragment):
        base = {
            "dataset_path": "'d.csv'",
            "metric": "[metric]\nkind = 'column'\nname = 'score'",
            "groups": "[[groups]]\ngroup_id = 'g'",
            "target": "[target]\nkind = 'population_mean'",
        }
        if snippet.startswith("[metric]"):
            base["metric"] = snippet
        elif snippet.startswith("[[groups]]"):
            base["groups"] = snippet
        elif snippet.startswith("[target]"):
            base["target"] = snippet
        elif snippet.startswith("[hypothesis]"):
            base["hypothesis"] = snippet
        parts = [f"dataset_path = {base['dataset_path']}"]
        if not snippet.startswith(("[", "[[")):
            parts.append(snippet)
        parts += [base["metric"], base["groups"], base["target"]]
        if "hypothesis" in base:
            parts.append(base["hypothesis"])
        path = tmp_path / "c.toml"
        path.write_text("\n".join(parts) + "\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(str(path))
        with pytest.raises(ConfigError, match=fragment.replace("[", "\\[")):
            load_config(str(path))

    @pytest.mark.parametrize("key", ["dataset_path", "metric", "groups", "target"])
    def test_missing_required_key(self, tmp_path, key):
        parts = {
            "dataset_path": 'dataset_path = "d.csv"',
            "metric": "[metric]\nkind = 'column'\nname = 'score'",
            "groups": "[[groups]]\ngroup_id = 'g'",
            "target": "[target]\nkind = 'population_mean'",
        }
        del parts[key]
        path = tmp_path / "c.toml"
        path.write_text("\n".join(parts.values()) + "\n")
        with pytest.raises(ConfigError, match=key):
            load_config(str(path))

    def test_alpha_bounds(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv", alpha=0.5)
        assert load_config(str(path)).alpha == 0.5
        for bad in (0.0, 0.51, -0.1):
            path = write_config(tmp_path / "c.toml", "d.csv", alpha=bad)
            with pytest.raises(ConfigError, match="alpha"):
                load_config(str(path))

    def test_bad_method(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv", method="jackknife")
        with pytest.raises(ConfigError, match="method"):
            load_config(str(path))

    def test_bad_seed(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv", seed=-3)
        with pytest.raises(ConfigError, match="seed"):
            load_config(str(path))

    def test_overrides_win(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv", alpha=0.05, seed=1)
        config = load_config(
            str(path),
            {"alpha": 0.25, "seed": 9, "method": "eel", "output_path": "o.json"},
        )
        assert config.alpha == 0.25
        assert config.seed == 9
        assert config.method == "eel"
        assert config.output_path == "o.json"

    def test_none_overrides_ignored(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv", alpha=0.2)
        config = load_config(str(path), {"alpha": None})
        assert config.alpha == 0.2

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("not toml [[[")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_digest_ignores_output_path(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv")
        a = load_config(str(path), {"output_path": "a.json"})
        b = load_config(str(path), {"output_path": "b.json"})
        assert config_digest(a) == config_digest(b)

    def test_digest_tracks_content(self, tmp_path):
        path = write_config(tmp_path / "c.toml", "d.csv")
        a = load_config(str(path))
        b = load_config(str(path), {"alpha": 0.25})
        assert config_digest(a) != config_digest(b)

    def test_audit_config_requires_groups(self):
        with pytest.raises(ConfigError, match="group"):
            AuditConfig(
                dataset_path="d.csv",
                metric=MetricSpec(kind="column", name="s"),
                groups=(),
                target=TargetSpec(kind="population_mean"),
                hypothesis=HypothesisSpec.point(0.0),
            )


class TestCertifyCommand:
    def test_consistent_data_certifies(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv", shift=0.0)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "report.json"
        result = runner.invoke(
            main, ["certify", "--config", str(config), "--output", str(out)]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["certified"] is True
        assert payload["decision"] == "certified"
        assert payload["p_value"] >= 0.05
        assert payload["reference"] == {"kind": "chi_square", "df": 2}
        assert {row["group_id"] for row in payload["groups"]} == {"low", "high"}
        assert len(payload["config_sha256"]) == 64

    def test_shifted_data_refused(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv", shift=1.0)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "report.json"
        result = runner.invoke(
            main, ["certify", "--config", str(config), "--output", str(out)]
        )
        assert result.exit_code == 3
        payload = json.loads(out.read_text())
        assert payload["certified"] is False
        assert payload["p_value"] < 0.05

    def test_rerun_is_byte_identical(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv")
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "report.json"
        args = ["certify", "--config", str(config), "--output", str(out)]
        runner.invoke(main, args)
        first = out.read_bytes()
        runner.invoke(main, args)
        assert out.read_bytes() == first

    def test_eel_method_flag(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv")
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["certify", "--config", str(config), "--output", str(out), "--method", "eel"],
        )
        assert result.exit_code in (0, 3)
        assert json.loads(out.read_text())["method"] == "eel"

    def test_bootstrap_method(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv", n=200)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            [
                "certify", "--config", str(config), "--output", str(out),
                "--method", "bootstrap", "--reps", "100",
            ],
        )
        assert result.exit_code in (0, 3)
        payload = json.loads(out.read_text())
        assert payload["statistic"] is None
        assert payload["reference"]["resamples"] == 100
        for row in payload["groups"]:
            assert row["lower"] <= row["epsilon_hat"] <= row["upper"]

    def test_non_point_hypothesis_rejected(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv")
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        config.write_text(
            config.read_text() + '\n[hypothesis]\nkind = "at_most"\neps0 = 0.1\n'
        )
        result = runner.invoke(main, ["certify", "--config", str(config)])
        assert result.exit_code == 1
        assert "point" in result.output

    def test_missing_dataset(self, runner, tmp_path):
        config = write_config(tmp_path / "c.toml", str(tmp_path / "nope.csv"))
        result = runner.invoke(main, ["certify", "--config", str(config)])
        assert result.exit_code == 1

    def test_usage_error(self, runner):
        result = runner.invoke(main, ["certify"])
        assert result.exit_code == 2


class TestFlagCommand:
    def _config(self, tmp_path, shift, eps0=0.05):
        write_dataset(tmp_path / "data.csv", shift=shift)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        config.write_text(
            config.read_text() + f'\n[hypothesis]\nkind = "at_most"\neps0 = {eps0}\n'
        )
        return config

    def test_shifted_group_flagged(self, runner, tmp_path):
        config = self._config(tmp_path, shift=1.0)
        out = tmp_path / "flag.json"
        result = runner.invoke(
            main, ["flag", "--config", str(config), "--output", str(out)]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["flagged"] == ["high"]
        assert payload["k_star"] == 1
        flagged_rows = [r for r in payload["groups"] if r["flagged"]]
        assert [r["group_id"] for r in flagged_rows] == ["high"]

    def test_null_data_flags_nothing(self, runner, tmp_path):
        config = self._config(tmp_path, shift=0.0, eps0=0.5)
        out = tmp_path / "flag.json"
        result = runner.invoke(
            main, ["flag", "--config", str(config), "--output", str(out)]
        )
        assert result.exit_code == 0
        payload = json.loads(out.read_text())
        assert payload["flagged"] == []
        assert payload["k_star"] == 0
        assert all(r["p_value"] == 1.0 for r in payload["groups"])

    def test_p_values_match_library(self, runner, tmp_path):
        config = self._config(tmp_path, shift=1.0)
        out = tmp_path / "flag.json"
        runner.invoke(main, ["flag", "--config", str(config), "--output", str(out)])
        payload = json.loads(out.read_text())
        data = AuditDataset.from_csv(str(tmp_path / "data.csv"))
        system = build_system(
            data,
            MetricSpec(kind="column", name="score"),
            [
                GroupSpec("low", (Clause("x", "lt", 0.5),)),
                GroupSpec("high", (Clause("x", "ge", 0.5),)),
            ],
            TargetSpec(kind="known", value=0.0),
        )
        for j, row in enumerate(payload["groups"]):
            expected = at_most_test(system, j, 0.05, 0.05)
            assert row["p_value"] == pytest.approx(expected.p_value)

    def test_bootstrap_method_rejected(self, runner, tmp_path):
        config = self._config(tmp_path, shift=0.0)
        result = runner.invoke(
            main, ["flag", "--config", str(config), "--method", "bootstrap"]
        )
        assert result.exit_code == 1
        assert "el" in result.output


class TestCiCommand:
    def test_matches_library_intervals(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv", shift=0.4)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "ci.json"
        result = runner.invoke(
            main, ["ci", "--config", str(config), "--output", str(out)]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        data = AuditDataset.from_csv(str(tmp_path / "data.csv"))
        system = build_system(
            data,
            MetricSpec(kind="column", name="score"),
            [
                GroupSpec("low", (Clause("x", "lt", 0.5),)),
                GroupSpec("high", (Clause("x", "ge", 0.5),)),
            ],
            TargetSpec(kind="known", value=0.0),
        )
        for j, row in enumerate(payload["groups"]):
            expected = confidence_interval(system, j, 0.05, "two_sided")
            assert row["lower"] == pytest.approx(expected.lower)
            assert row["upper"] == pytest.approx(expected.upper)

    def test_one_sided_kind(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv")
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "ci.json"
        result = runner.invoke(
            main,
            ["ci", "--config", str(config), "--output", str(out), "--kind", "lower_one_sided"],
        )
        assert result.exit_code == 0
        payload = json.loads(out.read_text())
        assert payload["kind"] == "lower_one_sided"
        assert all(row["upper"] == "Infinity" for row in payload["groups"])

    def test_bootstrap_scheme(self, runner, tmp_path):
        write_dataset(tmp_path / "data.csv", n=200)
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        out = tmp_path / "ci.json"
        result = runner.invoke(
            main,
            [
                "ci", "--config", str(config), "--output", str(out),
                "--method", "bootstrap", "--reps", "150", "--scheme", "max_t",
            ],
        )
        assert result.exit_code == 0
        payload = json.loads(out.read_text())
        assert payload["reference"] == {"kind": "bootstrap_max_t", "resamples": 150}

    def test_degenerate_group_named(self, runner, tmp_path):
        AuditDataset.from_dict(
            {"x": np.array([0.1, 0.2, 0.9]), "score": np.array([1.0, 1.0, 2.0])}
        ).to_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "c.toml", str(tmp_path / "data.csv"))
        result = runner.invoke(main, ["ci", "--config", str(config)])
        assert result.exit_code == 1
        assert "low" in result.output


class TestSimulateCommands:
    def test_coverage_writes_table_and_manifest(self, runner, tmp_path):
        out = tmp_path / "cov.tsv"
        result = runner.invoke(
            main,
            [
                "simulate", "coverage", "--model", "1", "--n", "200", "--m", "1",
                "--reps", "100", "--seed", "5", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0].split("\t")[:4] == ["model", "n", "m", "seed"]
        manifest = json.loads((tmp_path / "cov.tsv.manifest.json").read_text())
        assert manifest["replications"] == 100
        assert 0.5 <= manifest["coverage"] <= 1.0

    def test_qq_table(self, runner, tmp_path):
        out = tmp_path / "qq.tsv"
        result = runner.invoke(
            main,
            [
                "simulate", "qq", "--model", "1", "--n", "200", "--reps", "100",
                "--seed", "5", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.read_text().splitlines(), delimiter="\t"))
        assert len(rows) == 100
        stats = [float(r["statistic"]) for r in rows]
        assert stats == sorted(stats)
        manifest = json.loads((tmp_path / "qq.tsv.manifest.json").read_text())
        assert 0.0 < manifest["ks_distance"] < 0.5

    def test_power_table(self, runner, tmp_path):
        out = tmp_path / "pow.tsv"
        result = runner.invoke(
            main,
            [
                "simulate", "power", "--taus", "0.0,0.3", "--n", "200",
                "--reps", "100", "--seed", "2", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.read_text().splitlines(), delimiter="\t"))
        assert [float(r["tau"]) for r in rows] == [0.0, 0.3]
        for r in rows:
            assert 0.0 <= float(r["el_rate"]) <= 1.0
            assert 0.0 <= float(r["z_rate"]) <= 1.0

    def test_fdr_table(self, runner, tmp_path):
        out = tmp_path / "fdr.tsv"
        result = runner.invoke(
            main,
            [
                "simulate", "fdr", "--taus", "0.3", "--n", "200", "--reps", "100",
                "--seed", "2", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.read_text().splitlines(), delimiter="\t"))
        assert len(rows) == 1
        assert 0.0 <= float(rows[0]["fdr"]) <= 1.0

    def test_runtime_table(self, runner, tmp_path):
        out = tmp_path / "rt.tsv"
        result = runner.invoke(
            main,
            [
                "simulate", "runtime", "--model", "1", "--n", "200", "--m", "2",
                "--reps", "2", "--bootstrap-resamples", "100", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = list(csv.DictReader(out.read_text().splitlines(), delimiter="\t"))
        assert float(rows[0]["bootstrap_seconds"]) > 0.0

    def test_model3_requires_tau(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "simulate", "coverage", "--model", "3", "--n", "200",
                "--reps", "100", "--output", str(tmp_path / "x.tsv"),
            ],
        )
        assert result.exit_code == 2
        assert "--tau" in result.output

    def test_tau_rejected_for_model1(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "simulate", "coverage", "--model", "1", "--n", "200", "--tau", "0.3",
                "--reps", "100", "--output", str(tmp_path / "x.tsv"),
            ],
        )
        assert result.exit_code == 2

    def test_interval_power_requires_bounds(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "simulate", "power", "--taus", "0.1", "--hypothesis", "interval",
                "--n", "200", "--reps", "100", "--output", str(tmp_path / "x.tsv"),
            ],
        )
        assert result.exit_code == 2

    def test_bad_taus(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "simulate", "power", "--taus", "a,b", "--n", "200",
                "--reps", "100", "--output", str(tmp_path / "x.tsv"),
            ],
        )
        assert result.exit_code == 2


def write_raw_compas(path: Path, rows: int = 200) -> dict:
    cols = [
        "id", "name", "race", "sex", "age", "age_cat", "decile_score",
        "two_year_recid", "days_b_screening_arrest", "is_recid",
        "c_charge_degree", "score_text", "extra_col",
    ]
    races = ["African-American", "Caucasian", "Hispanic", "Other"]
    records = []
    for i in range(rows):
        records.append(
            [
                i, f"p{i}", races[i % 4], "Male" if i % 3 else "Female",
                18 + (i * 7) % 50, "x", 1 + (i * 3) % 10, (i // 2) % 2,
                (i % 80) - 40, -1 if i % 37 == 0 else (i % 2),
                "O" if i % 29 == 0 else "F", "N/A" if i % 31 == 0 else "Low", "z",
            ]
        )
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(cols)
        writer.writerows(records)
    kept = [
        r
        for r in records
        if -30 <= r[8] <= 30 and r[9] != -1 and r[10] != "O" and r[11] != "N/A"
    ]
    positive = [r for r in kept if r[6] >= 5]
    pair = [r for r in positive if r[2] in ("African-American", "Caucasian")]
    return {"screened": len(kept), "positive": len(positive), "pair": len(pair)}


class TestCompasPrepare:
    def test_counts_match_brute_force(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        expected = write_raw_compas(raw)
        result = runner.invoke(
            main,
            ["compas-prepare", str(raw), "--output-dir", str(tmp_path / "prep")],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "prep" / "compas_manifest.json").read_text())
        assert manifest["screened_rows"] == expected["screened"]
        assert manifest["positive_rows"] == expected["positive"]
        assert manifest["ppv_rows"] == expected["pair"]
        assert manifest["sex_age_rows"] == expected["positive"]
        assert manifest["threshold"] == 5

    def test_tables_round_trip(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_compas(raw)
        runner.invoke(
            main, ["compas-prepare", str(raw), "--output-dir", str(tmp_path / "prep")]
        )
        for name in ("compas_ppv.csv", "compas_sex_age.csv"):
            source = tmp_path / "prep" / name
            table = AuditDataset.from_csv(source)
            copy = tmp_path / f"copy_{name}"
            table.to_csv(copy)
            assert copy.read_bytes() == source.read_bytes()
            assert AuditDataset.from_csv(copy) == table

    def test_table_contents_filtered(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_compas(raw)
        runner.invoke(
            main, ["compas-prepare", str(raw), "--output-dir", str(tmp_path / "prep")]
        )
        ppv = AuditDataset.from_csv(tmp_path / "prep" / "compas_ppv.csv")
        assert set(np.unique(ppv.column("race"))) <= {"African-American", "Caucasian"}
        assert ppv.numeric_column("decile_score").min() >= 5
        sex_age = AuditDataset.from_csv(tmp_path / "prep" / "compas_sex_age.csv")
        assert len(set(np.unique(sex_age.column("race")))) > 2

    def test_threshold_override(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_compas(raw)
        runner.invoke(
            main,
            [
                "compas-prepare", str(raw), "--output-dir", str(tmp_path / "p8"),
                "--threshold", "8",
            ],
        )
        manifest = json.loads((tmp_path / "p8" / "compas_manifest.json").read_text())
        table = AuditDataset.from_csv(tmp_path / "p8" / "compas_sex_age.csv")
        assert table.numeric_column("decile_score").min() >= 8
        assert manifest["positive_rows"] < 81

    def test_missing_columns_named(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        with raw.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["race", "sex", "age"])
            writer.writerow(["Caucasian", "Male", "30"])
        result = runner.invoke(main, ["compas-prepare", str(raw)])
        assert result.exit_code == 1
        assert "decile_score" in result.output
        assert "two_year_recid" in result.output

    def test_races_validation(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_compas(raw)
        result = runner.invoke(
            main, ["compas-prepare", str(raw), "--races", "OnlyOne"]
        )
        assert result.exit_code == 2
