"""Audit datasets and the estimating system for group disparities.

An audit works on a fixed holdout table: one score per row (a loss or an
outcome), one or more row subsets ("groups") declared as predicates over
columns, and a target value the group means are compared against.  The
disparity of a group is the in-group mean score minus the target.  This
module turns those declarations into the n-by-m estimating matrix

    g_ij(eps) = (score_i - theta - eps_j) * 1{row i in group j}

consumed by the likelihood machinery.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DatasetError, EmptyGroupError

_OPS = ("eq", "ne", "lt", "le", "gt", "ge", "in_set")
_ORDER_OPS = ("lt", "le", "gt", "ge")


class AuditDataset:
    """Column-oriented table with numeric and string columns.

    Every column has one value per row and no missing entries; ingestion
    rejects NaN, empty cells and ragged rows outright so that downstream
    statistics never silently skip data.
    """

    def __init__(self, columns: dict[str, np.ndarray]):
        if not columns:
            raise DatasetError("dataset needs at least one column")
        n = None
        clean: dict[str, np.ndarray] = {}
        for name, values in columns.items():
            arr = np.asarray(values)
            if arr.ndim != 1:
                raise DatasetError(f"column {name!r} is not one-dimensional")
            if np.issubdtype(arr.dtype, np.number):
                arr = arr.astype(float)
                if not np.isfinite(arr).all():
                    bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                    raise DatasetError(f"column {name!r} has a non-finite value at row {bad}")
            else:
                arr = arr.astype(object)
                for i, v in enumerate(arr):
                    if not isinstance(v, str) or v == "":
                        raise DatasetError(f"column {name!r} has a missing value at row {i}")
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise DatasetError(
                    f"column {name!r} has {arr.size} rows, expected {n}"
                )
            clean[name] = arr
        if n == 0:
            raise DatasetError("dataset has no rows")
        self._columns = clean
        self.n_rows = int(n)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self._columns)

    def column(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise DatasetError(f"dataset has no column {name!r}") from None

    def numeric_column(self, name: str) -> np.ndarray:
        arr = self.column(name)
        if arr.dtype == object:
            raise DatasetError(f"column {name!r} is not numeric")
        return arr

    def is_numeric(self, name: str) -> bool:
        return self.column(name).dtype != object

    def __eq__(self, other) -> bool:
        if not isinstance(other, AuditDataset):
            return NotImplemented
        if self.column_names != other.column_names:
            return False
        return all(
            np.array_equal(self._columns[c], other._columns[c]) for c in self._columns
        )

    @classmethod
    def from_dict(cls, mapping) -> "AuditDataset":
        return cls(dict(mapping))

    @classmethod
    def from_csv(cls, path) -> "AuditDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetError(f"{path}: empty file") from None
            if len(set(header)) != len(header):
                raise DatasetError(f"{path}: duplicate column names in header")
            rows = []
            for i, row in enumerate(reader):
                if len(row) != len(header):
                    raise DatasetError(
                        f"{path}: row {i} has {len(row)} cells, expected {len(header)}"
                    )
                rows.append(row)
        if not rows:
            raise DatasetError(f"{path}: no data rows")
        columns: dict[str, np.ndarray] = {}
        for j, name in enumerate(header):
            cells = [r[j] for r in rows]
            values, numeric = _parse_column(cells, name, path)
            columns[name] = values if not numeric else np.array(values, dtype=float)
        return cls(columns)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            names = list(self._columns)
            writer.writerow(names)
            cols = []
            for name in names:
                arr = self._columns[name]
                if arr.dtype == object:
                    cols.append(list(arr))
                else:
                    cols.append([repr(float(v)) for v in arr])
            for row in zip(*cols):
                writer.writerow(row)


def _parse_column(cells, name, path):
    parsed = []
    numeric = True
    for i, cell in enumerate(cells):
        if cell == "":
            raise DatasetError(f"{path}: missing value at row {i}, column {name!r}")
        if numeric:
            try:
                parsed.append(float(cell))
                continue
            except ValueError:
                numeric = False
    if numeric:
        values = np.array(parsed, dtype=float)
        if not np.isfinite(values).all():
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DatasetError(f"{path}: non-finite value at row {bad}, column {name!r}")
        return values, True
    return np.array(cells, dtype=object), False


@dataclass(frozen=True)
class MetricSpec:
    """How the per-row score is computed.

    kind: ``column``/``outcome_column`` read an existing numeric column,
    ``squared_error`` is (pred - outcome)^2, ``residual`` is outcome - pred,
    ``positive_indicator`` is 1{pred >= threshold}.
    """

    kind: str
    name: str | None = None
    pred: str | None = None
    outcome: str | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind in ("column", "outcome_column"):
            if not self.name:
                raise ValueError(f"{self.kind} metric needs a column name")
        elif self.kind in ("squared_error", "residual"):
            if not (self.pred and self.outcome):
                raise ValueError(f"{self.kind} metric needs pred and outcome columns")
        elif self.kind == "positive_indicator":
            if not self.pred or self.threshold is None:
                raise ValueError("positive_indicator metric needs pred and threshold")
        else:
            raise ValueError(f"unknown metric kind {self.kind!r}")

    def compute(self, data: AuditDataset) -> np.ndarray:
        if self.kind in ("column", "outcome_column"):
            return data.numeric_column(self.name).copy()
        if self.kind == "squared_error":
            diff = data.numeric_column(self.pred) - data.numeric_column(self.outcome)
            return diff * diff
        if self.kind == "residual":
            return data.numeric_column(self.outcome) - data.numeric_column(self.pred)
        return (data.numeric_column(self.pred) >= self.threshold).astype(float)


@dataclass(frozen=True)
class Clause:
    column: str
    op: str
    value: object

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown clause operator {self.op!r}")
        if self.op == "in_set":
            object.__setattr__(self, "value", tuple(self.value))

    def mask(self, data: AuditDataset) -> np.ndarray:
        col = data.column(self.column)
        if self.op in _ORDER_OPS and col.dtype == object:
            raise DatasetError(
                f"ordering comparison on non-numeric column {self.column!r}"
            )
        if self.op == "eq":
            return col == self.value
        if self.op == "ne":
            return col != self.value
        if self.op == "lt":
            return col < self.value
        if self.op == "le":
            return col <= self.value
        if self.op == "gt":
            return col > self.value
        if self.op == "ge":
            return col >= self.value
        out = np.zeros(data.n_rows, dtype=bool)
        for v in self.value:
            out |= col == v
        return out


@dataclass(frozen=True)
class GroupSpec:
    """A named row subset: the conjunction of zero or more clauses.

    An empty clause list selects every row, which is how an "all" group is
    declared.
    """

    group_id: str
    clauses: tuple[Clause, ...] = ()

    def __post_init__(self):
        if not self.group_id:
            raise ValueError("group_id must be non-empty")
        object.__setattr__(self, "clauses", tuple(self.clauses))

    def mask(self, data: AuditDataset) -> np.ndarray:
        out = np.ones(data.n_rows, dtype=bool)
        for clause in self.clauses:
            out &= clause.mask(data)
        return out


@dataclass(frozen=True)
class TargetSpec:
    """Where the comparison target theta comes from.

    ``known`` uses a fixed value, ``population_mean`` plugs in the mean score
    over all rows, ``reference_group`` plugs in the mean score over a declared
    reference subset.
    """

    kind: str
    value: float | None = None
    group: GroupSpec | None = None

    def __post_init__(self):
        if self.kind == "known":
            if self.value is None:
                raise ValueError("known target needs a value")
        elif self.kind == "population_mean":
            pass
        elif self.kind == "reference_group":
            if self.group is None:
                raise ValueError("reference_group target needs a group")
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")

    @property
    def is_plugin(self) -> bool:
        return self.kind != "known"

    def estimate(self, scores: np.ndarray, data: AuditDataset) -> float:
        if self.kind == "known":
            return float(self.value)
        if self.kind == "population_mean":
            return float(scores.mean())
        mask = self.group.mask(data)
        if not mask.any():
            raise EmptyGroupError(self.group.group_id)
        return float(scores[mask].mean())


@dataclass(frozen=True)
class EstimatingSystem:
    """Scores, group masks and target bundled for likelihood evaluation."""

    scores: np.ndarray
    masks: np.ndarray
    theta: float
    group_ids: tuple[str, ...]
    plugin_target: bool = False
    group_sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        masks = np.asarray(self.masks, dtype=bool)
        if scores.ndim != 1 or masks.ndim != 2 or masks.shape[0] != scores.size:
            raise ValueError("scores must be (n,) and masks (n, m)")
        if masks.shape[1] != len(self.group_ids):
            raise ValueError("one group id per mask column required")
        if not np.isfinite(scores).all() or not np.isfinite(self.theta):
            raise ValueError("scores and theta must be finite")
        sizes = masks.sum(axis=0)
        for j, size in enumerate(sizes):
            if size == 0:
                raise EmptyGroupError(self.group_ids[j])
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "group_ids", tuple(self.group_ids))
        object.__setattr__(self, "group_sizes", sizes.astype(int))

    @property
    def n(self) -> int:
        return self.scores.size

    @property
    def m(self) -> int:
        return self.masks.shape[1]

    def epsilon_hat(self) -> np.ndarray:
        out = np.empty(self.m)
        for j in range(self.m):
            out[j] = self.scores[self.masks[:, j]].mean() - self.theta
        return out

    def group_std(self, j: int) -> float:
        """In-group sample standard deviation of the scores."""
        vals = self.scores[self.masks[:, j]]
        if vals.size < 2:
            return 0.0
        return float(vals.std(ddof=1))

    def has_overlap(self) -> bool:
        if self.m < 2:
            return False
        return bool((self.masks.sum(axis=1) > 1).any())

    def restrict(self, j: int) -> "EstimatingSystem":
        """Single-group subsystem used by per-group tests."""
        if not 0 <= j < self.m:
            raise IndexError(f"group index {j} out of range")
        return EstimatingSystem(
            scores=self.scores,
            masks=self.masks[:, j : j + 1],
            theta=self.theta,
            group_ids=(self.group_ids[j],),
            plugin_target=self.plugin_target,
        )

    def build_matrix(self, eps: np.ndarray) -> np.ndarray:
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (self.m,):
            raise ValueError(f"eps must have shape ({self.m},), got {eps.shape}")
        return (self.scores[:, None] - self.theta - eps[None, :]) * self.masks


def build_system(
    data: AuditDataset,
    metric: MetricSpec,
    groups: list[GroupSpec],
    target: TargetSpec,
) -> EstimatingSystem:
    """Evaluate metric, groups and target against a dataset."""
    if not groups:
        raise ValueError("at least one group is required")
    ids = [g.group_id for g in groups]
    if len(set(ids)) != len(ids):
        raise ValueError("group ids must be unique")
    scores = compute_scores(data, metric)
    masks = np.column_stack([g.mask(data) for g in groups])
    for j, g in enumerate(groups):
        if not masks[:, j].any():
            raise EmptyGroupError(g.group_id)
    theta = target.estimate(scores, data)
    return EstimatingSystem(
        scores=scores,
        masks=masks,
        theta=theta,
        group_ids=tuple(ids),
        plugin_target=target.is_plugin,
    )


def compute_scores(data: AuditDataset, metric: MetricSpec) -> np.ndarray:
    return metric.compute(data)


def group_mask(data: AuditDataset, group: GroupSpec) -> np.ndarray:
    return group.mask(data)


def estimate_target(data: AuditDataset, scores: np.ndarray, target: TargetSpec) -> float:
    return target.estimate(scores, data)


def epsilon_hat(system: EstimatingSystem) -> np.ndarray:
    return system.epsilon_hat()


def build_estimating_matrix(system: EstimatingSystem, eps) -> np.ndarray:
    return system.build_matrix(eps)
