"""Column-typed datasets mixing continuous, nominal and ordinal variables.

Every clustering method in this package consumes a :class:`MixedDataset`.
Datasets and schemas are immutable after construction, so they can be shared
freely across concurrent fits; all functions here are pure.

Ordinal values are handled internally through their rank (1..m in declared
level order); the schema keeps the original labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

CONTINUOUS = "continuous"
NOMINAL = "nominal"
ORDINAL = "ordinal"
KINDS = (CONTINUOUS, NOMINAL, ORDINAL)


class MixclustError(Exception):
    """Base class for errors raised by this package."""


class SchemaError(MixclustError):
    """Malformed schema or data that does not fit the schema."""


class ValidationError(MixclustError):
    """Operation received a dataset that fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        preview = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"{len(self.violations)} violation(s): {preview}")


class InsufficientDataError(MixclustError):
    """Too few rows for the requested statistic or fit."""


class DegenerateDataError(MixclustError):
    """Data degenerate for the requested operation (e.g. zero dispersion)."""


class ConfigError(MixclustError):
    """Invalid configuration value."""


@dataclass(frozen=True)
class ColumnSchema:
    """Declared type of one column.

    Categorical kinds (nominal, ordinal) must declare at least two unique
    levels; for ordinal columns the declared order defines the ranks.
    Continuous columns declare no levels.
    """

    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if self.kind == CONTINUOUS:
            if self.levels:
                raise SchemaError(f"column {self.name!r}: continuous columns declare no levels")
        else:
            if len(self.levels) < 2:
                raise SchemaError(f"column {self.name!r}: categorical columns need >= 2 levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r}: duplicate level labels")

    @property
    def is_categorical(self) -> bool:
        return self.kind != CONTINUOUS

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Violation:
    """One validation failure. ``row`` is None for dataset-level problems."""

    row: Optional[int]
    column: Optional[str]
    reason: str

    def __str__(self):
        where = []
        if self.row is not None:
            where.append(f"row {self.row}")
        if self.column is not None:
            where.append(f"column {self.column!r}")
        loc = ", ".join(where) or "dataset"
        return f"{loc}: {self.reason}"


class MixedDataset:
    """Immutable table of mixed-type data.

    Parameters
    ----------
    schema : sequence of ColumnSchema
        Column declarations, in column order.
    rows : sequence of sequences
        ``n`` records; cell ``rows[i][j]`` belongs to ``schema[j]``.
        Continuous cells are numbers, categorical cells are level labels.
    """

    def __init__(self, schema: Sequence[ColumnSchema], rows: Iterable[Sequence]):
        schema = tuple(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        rows = list(rows)
        cols = {}
        for j, col in enumerate(schema):
            cells = [r[j] for r in rows]
            if col.kind == CONTINUOUS:
                try:
                    arr = np.asarray(cells, dtype=np.float64)
                except (TypeError, ValueError) as exc:
                    raise SchemaError(f"column {col.name!r}: non-numeric continuous cell ({exc})")
            else:
                arr = np.asarray([str(c) for c in cells], dtype=object)
            arr.setflags(write=False)
            cols[col.name] = arr
        self._init_from_columns(schema, cols, len(rows))

    def _init_from_columns(self, schema, cols, n):
        self._schema = schema
        self._cols = cols
        self._n = n
        self._by_name = {c.name: c for c in schema}
        self._code_cache: dict[str, np.ndarray] = {}

    @classmethod
    def from_columns(cls, schema: Sequence[ColumnSchema], columns: dict) -> "MixedDataset":
        """Build a dataset from per-column arrays (no copies of valid input)."""
        schema = tuple(schema)
        names = [c.name for c in schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if set(names) != set(columns):
            raise SchemaError("column dict does not match schema names")
        lengths = {len(np.asarray(columns[n])) for n in names}
        if len(lengths) > 1:
            raise SchemaError(f"columns have differing lengths: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0
        cols = {}
        for col in schema:
            if col.kind == CONTINUOUS:
                arr = np.asarray(columns[col.name], dtype=np.float64)
            else:
                arr = np.asarray([str(v) for v in columns[col.name]], dtype=object)
            arr.setflags(write=False)
            cols[col.name] = arr
        obj = cls.__new__(cls)
        obj._init_from_columns(schema, cols, n)
        return obj

    @property
    def schema(self) -> tuple[ColumnSchema, ...]:
        return self._schema

    @property
    def n(self) -> int:
        return self._n

    def __len__(self):
        return self._n

    def column(self, name: str) -> np.ndarray:
        return self._cols[name]

    def column_schema(self, name: str) -> ColumnSchema:
        return self._by_name[name]

    def columns_of_kind(self, *kinds: str) -> list[ColumnSchema]:
        return [c for c in self._schema if c.kind in kinds]

    @property
    def continuous_columns(self) -> list[ColumnSchema]:
        return self.columns_of_kind(CONTINUOUS)

    @property
    def categorical_columns(self) -> list[ColumnSchema]:
        return self.columns_of_kind(NOMINAL, ORDINAL)

    def codes(self, name: str) -> np.ndarray:
        """Integer codes (0..m-1 in declared level order) for a categorical
        column; -1 marks cells whose label is not a declared level."""
        if name not in self._code_cache:
            col = self._by_name[name]
            if not col.is_categorical:
                raise SchemaError(f"column {name!r} is continuous, has no codes")
            lookup = {lv: i for i, lv in enumerate(col.levels)}
            codes = np.fromiter(
                (lookup.get(v, -1) for v in self._cols[name]), dtype=np.int64, count=self._n
            )
            codes.setflags(write=False)
            self._code_cache[name] = codes
        return self._code_cache[name]

    def continuous_matrix(self) -> np.ndarray:
        """(n, R) float matrix of the continuous columns in schema order."""
        cols = [self._cols[c.name] for c in self.continuous_columns]
        if not cols:
            return np.empty((self._n, 0), dtype=np.float64)
        return np.column_stack(cols)

    def codes_matrix(self, *kinds: str) -> np.ndarray:
        """(n, S) int code matrix of the categorical columns of the given
        kinds (default: both), in schema order."""
        kinds = kinds or (NOMINAL, ORDINAL)
        cols = [self.codes(c.name) for c in self.columns_of_kind(*kinds)]
        if not cols:
            return np.empty((self._n, 0), dtype=np.int64)
        return np.column_stack(cols)

    def subset(self, indices) -> "MixedDataset":
        """New dataset holding the given rows (in the given order)."""
        indices = np.asarray(indices)
        cols = {name: arr[indices] for name, arr in self._cols.items()}
        return MixedDataset.from_columns(self._schema, cols)

    def rows(self) -> list[tuple]:
        """Materialize the data row-major (mainly for serialization)."""
        arrays = [self._cols[c.name] for c in self._schema]
        return [tuple(a[i] for a in arrays) for i in range(self._n)]


@dataclass(frozen=True)
class Partition:
    """Hard cluster labels in 1..K, with an optional soft membership matrix.

    When ``soft`` is present its rows sum to one and the hard labels are the
    per-row argmax (ties resolved toward the lowest cluster index).
    """

    labels: np.ndarray
    K: int
    soft: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if self.K < 1:
            raise SchemaError("K must be >= 1")
        if labels.ndim != 1:
            raise SchemaError("labels must be one-dimensional")
        if labels.size and (labels.min() < 1 or labels.max() > self.K):
            raise SchemaError("labels must lie in 1..K")
        if self.soft is not None:
            soft = np.asarray(self.soft, dtype=np.float64)
            soft.setflags(write=False)
            object.__setattr__(self, "soft", soft)
            if soft.shape != (labels.size, self.K):
                raise SchemaError("soft matrix must be n x K")
            if not np.allclose(soft.sum(axis=1), 1.0, atol=1e-9):
                raise SchemaError("soft membership rows must sum to 1")
            if labels.size and not np.array_equal(np.argmax(soft, axis=1) + 1, labels):
                raise SchemaError("labels must be the argmax of the soft memberships")

    @classmethod
    def from_labels(cls, labels, K: Optional[int] = None, soft=None) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        if K is None:
            K = int(labels.max()) if labels.size else 1
        return cls(labels=labels, K=K, soft=soft)

    @property
    def n(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        """Cluster sizes as a length-K vector."""
        return np.bincount(self.labels - 1, minlength=self.K)


@dataclass(frozen=True)
class ClusterPrototype:
    """Per-cluster center: continuous means plus categorical modes, and
    optionally the within-cluster level distributions."""

    continuous_center: dict
    categorical_center: dict
    level_freqs: Optional[dict] = None

    def __post_init__(self):
        if self.level_freqs is not None:
            for name, freqs in self.level_freqs.items():
                total = float(np.sum(freqs))
                if not math.isclose(total, 1.0, abs_tol=1e-9):
                    raise SchemaError(f"level_freqs for {name!r} sum to {total}, not 1")


@dataclass
class FitResult:
    """Outcome of one clustering fit."""

    partition: Partition
    prototypes: Optional[list]
    objective: float
    iterations: int
    converged: bool
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 1:
            raise SchemaError("iterations must be >= 1")
        if not math.isfinite(self.objective):
            raise SchemaError("objective must be finite")


def validate(dataset: MixedDataset) -> list[Violation]:
    """Check the dataset against its schema.

    Returns an empty list iff all invariants hold: at least one row, finite
    continuous cells, categorical cells drawn from the declared levels.
    Violations are returned as values; nothing is raised.
    """
    out: list[Violation] = []
    if dataset.n < 1:
        out.append(Violation(None, None, "dataset has no rows"))
    for col in dataset.schema:
        if col.kind == CONTINUOUS:
            values = dataset.column(col.name)
            bad = np.flatnonzero(~np.isfinite(values))
            for i in bad:
                out.append(Violation(int(i), col.name, f"non-finite value {values[i]!r}"))
        else:
            codes = dataset.codes(col.name)
            raw = dataset.column(col.name)
            for i in np.flatnonzero(codes < 0):
                out.append(
                    Violation(int(i), col.name, f"value {raw[i]!r} is not a declared level")
                )
    return out


def require_valid(dataset: MixedDataset) -> None:
    """Raise :class:`ValidationError` unless ``validate`` returns []."""
    violations = validate(dataset)
    if violations:
        raise ValidationError(violations)


def one_hot(dataset: MixedDataset) -> tuple[np.ndarray, list[tuple[str, Optional[str]]]]:
    """Dummy-code the dataset into a single float matrix.

    Continuous columns pass through unchanged; each categorical column with
    m levels becomes m indicator columns (declared level order). Returns the
    matrix and a column map of ``(source column, level or None)`` entries
    recording the provenance of every output column.
    """
    require_valid(dataset)
    blocks = []
    colmap: list[tuple[str, Optional[str]]] = []
    for col in dataset.schema:
        if col.kind == CONTINUOUS:
            blocks.append(dataset.column(col.name).astype(np.float64).reshape(-1, 1))
            colmap.append((col.name, None))
        else:
            codes = dataset.codes(col.name)
            block = np.zeros((dataset.n, col.n_levels), dtype=np.float64)
            block[np.arange(dataset.n), codes] = 1.0
            blocks.append(block)
            colmap.extend((col.name, lv) for lv in col.levels)
    matrix = np.hstack(blocks) if blocks else np.empty((dataset.n, 0))
    return matrix, colmap


@dataclass(frozen=True)
class ColumnStats:
    """Summary of one column; unused fields are None for the other kinds."""

    name: str
    kind: str
    mean: Optional[float] = None
    variance: Optional[float] = None
    value_range: Optional[float] = None
    pdq_scale: Optional[float] = None
    rank_range: Optional[float] = None
    level_freqs: Optional[np.ndarray] = None


def prototypes_from_labels(dataset: MixedDataset, labels, K: int) -> list[ClusterPrototype]:
    """Means, modes and level distributions of each cluster in a hard
    partition (empty clusters get NaN means and uniform level frequencies)."""
    labels = np.asarray(labels)
    protos = []
    for k in range(1, K + 1):
        members = labels == k
        cont = {}
        for col in dataset.columns_of_kind(CONTINUOUS):
            values = dataset.column(col.name)[members]
            cont[col.name] = float(values.mean()) if members.any() else float("nan")
        cat = {}
        freqs = {}
        for col in dataset.categorical_columns:
            codes = dataset.codes(col.name)[members]
            counts = np.bincount(codes, minlength=col.n_levels).astype(float)
            total = counts.sum()
            cat[col.name] = col.levels[int(np.argmax(counts))]
            freqs[col.name] = (
                counts / total if total > 0 else np.full(col.n_levels, 1.0 / col.n_levels)
            )
        protos.append(
            ClusterPrototype(continuous_center=cont, categorical_center=cat,
                             level_freqs=freqs or None)
        )
    return protos


def pdq_scale(mean: float) -> float:
    """Scale used to normalize continuous differences: 1 while the column
    mean sits strictly inside (-0.1, 0.1), the mean itself otherwise
    (including exactly +/-0.1)."""
    return 1.0 if -0.1 < mean < 0.1 else mean


def column_stats(dataset: MixedDataset, n_min: int = 2) -> dict[str, ColumnStats]:
    """Per-column summaries used by the distance-based methods.

    Continuous columns report mean, sample variance, range and the scale
    from :func:`pdq_scale`; ordinal columns the range of observed level
    ranks; nominal and ordinal columns their level frequencies.
    """
    require_valid(dataset)
    if dataset.n < n_min:
        raise InsufficientDataError(f"need at least {n_min} rows for variances, got {dataset.n}")
    stats: dict[str, ColumnStats] = {}
    for col in dataset.schema:
        if col.kind == CONTINUOUS:
            values = dataset.column(col.name)
            mean = float(values.mean())
            stats[col.name] = ColumnStats(
                name=col.name,
                kind=col.kind,
                mean=mean,
                variance=float(values.var(ddof=1)),
                value_range=float(values.max() - values.min()),
                pdq_scale=pdq_scale(mean),
            )
        else:
            codes = dataset.codes(col.name)
            counts = np.bincount(codes, minlength=col.n_levels).astype(np.float64)
            freqs = counts / dataset.n
            freqs.setflags(write=False)
            rank_range = None
            if col.kind == ORDINAL:
                ranks = codes + 1
                rank_range = float(ranks.max() - ranks.min())
            stats[col.name] = ColumnStats(
                name=col.name,
                kind=col.kind,
                rank_range=rank_range,
                level_freqs=freqs,
            )
    return stats
