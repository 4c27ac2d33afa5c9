"""Reading and writing datasets, schemas and label files.

File conventions:

* dataset CSV: header row of column names, one record per line;
* schema JSON: object mapping column name -> ``{"kind": ..., "levels": [...]}``
  (insertion order defines column order);
* labels live in a column named ``__cluster``, either inside the dataset CSV
  or in a standalone single-column CSV.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CONTINUOUS, ColumnSchema, MixedDataset, Partition, SchemaError

LABEL_COLUMN = "__cluster"


def schema_to_dict(schema) -> dict:
    out = {}
    for col in schema:
        entry = {"kind": col.kind}
        if col.is_categorical:
            entry["levels"] = list(col.levels)
        out[col.name] = entry
    return out


def schema_from_dict(data: dict) -> tuple[ColumnSchema, ...]:
    cols = []
    for name, entry in data.items():
        cols.append(
            ColumnSchema(
                name=name,
                kind=entry["kind"],
                levels=tuple(entry.get("levels", ())),
            )
        )
    return tuple(cols)


def write_schema(schema, path) -> None:
    Path(path).write_text(json.dumps(schema_to_dict(schema), indent=2) + "\n")


def read_schema(path) -> tuple[ColumnSchema, ...]:
    return schema_from_dict(json.loads(Path(path).read_text()))


def write_dataset(dataset: MixedDataset, csv_path, schema_path=None,
                  labels: Optional[Partition] = None) -> None:
    """Write the dataset CSV (plus optional schema sidecar); when ``labels``
    is given a ``__cluster`` column is appended to the CSV."""
    header = [c.name for c in dataset.schema]
    columns = [dataset.column(name) for name in header]
    if labels is not None:
        header.append(LABEL_COLUMN)
        columns.append(labels.labels)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            writer.writerow([_format_cell(col[i]) for col in columns])
    if schema_path is not None:
        write_schema(dataset.schema, schema_path)


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_dataset(csv_path, schema_path) -> tuple[MixedDataset, Optional[Partition]]:
    """Read a dataset CSV with its schema sidecar.

    A ``__cluster`` column, if present, is split off and returned as a
    Partition (None otherwise).
    """
    schema = read_schema(schema_path)
    by_name = {c.name: c for c in schema}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        records = list(reader)
    missing = [c.name for c in schema if c.name not in header]
    if missing:
        raise SchemaError(f"CSV is missing schema columns: {missing}")
    idx = {name: header.index(name) for name in header}
    columns = {}
    for col in schema:
        j = idx[col.name]
        if col.kind == CONTINUOUS:
            columns[col.name] = np.array([float(r[j]) for r in records])
        else:
            columns[col.name] = np.array([r[j] for r in records], dtype=object)
    dataset = MixedDataset.from_columns(schema, columns)
    labels = None
    if LABEL_COLUMN in idx:
        j = idx[LABEL_COLUMN]
        labels = Partition.from_labels([int(r[j]) for r in records])
    return dataset, labels


def write_labels(partition: Partition, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([LABEL_COLUMN])
        for lab in partition.labels:
            writer.writerow([int(lab)])


def read_labels(path) -> Partition:
    """Read labels from a standalone labels CSV or any CSV containing a
    ``__cluster`` column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        records = list(reader)
    if LABEL_COLUMN in header:
        j = header.index(LABEL_COLUMN)
    elif len(header) == 1:
        j = 0
    else:
        raise SchemaError(f"no {LABEL_COLUMN!r} column in {path}")
    return Partition.from_labels([int(r[j]) for r in records])
