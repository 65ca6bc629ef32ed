"""Categorical dataset ingestion.

Rows are complete categorical records.  Duplicate records are folded into
integer weights, so a plain record file and its contingency-table form
produce the same :class:`Dataset`.
"""
from __future__ import annotations

import csv
import io
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

COUNT_COLUMN_NAMES = ("count", "counts", "freq", "frequency", "n", "weight")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Variable:
    name: str
    categories: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class Dataset:
    variables: tuple[Variable, ...]
    rows: tuple[tuple[str, ...], ...]
    weights: tuple[int, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.weights):
            raise DataError("rows and weights differ in length")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate variable names in {names}")
        for v in self.variables:
            if len(set(v.categories)) != len(v.categories):
                raise DataError(f"duplicate categories for variable {v.name!r}")
            if not v.categories and self.rows:
                raise DataError(f"variable {v.name!r} has no categories")
        lookup = [set(v.categories) for v in self.variables]
        for i, (row, w) in enumerate(zip(self.rows, self.weights)):
            if len(row) != len(self.variables):
                raise DataError(f"row {i} has {len(row)} values, expected {len(self.variables)}")
            for value, allowed, var in zip(row, lookup, self.variables):
                if value not in allowed:
                    raise DataError(f"row {i}: {value!r} is not a category of {var.name!r}")
            if not isinstance(w, int) or w < 0:
                raise DataError(f"row {i}: weight {w!r} is not a nonnegative integer")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def total(self) -> int:
        return sum(self.weights)

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    @classmethod
    def from_records(
        cls,
        names: Sequence[str],
        records: Iterable[Sequence[str]],
        weights: Iterable[int] | None = None,
        schema: Mapping[str, Sequence[str]] | None = None,
    ) -> "Dataset":
        """Build a dataset, folding repeated records into weights.

        Categories follow first appearance unless ``schema`` fixes the
        order for a variable.
        """
        names = list(names)
        schema = dict(schema or {})
        unknown = set(schema) - set(names)
        if unknown:
            raise DataError(f"schema names unknown variables: {sorted(unknown)}")
        records = [tuple(r) for r in records]
        weights = [1] * len(records) if weights is None else list(weights)
        if len(weights) != len(records):
            raise DataError("weights and records differ in length")

        seen: list[dict[str, None]] = [dict() for _ in names]
        folded: dict[tuple[str, ...], int] = {}
        for i, (rec, w) in enumerate(zip(records, weights)):
            if len(rec) != len(names):
                raise DataError(f"row {i} has {len(rec)} values, expected {len(names)}")
            for j, value in enumerate(rec):
                if value == "":
                    raise DataError(f"row {i}: missing value for {names[j]!r}")
                seen[j].setdefault(value)
            folded[rec] = folded.get(rec, 0) + w

        variables = []
        for j, name in enumerate(names):
            if name in schema:
                cats = tuple(schema[name])
                extra = [c for c in seen[j] if c not in set(cats)]
                if extra:
                    raise DataError(f"values {extra} of {name!r} missing from schema")
            else:
                cats = tuple(seen[j])
            variables.append(Variable(name, cats))
        return cls(tuple(variables), tuple(folded), tuple(folded.values()))


def _parse_weight(text: str, row_index: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"row {row_index}: weight {text!r} is not an integer") from None
    if value < 0:
        raise DataError(f"row {row_index}: negative weight {value}")
    return value


def ingest(
    source: str | os.PathLike | io.TextIOBase,
    schema: Mapping[str, Sequence[str]] | None = None,
    delimiter: str = ",",
    count_column: str | None | bool = True,
) -> Dataset:
    """Read delimited text into a :class:`Dataset`.

    ``source`` is a path or an open text stream.  With ``count_column=True``
    a trailing column whose header is one of :data:`COUNT_COLUMN_NAMES`
    (case-insensitive) is read as row multiplicities; pass a column name to
    force it, or ``False`` to disable detection.  Row indices in error
    messages count data rows from 0.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return ingest(fh, schema, delimiter, count_column)

    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("input has no header row") from None
    if not header or any(h == "" for h in header):
        raise DataError("header has empty column names")

    weight_idx = None
    if count_column is True:
        if len(header) > 1 and header[-1].lower() in COUNT_COLUMN_NAMES:
            weight_idx = len(header) - 1
    elif count_column:
        if count_column not in header:
            raise DataError(f"count column {count_column!r} not in header")
        weight_idx = header.index(count_column)
    names = [h for i, h in enumerate(header) if i != weight_idx]

    records, weights = [], []
    for i, raw in enumerate(reader):
        if not raw or all(c.strip() == "" for c in raw):
            continue
        cells = [c.strip() for c in raw]
        if len(cells) != len(header):
            raise DataError(f"row {i}: expected {len(header)} cells, got {len(cells)}")
        for j, c in enumerate(cells):
            if c == "":
                raise DataError(f"row {i}: missing value in column {header[j]!r}")
        if weight_idx is None:
            weights.append(1)
            records.append(tuple(cells))
        else:
            weights.append(_parse_weight(cells[weight_idx], i))
            records.append(tuple(c for k, c in enumerate(cells) if k != weight_idx))
    return Dataset.from_records(names, records, weights, schema)
