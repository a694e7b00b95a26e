"""CSV ingestion and reversible encoding of raw columns into discrete states.

Every column is encoded to a dense 0-based state range with one extra
trailing state reserved for missing or previously unseen values, so even a
constant column yields a valid two-state variable. Numeric columns are
binned at holdout quantiles; categorical columns enumerate their observed
values. The label column is always treated as categorical since prediction
is evaluated by exact state match.

Codecs are fit on the holdout only and serialize to a JSON sidecar, so a
structure file plus its sidecar fully determines how any future row of the
same schema maps to model states.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .graph import ROLE_FEATURE, ROLE_LABEL, VariableSpec
from .simulator import DiscretizationMap, build_discretizer

MISSING_TOKENS = ("", "?")

KIND_CATEGORICAL = "categorical"
KIND_NUMERIC = "numeric"

# Auto-detection: an all-integer column with at most this many distinct
# values is kept categorical instead of being quantile-binned.
_SMALL_INT_CARDINALITY = 20


def _is_missing(raw: str) -> bool:
    return raw in MISSING_TOKENS


@dataclass(frozen=True)
class ColumnCodec:
    """Encoder for one column; the last state is the missing/unseen state."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    boundaries: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in (KIND_CATEGORICAL, KIND_NUMERIC):
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == KIND_NUMERIC and self.categories:
            raise ValueError(f"column {self.name!r}: numeric codec with categories")
        if self.kind == KIND_CATEGORICAL and self.boundaries:
            raise ValueError(f"column {self.name!r}: categorical codec with boundaries")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.categories)})

    @property
    def arity(self) -> int:
        if self.kind == KIND_CATEGORICAL:
            return len(self.categories) + 1
        return len(self.boundaries) + 2

    def encode(self, raw: str) -> int:
        if _is_missing(raw):
            return self.arity - 1
        if self.kind == KIND_CATEGORICAL:
            return self._index.get(raw, self.arity - 1)  # type: ignore[attr-defined]
        try:
            value = float(raw)
        except ValueError:
            return self.arity - 1
        return DiscretizationMap(self.boundaries).bin(value)


def _infer_kind(values: Sequence[str]) -> str:
    present = [v for v in values if not _is_missing(v)]
    if not present:
        return KIND_CATEGORICAL
    try:
        floats = [float(v) for v in present]
    except ValueError:
        return KIND_CATEGORICAL
    if all(f.is_integer() for f in floats) and len(set(floats)) <= _SMALL_INT_CARDINALITY:
        return KIND_CATEGORICAL
    return KIND_NUMERIC


def _sorted_categories(values: Iterable[str]) -> tuple[str, ...]:
    distinct = sorted(set(v for v in values if not _is_missing(v)))
    try:
        return tuple(sorted(distinct, key=lambda v: (float(v), v)))
    except ValueError:
        return tuple(distinct)


@dataclass(frozen=True)
class DatasetCodec:
    """Column codecs for a whole schema plus the designated label column."""

    columns: tuple[ColumnCodec, ...]
    label: str

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        if self.label not in names:
            raise ValueError(f"label column {self.label!r} not in schema")

    @classmethod
    def fit(
        cls,
        header: Sequence[str],
        rows: Sequence[Sequence[str]],
        label: str,
        numeric_columns: str | Sequence[str] = "auto",
        bins: int = 10,
    ) -> "DatasetCodec":
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise ValueError("duplicate column names in header")
        if label not in header:
            raise ValueError(f"label column {label!r} not found in header")
        if not rows:
            raise ValueError("cannot fit a codec on zero rows")
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")

        if numeric_columns == "auto":
            forced: set[str] | None = None
        else:
            forced = set(numeric_columns)
            unknown = forced - set(header)
            if unknown:
                raise ValueError(f"numeric_columns not in header: {sorted(unknown)}")
            if label in forced:
                raise ValueError("label column must stay categorical")

        columns = []
        for j, name in enumerate(header):
            values = [row[j] for row in rows]
            if name == label:
                kind = KIND_CATEGORICAL
            elif forced is None:
                kind = _infer_kind(values)
            else:
                kind = KIND_NUMERIC if name in forced else KIND_CATEGORICAL
            if kind == KIND_CATEGORICAL:
                columns.append(ColumnCodec(name, kind, categories=_sorted_categories(values)))
            else:
                floats = []
                for v in values:
                    if _is_missing(v):
                        continue
                    try:
                        floats.append(float(v))
                    except ValueError:
                        continue
                if not floats:
                    raise ValueError(f"numeric column {name!r} has no parseable values")
                columns.append(ColumnCodec(name, kind, boundaries=build_discretizer(floats, bins).boundaries))
        return cls(tuple(columns), label)

    def label_column(self) -> int:
        return [c.name for c in self.columns].index(self.label)

    def encode_row(self, row: Sequence[str]) -> tuple[int, ...]:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} fields, schema has {len(self.columns)}")
        return tuple(codec.encode(raw) for codec, raw in zip(self.columns, row))

    def encode_rows(self, rows: Iterable[Sequence[str]]) -> list[tuple[int, ...]]:
        return [self.encode_row(row) for row in rows]

    def variable_specs(self) -> tuple[VariableSpec, ...]:
        return tuple(
            VariableSpec(c.name, c.arity, ROLE_LABEL if c.name == self.label else ROLE_FEATURE)
            for c in self.columns
        )

    def to_json(self) -> str:
        payload = {
            "label": self.label,
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "categories": list(c.categories),
                    "boundaries": list(c.boundaries),
                }
                for c in self.columns
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetCodec":
        payload = json.loads(text)
        columns = tuple(
            ColumnCodec(
                col["name"],
                col["kind"],
                categories=tuple(col.get("categories", ())),
                boundaries=tuple(col.get("boundaries", ())),
            )
            for col in payload["columns"]
        )
        return cls(columns, payload["label"])


def save_codec(codec: DatasetCodec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(codec.to_json() + "\n")


def load_codec(path) -> DatasetCodec:
    with open(path, "r", encoding="utf-8") as fh:
        return DatasetCodec.from_json(fh.read())


def read_csv_dataset(path) -> tuple[list[str], list[tuple[str, ...]]]:
    """Header and stripped string rows of a CSV file; blank lines are skipped."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            rows.append(tuple(c.strip() for c in row))
    return header, rows


def write_csv_dataset(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
