"""CSV ingestion with recoding and standardization, plus serializers.

The loader targets survey-style files: a header row, string literals for
binary outcomes ("Yes"/"No"), continuous columns that may need
z-scoring, and scattered missing values. Policy decisions live here and
are deliberately plain: rows missing any used column are dropped (count
surfaced, nothing imputed), recodings must cover every literal they
meet, and standardization uses the post-drop sample.

Serialization is lossless: CSV numbers carry 17 significant digits and
JSON uses the shortest representation that round-trips. No artifact
embeds timestamps, so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DataError,
    EmptyAfterFiltering,
    MissingColumn,
    UnmappedLiteral,
)
from .model import Dataset
from .sensitivity import SweepTable

__all__ = [
    "ColumnSchema",
    "load_csv",
    "write_dataset_csv",
    "write_sweep_csv",
    "write_json_document",
    "format_float",
]

log = logging.getLogger(__name__)

#: Literals treated as missing before any recoding is attempted.
MISSING_LITERALS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL"})


def format_float(value: float) -> str:
    """17-significant-digit decimal form; parses back to the same double."""
    return "%.17g" % value


def _format_cell(value: Union[None, float, int, str]) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(float(value))


@dataclass(frozen=True)
class ColumnSchema:
    """Mapping from file columns to model roles.

    binary_recodings maps a column name to its literal table, e.g.
    {"x": {"Yes": 1, "No": 0}}. standardize_columns are z-scored
    (sample mean removed, sample standard deviation with one delta
    degree of freedom divided out) after row filtering; the binary role
    columns cannot be standardized.
    """

    x_column: str = "x"
    y_column: str = "y"
    z_column: str = "z"
    w_column: str = "w"
    covariate_columns: Tuple[str, ...] = ()
    binary_recodings: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    standardize_columns: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        roles = [self.x_column, self.y_column, self.z_column, self.w_column]
        roles += list(self.covariate_columns)
        if len(set(roles)) != len(roles):
            raise ValueError(f"schema role columns are not distinct: {roles}")
        for col in (self.x_column, self.y_column):
            if col in self.standardize_columns:
                raise ValueError(f"cannot standardize binary outcome column {col!r}")
        for col, table in self.binary_recodings.items():
            bad = {v for v in table.values() if v not in (0, 1)}
            if bad:
                raise ValueError(f"recoding for {col!r} maps to non-binary values {bad}")

    def used_columns(self) -> Tuple[str, ...]:
        return (
            self.x_column,
            self.y_column,
            self.z_column,
            self.w_column,
        ) + tuple(self.covariate_columns)

    @classmethod
    def from_mapping(cls, doc: Mapping[str, object]) -> "ColumnSchema":
        """Build from a plain configuration mapping (JSON-friendly)."""
        kwargs: Dict[str, object] = {}
        for key in ("x_column", "y_column", "z_column", "w_column"):
            if key in doc:
                kwargs[key] = str(doc[key])
        if "covariate_columns" in doc:
            kwargs["covariate_columns"] = tuple(str(c) for c in doc["covariate_columns"])
        if "standardize_columns" in doc:
            kwargs["standardize_columns"] = tuple(str(c) for c in doc["standardize_columns"])
        if "binary_recodings" in doc:
            kwargs["binary_recodings"] = {
                str(col): {str(lit): int(v) for lit, v in table.items()}
                for col, table in dict(doc["binary_recodings"]).items()
            }
        return cls(**kwargs)


def _parse_cell(column: str, literal: str, recoding: Optional[Mapping[str, int]]) -> float:
    if recoding is not None:
        if literal in recoding:
            return float(recoding[literal])
        raise UnmappedLiteral(column, literal)
    try:
        return float(literal)
    except ValueError:
        raise DataError(
            f"column {column!r} has non-numeric value {literal!r} and no recoding"
        ) from None


def load_csv(path: Union[str, Path], schema: ColumnSchema) -> Dataset:
    """Read a delimited file into a Dataset under the given schema.

    Rows with a missing value in any used column are dropped and counted;
    recodings and numeric parsing run on the survivors; standardization
    is computed from the post-drop sample and its pre-standardization
    mean and sd are kept in the provenance block.

    Raises MissingColumn, UnmappedLiteral (with column and literal),
    EmptyAfterFiltering, or DataError for malformed numerics.
    """
    path = Path(path)
    used = schema.used_columns()
    for col in set(schema.standardize_columns) | set(schema.binary_recodings):
        if col not in used:
            raise MissingColumn(
                f"schema references column {col!r} outside the used set {used}"
            )

    columns: Dict[str, List[float]] = {col: [] for col in used}
    n_dropped = 0
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in used:
            if col not in header:
                raise MissingColumn(f"column {col!r} not in header {header}")
        for row in reader:
            literals = {col: (row[col] or "").strip() for col in used}
            if any(lit in MISSING_LITERALS for lit in literals.values()):
                n_dropped += 1
                continue
            parsed = {
                col: _parse_cell(col, literals[col], schema.binary_recodings.get(col))
                for col in used
            }
            for col, value in parsed.items():
                columns[col].append(value)

    n_kept = len(columns[schema.x_column])
    if n_kept == 0:
        raise EmptyAfterFiltering(
            f"{path} has no usable rows ({n_dropped} dropped as incomplete)"
        )
    if n_dropped:
        log.info("dropped %d incomplete rows from %s, kept %d", n_dropped, path, n_kept)

    arrays = {col: np.asarray(vals, dtype=float) for col, vals in columns.items()}
    pre_moments: Dict[str, Dict[str, float]] = {}
    for col in schema.standardize_columns:
        mean = float(arrays[col].mean())
        sd = float(arrays[col].std(ddof=1)) if n_kept > 1 else 0.0
        if sd == 0.0 or not math.isfinite(sd):
            raise DataError(f"column {col!r} is constant; cannot standardize")
        pre_moments[col] = {"mean": mean, "sd": sd}
        arrays[col] = (arrays[col] - mean) / sd

    q = None
    if schema.covariate_columns:
        q = np.column_stack([arrays[col] for col in schema.covariate_columns])
    try:
        return Dataset(
            x=arrays[schema.x_column].astype(np.int8),
            y=arrays[schema.y_column].astype(np.int8),
            z=arrays[schema.z_column],
            w=arrays[schema.w_column],
            q=q,
            column_names=used,
            provenance={
                "n_kept": n_kept,
                "n_dropped": n_dropped,
                "pre_standardization": pre_moments,
            },
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def write_dataset_csv(d: Dataset, path: Union[str, Path]) -> None:
    """Write the sample as CSV with a header row and lossless numbers."""
    path = Path(path)
    q_count = 0 if d.q is None else d.q.shape[1]
    names = list(d.column_names) if d.column_names else (
        ["x", "y", "z", "w"] + [f"q{j + 1}" for j in range(q_count)]
    )
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(names)
        for i in range(d.n):
            row: List[str] = [str(int(d.x[i])), str(int(d.y[i]))]
            row.append(format_float(float(d.z[i])))
            row.append(format_float(float(d.w[i])))
            for j in range(q_count):
                row.append(format_float(float(d.q[i, j])))
            writer.writerow(row)


#: Fixed column order of sweep CSVs (after the axis columns).
SWEEP_VALUE_COLUMNS = (
    "beta_xy",
    "beta_yx",
    "bias_xy",
    "bias_yx",
    "sd_xy",
    "sd_yx",
    "ci_xy_lo",
    "ci_xy_hi",
    "ci_yx_lo",
    "ci_yx_hi",
    "n_success",
    "n_fail",
    "n_unresolved",
    "note",
)


def write_sweep_csv(table: SweepTable, path: Union[str, Path]) -> None:
    """Write a sweep in long format, one row per grid cell.

    Column order is fixed: the axis columns in plan order, then the
    value columns. Empty cells mean "not applicable for this source
    kind" (e.g. bias without a known truth).
    """
    path = Path(path)
    axis_names = [name for name, _ in table.axes]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(axis_names + list(SWEEP_VALUE_COLUMNS))
        for row in table.rows:
            cells = [_format_cell(v) for v in row.axis_values]
            cells.append(_format_cell(row.beta_xy))
            cells.append(_format_cell(row.beta_yx))
            cells.append(_format_cell(row.bias_xy))
            cells.append(_format_cell(row.bias_yx))
            cells.append(_format_cell(row.sd_xy))
            cells.append(_format_cell(row.sd_yx))
            for ci in (row.ci_xy, row.ci_yx):
                cells.append(_format_cell(None if ci is None else ci[0]))
                cells.append(_format_cell(None if ci is None else ci[1]))
            cells.append(str(row.replicates - row.failures))
            cells.append(str(row.failures))
            cells.append(str(row.unresolved))
            cells.append(row.note)
            writer.writerow(cells)


def write_json_document(doc: Mapping[str, object], path: Union[str, Path]) -> None:
    """Write a report/manifest as sorted-key JSON with a trailing newline.

    Sorting plus Python's shortest-round-trip float text makes the bytes
    a pure function of the document content.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(_jsonable(doc), handle, sort_keys=True, indent=2)
        handle.write("\n")


def _jsonable(value):
    """Recursively coerce numpy scalars/arrays and tuples to JSON types."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value
