import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd
import yaml

from .errors import (
    EmptyDatasetError,
    InvalidFoldCountError,
    ParseError,
    SchemaError,
    SchemaMismatchError,
)

log = logging.getLogger(__name__)

# Cells that parse as "missing" rather than as malformed numbers
_MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none"}


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    unit: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.name:
            raise SchemaError("Feature name must be non-empty")
        if not (self.lower <= self.upper):
            raise SchemaError(
                f"Feature '{self.name}': lower bound {self.lower} exceeds upper bound {self.upper}"
            )

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.lower) & (values <= self.upper)


def _check_schema(schema: Sequence[FeatureSpec]) -> tuple:
    schema = tuple(schema)
    if not schema:
        raise SchemaError("Schema must declare at least one feature")
    seen = set()
    for spec in schema:
        if spec.name in seen:
            raise SchemaError(f"Duplicate feature name '{spec.name}' in schema")
        seen.add(spec.name)
    return schema


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise SchemaError(f"Expected a {ndim}-D array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Feature table plus target; arrays are read-only once constructed.

    Datasets returned by `load_csv` may still hold non-finite or out-of-bound
    values; `clean` is what establishes the finite/in-bounds invariant.
    """

    schema: tuple
    rows: np.ndarray
    target: np.ndarray
    target_name: str
    target_spec: Optional[FeatureSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "schema", _check_schema(self.schema))
        rows = _frozen(self.rows, 2)
        target = _frozen(self.target, 1)
        if rows.shape[0] < 1:
            raise EmptyDatasetError("construction")
        if rows.shape[1] != len(self.schema):
            raise SchemaError(
                f"Row width {rows.shape[1]} does not match schema size {len(self.schema)}"
            )
        if target.shape[0] != rows.shape[0]:
            raise SchemaError(f"Target length {target.shape[0]} != row count {rows.shape[0]}")
        if self.target_name in {s.name for s in self.schema}:
            raise SchemaError(f"Target '{self.target_name}' is also declared as a feature")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "target", target)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def feature_names(self) -> tuple:
        return tuple(s.name for s in self.schema)

    def lower_bounds(self) -> np.ndarray:
        return np.array([s.lower for s in self.schema], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([s.upper for s in self.schema], dtype=float)

    def take(self, indices) -> "Dataset":
        """Subset of rows, in the order given."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.schema, self.rows[indices], self.target[indices],
                       self.target_name, self.target_spec)

    def select(self, names: Sequence[str]) -> "Dataset":
        """Subset of features, reordered to `names`."""
        lookup = {s.name: i for i, s in enumerate(self.schema)}
        missing = [name for name in names if name not in lookup]
        if missing:
            raise SchemaMismatchError(missing[0])
        cols = [lookup[name] for name in names]
        return Dataset(tuple(self.schema[c] for c in cols), self.rows[:, cols], self.target,
                       self.target_name, self.target_spec)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(np.asarray(self.rows), columns=list(self.feature_names))
        frame[self.target_name] = np.asarray(self.target)
        return frame


# -------------------------------------------------------------------------
# Schema files
# -------------------------------------------------------------------------

def _spec_from_dict(entry: dict) -> FeatureSpec:
    try:
        return FeatureSpec(
            name=str(entry["name"]),
            unit=str(entry.get("unit", "")),
            lower=float(entry["lower"]),
            upper=float(entry["upper"]),
        )
    except KeyError as e:
        raise SchemaError(f"Schema entry {entry!r} lacks key {e}") from e


def _spec_to_dict(spec: FeatureSpec) -> dict:
    return {"name": spec.name, "unit": spec.unit, "lower": spec.lower, "upper": spec.upper}


def load_schema(path) -> tuple:
    """Read a YAML schema file: `features` list plus a `target` entry.

    Returns (features, target_spec).
    """
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if "features" not in doc or "target" not in doc:
        raise SchemaError(f"Schema file {path} must define 'features' and 'target'")
    features = _check_schema(_spec_from_dict(e) for e in doc["features"])
    return features, _spec_from_dict(doc["target"])


def dump_schema(path, features: Sequence[FeatureSpec], target: FeatureSpec) -> None:
    doc = {"features": [_spec_to_dict(s) for s in features], "target": _spec_to_dict(target)}
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


# -------------------------------------------------------------------------
# Ingestion
# -------------------------------------------------------------------------

def _parse_column(raw: pd.Series, column: str) -> np.ndarray:
    values = np.array(pd.to_numeric(raw, errors="coerce"), dtype=float)
    suspect = np.flatnonzero(np.isnan(values))
    for pos in suspect:
        cell = raw.iloc[pos].strip()
        if cell.lower() in _MISSING_TOKENS:
            continue
        try:
            values[pos] = float(cell)
        except ValueError:
            # data rows are numbered from 1, header excluded
            raise ParseError(int(pos) + 1, column, cell) from None
    return values


def load_csv(path, schema: Sequence[FeatureSpec], target_name: str,
             target_spec: Optional[FeatureSpec] = None) -> Dataset:
    """Read a comma-separated file with a header row; no cleaning applied."""
    schema = _check_schema(schema)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    for name in [s.name for s in schema] + [target_name]:
        if name not in frame.columns:
            raise SchemaMismatchError(name)
    if frame.empty:
        raise EmptyDatasetError("loading")

    rows = np.column_stack([_parse_column(frame[s.name], s.name) for s in schema])
    target = _parse_column(frame[target_name], target_name)
    log.info("Loaded %d rows x %d features from %s", rows.shape[0], rows.shape[1], path)
    return Dataset(schema, rows, target, target_name, target_spec)


def write_csv(data: Dataset, path) -> None:
    data.to_frame().to_csv(path, index=False)


# -------------------------------------------------------------------------
# Cleaning
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class CleanReport:
    n_input: int
    n_output: int
    non_finite: int
    feature_out_of_bounds: int
    target_out_of_bounds: int
    per_feature: dict = field(default_factory=dict)

    @property
    def removed(self) -> int:
        return self.n_input - self.n_output

    def as_dict(self) -> dict:
        out = {
            "n_input": self.n_input,
            "n_output": self.n_output,
            "removed": self.removed,
            "non_finite": self.non_finite,
            "feature_out_of_bounds": self.feature_out_of_bounds,
            "target_out_of_bounds": self.target_out_of_bounds,
        }
        for name, count in self.per_feature.items():
            out[f"out_of_bounds.{name}"] = count
        return out

    def to_text(self) -> str:
        lines = [
            "Cleaning report",
            f"  rows in:                {self.n_input}",
            f"  rows out:               {self.n_output}",
            f"  non-finite removed:     {self.non_finite}",
            f"  feature bound removed:  {self.feature_out_of_bounds}",
            f"  target bound removed:   {self.target_out_of_bounds}",
        ]
        offenders = {k: v for k, v in self.per_feature.items() if v}
        if offenders:
            lines.append("  out-of-bound rows per feature:")
            for name, count in offenders.items():
                lines.append(f"    {name}: {count}")
        return "\n".join(lines)

    def to_kv(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.as_dict().items()) + "\n"


def clean(raw: Dataset):
    """Drop rows that are non-finite or violate a declared bound.

    Each removed row is counted under the first rule it breaks, in the order
    non-finite, feature bound, target bound.
    """
    rows = np.asarray(raw.rows)
    target = np.asarray(raw.target)

    finite = np.isfinite(rows).all(axis=1) & np.isfinite(target)
    in_bounds = np.ones(raw.n, dtype=bool)
    per_feature = {}
    # NaN comparisons are False, so non-finite rows also fail here; they are
    # only counted under the first rule
    for j, spec in enumerate(raw.schema):
        ok = spec.contains(rows[:, j])
        per_feature[spec.name] = int(np.count_nonzero(~ok & finite))
        in_bounds &= ok
    if raw.target_spec is not None:
        target_ok = raw.target_spec.contains(target)
    else:
        target_ok = np.ones(raw.n, dtype=bool)

    drop_nonfinite = ~finite
    drop_feature = finite & ~in_bounds
    drop_target = finite & in_bounds & ~target_ok
    keep = finite & in_bounds & target_ok

    report = CleanReport(
        n_input=raw.n,
        n_output=int(np.count_nonzero(keep)),
        non_finite=int(np.count_nonzero(drop_nonfinite)),
        feature_out_of_bounds=int(np.count_nonzero(drop_feature)),
        target_out_of_bounds=int(np.count_nonzero(drop_target)),
        per_feature=per_feature,
    )
    if report.n_output == 0:
        raise EmptyDatasetError("cleaning")
    if report.removed:
        log.info("Cleaning removed %d of %d rows", report.removed, report.n_input)
    return raw.take(np.flatnonzero(keep)), report


# -------------------------------------------------------------------------
# Fold assignment
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_index: np.ndarray

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_index, minlength=self.k)

    def folds(self) -> Iterator[tuple]:
        """Yield (train_indices, test_indices) per fold, both ascending."""
        for fold in range(self.k):
            test = np.flatnonzero(self.fold_index == fold)
            train = np.flatnonzero(self.fold_index != fold)
            yield train, test


def kfold_split(data: Dataset, k: int, seed: int) -> FoldAssignment:
    n = data.n
    if k < 2 or k > n:
        raise InvalidFoldCountError(k, n)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_index = np.empty(n, dtype=int)
    fold_index[perm] = np.arange(n) % k
    fold_index.flags.writeable = False
    return FoldAssignment(k=k, fold_index=fold_index)


# -------------------------------------------------------------------------
# Descriptive statistics
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class ColumnStats:
    name: str
    unit: str
    min: float
    max: float
    mean: float
    std: float
    bin_edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class DescriptiveStats:
    columns: tuple

    def column(self, name: str) -> ColumnStats:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(c.name, c.unit, c.min, c.max, c.mean, c.std) for c in self.columns],
            columns=["variable", "unit", "min", "max", "mean", "std"],
        )

    def histogram_frame(self) -> pd.DataFrame:
        records = []
        for c in self.columns:
            for b, count in enumerate(c.counts):
                records.append((c.name, b, c.bin_edges[b], c.bin_edges[b + 1], int(count)))
        return pd.DataFrame(records, columns=["variable", "bin", "left", "right", "count"])

    def to_text(self) -> str:
        width = max(len(c.name) for c in self.columns)
        header = f"{'Variable':<{width}}  {'Unit':<6} {'Min':>12} {'Max':>12} {'Mean':>12} {'Std':>12}"
        lines = [header, "-" * len(header)]
        for c in self.columns:
            lines.append(
                f"{c.name:<{width}}  {c.unit:<6} {c.min:>12.2f} {c.max:>12.2f} "
                f"{c.mean:>12.2f} {c.std:>12.2f}"
            )
        return "\n".join(lines)


def _column_stats(name: str, unit: str, values: np.ndarray, bins: int) -> ColumnStats:
    lo, hi = float(values.min()), float(values.max())
    mean = float(np.clip(values.mean(), lo, hi))
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return ColumnStats(name, unit, lo, hi, mean, std, edges, counts)


def describe(data: Dataset, bins: int = 20) -> DescriptiveStats:
    if bins < 1:
        raise ValueError("bins must be positive")
    rows = np.asarray(data.rows)
    cols = [
        _column_stats(spec.name, spec.unit, rows[:, j], bins)
        for j, spec in enumerate(data.schema)
    ]
    target_unit = data.target_spec.unit if data.target_spec else ""
    cols.insert(0, _column_stats(data.target_name, target_unit, np.asarray(data.target), bins))
    return DescriptiveStats(tuple(cols))


def write_stats(stats: DescriptiveStats, directory: Path) -> dict:
    directory = Path(directory)
    paths = {
        "stats_csv": directory / "stats.csv",
        "histograms_csv": directory / "histograms.csv",
        "stats_txt": directory / "stats.txt",
    }
    stats.to_frame().to_csv(paths["stats_csv"], index=False)
    stats.histogram_frame().to_csv(paths["histograms_csv"], index=False)
    paths["stats_txt"].write_text(stats.to_text() + "\n", encoding="utf-8")
    return paths

