"""Per-city monthly climate/demand data: types, CSV ingestion, gap handling
and standardization."""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateColumnError,
    DuplicateKeyError,
    GapError,
    RowValidationError,
    SchemaError,
    ValidationError,
)

# Column order is part of the report contract; do not reorder.
PREDICTOR_NAMES = (
    "max_dry_bulb_temp",
    "dew_point_temp",
    "max_relative_humidity",
    "avg_relative_humidity",
    "max_wind_speed",
    "avg_wind_speed",
    "precipitation",
    "enso_index",
)
RESPONSE_NAMES = ("water_use", "electricity_use")
CUSTOMER_NAMES = ("water_customers", "electricity_customers")

PREDICTOR_LABELS = {
    "max_dry_bulb_temp": "Average maximum temperature",
    "dew_point_temp": "Average dew point temperature",
    "max_relative_humidity": "Average maximum relative humidity",
    "avg_relative_humidity": "Average relative humidity",
    "max_wind_speed": "Average maximum wind speed",
    "avg_wind_speed": "Average wind speed",
    "precipitation": "Monthly accumulated precipitation",
    "enso_index": "ENSO index",
}

REQUIRED_KEYS = ("year", "month") + PREDICTOR_NAMES + RESPONSE_NAMES + CUSTOMER_NAMES
DEFAULT_SCHEMA = {key: key for key in REQUIRED_KEYS}

GAP_POLICIES = ("fail", "linear-interpolate-max-2")
MAX_INTERPOLATED_GAP = 2


@dataclass(frozen=True, order=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValidationError(f"month must be in [1, 12], got {self.month}")

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "MonthStamp":
        return cls(ordinal // 12, ordinal % 12 + 1)

    def __str__(self):
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class ClimateRecord:
    max_dry_bulb_temp: float
    dew_point_temp: float
    max_relative_humidity: float
    avg_relative_humidity: float
    max_wind_speed: float
    avg_wind_speed: float
    precipitation: float
    enso_index: float

    def validate(self) -> None:
        for name in PREDICTOR_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} is not finite")
        for name in ("max_relative_humidity", "avg_relative_humidity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValidationError(f"{name}={value} outside range [0,100]")
        for name in ("max_wind_speed", "avg_wind_speed", "precipitation"):
            value = getattr(self, name)
            if value < 0:
                raise ValidationError(f"{name}={value} must be non-negative")
        if self.dew_point_temp > self.max_dry_bulb_temp:
            raise ValidationError(
                f"dew_point_temp={self.dew_point_temp} exceeds "
                f"max_dry_bulb_temp={self.max_dry_bulb_temp}"
            )

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in PREDICTOR_NAMES)


@dataclass(frozen=True)
class DemandRecord:
    """Per-customer demand; raw totals are recovered as value * customers."""

    water_use: float
    electricity_use: float
    water_customers: float
    electricity_customers: float

    @classmethod
    def from_raw(cls, water_total, electricity_total, water_customers, electricity_customers):
        for name, value in (("water_use", water_total), ("electricity_use", electricity_total)):
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{name}={value} must be finite and non-negative")
        for name, value in (
            ("water_customers", water_customers),
            ("electricity_customers", electricity_customers),
        ):
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name}={value} must be a positive count")
        return cls(
            water_total / water_customers,
            electricity_total / electricity_customers,
            water_customers,
            electricity_customers,
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class NexusDataset:
    """Aligned monthly predictor/response matrices for one city.

    ``X`` is n x p (canonical predictor order unless a subset was selected),
    ``Y`` is n x 2 (water, electricity). ``standardization`` maps a column
    name to the ``(mean, std)`` that was removed from it; ``provenance``
    records processing notes such as interpolated months.
    """

    city_id: str
    timeline: tuple
    X: np.ndarray
    Y: np.ndarray
    customers: np.ndarray | None = None
    predictor_names: tuple = PREDICTOR_NAMES
    response_names: tuple = RESPONSE_NAMES
    standardization: Mapping[str, tuple] | None = None
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "timeline", tuple(self.timeline))
        object.__setattr__(self, "X", _frozen(self.X))
        object.__setattr__(self, "Y", _frozen(self.Y))
        if self.customers is not None:
            object.__setattr__(self, "customers", _frozen(self.customers))
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))
        object.__setattr__(self, "response_names", tuple(self.response_names))
        n = len(self.timeline)
        if self.X.ndim != 2 or self.X.shape[0] != n:
            raise ValidationError(f"X must have {n} rows, got shape {self.X.shape}")
        if self.Y.ndim != 2 or self.Y.shape[0] != n:
            raise ValidationError(f"Y must have {n} rows, got shape {self.Y.shape}")
        if self.X.shape[1] != len(self.predictor_names):
            raise ValidationError("predictor_names does not match X columns")
        if self.Y.shape[1] != len(self.response_names):
            raise ValidationError("response_names does not match Y columns")
        if self.customers is not None and self.customers.shape != (n, 2):
            raise ValidationError("customers must be n x 2")
        if not (np.isfinite(self.X).all() and np.isfinite(self.Y).all()):
            raise ValidationError("dataset contains non-finite values")
        for prev, cur in zip(self.timeline, self.timeline[1:]):
            if not prev < cur:
                raise ValidationError(f"timeline not strictly increasing at {prev} -> {cur}")

    @property
    def n(self) -> int:
        return len(self.timeline)

    def column(self, name: str) -> np.ndarray:
        if name in self.predictor_names:
            return self.X[:, self.predictor_names.index(name)]
        if name in self.response_names:
            return self.Y[:, self.response_names.index(name)]
        raise KeyError(name)

    def with_responses(self, Y, **provenance) -> "NexusDataset":
        merged = {**self.provenance, **provenance}
        return dataclasses.replace(self, Y=Y, provenance=merged)

    def select_predictors(self, indices: Sequence[int]) -> "NexusDataset":
        indices = list(indices)
        names = tuple(self.predictor_names[i] for i in indices)
        return dataclasses.replace(self, X=self.X[:, indices], predictor_names=names)

    def unstandardized(self) -> "NexusDataset":
        """Undo recorded standardization, returning original-unit columns."""
        if not self.standardization:
            return self
        X, Y = self.X.copy(), self.Y.copy()
        for name, (mean, std) in self.standardization.items():
            if name in self.predictor_names:
                j = self.predictor_names.index(name)
                X[:, j] = X[:, j] * std + mean
            else:
                k = self.response_names.index(name)
                Y[:, k] = Y[:, k] * std + mean
        return dataclasses.replace(self, X=X, Y=Y, standardization=None)

    def destandardize_responses(self, Y) -> np.ndarray:
        """Map an n x q array on the modelling scale back to response units."""
        Y = np.array(Y, dtype=float)
        for k, name in enumerate(self.response_names):
            if self.standardization and name in self.standardization:
                mean, std = self.standardization[name]
                Y[:, k] = Y[:, k] * std + mean
        return Y


def load_schema(path) -> dict:
    """Read a ``logical_name = csv column`` schema file.

    Blank lines and ``#`` comments are ignored. Keys not given default to
    the logical name itself. An optional ``city`` key names the city column;
    without it a column literally called ``city`` is used when present.
    """
    schema = dict(DEFAULT_SCHEMA)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = column'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in REQUIRED_KEYS and key != "city":
            raise ConfigurationError(f"{path}:{lineno}: unknown schema key {key!r}")
        schema[key] = value
    return schema


def _parse_float(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise RowValidationError(row, f"column {column!r}: cannot parse {text!r} as a number")
    if not math.isfinite(value):
        raise RowValidationError(row, f"column {column!r}: non-finite value {text!r}")
    return value


def _read_rows(path, schema):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(None, f"{path}: missing header row")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        for key in list(REQUIRED_KEYS) + (["city"] if "city" in schema else []):
            if schema[key] not in header:
                raise SchemaError(schema[key])
        city_column = schema.get("city", "city" if "city" in header else None)
        records = []
        for row_index, row in enumerate(reader):
            try:
                year = int(_parse_float(row[schema["year"]], row_index, schema["year"]))
                month = int(_parse_float(row[schema["month"]], row_index, schema["month"]))
                stamp = MonthStamp(year, month)
                climate = ClimateRecord(
                    *(_parse_float(row[schema[k]], row_index, schema[k]) for k in PREDICTOR_NAMES)
                )
                climate.validate()
                demand = DemandRecord.from_raw(
                    *(_parse_float(row[schema[k]], row_index, schema[k])
                      for k in RESPONSE_NAMES + CUSTOMER_NAMES)
                )
            except RowValidationError:
                raise
            except ValidationError as exc:
                raise RowValidationError(row_index, str(exc)) from None
            city = row[city_column].strip() if city_column else ""
            records.append((city, stamp, climate, demand, row_index))
    return records


def _build(city, records) -> NexusDataset:
    records = sorted(records, key=lambda r: r[1])
    seen = {}
    for _, stamp, _, _, row_index in records:
        if stamp in seen:
            raise DuplicateKeyError(
                f"duplicate (city, month) key ({city or '<default>'}, {stamp}) "
                f"in rows {seen[stamp]} and {row_index}"
            )
        seen[stamp] = row_index
    return NexusDataset(
        city_id=city,
        timeline=[r[1] for r in records],
        X=[r[2].as_tuple() for r in records],
        Y=[(r[3].water_use, r[3].electricity_use) for r in records],
        customers=[(r[3].water_customers, r[3].electricity_customers) for r in records],
    )


def ingest_all(path, schema: Mapping[str, str] | None = None) -> dict:
    """Ingest a multi-city CSV into ``{city: NexusDataset}``."""
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    by_city: dict = {}
    for rec in _read_rows(path, schema):
        by_city.setdefault(rec[0], []).append(rec)
    return {city: _build(city, recs) for city, recs in sorted(by_city.items())}


def ingest_csv(path, schema: Mapping[str, str] | None = None, city: str | None = None,
               default_city: str = "city") -> NexusDataset:
    """Ingest one city's rows from a CSV file.

    Rows may appear in any order; the result is sorted by month. When the
    schema has a city column and the file holds several cities, ``city``
    selects one of them.
    """
    datasets = ingest_all(path, schema)
    if city is not None:
        if city not in datasets:
            raise ValidationError(f"city {city!r} not found in {path}")
        return datasets[city]
    if len(datasets) == 0:
        return NexusDataset(default_city, (), np.empty((0, 8)), np.empty((0, 2)))
    if len(datasets) > 1:
        raise ValidationError(f"{path} holds several cities {sorted(datasets)}; pass city=")
    ds = next(iter(datasets.values()))
    return ds if ds.city_id else dataclasses.replace(ds, city_id=default_city)


def write_csv(datasets: Sequence[NexusDataset], path, schema: Mapping[str, str] | None = None):
    """Write datasets in the format :func:`ingest_csv` reads.

    Usage columns are written as raw totals (per-customer value times the
    customer count); floats use the shortest round-tripping representation.
    """
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    schema.setdefault("city", "city")
    columns = [schema["city"]] + [schema[k] for k in REQUIRED_KEYS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for ds in datasets:
            if ds.predictor_names != PREDICTOR_NAMES:
                raise ValidationError("only full-predictor datasets can be written")
            ds = ds.unstandardized()
            customers = ds.customers if ds.customers is not None else np.ones((ds.n, 2))
            for i, stamp in enumerate(ds.timeline):
                raw = ds.Y[i] * customers[i]
                writer.writerow(
                    [ds.city_id, stamp.year, stamp.month]
                    + [repr(float(v)) for v in ds.X[i]]
                    + [repr(float(v)) for v in raw]
                    + [repr(float(v)) for v in customers[i]]
                )


def find_gaps(ds: NexusDataset) -> list:
    """Return ``(previous, next, missing_count)`` for every hole in the timeline."""
    gaps = []
    for prev, cur in zip(ds.timeline, ds.timeline[1:]):
        missing = cur.ordinal - prev.ordinal - 1
        if missing > 0:
            gaps.append((prev, cur, missing))
    return gaps


def handle_gaps(ds: NexusDataset, policy: str = "fail") -> NexusDataset:
    if policy not in GAP_POLICIES:
        raise ConfigurationError(f"unknown gap policy {policy!r}; choose from {GAP_POLICIES}")
    gaps = find_gaps(ds)
    if not gaps:
        return ds
    for prev, cur, missing in gaps:
        if policy == "fail" or missing > MAX_INTERPOLATED_GAP:
            first = MonthStamp.from_ordinal(prev.ordinal + 1)
            last = MonthStamp.from_ordinal(cur.ordinal - 1)
            raise GapError(first, last, missing)

    start, stop = ds.timeline[0].ordinal, ds.timeline[-1].ordinal
    known = np.array([s.ordinal for s in ds.timeline], dtype=float)
    full = np.arange(start, stop + 1)

    def fill(a):
        return np.column_stack([np.interp(full, known, a[:, j]) for j in range(a.shape[1])])

    filled = [str(MonthStamp.from_ordinal(int(o))) for o in sorted(set(full) - set(known.astype(int)))]
    provenance = dict(ds.provenance)
    provenance["interpolated_months"] = tuple(provenance.get("interpolated_months", ())) + tuple(filled)
    return dataclasses.replace(
        ds,
        timeline=[MonthStamp.from_ordinal(int(o)) for o in full],
        X=fill(ds.X),
        Y=fill(ds.Y),
        customers=None if ds.customers is None else fill(ds.customers),
        provenance=provenance,
    )


def standardize(ds: NexusDataset, which: str = "responses") -> NexusDataset:
    """Z-score the selected columns (sample standard deviation, ddof=1).

    Standardizing an already standardized column composes the metadata so
    that :meth:`NexusDataset.unstandardized` still returns original units.
    """
    if which not in ("responses", "predictors", "both"):
        raise ConfigurationError(f"which must be responses, predictors or both, got {which!r}")
    if ds.n < 2:
        raise DegenerateColumnError(ds.response_names[0])
    meta = dict(ds.standardization or {})
    X, Y = ds.X.copy(), ds.Y.copy()
    targets = []
    if which in ("predictors", "both"):
        targets += [(X, j, name) for j, name in enumerate(ds.predictor_names)]
    if which in ("responses", "both"):
        targets += [(Y, k, name) for k, name in enumerate(ds.response_names)]
    for arr, j, name in targets:
        col = arr[:, j]
        mean, std = float(col.mean()), float(col.std(ddof=1))
        if not std > 0:
            raise DegenerateColumnError(name)
        arr[:, j] = (col - mean) / std
        if name in meta:
            m0, s0 = meta[name]
            mean, std = m0 + s0 * mean, s0 * std
        meta[name] = (mean, std)
    return dataclasses.replace(ds, X=X, Y=Y, standardization=meta)


def lag_predictor(ds: NexusDataset, name: str, lag: int) -> NexusDataset:
    """Shift one predictor ``lag`` months into the past, dropping the first rows."""
    if lag < 0:
        raise ConfigurationError("lag must be non-negative")
    if lag == 0:
        return ds
    if lag >= ds.n:
        raise ConfigurationError(f"lag {lag} leaves no data")
    if find_gaps(ds):
        raise ConfigurationError("lagging requires a gap-free timeline")
    j = ds.predictor_names.index(name)
    X = ds.X[lag:].copy()
    X[:, j] = ds.X[:-lag, j]
    provenance = {**ds.provenance, f"{name}_lag": lag}
    return dataclasses.replace(
        ds,
        timeline=ds.timeline[lag:],
        X=X,
        Y=ds.Y[lag:],
        customers=None if ds.customers is None else ds.customers[lag:],
        provenance=provenance,
    )
