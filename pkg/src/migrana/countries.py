"""Country indicator table: loading, validation and max-standardization."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from migrana.errors import DuplicateError, InputError, ParseError

FACTORS = ("x1", "x2", "x3", "x4", "x5", "x6")
INTEGER_FACTORS = ("x2", "x3", "x5", "x6")
COLUMNS = ("name",) + FACTORS


@dataclass(frozen=True)
class CountryRecord:
    """Six indicator values plus the country name.

    ``x6`` (refugees already in the country) doubles as the actual refugee
    count used by the capacity formula.
    """

    name: str
    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    x6: float

    @property
    def factors(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in FACTORS)

    def factor(self, index: int) -> float:
        """Factor by 1-based index."""
        if not 1 <= index <= len(FACTORS):
            raise KeyError(f"factor index {index} outside 1..{len(FACTORS)}")
        return getattr(self, FACTORS[index - 1])


@dataclass(frozen=True)
class CountryTable:
    records: tuple[CountryRecord, ...]
    warnings: tuple[tuple[int, str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise InputError("no data rows")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]

    @property
    def column_maxima(self) -> dict[str, float]:
        values = self.to_array()
        return {f: float(values[:, j].max()) for j, f in enumerate(FACTORS)}

    def get(self, name: str) -> CountryRecord:
        for record in self.records:
            if record.name == name:
                return record
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(r.name == name for r in self.records)

    def to_array(self) -> np.ndarray:
        return np.array([r.factors for r in self.records], dtype=float)


@dataclass(frozen=True)
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class StandardizedTable:
    names: tuple[str, ...]
    values: np.ndarray
    maxima: tuple[float, ...]

    def row(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]


def _parse_number(text: str, row: int, column: str) -> float:
    cleaned = text.strip().replace(",", "").rstrip("%").strip()
    try:
        value = float(cleaned)
    except ValueError:
        raise ParseError(row, column, f"malformed number {text!r}") from None
    if not np.isfinite(value):
        raise ParseError(row, column, f"non-finite number {text!r}")
    return value


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def load_country_table(source, impute_missing: bool = False) -> CountryTable:
    """Read a comma- or tab-separated country table.

    ``source`` is a path or a binary/text stream. Lines starting with ``#`` are
    provenance comments and are skipped. Thousands separators and percent
    signs are stripped from numeric cells. With ``impute_missing`` an empty
    cell is replaced by its column mean and reported as a warning instead of
    raising.
    """
    lines = [ln for ln in _read_text(source).splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError("no data rows")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise InputError(f"header lacks column(s): {', '.join(missing)}")
    pos = {c: header.index(c) for c in COLUMNS}

    names: list[str] = []
    cells: list[list[float | None]] = []
    for rownum, row in enumerate(reader, start=1):
        if not any(c.strip() for c in row):
            continue
        row = row + [""] * (len(header) - len(row))
        name = row[pos["name"]].strip()
        if not name:
            raise ParseError(rownum, "name", "missing country name")
        if name in names:
            raise DuplicateError(f"row {rownum}: duplicate country name {name!r}")
        values: list[float | None] = []
        for col in FACTORS:
            text = row[pos[col]].strip()
            if not text:
                if not impute_missing:
                    raise ParseError(rownum, col, "missing value")
                values.append(None)
            else:
                values.append(_parse_number(text, rownum, col))
        names.append(name)
        cells.append(values)
    if not cells:
        raise InputError("no data rows")

    warnings = []
    for j, col in enumerate(FACTORS):
        present = [r[j] for r in cells if r[j] is not None]
        if len(present) == len(cells):
            continue
        if not present:
            raise ParseError(1, col, "column has no values to impute from")
        mean = float(np.mean(present))
        if col in INTEGER_FACTORS:
            mean = float(round(mean))
        for i, r in enumerate(cells):
            if r[j] is None:
                r[j] = mean
                warnings.append((i + 1, col, f"missing value imputed with column mean {mean:.6g}"))

    records = tuple(CountryRecord(n, *v) for n, v in zip(names, cells))
    return CountryTable(records, tuple(sorted(warnings)))


def load_bundled_table() -> CountryTable:
    """The bundled 19-country indicator table."""
    with resources.files("migrana.data").joinpath("table_3_1.csv").open("rb") as fh:
        return load_country_table(fh)


def validate_table(table: CountryTable) -> ValidationReport:
    errors = []
    seen: dict[str, int] = {}
    for i, rec in enumerate(table.records, start=1):
        if not rec.name or not rec.name.strip():
            errors.append((i, "name", "empty"))
        elif rec.name in seen:
            errors.append((i, "name", f"duplicate of row {seen[rec.name]}"))
        else:
            seen[rec.name] = i
        for col in FACTORS:
            value = getattr(rec, col)
            if not np.isfinite(value):
                errors.append((i, col, "non-finite"))
                continue
            if value < 0:
                errors.append((i, col, "negative"))
            if col in INTEGER_FACTORS and value != int(value):
                errors.append((i, col, "not integer-valued"))
    return ValidationReport(errors=errors, warnings=list(table.warnings))


class MaxScaler(TransformerMixin, BaseEstimator):
    """Divide each column by its maximum over the fitted rows.

    Unlike ``MaxAbsScaler`` a column whose maximum is zero is an error rather
    than a silent pass-through.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        maxima = X.max(axis=0)
        bad = np.flatnonzero(maxima <= 0)
        if bad.size:
            raise InputError(
                "cannot standardize column(s) with non-positive maximum: "
                + ", ".join(_column_name(j) for j in bad)
            )
        self.max_ = maxima
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "max_")
        X = check_array(X, dtype=float)
        return X / self.max_

    def inverse_transform(self, X):
        check_is_fitted(self, "max_")
        return check_array(X, dtype=float) * self.max_


def _column_name(j: int) -> str:
    return FACTORS[j] if j < len(FACTORS) else f"column {j}"


def standardize(table: CountryTable) -> StandardizedTable:
    scaler = MaxScaler().fit(table.to_array())
    values = scaler.transform(table.to_array())
    values.setflags(write=False)
    return StandardizedTable(tuple(table.names), values, tuple(float(m) for m in scaler.max_))
