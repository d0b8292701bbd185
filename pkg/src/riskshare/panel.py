"""Balanced country-by-year panels: ingestion, validation and series arithmetic.

A :class:`PanelDataset` stores one ``(n_units, n_years)`` float matrix per
variable. Instances are immutable; every transform returns a new object.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateCell,
    MissingCell,
    NonContiguousYears,
    NonNumericValue,
    NonPositiveValue,
    PanelError,
    RankDeficientTrend,
    TooShort,
)

NATIONAL_ACCOUNTS = ("GDP", "C", "G", "NI", "DNI")
LONG_HEADER = ["unit", "year", "variable", "value"]
SIG_DIGITS = 12


def format_value(x: float) -> str:
    """Plain decimal with 12 significant digits (no exponent)."""
    return np.format_float_positional(
        float(x), precision=SIG_DIGITS, unique=False, fractional=False, trim="-"
    )


def quantize(a: np.ndarray) -> np.ndarray:
    """Round to what :func:`format_value` writes, so CSV round trips are exact."""
    flat = [float(format_value(v)) for v in np.asarray(a, dtype=float).ravel()]
    return np.array(flat, dtype=float).reshape(np.shape(a))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Series:
    unit: str
    variable: str
    values: np.ndarray
    differenced: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.ravel(self.values)))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced panel ``variable -> (unit, year)`` matrix.

    Parameters
    ----------
    units : sequence of str
        Unit identifiers in storage order.
    years : sequence of int
        Contiguous, strictly increasing years.
    data : mapping of str to ndarray
        One ``(len(units), len(years))`` array per variable, all finite.
    source : str
        ``"actual"``, ``"synthetic"`` or ``"simulated"``.
    """

    units: tuple
    years: tuple
    data: Mapping[str, np.ndarray]
    source: str = "actual"
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        units = tuple(str(u) for u in self.units)
        years = tuple(int(y) for y in self.years)
        if len(set(units)) != len(units):
            raise PanelError("duplicate unit identifiers")
        if len(years) == 0:
            raise PanelError("panel has no years")
        if any(b - a != 1 for a, b in zip(years, years[1:])):
            raise NonContiguousYears(f"years must increase in steps of 1: {years}")
        shape = (len(units), len(years))
        data = {}
        for name, arr in self.data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise PanelError(f"variable {name!r} has shape {arr.shape}, expected {shape}")
            bad = np.argwhere(~np.isfinite(arr))
            if len(bad):
                i, t = bad[0]
                raise MissingCell(units[i], years[t], name)
            data[str(name)] = _readonly(arr)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def variables(self) -> tuple:
        return tuple(self.data)

    @property
    def n_cells(self) -> int:
        return len(self.units) * len(self.years) * len(self.data)

    def __getitem__(self, variable: str) -> np.ndarray:
        try:
            return self.data[variable]
        except KeyError:
            raise PanelError(f"unknown variable {variable!r}") from None

    def unit_index(self, unit: str) -> int:
        try:
            return self.units.index(unit)
        except ValueError:
            raise PanelError(f"unknown unit {unit!r}") from None

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise PanelError(f"year {year} outside panel {self.years[0]}-{self.years[-1]}") from None

    def series(self, unit: str, variable: str) -> Series:
        return Series(unit, variable, self[variable][self.unit_index(unit)])

    def subset(self, units: Sequence[str] | None = None, years: Iterable[int] | None = None,
               variables: Sequence[str] | None = None) -> "PanelDataset":
        ui = [self.unit_index(u) for u in units] if units is not None else list(range(len(self.units)))
        yrs = list(years) if years is not None else list(self.years)
        ti = [self.year_index(y) for y in yrs]
        names = list(variables) if variables is not None else list(self.data)
        data = {v: self[v][np.ix_(ui, ti)] for v in names}
        return PanelDataset([self.units[i] for i in ui], yrs, data, self.source, self.metadata)

    def with_data(self, data: Mapping[str, np.ndarray], **kwargs) -> "PanelDataset":
        merged = dict(self.data)
        merged.update(data)
        opts = dict(source=self.source, metadata=self.metadata)
        opts.update(kwargs)
        return PanelDataset(self.units, self.years, merged, **opts)

    def equals(self, other: "PanelDataset") -> bool:
        """Exact cell-by-cell equality (labels, order and values)."""
        return (
            self.units == other.units
            and self.years == other.years
            and self.variables == other.variables
            and all(np.array_equal(self[v], other[v]) for v in self.variables)
        )

    def require_positive(self, variables: Iterable[str]) -> None:
        for v in variables:
            arr = self[v]
            bad = np.argwhere(arr <= 0)
            if len(bad):
                i, t = bad[0]
                raise NonPositiveValue(
                    f"{v} must be positive for a log transform: unit={self.units[i]} "
                    f"year={self.years[t]} value={arr[i, t]}"
                )


def stack_panels(panels: Sequence[PanelDataset], source: str = "actual") -> PanelDataset:
    """Concatenate panels with disjoint units and identical years/variables."""
    first = panels[0]
    for p in panels[1:]:
        if p.years != first.years or p.variables != first.variables:
            raise PanelError("panels to stack must share years and variables")
    units = [u for p in panels for u in p.units]
    data = {v: np.vstack([p[v] for p in panels]) for v in first.variables}
    return PanelDataset(units, first.years, data, source)


# ---------------------------------------------------------------------------
# CSV I/O


def _parse_float(text: str, row: int) -> float:
    try:
        x = float(text)
    except (TypeError, ValueError):
        raise NonNumericValue(row, repr(text)) from None
    if not math.isfinite(x):
        raise NonNumericValue(row, repr(text))
    return x


def _parse_year(text: str, row: int) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise NonNumericValue(row, f"year {text!r}") from None


def _assemble(cells: dict, units: list, variables: list, source: str) -> PanelDataset:
    years = sorted({y for (_, y, _) in cells})
    if not years:
        raise PanelError("no data rows")
    if any(b - a != 1 for a, b in zip(years, years[1:])):
        raise NonContiguousYears(f"years are not contiguous: {years}")
    data = {}
    for v in variables:
        arr = np.empty((len(units), len(years)))
        for i, u in enumerate(units):
            for t, y in enumerate(years):
                try:
                    arr[i, t] = cells[(u, y, v)]
                except KeyError:
                    raise MissingCell(u, y, v) from None
        data[v] = arr
    return PanelDataset(units, years, data, source)


def load_panel(path: str | Path, format: str = "long_csv", source: str = "actual") -> PanelDataset:
    """Read a balanced panel from a long or wide CSV file.

    Long files have the header ``unit,year,variable,value``; wide files
    ``unit,year,<var>,<var>...``. Unbalanced input raises :class:`MissingCell`.
    """
    path = Path(path)
    if format not in ("long_csv", "wide_csv"):
        raise PanelError(f"unknown panel format {format!r}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        cells: dict = {}
        units: list = []
        variables: list = []
        if format == "long_csv":
            if header != LONG_HEADER:
                raise PanelError(f"{path}: long header must be {','.join(LONG_HEADER)}, got {header}")
            for k, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 4:
                    raise NonNumericValue(k, f"expected 4 fields, got {len(row)}")
                u, y, v, x = (s.strip() for s in row)
                key = (u, _parse_year(y, k), v)
                if key in cells:
                    raise DuplicateCell(*key)
                cells[key] = _parse_float(x, k)
                if u not in units:
                    units.append(u)
                if v not in variables:
                    variables.append(v)
        else:
            if header[:2] != ["unit", "year"] or len(header) < 3:
                raise PanelError(f"{path}: wide header must start with unit,year and name variables")
            variables = header[2:]
            if len(set(variables)) != len(variables):
                raise PanelError(f"{path}: repeated variable columns")
            seen = set()
            for k, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise NonNumericValue(k, f"expected {len(header)} fields, got {len(row)}")
                u, y = row[0].strip(), _parse_year(row[1].strip(), k)
                if (u, y) in seen:
                    raise DuplicateCell(u, y, "*")
                seen.add((u, y))
                if u not in units:
                    units.append(u)
                for v, x in zip(variables, row[2:]):
                    x = x.strip()
                    if x == "":
                        raise MissingCell(u, y, v)
                    cells[(u, y, v)] = _parse_float(x, k)
    return _assemble(cells, units, variables, source)


def write_panel(panel: PanelDataset, path: str | Path, format: str = "long_csv",
                comment: str | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        if format == "long_csv":
            w.writerow(LONG_HEADER)
            for i, u in enumerate(panel.units):
                for t, y in enumerate(panel.years):
                    for v in panel.variables:
                        w.writerow([u, y, v, format_value(panel[v][i, t])])
        elif format == "wide_csv":
            w.writerow(["unit", "year", *panel.variables])
            for i, u in enumerate(panel.units):
                for t, y in enumerate(panel.years):
                    w.writerow([u, y, *(format_value(panel[v][i, t]) for v in panel.variables)])
        else:
            raise PanelError(f"unknown panel format {format!r}")


# ---------------------------------------------------------------------------
# transforms


class TransformKind(str, Enum):
    LOG = "log"
    FIRST_DIFFERENCE = "first_difference"
    QUADRATIC_DETREND = "quadratic_detrend"
    PER_CAPITA_PASSTHROUGH = "per_capita_passthrough"


@dataclass(frozen=True)
class TransformSpec:
    kind: TransformKind
    variables: tuple = ()


def first_differences(s: Series) -> Series:
    if len(s) < 2:
        raise TooShort(f"first difference needs at least 2 values, got {len(s)}")
    return Series(s.unit, s.variable, np.diff(s.values), differenced=True)


def cumulate(d: Series, first_value: float) -> Series:
    """Inverse of :func:`first_differences` given the first level."""
    return Series(d.unit, d.variable, first_value + np.concatenate([[0.0], np.cumsum(d.values)]))


def detrend_quadratic(s: Series) -> Series:
    """Residuals from an OLS fit on ``(1, t, t**2)`` with ``t = 0..T-1``."""
    y = s.values
    T = len(y)
    if T < 4:
        raise TooShort(f"quadratic detrending needs at least 4 observations, got {T}")
    t = np.arange(T, dtype=float)
    X = np.column_stack([np.ones(T), t, t * t])
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficientTrend("trend regressors are collinear")
    resid = y - q @ (q.T @ y)
    return Series(s.unit, s.variable, resid, s.differenced)


def log_panel(panel: PanelDataset, variables: Iterable[str] | None = None) -> PanelDataset:
    names = list(variables) if variables is not None else list(panel.variables)
    panel.require_positive(names)
    return PanelDataset(panel.units, panel.years, {v: np.log(panel[v]) for v in names},
                        panel.source, panel.metadata)


def apply_transform(panel: PanelDataset, spec: TransformSpec) -> PanelDataset:
    """Apply ``spec`` to every unit's series of the target variables.

    First differencing drops the first year; the remaining transforms keep
    the year index.
    """
    names = list(spec.variables) or list(panel.variables)
    kind = TransformKind(spec.kind)
    if kind is TransformKind.PER_CAPITA_PASSTHROUGH:
        return panel.subset(variables=names)
    if kind is TransformKind.LOG:
        return log_panel(panel, names)
    if kind is TransformKind.FIRST_DIFFERENCE:
        if len(panel.years) < 2:
            raise TooShort("first difference needs at least 2 years")
        return PanelDataset(panel.units, panel.years[1:], {v: np.diff(panel[v], axis=1) for v in names},
                            panel.source, panel.metadata)
    out = {}
    for v in names:
        out[v] = np.vstack([detrend_quadratic(Series(u, v, panel[v][i])).values
                            for i, u in enumerate(panel.units)])
    return PanelDataset(panel.units, panel.years, out, panel.source, panel.metadata)
