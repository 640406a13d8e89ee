"""Country x year indicator panels: CSV ingestion, cleaning and pairwise alignment.

Panels are wide tables, one row per country and one column per calendar year::

    country,2008,2010,2012
    SVN,23.4,23.8,
    CZE,26.0,,26.1

An empty field is a missing observation. Missing cells are stored as NaN in an
immutable float array and are never imputed.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from kinex.errors import InsufficientDataError, NotFoundError, ParseError

_CODE_RE = re.compile(r"^[A-Z]{3}$")


class IndicatorKind(enum.Enum):
    """Which indicator a panel holds.

    Gini values are index points on a 0-100 scale; GDS values are percent of GDP.
    """

    GINI = "gini"
    GDS = "gds"


def validate_code(code: str) -> str:
    if not isinstance(code, str) or not _CODE_RE.match(code):
        raise ValueError(f"invalid country code {code!r}: expected 3 uppercase letters A-Z")
    return code


@dataclass(frozen=True)
class CleaningPolicy:
    drop_negative: bool = False
    min_overlap: int = 8

    def __post_init__(self):
        if self.min_overlap < 3:
            raise ValueError(f"min_overlap must be >= 3, got {self.min_overlap}")

    @classmethod
    def default_for(cls, indicator: IndicatorKind, **overrides) -> CleaningPolicy:
        """Default policy: negative values are dropped for savings, kept for Gini."""
        params = {"drop_negative": indicator is IndicatorKind.GDS}
        params.update(overrides)
        return cls(**params)


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """A countries x years grid of one indicator; NaN marks a missing cell."""

    indicator: IndicatorKind
    countries: tuple[str, ...]
    years: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        countries = tuple(validate_code(c) for c in self.countries)
        years = tuple(int(y) for y in self.years)
        if len(set(countries)) != len(countries):
            dupes = sorted({c for c in countries if countries.count(c) > 1})
            raise ValueError(f"duplicate country codes: {', '.join(dupes)}")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValueError("years must be strictly increasing")
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (len(countries), len(years)):
            raise ValueError(
                f"grid shape {values.shape} does not match "
                f"{len(countries)} countries x {len(years)} years"
            )
        if np.isinf(values).any():
            raise ValueError("panel values must be finite or missing")
        values.setflags(write=False)
        object.__setattr__(self, "countries", countries)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesPanel):
            return NotImplemented
        return (
            self.indicator is other.indicator
            and self.countries == other.countries
            and self.years == other.years
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    def index_of(self, code: str) -> int:
        try:
            return self.countries.index(code)
        except ValueError:
            raise NotFoundError(f"unknown country {code!r}") from None

    def row(self, code: str) -> np.ndarray:
        return self.values[self.index_of(code)]

    def column(self, year: int) -> np.ndarray:
        try:
            k = self.years.index(int(year))
        except ValueError:
            raise NotFoundError(
                f"year {year} not in panel (available: {', '.join(map(str, self.years))})"
            ) from None
        return self.values[:, k]

    def observed_years(self, code: str) -> tuple[int, ...]:
        row = self.row(code)
        return tuple(y for y, v in zip(self.years, row) if not math.isnan(v))

    def select(
        self,
        countries: Sequence[str] | None = None,
        first_year: int | None = None,
        last_year: int | None = None,
    ) -> TimeSeriesPanel:
        """Restrict the panel to a country subset and/or an inclusive year window."""
        if countries is None:
            rows = list(range(len(self.countries)))
        else:
            rows = [self.index_of(c) for c in countries]
        cols = [
            k
            for k, y in enumerate(self.years)
            if (first_year is None or y >= first_year) and (last_year is None or y <= last_year)
        ]
        return TimeSeriesPanel(
            self.indicator,
            tuple(self.countries[r] for r in rows),
            tuple(self.years[k] for k in cols),
            self.values[np.ix_(rows, cols)],
        )


def _parse_cell(raw: str, row_label: str, col_label: str, lineno: int) -> float:
    text = raw.strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        value = None
    if value is None or not math.isfinite(value):
        raise ParseError(
            f"line {lineno}: row {row_label}, column {col_label}: non-numeric value {raw!r}"
        )
    return value


def parse_panel_csv(source: str | TextIO, indicator: IndicatorKind) -> TimeSeriesPanel:
    """Parse a wide ``country,<year>,...`` CSV into a panel.

    ``source`` is either the CSV text or an open text stream. Errors name the
    offending row and column.
    """
    text = source if isinstance(source, str) else source.read()
    if text.startswith("﻿"):
        text = text[1:]
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty input: expected header 'country,<year>,...'")

    header = [h.strip() for h in rows[0]]
    if header[0].lower() != "country" or len(header) < 2:
        raise ParseError(f"malformed header {rows[0]!r}: expected 'country,<year>,...'")
    years = []
    for col, h in enumerate(header[1:], start=2):
        if not re.fullmatch(r"-?\d+", h):
            raise ParseError(f"malformed header: column {col} is {h!r}, expected an integer year")
        years.append(int(h))
    if any(b <= a for a, b in zip(years, years[1:])):
        raise ParseError("malformed header: years must be strictly increasing")

    codes: list[str] = []
    grid: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        code = row[0].strip()
        if not _CODE_RE.match(code):
            raise ParseError(f"line {lineno}: invalid country code {code!r}")
        if code in codes:
            raise ParseError(f"line {lineno}: duplicate country code {code}")
        cells = [_parse_cell(v, code, str(y), lineno) for v, y in zip(row[1:], years)]
        if len(row) != len(header):
            raise ParseError(
                f"line {lineno}: row {code} has {len(row)} fields, header has {len(header)}"
            )
        grid.append(cells)
        codes.append(code)

    values = np.array(grid, dtype=float).reshape(len(codes), len(years))
    return TimeSeriesPanel(indicator, tuple(codes), tuple(years), values)


def format_number(value: float) -> str:
    """Shortest decimal string that round-trips to the same double; '' for missing."""
    if math.isnan(value):
        return ""
    return repr(float(value))


def panel_to_csv(panel: TimeSeriesPanel) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["country", *map(str, panel.years)])
    for code, row in zip(panel.countries, panel.values):
        writer.writerow([code, *(format_number(v) for v in row)])
    return buf.getvalue()


def clean_panel(panel: TimeSeriesPanel, policy: CleaningPolicy) -> TimeSeriesPanel:
    """Blank out negative cells when the policy asks for it. Never fails."""
    if not policy.drop_negative:
        return panel
    values = np.array(panel.values)
    values[values < 0] = np.nan
    return TimeSeriesPanel(panel.indicator, panel.countries, panel.years, values)


def _overlap_mask(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return ~(np.isnan(u) | np.isnan(v))


def overlap_years(panel: TimeSeriesPanel, a: str, b: str) -> tuple[int, ...]:
    mask = _overlap_mask(panel.row(a), panel.row(b))
    return tuple(y for y, m in zip(panel.years, mask) if m)


def _require_overlap(n: int, label: str, policy: CleaningPolicy) -> None:
    if n < policy.min_overlap:
        raise InsufficientDataError(
            f"{label}: {n} common non-missing years, need at least {policy.min_overlap}"
        )


def align_pair(
    panel: TimeSeriesPanel, a: str, b: str, policy: CleaningPolicy
) -> tuple[np.ndarray, np.ndarray]:
    """Series of countries ``a`` and ``b`` restricted to years where both are observed."""
    u, v = panel.row(a), panel.row(b)
    mask = _overlap_mask(u, v)
    _require_overlap(int(mask.sum()), f"pair {a}-{b}", policy)
    return u[mask].copy(), v[mask].copy()


def align_panels(
    first: TimeSeriesPanel, second: TimeSeriesPanel, code: str, policy: CleaningPolicy
) -> tuple[tuple[int, ...], np.ndarray, np.ndarray]:
    """One country's series from two panels, on the years observed in both.

    Returns ``(years, first_values, second_values)``.
    """
    years = sorted(set(first.years) & set(second.years))
    u = np.array([first.values[first.index_of(code), first.years.index(y)] for y in years])
    v = np.array([second.values[second.index_of(code), second.years.index(y)] for y in years])
    mask = _overlap_mask(u, v) if years else np.zeros(0, dtype=bool)
    _require_overlap(
        int(mask.sum()), f"{code} ({first.indicator.value} vs {second.indicator.value})", policy
    )
    return tuple(y for y, m in zip(years, mask) if m), u[mask], v[mask]


def read_panel(path, indicator: IndicatorKind) -> TimeSeriesPanel:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_panel_csv(fh, indicator)


def parse_code_list(items: Iterable[str]) -> list[str]:
    return [validate_code(c.strip().upper()) for c in items if c.strip()]
