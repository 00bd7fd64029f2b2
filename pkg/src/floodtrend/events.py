"""Damaging-flood event catalog: parsing, validation and summary counts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

FIRST_YEAR = 1870
LAST_YEAR = 2016

FLOOD_TYPES = ("flash", "river", "coastal", "compound")
LOSS_VARIABLES = ("area_km2", "fatalities", "persons_affected", "losses_eur2011")

HEADER = (
    "id", "country", "year", "month", "type", "regions", "area_km2",
    "fatalities", "fatalities_positive_unknown", "persons_affected",
    "losses_eur2011",
)

PERSONS_PER_HOUSEHOLD = 4


class CatalogSchemaError(ValueError):
    """The header row does not match the event CSV dialect."""


@dataclass(frozen=True)
class FloodEvent:
    id: str
    country: str
    year: int
    month: int
    flood_type: str
    regions: tuple[str, ...]
    area_km2: float | None = None
    fatalities: int | None = None
    fatalities_positive_unknown: bool = False
    persons_affected: int | None = None
    losses_eur2011: float | None = None

    def available(self) -> dict[str, bool]:
        return {name: getattr(self, name) is not None for name in LOSS_VARIABLES}


@dataclass(frozen=True)
class RowError:
    row: int
    event_id: str
    rule: str

    def __str__(self):
        return f"row {self.row} ({self.event_id or '?'}): {self.rule}"


@dataclass
class CatalogSummary:
    n_events: int
    by_type: dict[str, int]
    available: dict[str, int]
    zero_fatality_events: int
    positive_unknown_fatalities: int
    mean_regions: float | None
    mean_undefined: bool = field(default=False)


def households_to_persons(houses: int) -> int:
    """Persons affected when only the number of houses is reported."""
    if houses < 0:
        raise ValueError("houses must be nonnegative")
    return PERSONS_PER_HOUSEHOLD * int(houses)


def _parse_real(text: str, name: str) -> float | None:
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"{name} is not numeric: {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a nonnegative finite number")
    return value


def _parse_count(text: str, name: str) -> int | None:
    value = _parse_real(text, name)
    if value is None:
        return None
    if value != int(value):
        raise ValueError(f"{name} must be an integer")
    return int(value)


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"{name} is not an integer: {text!r}") from None


def check_event(ev: FloodEvent) -> str | None:
    """Return the violated inclusion rule, or None if the event is valid."""
    if not ev.id:
        return "missing id"
    if len(ev.country) != 2 or not ev.country.isalpha():
        return "country must be a 2-letter code"
    if not FIRST_YEAR <= ev.year <= LAST_YEAR:
        return f"year outside [{FIRST_YEAR}, {LAST_YEAR}]"
    if not 1 <= ev.month <= 12:
        return "month outside 1-12"
    if ev.flood_type not in FLOOD_TYPES:
        return f"unknown flood type {ev.flood_type!r}"
    if not ev.regions or any(not r for r in ev.regions):
        return "empty region list"
    others = [ev.area_km2, ev.persons_affected, ev.losses_eur2011]
    has_other = any(v is not None for v in others)
    if ev.fatalities is None and not has_other and not ev.fatalities_positive_unknown:
        return "no damage statistic"
    if ev.fatalities == 0 and not ev.fatalities_positive_unknown and not has_other:
        return "zero fatalities require another statistic"
    return None


def _event_from_row(row: dict[str, str]) -> FloodEvent:
    flag = row["fatalities_positive_unknown"]
    if flag not in ("0", "1", ""):
        raise ValueError("fatalities_positive_unknown must be 0 or 1")
    regions = tuple(r.strip() for r in row["regions"].split(";")) if row["regions"] else ()
    return FloodEvent(
        id=row["id"].strip(),
        country=row["country"].strip(),
        year=_parse_int(row["year"], "year"),
        month=_parse_int(row["month"], "month"),
        flood_type=row["type"].strip(),
        regions=regions,
        area_km2=_parse_real(row["area_km2"], "area_km2"),
        fatalities=_parse_count(row["fatalities"], "fatalities"),
        fatalities_positive_unknown=flag == "1",
        persons_affected=_parse_count(row["persons_affected"], "persons_affected"),
        losses_eur2011=_parse_real(row["losses_eur2011"], "losses_eur2011"),
    )


def parse_catalog(source: TextIO | str) -> tuple[list[FloodEvent], list[RowError]]:
    """Parse an event CSV stream.

    Rows failing validation are not raised; they are returned as
    :class:`RowError` diagnostics next to the accepted events. Row numbers
    count the header as row 1.

    Raises
    ------
    CatalogSchemaError
        If the header differs from :data:`HEADER`.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CatalogSchemaError("empty catalog, header missing") from None
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if tuple(h.strip() for h in header) != HEADER:
        raise CatalogSchemaError(f"header mismatch: expected {','.join(HEADER)}")

    events, errors = [], []
    for lineno, values in enumerate(reader, start=2):
        if not values or all(v == "" for v in values):
            continue
        if len(values) != len(HEADER):
            errors.append(RowError(lineno, values[0] if values else "",
                                   f"expected {len(HEADER)} fields, got {len(values)}"))
            continue
        row = dict(zip(HEADER, values))
        try:
            ev = _event_from_row(row)
        except ValueError as exc:
            errors.append(RowError(lineno, row["id"], str(exc)))
            continue
        rule = check_event(ev)
        if rule is not None:
            errors.append(RowError(lineno, ev.id, rule))
            continue
        events.append(ev)
    return events, errors


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def event_row(ev: FloodEvent) -> list[str]:
    return [
        ev.id, ev.country, str(ev.year), str(ev.month), ev.flood_type,
        ";".join(ev.regions), _fmt(ev.area_km2), _fmt(ev.fatalities),
        "1" if ev.fatalities_positive_unknown else "0",
        _fmt(ev.persons_affected), _fmt(ev.losses_eur2011),
    ]


def write_catalog(events: Iterable[FloodEvent], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(HEADER)
    for ev in events:
        writer.writerow(event_row(ev))


def summarize(events: Iterable[FloodEvent]) -> CatalogSummary:
    events = list(events)
    by_type = {t: 0 for t in FLOOD_TYPES}
    available = {v: 0 for v in LOSS_VARIABLES}
    zero = unknown = 0
    n_regions = 0
    for ev in events:
        by_type[ev.flood_type] += 1
        for name in LOSS_VARIABLES:
            if getattr(ev, name) is not None:
                available[name] += 1
        if ev.fatalities == 0:
            zero += 1
        if ev.fatalities_positive_unknown:
            unknown += 1
        n_regions += len(ev.regions)
    n = len(events)
    return CatalogSummary(
        n_events=n,
        by_type=by_type,
        available=available,
        zero_fatality_events=zero,
        positive_unknown_fatalities=unknown,
        mean_regions=n_regions / n if n else None,
        mean_undefined=n == 0,
    )
