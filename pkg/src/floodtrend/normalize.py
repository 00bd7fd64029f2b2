"""Normalization of reported losses to baseline-year exposure."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .events import HEADER, FloodEvent, event_row
from .exposure import Exposure, ExposureGrid, exposure_in

LOG = logging.getLogger(__name__)

EXPOSURE_KINDS = ("population", "gdp", "wealth")
# normalized variable -> (reported field, exposure kind)
NORMALIZED_VARIABLES = {
    "fatalities": ("fatalities", "population"),
    "persons_affected": ("persons_affected", "population"),
    "losses_by_gdp": ("losses_eur2011", "gdp"),
    "losses_by_wealth": ("losses_eur2011", "wealth"),
}


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Factors:
    population: float = 1.0
    gdp: float = 1.0
    wealth: float = 1.0

    def __getitem__(self, kind):
        return getattr(self, kind)


@dataclass(frozen=True)
class NormalizedRecord:
    event: FloodEvent
    factors: Factors
    fatalities: float | None
    persons_affected: float | None
    losses_by_gdp: float | None
    losses_by_wealth: float | None
    area_km2: float | None

    @property
    def event_id(self):
        return self.event.id

    def value(self, name: str) -> float | None:
        return getattr(self, name)


def _ratio(base: float, then: float, kind: str, event_id: str) -> float:
    if then > 0:
        return base / then
    if base > 0:
        raise NormalizationError(
            f"{event_id}: {kind} is zero in the event year but {base:g} at baseline")
    LOG.warning("%s: %s is zero in both years, factor set to 1", event_id, kind)
    return 1.0


def factors_from_exposure(baseline: Exposure, event_year: Exposure, event_id="") -> Factors:
    return Factors(**{k: _ratio(getattr(baseline, k), getattr(event_year, k), k, event_id)
                      for k in EXPOSURE_KINDS})


def normalization_factors(footprint, grid_event_year: ExposureGrid,
                          grid_baseline: ExposureGrid) -> Factors:
    """Baseline exposure over event-year exposure within the footprint."""
    if footprint.empty:
        raise NormalizationError(f"{footprint.event_id}: empty footprint")
    if grid_event_year.shape != grid_baseline.shape:
        raise NormalizationError("grids are not aligned")
    return factors_from_exposure(exposure_in(footprint, grid_baseline),
                                 exposure_in(footprint, grid_event_year), footprint.event_id)


def _scaled(value, factor):
    return None if value is None else float(value) * factor


def normalize(event: FloodEvent, factors: Factors) -> NormalizedRecord:
    """Scale person counts by the population factor and losses by GDP and wealth.

    Inundated area is passed through unchanged.
    """
    for kind in EXPOSURE_KINDS:
        f = factors[kind]
        if not (f > 0 and math.isfinite(f)):
            raise NormalizationError(f"{event.id}: invalid {kind} factor {f}")
    return NormalizedRecord(
        event=event,
        factors=factors,
        fatalities=_scaled(event.fatalities, factors.population),
        persons_affected=_scaled(event.persons_affected, factors.population),
        losses_by_gdp=_scaled(event.losses_eur2011, factors.gdp),
        losses_by_wealth=_scaled(event.losses_eur2011, factors.wealth),
        area_km2=event.area_km2,
    )


# relative-damage variable -> (record attribute, exposure kind or "area")
RELATIVE_VARIABLES = {
    "area": ("area_km2", "area"),
    "fatalities": ("fatalities", "population"),
    "affected": ("persons_affected", "population"),
    "losses_gdp": ("losses_by_gdp", "gdp"),
    "losses_wealth": ("losses_by_wealth", "wealth"),
}


def potential_exposure(baseline: Exposure, footprint_area_km2: float) -> dict[str, float]:
    """Denominators of the relative damages, per relative-damage variable."""
    return {
        "area": footprint_area_km2,
        "fatalities": baseline.population,
        "affected": baseline.population,
        "losses_gdp": baseline.gdp,
        "losses_wealth": baseline.wealth,
    }


def relative_damages(record: NormalizedRecord, baseline_exposure: Exposure,
                     footprint_area_km2: float) -> dict[str, float | None]:
    """Normalized losses divided by the footprint's potential exposure.

    A variable is None when it was not reported or its denominator is zero.
    """
    denom = potential_exposure(baseline_exposure, footprint_area_km2)
    out = {}
    for name, (attr, _) in RELATIVE_VARIABLES.items():
        value = getattr(record, attr)
        d = denom[name]
        out[name] = None if value is None or not d > 0 else float(value) / d
    return out


NORMALIZED_HEADER = HEADER + (
    "factor_population", "factor_gdp", "factor_wealth",
    "norm_fatalities", "norm_persons_affected", "norm_losses_by_gdp", "norm_losses_by_wealth",
)


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_normalized(records, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NORMALIZED_HEADER)
        for rec in records:
            f = rec.factors
            writer.writerow(event_row(rec.event) + [
                _fmt(f.population), _fmt(f.gdp), _fmt(f.wealth),
                _fmt(rec.fatalities), _fmt(rec.persons_affected),
                _fmt(rec.losses_by_gdp), _fmt(rec.losses_by_wealth)])
