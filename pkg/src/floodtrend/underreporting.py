"""Severity quintiles and the correction for historical underreporting."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .series import AnnualSeries

LOG = logging.getLogger(__name__)

SEVERITY_VARIABLES = ("area", "fatalities", "affected", "losses_wealth")
PERIODS = ((1870, 1899), (1900, 1929), (1930, 1959), (1960, 1989))
REFERENCE = (1990, 2016)
N_QUINTILES = 5


class MissingValueError(ValueError):
    pass


@dataclass
class SeverityClassification:
    event_ids: list[str]
    average_rank: np.ndarray   # 1 = most severe
    quintile: np.ndarray       # 1..5, 5 = most severe

    def of(self, event_id: str) -> int:
        return int(self.quintile[self.event_ids.index(event_id)])


def classify_severity(event_ids, values: dict[str, list]) -> SeverityClassification:
    """Average of per-variable descending ranks, cut into five near-equal groups.

    Parameters
    ----------
    event_ids : sequence of str
    values : variable -> per-event value (aligned with `event_ids`), for
        each of the four severity variables.
    """
    ids = list(event_ids)
    n = len(ids)
    if n < N_QUINTILES:
        raise ValueError(f"need at least {N_QUINTILES} events, got {n}")
    ranks = np.zeros(n)
    for var in SEVERITY_VARIABLES:
        col = values[var]
        for i, x in enumerate(col):
            if x is None or not np.isfinite(x):
                raise MissingValueError(f"{ids[i]}: missing {var}")
        ranks += stats.rankdata(-np.asarray(col, dtype=np.float64))
    avg = ranks / len(SEVERITY_VARIABLES)
    # least severe first; ties keep input order
    order = np.lexsort((-np.arange(n), avg))[::-1]
    quintile = np.empty(n, dtype=np.int64)
    for q, chunk in enumerate(np.array_split(order, N_QUINTILES), start=1):
        quintile[chunk] = q
    return SeverityClassification(ids, avg, quintile)


def quintile_counts(classification, years, period) -> np.ndarray:
    """Event counts per quintile (index 0 = quintile 1) within a year span."""
    years = np.asarray(years)
    sel = (years >= period[0]) & (years <= period[1])
    return np.bincount(classification.quintile[sel] - 1, minlength=N_QUINTILES).astype(float)


def reference_ratios(classification, years, period=REFERENCE) -> tuple[float, ...]:
    """Counts of quintiles 4, 3, 2, 1 divided by the top-quintile count."""
    n = quintile_counts(classification, years, period)
    if n[4] == 0:
        raise ValueError(f"no top-quintile events in {period[0]}-{period[1]}")
    return tuple(float(n[q] / n[4]) for q in (3, 2, 1, 0))


def _ratio_for(ratios, q):
    """Reference ratio of quintile q (1..4) given ratios ordered q4..q1."""
    return ratios[4 - q]


@dataclass
class CorrectionFactors:
    factors: dict[tuple[int, int], float]           # (period start, quintile) -> f
    flagged: set = field(default_factory=set)       # cells with no reported events
    top_counts: dict[int, float] = field(default_factory=dict)
    ratios: tuple = ()

    def factor(self, year: int, quintile: int) -> float:
        if quintile == N_QUINTILES:
            return 1.0
        for start, end in PERIODS:
            if start <= year <= end:
                return self.factors[(start, quintile)]
        return 1.0

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("period", "quintile", "factor", "flag"))
            for start, end in PERIODS:
                for q in range(1, N_QUINTILES + 1):
                    f = 1.0 if q == N_QUINTILES else self.factors[(start, q)]
                    flag = "no_events" if (start, q) in self.flagged else ""
                    w.writerow((f"{start}-{end}", q, repr(float(f)), flag))


def correction_factors(classification, years, ratios, periods=PERIODS) -> CorrectionFactors:
    """``f = max(1, r_ref * N_top / N_q)`` per period and lower quintile.

    A quintile with no events in a period cannot be scaled; it is flagged
    and its corrected count is set to ``r_ref * N_top`` directly.
    """
    out, flagged, tops = {}, set(), {}
    for start, end in periods:
        n = quintile_counts(classification, years, (start, end))
        if n[4] == 0:
            raise ValueError(f"no top-quintile events in {start}-{end}")
        tops[start] = float(n[4])
        for q in range(1, N_QUINTILES):
            r = _ratio_for(ratios, q)
            if n[q - 1] == 0:
                out[(start, q)] = 1.0
                if r > 0:
                    flagged.add((start, q))
                    LOG.warning("period %d quintile %d has no events; count set directly",
                                start, q)
                continue
            out[(start, q)] = float(max(1.0, r * n[4] / n[q - 1]))
    return CorrectionFactors(out, flagged, tops, tuple(ratios))


def event_weights(classification, years, factors: CorrectionFactors) -> np.ndarray:
    """Multiplier applied to every event's count and consequences."""
    years = np.asarray(years)
    return np.array([factors.factor(int(y), int(q))
                     for y, q in zip(years, classification.quintile)])


def apply_correction(series_by_quintile: dict[int, AnnualSeries], factors: CorrectionFactors,
                     counts: bool = True) -> dict[int, AnnualSeries]:
    """Scale each lower quintile's years in an adjusted period by its factor.

    For flagged cells of a count series the empty quintile receives
    ``r_ref`` times the top-quintile counts of the same years.
    """
    out = {}
    top = series_by_quintile[N_QUINTILES]
    for q, s in series_by_quintile.items():
        vals = s.values.copy()
        if q != N_QUINTILES:
            for start, end in PERIODS:
                lo, hi = max(start, s.start_year), min(end, s.end_year)
                if lo > hi:
                    continue
                i, j = lo - s.start_year, hi - s.start_year + 1
                if (start, q) in factors.flagged:
                    if counts:
                        vals[i:j] = _ratio_for(factors.ratios, q) * top.values[i:j]
                else:
                    vals[i:j] = vals[i:j] * factors.factors[(start, q)]
        out[q] = AnnualSeries(s.start_year, s.end_year, vals, s.variable,
                              "underreporting_corrected", s.units)
    return out


def flagged_extra_counts(factors: CorrectionFactors, years, classification,
                         start_year: int, end_year: int) -> np.ndarray:
    """Annual event counts added for flagged (period, quintile) cells."""
    years = np.asarray(years)
    extra = np.zeros(end_year - start_year + 1)
    top = classification.quintile == N_QUINTILES
    for start, q in factors.flagged:
        r = _ratio_for(factors.ratios, q)
        sel = top & (years >= start) & (years <= start + 29)
        for y in years[sel]:
            if start_year <= y <= end_year:
                extra[y - start_year] += r
    return extra


def write_classification(c: SeverityClassification, years, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("id", "year", "average_rank", "quintile"))
        for eid, y, r, q in zip(c.event_ids, years, c.average_rank, c.quintile):
            w.writerow((eid, int(y), repr(float(r)), int(q)))
