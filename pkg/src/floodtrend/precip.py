"""Annual counts of extreme multi-day precipitation events."""
from __future__ import annotations

import numpy as np

from . import kernels
from .series import AnnualSeries

DURATIONS = (1, 2, 3, 5, 7)


class PrecipDataError(ValueError):
    pass


def _check_dates(dates) -> np.ndarray:
    dates = np.asarray(dates, dtype="datetime64[D]")
    if dates.size < 2:
        raise PrecipDataError("need at least two days of data")
    step = np.diff(dates).astype(np.int64)
    bad = np.flatnonzero(step != 1)
    if bad.size:
        gaps = [f"{dates[i]}..{dates[i + 1]}" for i in bad[:20]]
        raise PrecipDataError(f"dates are not consecutive days; gaps: {', '.join(gaps)}")
    return dates


def rolling_sums(x: np.ndarray, d: int) -> np.ndarray:
    """Sums over windows of `d` days, indexed by the window's last day."""
    c = np.concatenate(([0.0], np.cumsum(x, dtype=np.float64)))
    return c[d:] - c[:-d]


def cell_event_days(x: np.ndarray, d: int, n_years: int, return_period: float) -> np.ndarray:
    """Day indices (window end) of the declustered threshold exceedances of one cell."""
    s = rolling_sums(x, d)
    m = int(n_years // return_period)
    if m < 1:
        raise PrecipDataError("record shorter than the return period")
    threshold = np.partition(s, s.size - m)[s.size - m]
    idx = np.flatnonzero(s >= threshold)
    if np.all(s == s[0]):
        return np.empty(0, dtype=np.int64)   # no extremes in a constant series
    peaks = kernels.decluster_peaks(idx, s[idx], d)
    return peaks + (d - 1)


def extreme_precip_counts(precip, dates, durations=DURATIONS,
                          return_period: float = 5.0) -> dict[int, AnnualSeries]:
    """Yearly number of extreme events summed over grid cells, per duration.

    Parameters
    ----------
    precip : array (n_cells, n_days) of daily totals.
    dates : n_days consecutive dates.
    durations : window lengths in days.
    return_period : years; the threshold is the m-th largest rolling sum
        with ``m = floor(n_years / return_period)``.

    Notes
    -----
    Exceeding windows whose end days are at most `d` apart are one event,
    dated by the end day of its largest window.
    """
    precip = np.atleast_2d(np.asarray(precip, dtype=np.float64))
    dates = _check_dates(dates)
    if precip.shape[1] != dates.size:
        raise PrecipDataError("precipitation and dates differ in length")
    nan_cells, nan_days = np.nonzero(~np.isfinite(precip))
    if nan_cells.size:
        where = [f"cell {c} on {dates[d]}" for c, d in zip(nan_cells[:20], nan_days[:20])]
        raise PrecipDataError(f"missing values: {', '.join(where)}")
    years = dates.astype("datetime64[Y]").astype(np.int64) + 1970
    first, last = int(years[0]), int(years[-1])
    n_years = last - first + 1
    if n_years < 2 * return_period:
        raise PrecipDataError(f"{n_years} years of data, need at least {2 * return_period:g}")
    out = {}
    for d in durations:
        counts = np.zeros(n_years)
        for cell in precip:
            days = cell_event_days(cell, d, n_years, return_period)
            np.add.at(counts, years[days] - first, 1.0)
        out[d] = AnnualSeries(first, last, counts, f"precip_{d}d_extremes", "reported", "count")
    return out
