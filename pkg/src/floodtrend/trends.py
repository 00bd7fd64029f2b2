"""Annual aggregation, Poisson trends and Monte Carlo significance."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import kernels
from .events import FIRST_YEAR, LAST_YEAR
from .series import STAGES, AnnualSeries
from .streams import stream

LOG = logging.getLogger(__name__)

VARIABLES = ("events", "area", "fatalities", "affected", "losses", "losses_gdp",
             "losses_wealth")
# exposure kind whose uncertainty applies to a normalized variable
EXPOSURE_KIND = {"fatalities": "population", "affected": "population",
                 "losses_gdp": "gdp", "losses_wealth": "wealth"}
UNITS = {"events": "count", "area": "km2", "fatalities": "persons", "affected": "persons",
         "losses": "EUR2011", "losses_gdp": "EUR2011", "losses_wealth": "EUR2011"}
BLOCK = 1000   # replicates per keyed random block


class TrendError(RuntimeError):
    pass


class DegenerateSeriesError(TrendError):
    pass


# ------------------------------------------------------------ aggregation

@dataclass
class LossTable:
    """Per-event values of every variable at every adjustment stage.

    ``columns[(stage, variable)]`` is aligned with `event_ids`; NaN marks a
    value that is not available and contributes nothing to annual sums.
    """
    event_ids: list[str]
    years: np.ndarray
    columns: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    # (event id, variable) -> conditional samples of a gap-filled value
    filled_samples: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=np.int64)

    def column(self, stage: str, variable: str) -> np.ndarray:
        if stage not in STAGES:
            raise KeyError(f"unknown stage {stage!r}")
        if variable not in VARIABLES:
            raise KeyError(f"unknown variable {variable!r}")
        try:
            return self.columns[(stage, variable)]
        except KeyError:
            raise KeyError(f"no {variable!r} values at stage {stage!r}") from None

    def set(self, stage, variable, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.years.shape:
            raise ValueError("column length differs from the event count")
        self.columns[(stage, variable)] = values


def aggregate_annual(table: LossTable, variable: str, stage: str,
                     period=(FIRST_YEAR, LAST_YEAR)) -> AnnualSeries:
    """Yearly sums of one column; years without events are 0."""
    start, end = period
    if start < FIRST_YEAR or end > LAST_YEAR or end < start:
        raise ValueError(f"period {start}-{end} outside {FIRST_YEAR}-{LAST_YEAR}")
    vals = table.column(stage, variable)
    keep = np.isfinite(vals)
    idx = table.years[keep] - start
    out = kernels.scatter_annual(idx[None, :], vals[keep], end - start + 1)[0]
    return AnnualSeries(start, end, out, variable, stage, UNITS[variable])


# ----------------------------------------------------------------- trends

@dataclass
class TrendResult:
    variable: str
    stage: str
    start_year: int
    end_year: int
    a: float
    b: float
    se_b: float = math.nan
    significant: bool | None = None
    mc_p: float = math.nan
    mc_replicates: int = 0
    ci_low: float = math.nan
    ci_high: float = math.nan
    band_low: float = math.nan
    band_high: float = math.nan
    t_significant: bool | None = None

    @property
    def rate_percent_per_year(self) -> float:
        return rate_from_slope(self.b)


def rate_from_slope(b):
    return 100.0 * np.expm1(b)


def _newton_trace(y, x, maxiter=100):
    """Re-run the Newton iteration in plain numpy, keeping every iterate."""
    scale = y.mean()
    xc = x - x.mean()
    yy = y / scale
    al = be = 0.0
    trace = []
    for _ in range(maxiter):
        mu = np.exp(al + be * xc)
        g = np.array([np.sum(yy - mu), np.sum((yy - mu) * xc)])
        h = np.array([[mu.sum(), (mu * xc).sum()], [(mu * xc).sum(), (mu * xc * xc).sum()]])
        d = np.linalg.solve(h, g)
        al, be = al + d[0], be + d[1]
        trace.append((al, be, float(np.hypot(*g))))
    return trace


def poisson_trend(series: AnnualSeries) -> TrendResult:
    """Poisson log-linear trend ``log E[y_t] = a + b (t - start)``."""
    y = series.values
    x = np.arange(len(y), dtype=np.float64)
    if np.count_nonzero(y) < 2:
        raise DegenerateSeriesError(
            f"degenerate series: {series.variable}/{series.stage} has fewer than two nonzero years")
    a, b, it, status = kernels.poisson_fit_batch(y[None, :], x)
    if status[0] != kernels.STATUS_OK:
        trace = _newton_trace(y, x)[-5:]
        raise TrendError(f"Newton iteration did not converge; last iterates (a, b, |g|): {trace}")
    res = TrendResult(series.variable, series.stage, series.start_year, series.end_year,
                      float(a[0]), float(b[0]))
    res.se_b = quasi_poisson_se(y, x, res.a, res.b)
    return res


def quasi_poisson_se(y, x, a, b) -> float:
    """Standard error of the slope with Pearson-estimated dispersion."""
    mu = np.exp(a + b * x)
    T = len(y)
    info = np.array([[mu.sum(), (mu * x).sum()], [(mu * x).sum(), (mu * x * x).sum()]])
    cov = np.linalg.inv(info)
    phi = np.sum((y - mu) ** 2 / mu) / max(T - 2, 1)
    return float(math.sqrt(max(phi, 0.0) * cov[1, 1]))


def t_test(series: AnnualSeries, alpha=0.05) -> tuple[TrendResult, bool]:
    res = poisson_trend(series)
    if res.se_b > 0:
        t = res.b / res.se_b
    else:
        t = 0.0 if res.b == 0 else math.copysign(math.inf, res.b)
    crit = stats.t.ppf(1 - alpha / 2, len(series) - 2)
    return res, bool(abs(t) > crit)


def t_test_check(series: AnnualSeries, mc_result: TrendResult, alpha=0.05) -> bool:
    """Whether the Wald t-test verdict agrees with the Monte Carlo verdict."""
    _, sig = t_test(series, alpha)
    mc_result.t_significant = sig
    return sig == bool(mc_result.significant)


# --------------------------------------------------- Monte Carlo machinery

def _blocks(replicates: int):
    return [(k, min(BLOCK, replicates - k * BLOCK)) for k in range(-(-replicates // BLOCK))]


def random_years(seed: int, block: int, size: int, n_events: int, interval) -> np.ndarray:
    """Uniform integer years for one block of replicates."""
    rng = stream(seed, "years", block)
    return rng.integers(interval[0], interval[1] + 1, size=(size, n_events))


def _fit_rates(Y, x):
    a, b, _, status = kernels.poisson_fit_batch(Y, x)
    ok = status == kernels.STATUS_OK
    return rate_from_slope(b), ok


def _decide(obs_rate, rates, two_sided):
    lo, hi = np.percentile(rates, [2.5, 97.5])
    if two_sided:
        sig = obs_rate < lo or obs_rate > hi
        p = min(1.0, 2 * min(np.mean(rates >= obs_rate), np.mean(rates <= obs_rate)))
    elif obs_rate >= 0:
        sig = obs_rate > np.percentile(rates, 95)
        p = float(np.mean(rates >= obs_rate))
    else:
        sig = obs_rate < np.percentile(rates, 5)
        p = float(np.mean(rates <= obs_rate))
    return bool(sig), float(p), float(lo), float(hi)


def _run_blocks(fn, replicates, workers):
    blocks = _blocks(replicates)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, blocks))
    else:
        parts = [fn(b) for b in blocks]
    return [np.concatenate(p) for p in zip(*parts)]


def mc_significance(table: LossTable, variable: str, stage: str, period,
                    replicates: int = 10_000, seed: int = 0, two_sided: bool = True,
                    interval=None, workers: int = 1, max_fail: float = 0.01) -> TrendResult:
    """Year-randomization test of the Poisson trend.

    Every event in the period gets an independent uniform year from
    `interval` (the analysis period by default) in each replicate.
    """
    return _mc(table, variable, stage, period, replicates, seed, two_sided, interval,
               workers, max_fail, sampler=None, with_gaps=False)


def mc_significance_normalized(table: LossTable, variable: str, stage: str, period,
                               sampler: "ExposureSampler | None", replicates: int = 10_000,
                               seed: int = 0, two_sided: bool = True, interval=None,
                               workers: int = 1, max_fail: float = 0.01) -> TrendResult:
    """Year randomization on top of exposure and gap-fill uncertainty.

    Each replicate multiplies every event's value by an exposure draw
    (centred on the point estimate) and replaces each gap-filled value by
    one of its conditional samples before the years are reassigned. The
    same per-event draws with the true years give the uncertainty band.
    """
    return _mc(table, variable, stage, period, replicates, seed, two_sided, interval,
               workers, max_fail, sampler=sampler, with_gaps=stage in
               ("gap_filled", "underreporting_corrected"))


def _mc(table, variable, stage, period, replicates, seed, two_sided, interval, workers,
        max_fail, sampler, with_gaps):
    if replicates < 1:
        raise ValueError("replicates must be positive")
    start, end = period
    interval = (start, end) if interval is None else interval
    observed = poisson_trend(aggregate_annual(table, variable, stage, period))
    vals = table.column(stage, variable)
    sel = np.flatnonzero(np.isfinite(vals) & (table.years >= start) & (table.years <= end))
    base = vals[sel]
    ids = [table.event_ids[i] for i in sel]
    years = table.years[sel]
    n_years = end - start + 1
    x = np.arange(n_years, dtype=np.float64)
    kind = EXPOSURE_KIND.get(variable) if stage != "reported" else None
    perturb = (sampler is not None and kind is not None) or with_gaps
    gaps = []
    if with_gaps:
        weight = np.ones(len(ids))
        if stage == "underreporting_corrected" and ("gap_filled", variable) in table.columns:
            gf = table.column("gap_filled", variable)[sel]
            weight = np.where(gf > 0, base / np.where(gf > 0, gf, 1.0), 1.0)
        gaps = [(j, table.filled_samples[(eid, variable)], weight[j])
                for j, eid in enumerate(ids) if (eid, variable) in table.filled_samples]

    def values_for(block, size):
        V = np.broadcast_to(base, (size, base.size)).copy()
        for j, s, w in gaps:
            pick = stream(seed, "gapfill-draw", ids[j], variable, block).integers(0, s.size, size)
            V[:, j] = s[pick] * w
        if sampler is not None and kind is not None:
            for j, eid in enumerate(ids):
                V[:, j] *= sampler.multipliers(kind, eid, int(years[j]), block, size, seed)
        return V

    def one(block_size):
        block, size = block_size
        yr = random_years(seed, block, size, base.size, interval) - start
        V = values_for(block, size) if perturb else base
        r_null, ok_null = _fit_rates(kernels.scatter_annual(yr, V, n_years), x)
        if perturb:
            fixed = np.broadcast_to(years - start, (size, base.size))
            r_band, ok_band = _fit_rates(kernels.scatter_annual(fixed, V, n_years), x)
        else:
            r_band, ok_band = np.empty(0), np.empty(0, dtype=bool)
        return r_null, ok_null, r_band, ok_band

    r_null, ok_null, r_band, ok_band = _run_blocks(one, replicates, workers)
    failed = np.count_nonzero(~ok_null)
    if failed > max_fail * replicates:
        raise TrendError(f"{failed} of {replicates} replicate fits failed")
    rates = r_null[ok_null]
    sig, p, lo, hi = _decide(observed.rate_percent_per_year, rates, two_sided)
    observed.significant, observed.mc_p = sig, p
    observed.mc_replicates = int(rates.size)
    observed.ci_low, observed.ci_high = lo, hi
    if perturb and ok_band.any():
        observed.band_low, observed.band_high = (float(v) for v in
                                                 np.percentile(r_band[ok_band], [2.5, 97.5]))
    return observed


# --------------------------------------------------- exposure uncertainty

class ExposureSampler:
    """Per-year log-normal spread of regional exposure-change factors.

    Parameters
    ----------
    factors : kind -> year -> array of regional factors (baseline over
        that year's exposure). At least ten positive factors per year.
    """

    def __init__(self, factors: dict[str, dict[int, np.ndarray]], min_regions: int = 10):
        self.params = {}
        for kind, by_year in factors.items():
            ys = sorted(by_year)
            mu, sd = [], []
            for y in ys:
                f = np.asarray(by_year[y], dtype=np.float64)
                if f.size < min_regions:
                    raise ValueError(f"{kind} {y}: {f.size} regional factors, need {min_regions}")
                if np.any(~(f > 0)):
                    raise ValueError(f"{kind} {y}: nonpositive exposure factor")
                lf = np.log(f)
                mu.append(lf.mean())
                sd.append(lf.std(ddof=1))
            self.params[kind] = (np.array(ys, dtype=float), np.array(mu), np.array(sd))

    def fitted(self, kind: str, year: float) -> tuple[float, float]:
        ys, mu, sd = self.params[kind]
        return float(np.interp(year, ys, mu)), float(np.interp(year, ys, sd))

    def multipliers(self, kind, event_id, year, block, size, seed) -> np.ndarray:
        """``exp(sigma Z)`` for replicates ``block*BLOCK ...`` of one event."""
        _, sigma = self.fitted(kind, year)
        z = stream(seed, "exposure", kind, event_id, block).standard_normal(BLOCK)[:size]
        return np.exp(sigma * z)

    def draw(self, kind, event_id, year, replicate, seed) -> float:
        """Factor drawn for one (event, replicate): ``exp(mu + sigma Z)``."""
        mu, sigma = self.fitted(kind, year)
        block, r = divmod(replicate, BLOCK)
        z = stream(seed, "exposure", kind, event_id, block).standard_normal(BLOCK)[r]
        return float(np.exp(mu + sigma * z))


def regional_factor_table(baseline_totals, year_totals) -> dict[str, dict[int, np.ndarray]]:
    """Baseline-over-year factors per region for every exposure kind.

    Regions with zero exposure in either year are left out.
    """
    out = {k: {} for k in ("population", "gdp", "wealth")}
    for year, totals in year_totals.items():
        for kind in out:
            f = []
            for region, ex in totals.items():
                then, base = getattr(ex, kind), getattr(baseline_totals[region], kind)
                if then > 0 and base > 0:
                    f.append(base / then)
            out[kind][int(year)] = np.array(f)
    return out


# ----------------------------------------------------------------- tables

TABLE_COLUMNS = (
    ("reported", "events"), ("reported", "area"), ("reported", "fatalities"),
    ("reported", "affected"), ("reported", "losses"),
    ("normalized", "fatalities"), ("normalized", "affected"),
    ("normalized", "losses_gdp"), ("normalized", "losses_wealth"),
    ("gap_filled", "area"), ("gap_filled", "fatalities"), ("gap_filled", "affected"),
    ("gap_filled", "losses_gdp"), ("gap_filled", "losses_wealth"),
)
START_YEARS = (1870, 1900, 1930, 1950, 1970)


def format_cell(res: TrendResult | None) -> str:
    if res is None:
        return ""
    return ("*" if res.significant else "") + f"{res.rate_percent_per_year:.1f}"


def write_trend_table(results: dict[tuple[int, str, str], TrendResult], path,
                      start_years=START_YEARS, columns=TABLE_COLUMNS) -> None:
    """Rates per start year (rows) and stage/variable (columns), '*' = significant."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_year"] + [f"{s}:{v}" for s, v in columns])
        for y in start_years:
            w.writerow([y] + [format_cell(results.get((y, s, v))) for s, v in columns])


def write_trend_details(results, path) -> None:
    fields = ("start_year", "end_year", "stage", "variable", "rate_percent_per_year", "b", "a",
              "se_b", "significant", "mc_p", "mc_replicates", "ci_low", "ci_high",
              "band_low", "band_high", "t_significant")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for key in sorted(results):
            r = results[key]
            w.writerow([r.start_year, r.end_year, r.stage, r.variable,
                        repr(float(r.rate_percent_per_year)), repr(r.b), repr(r.a),
                        repr(r.se_b), r.significant, repr(r.mc_p), r.mc_replicates,
                        repr(r.ci_low), repr(r.ci_high), repr(r.band_low), repr(r.band_high),
                        r.t_significant])
