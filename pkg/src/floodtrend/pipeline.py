"""Stage orchestration: config, manifests, digest-based skipping and reports."""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import shutil
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .events import FIRST_YEAR, parse_catalog, summarize, write_catalog
from .exposure import Exposure, ExposureGrid, RegionStats, backcast, disaggregate_economy, \
    exposure_in, regional_totals, round_half_up, urban_centre_distance
from .footprint import Footprint, build_footprints, read_footprints, write_footprints
from .gapfill import VARIABLES as REL_VARIABLES, DependenceTable, fit_dependence, gap_fill, \
    load_samples, read_filled_values, save_samples, write_filled
from .gridio import read_ascii_grid, write_ascii_grid
from .normalize import Factors, factors_from_exposure, normalize, potential_exposure, \
    relative_damages, write_normalized
from .series import AnnualSeries
from .streams import seed_sequence
from .trends import TABLE_COLUMNS, DegenerateSeriesError, ExposureSampler, LossTable, \
    aggregate_annual, mc_significance, mc_significance_normalized, regional_factor_table, \
    t_test_check, write_trend_details, write_trend_table
from .underreporting import PERIODS, SEVERITY_VARIABLES, classify_severity, \
    correction_factors, event_weights, reference_ratios, write_classification

LOG = logging.getLogger(__name__)

STAGES = ("ingest", "backcast", "footprints", "normalize", "fit-copulas", "gap-fill",
          "underreport", "trend", "report")
GRID_LAYERS = ("region", "landuse", "population", "slope", "suitability_cereal",
               "suitability_alfalfa", "soil_sealing", "built_year")
CORRECTED_COLUMNS = tuple(("underreporting_corrected", v) for v in
                          ("events", "area", "fatalities", "affected", "losses_gdp",
                           "losses_wealth"))
PERSON_VARIABLES = ("fatalities", "affected")


class PipelineError(RuntimeError):
    """A stage failed; the message carries the module's diagnostic."""


class MissingInputError(PipelineError):
    def __init__(self, stage, path):
        super().__init__(f"stage {stage}: missing input {path}")
        self.stage = stage
        self.path = path


# ------------------------------------------------------------------ config

def _years(text) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _span(text) -> tuple[int, int]:
    a, b = str(text).split("-")
    return int(a), int(b)


@dataclass
class PipelineConfig:
    events: Path
    grid_dir: Path
    stats: Path
    river_mask: Path
    coastal_mask: Path
    output_dir: Path
    region_index: Path | None = None
    baseline_year: int = 2011
    start_years: tuple = (1870, 1900, 1930, 1950, 1970)
    end_year: int = 2016
    exposure_years: tuple = ()
    mc_replicates: int = 10_000
    conditional_samples: int = 10_000
    keep_samples: int | None = None
    reference_period: tuple = (1990, 2016)
    seed: int = 0
    workers: int = 1
    two_sided: bool = True

    def __post_init__(self):
        if not self.exposure_years:
            self.exposure_years = tuple(range(FIRST_YEAR, self.baseline_year, 10)) + (
                self.baseline_year,)
        self.exposure_years = tuple(sorted(set(self.exposure_years) | {self.baseline_year}))
        if any(s >= self.end_year for s in self.start_years):
            raise ValueError("every start year must precede the end year")
        if self.exposure_years[-1] > self.baseline_year:
            raise ValueError("exposure years cannot follow the baseline year")
        if self.mc_replicates < 1000:
            LOG.warning("%d replicates: significance verdicts are indicative only",
                        self.mc_replicates)

    @property
    def keep(self) -> int:
        k = self.conditional_samples if self.keep_samples is None else self.keep_samples
        return min(k, self.conditional_samples)

    def stage_dir(self, stage) -> Path:
        return self.output_dir / stage

    @classmethod
    def from_file(cls, path, seed: int | None = None) -> "PipelineConfig":
        """Read the ``[pipeline]`` section; paths are relative to the file."""
        path = Path(path)
        if not path.is_file():
            raise MissingInputError("config", path)
        cp = configparser.ConfigParser()
        cp.read(path)
        if "pipeline" not in cp:
            raise ValueError(f"{path}: no [pipeline] section")
        s = cp["pipeline"]
        root = path.parent

        def p(key, required=True):
            if key not in s or not s[key].strip():
                if required:
                    raise ValueError(f"{path}: {key} is required")
                return None
            return (root / s[key].strip()).resolve()

        kw = dict(events=p("events"), grid_dir=p("grid_dir"), stats=p("stats"),
                  river_mask=p("river_mask"), coastal_mask=p("coastal_mask"),
                  output_dir=p("output_dir"), region_index=p("region_index", False))
        for key in ("baseline_year", "end_year", "mc_replicates", "conditional_samples",
                    "seed", "workers", "keep_samples"):
            if key in s and s[key].strip():
                kw[key] = s.getint(key)
        if "two_sided" in s:
            kw["two_sided"] = s.getboolean("two_sided")
        if "start_years" in s:
            kw["start_years"] = _years(s["start_years"])
        if "exposure_years" in s:
            kw["exposure_years"] = _years(s["exposure_years"])
        elif "exposure_step" in s:
            base = kw.get("baseline_year", 2011)
            kw["exposure_years"] = tuple(range(FIRST_YEAR, base, s.getint("exposure_step")))
        if "reference_period" in s:
            kw["reference_period"] = _span(s["reference_period"])
        if seed is not None:
            kw["seed"] = seed
        return cls(**kw)


# ---------------------------------------------------------------- manifests

def digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _rel(path, cfg) -> str:
    path = Path(path)
    try:
        return str(path.relative_to(cfg.output_dir))
    except ValueError:
        return str(path)


def _manifest_path(cfg, stage) -> Path:
    return cfg.stage_dir(stage) / "manifest.json"


def _up_to_date(cfg, stage, inputs, params) -> bool:
    mp = _manifest_path(cfg, stage)
    if not mp.is_file():
        return False
    try:
        old = json.loads(mp.read_text())
    except ValueError:
        return False
    if old.get("params") != params:
        return False
    if old.get("inputs") != {_rel(p, cfg): digest(p) for p in inputs}:
        return False
    for rel, d in old.get("outputs", {}).items():
        f = cfg.output_dir / rel
        if not f.is_file() or digest(f) != d:
            return False
    return True


def _write_manifest(cfg, stage, inputs, params, outputs):
    man = {
        "stage": stage,
        "version": __version__,
        "seed": cfg.seed,
        "params": params,
        "inputs": {_rel(p, cfg): digest(p) for p in inputs},
        "outputs": {_rel(p, cfg): digest(p) for p in sorted(outputs)},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _manifest_path(cfg, stage).write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------- helpers

def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _opt(text) -> float | None:
    return None if text == "" else float(text)


def load_events(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        events, _ = parse_catalog(fh)
    return events


def load_baseline(cfg) -> ExposureGrid:
    layers = {}
    for name in GRID_LAYERS:
        f = cfg.grid_dir / f"{name}.asc"
        if not f.is_file():
            raise MissingInputError("backcast", f)
        layers[name] = read_ascii_grid(f)
    cellsize = layers["region"].cellsize
    arr = {k: g.data for k, g in layers.items()}
    for k in ("region", "landuse", "built_year"):
        arr[k] = arr[k].astype(np.int64)
    dist = cfg.grid_dir / "dist_urban_centre.asc"
    if dist.is_file():
        arr["dist_urban_centre"] = read_ascii_grid(dist).data
    else:
        arr["dist_urban_centre"] = urban_centre_distance(arr["region"], arr["landuse"],
                                                         arr["population"])
    return ExposureGrid(year=cfg.baseline_year, cellsize=cellsize, **arr)


def region_index(cfg) -> dict[str, int] | None:
    if cfg.region_index is None:
        return None
    with cfg.region_index.open(newline="") as fh:
        return {row["code"]: int(row["value"]) for row in csv.DictReader(fh)}


def _need(stage, *paths):
    for p in paths:
        if not Path(p).exists():
            raise MissingInputError(stage, p)


# --------------------------------------------------------------- artifacts

def _ingest_events(cfg):
    return cfg.stage_dir("ingest") / "events.csv"


def _backcast_totals(cfg):
    return cfg.stage_dir("backcast") / "regional_totals.csv"


def _backcast_grids(cfg):
    d = cfg.stage_dir("backcast")
    return [d / str(y) / f"{k}.asc" for y in cfg.exposure_years
            for k in ("landuse", "population", "gdp", "wealth")]


def _footprints_file(cfg):
    return cfg.stage_dir("footprints") / "footprints.csv"


def _footprint_summary(cfg):
    return cfg.stage_dir("footprints") / "summary.csv"


def _normalized_file(cfg):
    return cfg.stage_dir("normalize") / "normalized.csv"


def _relative_file(cfg):
    return cfg.stage_dir("normalize") / "relative.csv"


def _dependence_file(cfg):
    return cfg.stage_dir("fit-copulas") / "dependence.csv"


def _filled_file(cfg):
    return cfg.stage_dir("gap-fill") / "filled.csv"


def _samples_file(cfg):
    return cfg.stage_dir("gap-fill") / "samples.npy"


def _weights_file(cfg):
    return cfg.stage_dir("underreport") / "weights.csv"


def _pseudo_file(cfg):
    return cfg.stage_dir("underreport") / "pseudo_events.csv"


def _trend_details(cfg):
    return cfg.stage_dir("trend") / "details.csv"


# ------------------------------------------------------------------ stages

def stage_ingest(cfg):
    _need("ingest", cfg.events)
    with cfg.events.open(newline="", encoding="utf-8") as fh:
        events, errors = parse_catalog(fh)
    out = cfg.stage_dir("ingest")
    with _ingest_events(cfg).open("w", newline="", encoding="utf-8") as fh:
        write_catalog(events, fh)
    with (out / "rejected.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("row", "id", "rule"))
        w.writerows((e.row, e.event_id, e.rule) for e in errors)
    s = summarize(events)
    _dump_json({"n_events": s.n_events, "by_type": s.by_type, "available": s.available,
                "zero_fatality_events": s.zero_fatality_events,
                "positive_unknown_fatalities": s.positive_unknown_fatalities,
                "mean_regions": s.mean_regions, "rejected_rows": len(errors)},
               out / "summary.json")
    for e in errors:
        LOG.warning("rejected %s", e)
    return [_ingest_events(cfg), out / "rejected.csv", out / "summary.json"]


def stage_backcast(cfg):
    _need("backcast", cfg.stats)
    base = load_baseline(cfg)
    stats = RegionStats.from_csv(cfg.stats)
    out = cfg.stage_dir("backcast")
    outputs = []
    rows = []
    for y in cfg.exposure_years:
        g = disaggregate_economy(backcast(base, stats, y), stats)
        d = out / str(y)
        d.mkdir(exist_ok=True)
        for k in ("landuse", "population", "gdp", "wealth"):
            write_ascii_grid(d / f"{k}.asc", getattr(g, k), g.cellsize)
            outputs.append(d / f"{k}.asc")
        for region, ex in regional_totals(g).items():
            rows.append((region, y, repr(ex.population), repr(ex.gdp), repr(ex.wealth)))
    with _backcast_totals(cfg).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("region", "year", "population", "gdp", "wealth"))
        w.writerows(sorted(rows))
    return outputs + [_backcast_totals(cfg)]


def stage_footprints(cfg):
    _need("footprints", _ingest_events(cfg), cfg.river_mask, cfg.coastal_mask,
          cfg.grid_dir / "region.asc")
    events = load_events(_ingest_events(cfg))
    grid = read_ascii_grid(cfg.grid_dir / "region.asc")
    regions = grid.data.astype(np.int64)
    river = read_ascii_grid(cfg.river_mask).data > 0
    coastal = read_ascii_grid(cfg.coastal_mask).data > 0
    fps = build_footprints(events, river, coastal, regions, region_index(cfg))
    write_footprints(fps.values(), _footprints_file(cfg))
    with _footprint_summary(cfg).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id", "cells", "area_km2", "empty"))
        for ev in events:
            fp = fps[ev.id]
            w.writerow((ev.id, len(fp), repr(fp.area_km2(grid.cellsize)), int(fp.empty)))
            if fp.empty:
                LOG.warning("%s: empty footprint, excluded from normalization", ev.id)
    return [_footprints_file(cfg), _footprint_summary(cfg)]


def _read_footprint_summary(cfg):
    with _footprint_summary(cfg).open(newline="") as fh:
        return {r["event_id"]: float(r["area_km2"]) for r in csv.DictReader(fh)
                if r["empty"] == "0"}


class _YearGrids:
    """Backcast exposure grids, interpolated linearly to event years."""

    def __init__(self, cfg):
        self.years = cfg.exposure_years
        self.baseline = cfg.baseline_year
        self.grids = {}
        for y in self.years:
            d = cfg.stage_dir("backcast") / str(y)
            self.grids[y] = {k: read_ascii_grid(d / f"{k}.asc").data
                             for k in ("population", "gdp", "wealth")}

    def _sum(self, y, r, c):
        g = self.grids[y]
        return np.array([g[k][r, c].sum() for k in ("population", "gdp", "wealth")])

    def exposure(self, fp: Footprint, year: int) -> Exposure:
        r, c = fp.cells[:, 0], fp.cells[:, 1]
        year = min(max(year, self.years[0]), self.baseline)
        k = int(np.searchsorted(self.years, year, side="right")) - 1
        y0 = self.years[k]
        v = self._sum(y0, r, c)
        if year > y0:
            y1 = self.years[k + 1]
            w = (year - y0) / (y1 - y0)
            v = (1 - w) * v + w * self._sum(y1, r, c)
        return Exposure(float(v[0]), float(v[1]), float(v[2]), len(fp))


def stage_normalize(cfg):
    _need("normalize", _ingest_events(cfg), _footprints_file(cfg), _footprint_summary(cfg),
          *_backcast_grids(cfg))
    events = load_events(_ingest_events(cfg))
    areas = _read_footprint_summary(cfg)
    fps = read_footprints(_footprints_file(cfg), [e.id for e in events])
    grids = _YearGrids(cfg)
    records, base_ex = [], {}
    for ev in events:
        if ev.id not in areas:
            continue
        fp = fps[ev.id]
        base = grids.exposure(fp, cfg.baseline_year)
        if ev.year >= cfg.baseline_year:
            factors = Factors()
        else:
            factors = factors_from_exposure(base, grids.exposure(fp, ev.year), ev.id)
        records.append(normalize(ev, factors))
        base_ex[ev.id] = base
    write_normalized(records, _normalized_file(cfg))
    with _relative_file(cfg).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id",) + tuple(f"rel_{v}" for v in REL_VARIABLES)
                   + tuple(f"pot_{v}" for v in REL_VARIABLES))
        for rec in records:
            area = areas[rec.event_id]
            rel = relative_damages(rec, base_ex[rec.event_id], area)
            pot = potential_exposure(base_ex[rec.event_id], area)
            w.writerow([rec.event_id] + [_fmt(rel[v]) for v in REL_VARIABLES]
                       + [_fmt(pot[v]) for v in REL_VARIABLES])
    return [_normalized_file(cfg), _relative_file(cfg)]


def read_relative(path):
    rel, pot = {}, {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            eid = row["event_id"]
            rel[eid] = {v: _opt(row[f"rel_{v}"]) for v in REL_VARIABLES}
            pot[eid] = {v: float(row[f"pot_{v}"]) for v in REL_VARIABLES}
    return rel, pot


def read_normalized(path):
    """event id -> (Factors, normalized values by loss-table variable)."""
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            f = Factors(float(row["factor_population"]), float(row["factor_gdp"]),
                        float(row["factor_wealth"]))
            vals = {"fatalities": _opt(row["norm_fatalities"]),
                    "affected": _opt(row["norm_persons_affected"]),
                    "losses_gdp": _opt(row["norm_losses_by_gdp"]),
                    "losses_wealth": _opt(row["norm_losses_by_wealth"])}
            out[row["id"]] = (f, vals)
    return out


def stage_fit_copulas(cfg):
    _need("fit-copulas", _relative_file(cfg))
    rel, _ = read_relative(_relative_file(cfg))
    table = fit_dependence(rel)
    table.to_csv(_dependence_file(cfg))
    return [_dependence_file(cfg)]


def stage_gap_fill(cfg):
    _need("gap-fill", _ingest_events(cfg), _normalized_file(cfg), _relative_file(cfg),
          _dependence_file(cfg))
    events = {e.id: e for e in load_events(_ingest_events(cfg))}
    norm = read_normalized(_normalized_file(cfg))
    records = [normalize(events[eid], f) for eid, (f, _) in norm.items()]
    rel, pot = read_relative(_relative_file(cfg))
    table = DependenceTable.from_csv(_dependence_file(cfg))
    res = gap_fill(records, rel, pot, table, seed=cfg.seed, n_samples=cfg.conditional_samples,
                   keep_samples=cfg.keep)
    write_filled(res, _filled_file(cfg))
    save_samples(res.samples, _samples_file(cfg))
    skipped = cfg.stage_dir("gap-fill") / "skipped.csv"
    with skipped.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id", "reason"))
        w.writerows(res.skipped)
    return [_filled_file(cfg), _samples_file(cfg), _samples_file(cfg).with_suffix(".keys.csv"),
            skipped]


def stage_underreport(cfg):
    _need("underreport", _filled_file(cfg), _ingest_events(cfg))
    years_of = {e.id: e.year for e in load_events(_ingest_events(cfg))}
    filled = read_filled_values(_filled_file(cfg))
    ids = list(filled)
    years = np.array([years_of[i] for i in ids])
    values = {v: [filled[i][0][v] for i in ids] for v in SEVERITY_VARIABLES}
    cls = classify_severity(ids, values)
    ratios = reference_ratios(cls, years, cfg.reference_period)
    factors = correction_factors(cls, years, ratios)
    weights = event_weights(cls, years, factors)
    out = cfg.stage_dir("underreport")
    write_classification(cls, years, out / "classification.csv")
    factors.to_csv(out / "factors.csv")
    with (out / "ratios.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("quintile", "ratio_to_top"))
        for q, r in zip((4, 3, 2, 1), ratios):
            w.writerow((q, repr(r)))
    with _weights_file(cfg).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id", "year", "quintile", "weight"))
        for i, y, q, wt in zip(ids, years, cls.quintile, weights):
            w.writerow((i, int(y), int(q), repr(float(wt))))
    # empty (period, quintile) cells are restored as pseudo-events that
    # shadow the period's top-quintile events
    with _pseudo_file(cfg).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("id", "year", "quintile", "events"))
        for start, q in sorted(factors.flagged):
            r = ratios[4 - q]
            for i, y, qq in zip(ids, years, cls.quintile):
                if qq == 5 and start <= y <= start + 29:
                    w.writerow((f"{i}~q{q}", int(y), q, repr(float(r))))
    return [out / "classification.csv", out / "factors.csv", out / "ratios.csv",
            _weights_file(cfg), _pseudo_file(cfg)]


def _read_rows(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def build_loss_table(cfg) -> LossTable:
    """Per-event values of every stage, plus pseudo-events of the correction."""
    events = load_events(_ingest_events(cfg))
    norm = read_normalized(_normalized_file(cfg))
    filled = read_filled_values(_filled_file(cfg))
    weights = {r["event_id"]: float(r["weight"]) for r in _read_rows(_weights_file(cfg))}
    pseudo = _read_rows(_pseudo_file(cfg))
    ids = [e.id for e in events] + [r["id"] for r in pseudo]
    years = [e.year for e in events] + [int(r["year"]) for r in pseudo]
    n_real = len(events)
    table = LossTable(ids, years, filled_samples=load_samples(_samples_file(cfg)))
    nan = np.full(len(ids), np.nan)

    def col(values):
        out = nan.copy()
        out[:len(values)] = [np.nan if v is None else float(v) for v in values]
        return out

    table.set("reported", "events", col([1.0] * n_real))
    for var, attr in (("area", "area_km2"), ("fatalities", "fatalities"),
                      ("affected", "persons_affected"), ("losses", "losses_eur2011")):
        table.set("reported", var, col([getattr(e, attr) for e in events]))
    for var in ("fatalities", "affected", "losses_gdp", "losses_wealth"):
        table.set("normalized", var, col([norm[e.id][1][var] if e.id in norm else None
                                          for e in events]))
    wt = col([weights.get(e.id) for e in events])
    wt[n_real:] = [float(r["events"]) for r in pseudo]
    table.set("underreporting_corrected", "events", wt)
    for var in REL_VARIABLES:
        gf = col([filled[e.id][0][var] if e.id in filled else None for e in events])
        table.set("gap_filled", var, gf)
        corr = gf * wt
        corr[n_real:] = 0.0
        table.set("underreporting_corrected", var, corr)
    return table


def exposure_sampler(cfg) -> ExposureSampler | None:
    rows = _read_rows(_backcast_totals(cfg))
    by_year = {}
    for r in rows:
        by_year.setdefault(int(r["year"]), {})[int(r["region"])] = Exposure(
            float(r["population"]), float(r["gdp"]), float(r["wealth"]), 0)
    try:
        return ExposureSampler(regional_factor_table(by_year[cfg.baseline_year], by_year))
    except ValueError as exc:
        LOG.warning("exposure uncertainty disabled: %s", exc)
        return None


def _test_seed(cfg, stage, var, start) -> int:
    return int(seed_sequence(cfg.seed, "trend", stage, var, start).generate_state(1)[0])


def run_trends(cfg, table, columns, sampler):
    results = {}
    for start in cfg.start_years:
        period = (start, cfg.end_year)
        for stage, var in columns:
            seed = _test_seed(cfg, stage, var, start)
            try:
                if stage == "reported":
                    res = mc_significance(table, var, stage, period, cfg.mc_replicates, seed,
                                          cfg.two_sided, workers=cfg.workers)
                else:
                    res = mc_significance_normalized(table, var, stage, period, sampler,
                                                     cfg.mc_replicates, seed, cfg.two_sided,
                                                     workers=cfg.workers)
            except DegenerateSeriesError as exc:
                LOG.warning("%s %s from %d: %s", stage, var, start, exc)
                continue
            t_test_check(aggregate_annual(table, var, stage, period), res)
            results[(start, stage, var)] = res
    return results


def _trend_inputs(cfg):
    return [_ingest_events(cfg), _normalized_file(cfg), _filled_file(cfg), _samples_file(cfg),
            _samples_file(cfg).with_suffix(".keys.csv"), _weights_file(cfg),
            _pseudo_file(cfg), _backcast_totals(cfg)]


def stage_trend(cfg):
    _need("trend", *_trend_inputs(cfg))
    table = build_loss_table(cfg)
    results = run_trends(cfg, table, TABLE_COLUMNS + CORRECTED_COLUMNS, exposure_sampler(cfg))
    out = cfg.stage_dir("trend")
    write_trend_table(results, out / "table1.csv", cfg.start_years, TABLE_COLUMNS)
    write_trend_table(results, out / "table_corrected.csv", cfg.start_years, CORRECTED_COLUMNS)
    write_trend_details(results, _trend_details(cfg))
    return [out / "table1.csv", out / "table_corrected.csv", _trend_details(cfg)]


def _series_for_report(table, stage, var, period):
    s = aggregate_annual(table, var, stage, period)
    if stage != "reported" and var in PERSON_VARIABLES:
        s = AnnualSeries(s.start_year, s.end_year,
                         np.array([float(round_half_up(v)) for v in s.values]),
                         s.variable, s.stage, s.units)
    return s


def stage_report(cfg):
    trend = cfg.stage_dir("trend")
    _need("report", trend / "table1.csv", _trend_details(cfg), *_trend_inputs(cfg))
    out = cfg.stage_dir("report")
    (out / "series").mkdir(exist_ok=True)
    outputs = []
    for name in ("table1.csv", "table_corrected.csv"):
        shutil.copyfile(trend / name, out / name)
        outputs.append(out / name)
    table = build_loss_table(cfg)
    period = (min(cfg.start_years), cfg.end_year)
    columns = TABLE_COLUMNS + CORRECTED_COLUMNS
    series = {}
    for stage, var in columns:
        s = _series_for_report(table, stage, var, period)
        series[(stage, var)] = s
        f = out / "series" / f"{stage}__{var}.csv"
        s.to_csv(f)
        outputs.append(f)
    # sums per 30-year window
    spans = [p for p in PERIODS if p[0] >= period[0]] + [(PERIODS[-1][1] + 1, cfg.end_year)]
    with (out / "thirty_year_sums.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("period", "stage", "variable", "value"))
        for a, b in spans:
            for (stage, var), s in series.items():
                w.writerow((f"{a}-{b}", stage, var, repr(float(s.window(a, b).values.sum()))))
    outputs.append(out / "thirty_year_sums.csv")
    # yearly counts per severity quintile, before and after correction
    wrows = _read_rows(_weights_file(cfg))
    pseudo = _read_rows(_pseudo_file(cfg))
    n_years = period[1] - period[0] + 1
    counts = {(st, q): np.zeros(n_years) for st in ("reported", "underreporting_corrected")
              for q in range(1, 6)}
    for r in wrows:
        y, q = int(r["year"]), int(r["quintile"])
        if period[0] <= y <= period[1]:
            counts[("reported", q)][y - period[0]] += 1.0
            counts[("underreporting_corrected", q)][y - period[0]] += float(r["weight"])
    for r in pseudo:
        y, q = int(r["year"]), int(r["quintile"])
        if period[0] <= y <= period[1]:
            counts[("underreporting_corrected", q)][y - period[0]] += float(r["events"])
    with (out / "quintile_series.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("year", "stage", "quintile", "events"))
        for i in range(n_years):
            for (st, q), arr in counts.items():
                w.writerow((period[0] + i, st, q, repr(float(arr[i]))))
    outputs.append(out / "quintile_series.csv")
    _dump_json(_summary(cfg), out / "summary.json")
    outputs.append(out / "summary.json")
    return outputs


def _summary(cfg) -> dict:
    ingest = json.loads((cfg.stage_dir("ingest") / "summary.json").read_text())
    empty = [r["event_id"] for r in _read_rows(_footprint_summary(cfg)) if r["empty"] == "1"]
    dep = {r["pair"]: {"family": r["family"], "theta": float(r["theta"]),
                       "spearman_rho": float(r["spearman_rho"]), "n": int(r["n"])}
           for r in _read_rows(_dependence_file(cfg))}
    filled = read_filled_values(_filled_file(cfg))
    n_filled = {v: sum(v in flags for _, flags in filled.values()) for v in REL_VARIABLES}
    ratios = {r["quintile"]: float(r["ratio_to_top"])
              for r in _read_rows(cfg.stage_dir("underreport") / "ratios.csv")}
    factors = {f"{r['period']}:q{r['quintile']}": {"factor": float(r["factor"]),
                                                   "flag": r["flag"]}
               for r in _read_rows(cfg.stage_dir("underreport") / "factors.csv")}
    trends = {}
    for r in _read_rows(_trend_details(cfg)):
        key = f"{r['start_year']}:{r['stage']}:{r['variable']}"
        trends[key] = {"rate_percent_per_year": float(r["rate_percent_per_year"]),
                       "significant": r["significant"] == "True",
                       "mc_p": float(r["mc_p"]),
                       "t_test_agrees": r["t_significant"] == r["significant"]}
    return {
        "version": __version__,
        "seed": cfg.seed,
        "baseline_year": cfg.baseline_year,
        "start_years": list(cfg.start_years),
        "end_year": cfg.end_year,
        "mc_replicates": cfg.mc_replicates,
        "two_sided": cfg.two_sided,
        "conditional_samples": cfg.conditional_samples,
        "reference_period": list(cfg.reference_period),
        "catalog": ingest,
        "empty_footprints": empty,
        "dependence": dep,
        "filled_values": n_filled,
        "reference_ratios": ratios,
        "correction_factors": factors,
        "trends": trends,
    }


# --------------------------------------------------------------- dispatch

def _params(cfg, stage) -> dict:
    p = {}
    if stage in ("backcast", "normalize"):
        p.update(baseline_year=cfg.baseline_year, exposure_years=list(cfg.exposure_years))
    if stage == "gap-fill":
        p.update(seed=cfg.seed, conditional_samples=cfg.conditional_samples, keep=cfg.keep)
    if stage == "underreport":
        p.update(reference_period=list(cfg.reference_period))
    if stage in ("trend", "report"):
        p.update(seed=cfg.seed, start_years=list(cfg.start_years), end_year=cfg.end_year,
                 mc_replicates=cfg.mc_replicates, two_sided=cfg.two_sided,
                 baseline_year=cfg.baseline_year)
    return p


def _inputs(cfg, stage) -> list[Path]:
    if stage == "ingest":
        return [cfg.events]
    if stage == "backcast":
        return [cfg.grid_dir / f"{k}.asc" for k in GRID_LAYERS] + [cfg.stats]
    if stage == "footprints":
        extra = [cfg.region_index] if cfg.region_index else []
        return [_ingest_events(cfg), cfg.river_mask, cfg.coastal_mask,
                cfg.grid_dir / "region.asc"] + extra
    if stage == "normalize":
        return [_ingest_events(cfg), _footprints_file(cfg), _footprint_summary(cfg)] \
            + _backcast_grids(cfg)
    if stage == "fit-copulas":
        return [_relative_file(cfg)]
    if stage == "gap-fill":
        return [_ingest_events(cfg), _normalized_file(cfg), _relative_file(cfg),
                _dependence_file(cfg)]
    if stage == "underreport":
        return [_filled_file(cfg), _ingest_events(cfg)]
    if stage == "trend":
        return _trend_inputs(cfg)
    if stage == "report":
        return [cfg.stage_dir("trend") / "table1.csv", _trend_details(cfg)] \
            + _trend_inputs(cfg)
    raise ValueError(f"unknown stage {stage!r}")


RUNNERS = {
    "ingest": stage_ingest, "backcast": stage_backcast, "footprints": stage_footprints,
    "normalize": stage_normalize, "fit-copulas": stage_fit_copulas,
    "gap-fill": stage_gap_fill, "underreport": stage_underreport, "trend": stage_trend,
    "report": stage_report,
}


@dataclass
class StageOutcome:
    stage: str
    skipped: bool
    outputs: list = field(default_factory=list)


def run_stage(cfg, stage, force=False) -> StageOutcome:
    inputs = _inputs(cfg, stage)
    _need(stage, *inputs)
    params = _params(cfg, stage)
    if not force and _up_to_date(cfg, stage, inputs, params):
        LOG.info("%s: inputs unchanged, skipped", stage)
        return StageOutcome(stage, True)
    cfg.stage_dir(stage).mkdir(parents=True, exist_ok=True)
    LOG.info("%s: running", stage)
    outputs = RUNNERS[stage](cfg)
    _write_manifest(cfg, stage, inputs, params, outputs)
    return StageOutcome(stage, False, outputs)


def run(cfg, stages=STAGES, force=False) -> list[StageOutcome]:
    """Run `stages` in pipeline order.

    Raises
    ------
    MissingInputError
        An upstream artifact or input file is absent.
    PipelineError
        A stage failed; wraps the module's own exception.
    """
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stage(s): {', '.join(unknown)}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    done = []
    for stage in (s for s in STAGES if s in stages):
        try:
            done.append(run_stage(cfg, stage, force))
        except MissingInputError:
            raise
        except (ValueError, RuntimeError, KeyError, OSError) as exc:
            raise PipelineError(f"stage {stage} failed: {type(exc).__name__}: {exc}") from exc
    return done
