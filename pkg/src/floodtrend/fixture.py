"""Small self-consistent input set for exercising the whole pipeline."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .copulas import CopulaModel
from .events import FloodEvent, write_catalog
from .exposure import ExposureGrid, LandUse, RegionStats, RegionYear, urban_centre_distance
from .footprint import build_footprint, hazard_mask_for
from .gridio import write_ascii_grid

GRID_LAYERS = ("region", "landuse", "population", "slope", "suitability_cereal",
               "suitability_alfalfa", "soil_sealing", "built_year")
STAT_YEARS = (1870, 1900, 1930, 1960, 1990, 2011)
RURAL_DENSITY = {LandUse.INDUSTRY: 2.0, LandUse.INFRASTRUCTURE: 1.0, LandUse.CONSTRUCTION: 1.0,
                 LandUse.CROPLAND: 5.0, LandUse.PASTURE: 3.0, LandUse.FOREST: 1.0,
                 LandUse.NATURAL_OTHER: 0.5, LandUse.UNOCCUPIED: 0.5}


def baseline_grid(n_regions=12, rows=40, cols_per_region=8, seed=0, year=2011,
                  cols=None) -> ExposureGrid:
    """Regions are vertical stripes; each has an urban core around its centre.

    `cols` overrides ``n_regions * cols_per_region``; stripes then differ in
    width by at most one column.
    """
    rng = np.random.default_rng(seed)
    cols = n_regions * cols_per_region if cols is None else cols
    region = (1 + np.arange(cols) * n_regions // cols)[None, :].repeat(rows, 0)
    lu = np.full((rows, cols), LandUse.UNOCCUPIED, dtype=np.int64)
    built = np.zeros((rows, cols), dtype=np.int64)
    rr, cc = np.indices((rows, cols))
    for k in range(n_regions):
        m = region == k + 1
        centre = (rng.integers(8, rows - 8), np.flatnonzero(m[0]).mean())
        d = np.hypot(rr - centre[0], cc - centre[1])
        d = np.where(m, d, np.inf)
        order = np.argsort(d, axis=None, kind="stable")[:int(m.sum())]
        n = order.size
        counts = [(LandUse.URBAN, 24 + int(rng.integers(0, 12))), (LandUse.INDUSTRY, 8),
                  (LandUse.CONSTRUCTION, 2)]
        pos = 0
        for cls, c in counts:
            lu.flat[order[pos:pos + c]] = cls
            pos += c
        rest = order[pos:].copy()
        rng.shuffle(rest)
        mix = [(LandUse.INFRASTRUCTURE, 12), (LandUse.CROPLAND, int(0.30 * n)),
               (LandUse.PASTURE, int(0.18 * n)), (LandUse.FOREST, int(0.16 * n)),
               (LandUse.NATURAL_OTHER, int(0.06 * n)), (LandUse.WATER, 6),
               (LandUse.RESERVOIR, 3), (LandUse.AIRPORT, 1), (LandUse.BURNT, 2)]
        pos = 0
        for cls, c in mix:
            sel = rest[pos:pos + c]
            lu.flat[sel] = cls
            if cls in (LandUse.RESERVOIR, LandUse.AIRPORT):
                built.flat[sel] = 1925 + int(rng.integers(0, 60))
            pos += c
    pop = np.zeros((rows, cols))
    urban = lu == LandUse.URBAN
    pop[urban] = rng.uniform(200, 900, urban.sum()).round()
    for cls, dens in RURAL_DENSITY.items():
        sel = lu == cls
        pop[sel] = rng.uniform(0.5, 1.5, sel.sum()) * dens
    slope = rng.gamma(2.0, 3.0, (rows, cols))
    grid = ExposureGrid(
        year=year, region=region, landuse=lu, population=pop, slope=slope,
        suitability_cereal=rng.uniform(0, 1, (rows, cols)),
        suitability_alfalfa=rng.uniform(0, 1, (rows, cols)),
        dist_urban_centre=np.zeros((rows, cols)),
        soil_sealing=np.where(urban, rng.uniform(0.3, 1, (rows, cols)), 0.0),
        built_year=built)
    grid.dist_urban_centre = urban_centre_distance(region, lu, pop)
    return grid


def _baseline_stats(grid: ExposureGrid, region: int, rng) -> RegionYear:
    m = grid.region == region
    lu, pop = grid.landuse[m], grid.population[m]
    land = int((lu != LandUse.WATER).sum())
    total = float(pop.sum())
    scale = rng.uniform(0.6, 1.6)
    return RegionYear(
        total_population=total,
        urban_share=float(pop[lu == LandUse.URBAN].sum() / total),
        persons_per_household=2.4, industry_index=1.0,
        cropland_share=float((lu == LandUse.CROPLAND).sum() / land),
        pasture_share=float((lu == LandUse.PASTURE).sum() / land),
        infrastructure_cells=float((lu == LandUse.INFRASTRUCTURE).sum()),
        gdp={"agriculture": 8e6 * scale, "forestry": 1e6 * scale, "industry": 9e7 * scale,
             "services": 3e8 * scale},
        wealth={"agriculture": 2e7 * scale, "forestry": 3e6 * scale, "industry": 2e8 * scale,
                "services": 6e8 * scale, "dwellings": 9e8 * scale,
                "infrastructure": 4e8 * scale})


def region_stats(grid: ExposureGrid, seed=0, years=STAT_YEARS) -> RegionStats:
    """Statistics that agree with the baseline grid and shrink smoothly into the past."""
    rng = np.random.default_rng(seed + 1)
    records = {}
    for region in grid.region_ids():
        base = _baseline_stats(grid, region, rng)
        pop_1870 = rng.uniform(0.35, 1.2)     # some regions were more populous in 1870
        money_1870 = rng.uniform(0.02, 0.06)
        for y in years:
            if y == grid.year:
                records[(region, y)] = base
                continue
            t = (y - years[0]) / (grid.year - years[0])   # 0 in 1870, 1 at baseline
            pf = pop_1870 + (1 - pop_1870) * t
            mf = money_1870 * (1 / money_1870) ** t
            records[(region, y)] = RegionYear(
                total_population=base.total_population * pf,
                urban_share=base.urban_share * (0.25 + 0.75 * t),
                persons_per_household=4.8 - 2.4 * t,
                industry_index=0.15 + 0.85 * t,
                cropland_share=min(0.5, base.cropland_share * (1.15 - 0.15 * t)),
                pasture_share=base.pasture_share * (1.05 - 0.05 * t),
                infrastructure_cells=round(base.infrastructure_cells * (0.3 + 0.7 * t)),
                gdp={s: v * mf for s, v in base.gdp.items()},
                wealth={s: v * mf for s, v in base.wealth.items()})
    return RegionStats(records)


def hazard_masks(grid: ExposureGrid):
    rows, cols = grid.shape
    river = np.zeros((rows, cols), dtype=bool)
    meander = (rows // 2 + np.round(4 * np.sin(np.arange(cols) / 6.0))).astype(int)
    for c in range(cols):
        river[max(meander[c] - 2, 0):meander[c] + 3, c] = True
    coastal = np.zeros((rows, cols), dtype=bool)
    coastal[-3:, :] = True
    return river, coastal


def synthetic_events(grid: ExposureGrid, stats: RegionStats, n_events=360, seed=0):
    """Events whose losses scale with the exposure inside their footprints."""
    rng = np.random.default_rng(seed + 2)
    river, coastal = hazard_masks(grid)
    regions = grid.region_ids()
    years = np.arange(1870, 2017)
    p = np.exp(0.01 * (years - years[-1]))
    years = rng.choice(years, size=n_events, p=p / p.sum())
    types = rng.choice(["flash", "river", "coastal", "compound"], size=n_events,
                       p=[0.5, 0.4, 0.07, 0.03])
    # relative damages from a star of pair copulas around persons affected
    u_aff = rng.random(n_events)
    u = {"affected": u_aff,
         "area": CopulaModel("frank", 4.0).hinv(rng.random(n_events), u_aff),
         "fatalities": CopulaModel("gumbel", 1.6).hinv(rng.random(n_events), u_aff),
         "losses": CopulaModel("clayton", 1.5).hinv(rng.random(n_events), u_aff)}
    rel = {"area": sps.beta(0.8, 4.0).ppf(u["area"]),
           "fatalities": sps.lognorm(1.6, 0, 3e-4).ppf(u["fatalities"]),
           "affected": sps.lognorm(1.4, 0, 2e-2).ppf(u["affected"]),
           "losses": sps.lognorm(1.5, 0, 2e-3).ppf(u["losses"])}
    missing = {"area": 0.45, "fatalities": 0.03, "affected": 0.35, "losses": 0.4}
    events = []
    for i in range(n_events):
        start = int(rng.integers(0, len(regions)))
        codes = tuple(str(r) for r in regions[start:start + 1 + int(rng.integers(0, 3))])
        ev = FloodEvent(f"EV{i:04d}", "XX", int(years[i]), 1 + int(rng.integers(12)),
                        str(types[i]), codes)
        fp = build_footprint(ev, hazard_mask_for(ev.flood_type, river, coastal), grid.region)
        r, c = fp.cells[:, 0], fp.cells[:, 1]
        y = min(ev.year, grid.year)
        growth_p = np.mean([stats.get(int(x), y).total_population
                            / stats.get(int(x), grid.year).total_population for x in codes])
        growth_w = np.mean([sum(stats.get(int(x), y).wealth.values())
                            / sum(stats.get(int(x), grid.year).wealth.values()) for x in codes])
        pop = grid.population[r, c].sum() * growth_p
        wealth = len(fp.cells) * 1e7 * growth_w
        area = fp.area_km2(grid.cellsize)
        have = {k: rng.random() >= missing[k] for k in missing}
        fat = int(round(rel["fatalities"][i] * pop))
        if not any(have[k] for k in ("area", "affected", "losses")):
            have["losses"] = True
        events.append(FloodEvent(
            ev.id, ev.country, ev.year, ev.month, ev.flood_type, codes,
            area_km2=float(round(rel["area"][i] * area, 3)) if have["area"] else None,
            fatalities=fat if have["fatalities"] else None,
            fatalities_positive_unknown=not have["fatalities"] and rng.random() < 0.3,
            persons_affected=int(round(rel["affected"][i] * pop)) if have["affected"] else None,
            losses_eur2011=float(round(rel["losses"][i] * wealth, 2)) if have["losses"] else None,
        ))
    return events


def write_fixture(outdir, seed=0, n_events=360, n_regions=12, replicates=1000,
                  conditional_samples=2000) -> Path:
    """Write grids, statistics, masks, a catalog and a config; return the config path."""
    out = Path(outdir)
    gdir = out / "grids"
    gdir.mkdir(parents=True, exist_ok=True)
    grid = baseline_grid(n_regions=n_regions, seed=seed)
    for layer in GRID_LAYERS:
        write_ascii_grid(gdir / f"{layer}.asc", getattr(grid, layer), grid.cellsize)
    river, coastal = hazard_masks(grid)
    write_ascii_grid(gdir / "river.asc", river, grid.cellsize)
    write_ascii_grid(gdir / "coastal.asc", coastal, grid.cellsize)
    st = region_stats(grid, seed)
    st.to_csv(out / "stats.csv")
    buf = io.StringIO()
    write_catalog(synthetic_events(grid, st, n_events, seed), buf)
    (out / "events.csv").write_text(buf.getvalue())
    cfg = out / "pipeline.ini"
    cfg.write_text(
        "[pipeline]\n"
        "events = events.csv\n"
        "grid_dir = grids\n"
        "stats = stats.csv\n"
        "river_mask = grids/river.asc\n"
        "coastal_mask = grids/coastal.asc\n"
        "output_dir = out\n"
        "exposure_years = 1870, 1890, 1910, 1930, 1950, 1970, 1990, 2011\n"
        f"mc_replicates = {replicates}\n"
        f"conditional_samples = {conditional_samples}\n"
        f"keep_samples = {min(conditional_samples, 1000)}\n"
        f"seed = {seed}\n")
    return cfg
