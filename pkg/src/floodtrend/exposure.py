"""Gridded exposure reconstruction.

A baseline grid (land use, population) is redistributed inside every
region to match historical regional statistics, then regional GDP and
wealth are spread over the cells of each year's grid.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

LOG = logging.getLogger(__name__)


class LandUse(IntEnum):
    URBAN = 0
    INDUSTRY = 1
    INFRASTRUCTURE = 2
    AIRPORT = 3
    PORT = 4
    CONSTRUCTION = 5
    RESERVOIR = 6
    CROPLAND = 7
    PASTURE = 8
    FOREST = 9
    NATURAL_OTHER = 10
    BURNT = 11
    WATER = 12
    UNOCCUPIED = 13


UNINHABITABLE = (LandUse.WATER, LandUse.RESERVOIR, LandUse.BURNT)
NATURAL = (LandUse.FOREST, LandUse.NATURAL_OTHER)
AGRICULTURAL = (LandUse.CROPLAND, LandUse.PASTURE)
# cells that cropland/pasture and built-up classes may expand into
UNUTILIZED = (LandUse.UNOCCUPIED, LandUse.FOREST, LandUse.NATURAL_OTHER)

GDP_SECTORS = ("agriculture", "forestry", "industry", "services")
WEALTH_SECTORS = GDP_SECTORS + ("dwellings", "infrastructure")


class BackcastError(ValueError):
    pass


class EconomyError(ValueError):
    pass


def _isin(a, classes):
    return np.isin(a, np.asarray([int(c) for c in classes]))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class ExposureGrid:
    """Per-year raster stack. All arrays share one ``(nrows, ncols)`` shape."""

    year: int
    region: np.ndarray
    landuse: np.ndarray
    population: np.ndarray
    slope: np.ndarray
    suitability_cereal: np.ndarray
    suitability_alfalfa: np.ndarray
    dist_urban_centre: np.ndarray
    soil_sealing: np.ndarray
    built_year: np.ndarray
    gdp: np.ndarray | None = None
    wealth: np.ndarray | None = None
    cellsize: float = 100.0

    @property
    def shape(self):
        return self.region.shape

    def region_ids(self) -> list[int]:
        return [int(r) for r in np.unique(self.region)]

    def copy(self, **changes) -> "ExposureGrid":
        arrays = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, np.ndarray):
                arrays[f.name] = val.copy()
        arrays.update(changes)
        return replace(self, **arrays)


@dataclass
class RegionYear:
    total_population: float
    urban_share: float
    persons_per_household: float
    industry_index: float
    cropland_share: float
    pasture_share: float
    infrastructure_cells: float
    gdp: dict[str, float] = field(default_factory=dict)
    wealth: dict[str, float] = field(default_factory=dict)

    def validate(self, where=""):
        for name in ("urban_share", "cropland_share", "pasture_share"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise BackcastError(f"{where}: {name}={val} outside [0, 1]")
        for name in ("total_population", "persons_per_household", "industry_index",
                     "infrastructure_cells"):
            if getattr(self, name) < 0:
                raise BackcastError(f"{where}: negative target {name}")
        for sector, val in list(self.gdp.items()) + list(self.wealth.items()):
            if val < 0:
                raise BackcastError(f"{where}: negative monetary value for {sector}")


_SCALAR_COLS = ("total_population", "urban_share", "persons_per_household",
                "industry_index", "cropland_share", "pasture_share",
                "infrastructure_cells")
STATS_HEADER = (("region", "year") + _SCALAR_COLS
                + tuple(f"gdp_{s}" for s in GDP_SECTORS)
                + tuple(f"wealth_{s}" for s in WEALTH_SECTORS))


class RegionStats:
    """Historical statistics keyed by ``(region, year)``.

    Years between two tabulated years are interpolated linearly; years
    outside the tabulated range raise ``KeyError``.
    """

    def __init__(self, records: dict[tuple[int, int], RegionYear]):
        self.records = dict(records)
        self._years: dict[int, list[int]] = {}
        for region, year in self.records:
            self._years.setdefault(region, []).append(year)
        for ys in self._years.values():
            ys.sort()

    @property
    def regions(self) -> list[int]:
        return sorted(self._years)

    def years(self, region: int) -> list[int]:
        return list(self._years.get(region, []))

    def covers(self, region: int, year: int) -> bool:
        ys = self._years.get(region)
        return bool(ys) and ys[0] <= year <= ys[-1]

    def get(self, region: int, year: int) -> RegionYear:
        key = (int(region), int(year))
        if key in self.records:
            return self.records[key]
        ys = self._years.get(key[0])
        if not ys or not ys[0] <= year <= ys[-1]:
            raise KeyError(f"no statistics for region {region} in {year}")
        j = int(np.searchsorted(ys, year))
        y0, y1 = ys[j - 1], ys[j]
        w = (year - y0) / (y1 - y0)
        lo, hi = self.records[(key[0], y0)], self.records[(key[0], y1)]

        def mix(a, b):
            return (1 - w) * a + w * b

        return RegionYear(
            **{c: mix(getattr(lo, c), getattr(hi, c)) for c in _SCALAR_COLS},
            gdp={s: mix(lo.gdp.get(s, 0.0), hi.gdp.get(s, 0.0)) for s in GDP_SECTORS},
            wealth={s: mix(lo.wealth.get(s, 0.0), hi.wealth.get(s, 0.0)) for s in WEALTH_SECTORS},
        )

    @classmethod
    def from_csv(cls, path) -> "RegionStats":
        records = {}
        with Path(path).open(newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(STATS_HEADER) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                key = (int(row["region"]), int(row["year"]))
                records[key] = RegionYear(
                    **{c: float(row[c]) for c in _SCALAR_COLS},
                    gdp={s: float(row[f"gdp_{s}"]) for s in GDP_SECTORS},
                    wealth={s: float(row[f"wealth_{s}"]) for s in WEALTH_SECTORS},
                )
        return cls(records)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(STATS_HEADER)
            for (region, year) in sorted(self.records):
                st = self.records[(region, year)]
                writer.writerow(
                    [region, year] + [repr(float(getattr(st, c))) for c in _SCALAR_COLS]
                    + [repr(float(st.gdp.get(s, 0.0))) for s in GDP_SECTORS]
                    + [repr(float(st.wealth.get(s, 0.0))) for s in WEALTH_SECTORS])


@dataclass
class BackcastConfig:
    """Tunables the historical redistribution needs but the method leaves open."""

    # persons per cell given to cells that stop being urban
    rural_density: dict = field(default_factory=lambda: {
        LandUse.INDUSTRY: 2.0, LandUse.INFRASTRUCTURE: 1.0, LandUse.AIRPORT: 0.0,
        LandUse.PORT: 0.0, LandUse.CONSTRUCTION: 1.0, LandUse.CROPLAND: 5.0,
        LandUse.PASTURE: 3.0, LandUse.FOREST: 1.0, LandUse.NATURAL_OTHER: 0.5,
    })
    # ceiling used when rural population has to be added cell by cell
    rural_capacity: float = 60.0
    neighbourhood_radius: int = 8
    slope_cap_deg: float = 30.0
    construction_removed_until: int = 2005
    burnt_removed_until: int = 2000


# ---------------------------------------------------------------- helpers

def urban_centre_distance(region, landuse, population) -> np.ndarray:
    """Distance (in cells) of every cell to its region's urban centre.

    The centre is the population-weighted centroid of the region's urban
    cells; without urban population the plain centroid of urban cells is
    used, and without urban cells the centroid of the whole region.
    """
    nrows, ncols = region.shape
    rows, cols = np.indices(region.shape, dtype=np.float64)
    dist = np.zeros(region.shape)
    for r in np.unique(region):
        m = region == r
        urb = m & (landuse == LandUse.URBAN)
        w = population[urb] if urb.any() else None
        if urb.any() and w.sum() > 0:
            cr, cc = np.average(rows[urb], weights=w), np.average(cols[urb], weights=w)
        elif urb.any():
            cr, cc = rows[urb].mean(), cols[urb].mean()
        else:
            cr, cc = rows[m].mean(), cols[m].mean()
        dist[m] = np.hypot(rows[m] - cr, cols[m] - cc)
    return dist


def suitability_key(suitability, slope, slope_cap=30.0):
    """Agricultural suitability penalized linearly by slope, zero above the cap."""
    return suitability * np.maximum(0.0, 1.0 - slope / slope_cap)


def _order(primary, flat_idx, descending=False, secondary=None, secondary_desc=False):
    """Total order: primary key, optional secondary key, then row-major index."""
    keys = [flat_idx]
    if secondary is not None:
        keys.append(-secondary if secondary_desc else secondary)
    keys.append(-primary if descending else primary)
    return np.lexsort(keys)


# ----------------------------------------------------------- baseline

DEFAULT_DENSITY_CAPS = {
    LandUse.URBAN: math.inf, LandUse.INDUSTRY: 10.0, LandUse.INFRASTRUCTURE: 5.0,
    LandUse.AIRPORT: 0.0, LandUse.PORT: 0.0, LandUse.CONSTRUCTION: 5.0,
    LandUse.CROPLAND: 15.0, LandUse.PASTURE: 10.0, LandUse.FOREST: 5.0,
    LandUse.NATURAL_OTHER: 5.0, LandUse.UNOCCUPIED: 5.0,
}


def limiting_variable(population: float, class_cells: dict, caps: dict) -> dict:
    """Split `population` over land-use classes with per-cell density caps.

    Start from a uniform density over all habitable cells; every class whose
    cap is below the current density is fixed at its cap and taken out, and
    the remainder is spread again over the remaining classes until no cap is
    exceeded. Population left once every class is capped is spread by area.
    """
    remaining = {c: n for c, n in class_cells.items() if n > 0}
    alloc = {c: 0.0 for c in class_cells}
    left = float(population)
    while remaining:
        density = left / sum(remaining.values())
        capped = [c for c in remaining if caps.get(c, math.inf) < density]
        if not capped:
            for c, n in remaining.items():
                alloc[c] = density * n
            return alloc
        for c in capped:
            alloc[c] = caps[c] * remaining.pop(c)
            left -= alloc[c]
    if left > 1e-12 * max(population, 1.0):
        total = sum(n for n in class_cells.values())
        for c, n in class_cells.items():
            alloc[c] += left * n / total
    return alloc


def disaggregate_baseline(coarse_population, landuse, soil_sealing, caps=None):
    """Refine a coarse population grid onto the fine land-use grid.

    Each coarse cell's population is first split over land-use classes by
    :func:`limiting_variable`, then each class's share over its fine cells
    proportionally to soil sealing (uniformly when sealing is all zero).
    """
    caps = {**DEFAULT_DENSITY_CAPS, **(caps or {})}
    coarse = np.asarray(coarse_population, dtype=np.float64)
    landuse = np.asarray(landuse)
    sealing = np.asarray(soil_sealing, dtype=np.float64)
    cr, cc = coarse.shape
    fr, fc = landuse.shape
    if fr % cr or fc % cc or fr // cr != fc // cc:
        raise ValueError("coarse grid must tile the fine grid with square k x k blocks")
    k = fr // cr
    out = np.zeros(landuse.shape)
    habitable = ~_isin(landuse, UNINHABITABLE)
    for i in range(cr):
        for j in range(cc):
            pop = coarse[i, j]
            if pop == 0:
                continue
            if pop < 0:
                raise ValueError(f"negative population in coarse cell ({i}, {j})")
            sl = (slice(i * k, (i + 1) * k), slice(j * k, (j + 1) * k))
            lu, hab, seal = landuse[sl], habitable[sl], sealing[sl]
            if not hab.any():
                raise ValueError(f"coarse cell ({i}, {j}) has population {pop} "
                                 "but no habitable fine cell")
            classes, counts = np.unique(lu[hab], return_counts=True)
            alloc = limiting_variable(
                pop, {LandUse(int(c)): int(n) for c, n in zip(classes, counts)}, caps)
            block = np.zeros((k, k))
            for c, amount in alloc.items():
                cells = hab & (lu == c)
                w = seal[cells]
                block[cells] = amount * (w / w.sum() if w.sum() > 0 else 1.0 / w.size)
            out[sl] = block
    return out


# ------------------------------------------------------------ backcast

def _adjust_count(lu, m, cls, target, dist, flat, removed_to=LandUse.UNOCCUPIED):
    """Remove furthest-first or add nearest-first cells of `cls` in mask `m`."""
    cur = np.flatnonzero((m & (lu == cls)).ravel())
    if target < cur.size:
        order = _order(dist.ravel()[cur], flat[cur], descending=True)
        drop = cur[order[:cur.size - target]]
        lu.ravel()[drop] = removed_to
        return drop
    if target > cur.size:
        cand = np.flatnonzero((m & _isin(lu, UNUTILIZED)).ravel())
        order = _order(dist.ravel()[cand], flat[cand])
        add = cand[order[:target - cur.size]]
        lu.ravel()[add] = cls
    return np.empty(0, dtype=np.int64)


def _adjust_agriculture(lu, m, cls, target, suit, dist, flat, region):
    cur = np.flatnonzero((m & (lu == cls)).ravel())
    if target < cur.size:
        # least suitable first; equal suitability: furthest from centre first
        order = _order(suit.ravel()[cur], flat[cur], secondary=dist.ravel()[cur],
                       secondary_desc=True)
        drop = cur[order[:cur.size - target]]
        lu.ravel()[drop] = LandUse.UNOCCUPIED
    elif target > cur.size:
        cand = np.flatnonzero((m & _isin(lu, UNUTILIZED)).ravel())
        need = target - cur.size
        if cand.size < need:
            raise BackcastError(
                f"region {region}: {LandUse(cls).name.lower()} needs {need} more cells, "
                f"only {cand.size} available (shortfall {need - cand.size})")
        order = _order(suit.ravel()[cand], flat[cand], descending=True,
                       secondary=dist.ravel()[cand])
        lu.ravel()[cand[order[:need]]] = cls


def _window_counts(mask, r):
    """Number of true cells in the (2r+1)^2 window around every cell."""
    p = np.pad(mask.astype(np.int64), ((r + 1, r), (r + 1, r)))
    s = p.cumsum(0).cumsum(1)
    n = 2 * r + 1
    return s[n:, n:] - s[:-n, n:] - s[n:, :-n] + s[:-n, :-n]


def _refill_natural(lu, m, radius):
    """Give vacated cells the dominant natural cover of their nearest ring."""
    todo = m & (lu == LandUse.UNOCCUPIED)
    if not todo.any():
        return
    forest = m & (lu == LandUse.FOREST)
    other = m & (lu == LandUse.NATURAL_OTHER)
    result = np.full(lu.shape, -1, dtype=np.int64)
    pending = todo.copy()
    for r in range(1, radius + 1):
        if not pending.any():
            break
        nf = _window_counts(forest, r)
        no = _window_counts(other, r)
        found = pending & (nf + no > 0)
        # ties between the two natural classes go to forest
        result[found & (nf >= no)] = LandUse.FOREST
        result[found & (nf < no)] = LandUse.NATURAL_OTHER
        pending &= ~found
    result[pending] = LandUse.FOREST
    lu[todo] = result[todo]


def _remove_furthest(pop, cells, dist, flat, amount):
    """Take `amount` persons from `cells`, emptying furthest cells first."""
    order = _order(dist.ravel()[cells], flat[cells], descending=True)
    cells = cells[order]
    cum = np.cumsum(pop.ravel()[cells])
    k = int(np.searchsorted(cum, amount, side="right"))
    emptied = cells[:k]
    pop.ravel()[emptied] = 0.0
    if k < cells.size:
        rest = amount - (cum[k - 1] if k else 0.0)
        pop.ravel()[cells[k]] -= rest
    return emptied


def backcast(baseline: ExposureGrid, stats: RegionStats, target_year: int,
             config: BackcastConfig | None = None) -> ExposureGrid:
    """Reconstruct land use and population for `target_year`.

    Rules are applied per region, in order: household-size scaling of urban
    population, furthest-first urban removal, industry and infrastructure
    resizing, removal of reservoirs/airports/construction/burnt areas that
    postdate the target year, suitability-ordered cropland and pasture
    resizing, natural refill of vacated cells, and finally rural population
    rescaling to the regional total. GDP and wealth are not carried over;
    run :func:`disaggregate_economy` on the result.
    """
    config = config or BackcastConfig()
    if target_year > baseline.year:
        raise ValueError("backcast only goes back in time")
    if target_year == baseline.year:
        return baseline.copy()

    lu = baseline.landuse.copy()
    pop = baseline.population.astype(np.float64).copy()
    out = baseline.copy(year=target_year, landuse=lu, population=pop, gdp=None, wealth=None)
    for region in baseline.region_ids():
        _backcast_region(baseline, out, region, stats, target_year, config)
    return out


def _backcast_region(base: ExposureGrid, out: ExposureGrid, region: int,
                     stats: RegionStats, year: int, config: BackcastConfig):
    lu, pop = out.landuse, out.population
    m = base.region == region
    dist = base.dist_urban_centre
    flat = np.arange(lu.size)
    st_base = stats.get(region, base.year)
    st = stats.get(region, year)
    st.validate(f"region {region}, {year}")
    hh = st.persons_per_household / st_base.persons_per_household

    # (1)-(2) urban population and fabric
    urban = np.flatnonzero((m & (lu == LandUse.URBAN)).ravel())
    pop.ravel()[urban] *= hh
    urban_target = st.urban_share * st.total_population
    u_pop = pop.ravel()[urban].sum()
    converted = np.zeros(lu.size, dtype=bool)
    if u_pop > urban_target:
        emptied = _remove_furthest(pop, urban, dist, flat, u_pop - urban_target)
        lu.ravel()[emptied] = LandUse.UNOCCUPIED
        converted[emptied] = True
    elif u_pop > 0:
        pop.ravel()[urban] *= urban_target / u_pop
    elif urban_target > 0:
        LOG.warning("region %s, %s: no urban cells for urban population %.1f; "
                    "counted as rural", region, year, urban_target)

    # (3) industry, proportional to industrial production per capita
    n_ind = int((m & (lu == LandUse.INDUSTRY)).sum())
    ratio = st.industry_index / st_base.industry_index if st_base.industry_index > 0 else 1.0
    _adjust_count(lu, m, LandUse.INDUSTRY, max(0, round_half_up(n_ind * ratio)), dist, flat)
    # (4) reservoirs built after the target year
    lu[m & (lu == LandUse.RESERVOIR) & (base.built_year > year)] = LandUse.UNOCCUPIED
    # (5) transport infrastructure
    _adjust_count(lu, m, LandUse.INFRASTRUCTURE,
                  max(0, round_half_up(st.infrastructure_cells)), dist, flat)
    # (6) airports built after the target year
    lu[m & (lu == LandUse.AIRPORT) & (base.built_year > year)] = LandUse.UNOCCUPIED
    # (7) construction sites
    if year <= config.construction_removed_until:
        lu[m & (lu == LandUse.CONSTRUCTION)] = LandUse.UNOCCUPIED
    # (8)-(9) agriculture, by suitability
    land = int((m & (lu != LandUse.WATER)).sum())
    cereal = suitability_key(base.suitability_cereal, base.slope, config.slope_cap_deg)
    alfalfa = suitability_key(base.suitability_alfalfa, base.slope, config.slope_cap_deg)
    _adjust_agriculture(lu, m, LandUse.CROPLAND, round_half_up(st.cropland_share * land),
                        cereal, dist, flat, region)
    _adjust_agriculture(lu, m, LandUse.PASTURE, round_half_up(st.pasture_share * land),
                        alfalfa, dist, flat, region)
    # (10) burnt areas
    if year <= config.burnt_removed_until:
        lu[m & (lu == LandUse.BURNT)] = LandUse.UNOCCUPIED
    # (11) natural cover on vacated land
    _refill_natural(lu, m, config.neighbourhood_radius)

    # (12) rural population
    lu_flat, pop_flat = lu.ravel(), pop.ravel()
    mflat = m.ravel()
    uninhabitable = mflat & _isin(lu_flat, UNINHABITABLE)
    pop_flat[uninhabitable] = 0.0
    conv = np.flatnonzero(converted)
    density = np.array([config.rural_density.get(LandUse(c), 0.0) for c in range(len(LandUse))])
    rural = mflat & (lu_flat != LandUse.URBAN) & ~uninhabitable
    keep = rural & ~converted
    pop_flat[keep] *= hh
    pop_flat[conv] = density[lu_flat[conv]]

    urban_now = pop_flat[mflat & (lu_flat == LandUse.URBAN)].sum()
    rural_target = st.total_population - urban_now
    if rural_target < 0:
        raise BackcastError(f"region {region}, {year}: urban population exceeds total")
    cells = np.flatnonzero(rural)
    have = pop_flat[cells].sum()
    if have > rural_target:
        _remove_furthest(pop, cells, dist, flat, have - rural_target)
    elif have < rural_target:
        if cells.size == 0:
            raise BackcastError(f"region {region}, {year}: no habitable cell for "
                                f"{rural_target - have:.1f} rural persons")
        deficit = rural_target - have
        order = cells[_order(dist.ravel()[cells], flat[cells])]
        room = np.maximum(config.rural_capacity - pop_flat[order], 0.0)
        cum = np.cumsum(room)
        k = int(np.searchsorted(cum, deficit, side="left"))
        if k < order.size:
            pop_flat[order[:k]] += room[:k]
            pop_flat[order[k]] += deficit - (cum[k - 1] if k else 0.0)
        else:
            pop_flat[order] += room
            pop_flat[order] += (deficit - cum[-1]) / order.size
            LOG.warning("region %s, %s: rural capacity exhausted, spreading %.1f persons",
                        region, year, deficit - cum[-1])


# ------------------------------------------------------------ economy

# land-use classes where the non-population half of a sector is concentrated
SECTOR_CLASSES = {
    "agriculture": AGRICULTURAL,
    "forestry": (LandUse.FOREST,),
    "industry": (LandUse.INDUSTRY,),
    "services": (LandUse.URBAN, LandUse.AIRPORT, LandUse.PORT),
    "infrastructure": (LandUse.URBAN, LandUse.AIRPORT, LandUse.PORT,
                       LandUse.INFRASTRUCTURE),
}


def _spread(total, pop, prop_cells, uniform_cells, share_prop, where):
    """Allocate `total`: `share_prop` by population over `prop_cells`, rest uniformly."""
    out = np.zeros(pop.shape)
    if total == 0:
        return out
    if not uniform_cells.any():
        raise EconomyError(f"{where}: total {total:g} but no eligible cell")
    prop_part = total * share_prop
    w = pop[prop_cells]
    if prop_part > 0 and w.sum() > 0:
        out[prop_cells] += prop_part * w / w.sum()
    else:
        # nobody lives on the eligible cells: that half goes uniform too
        prop_part = 0.0
    out[uniform_cells] += (total - prop_part) / uniform_cells.sum()
    return out


def disaggregate_economy(grid: ExposureGrid, stats: RegionStats) -> ExposureGrid:
    """Spread regional sectoral GDP and wealth over the grid's cells."""
    gdp = np.zeros(grid.shape)
    wealth = np.zeros(grid.shape)
    lu, pop = grid.landuse, grid.population
    for region in grid.region_ids():
        m = grid.region == region
        st = stats.get(region, grid.year)
        for sector in WEALTH_SECTORS:
            where = f"region {region}, {grid.year}, {sector}"
            if sector in ("agriculture", "forestry"):
                cells = m & _isin(lu, SECTOR_CLASSES[sector])
                args = (cells, cells, 0.5)
            elif sector in ("industry", "services"):
                args = (m, m & _isin(lu, SECTOR_CLASSES[sector]), 0.5)
            elif sector == "dwellings":
                args = (m, m, 1.0)
            else:
                args = (m, m & _isin(lu, SECTOR_CLASSES[sector]), 0.0)
            if sector in st.gdp:
                gdp += _spread(st.gdp[sector], pop, *args, where)
            wealth += _spread(st.wealth.get(sector, 0.0), pop, *args, where)
    return grid.copy(gdp=gdp, wealth=wealth)


# ------------------------------------------------------------ queries

@dataclass(frozen=True)
class Exposure:
    population: float
    gdp: float
    wealth: float
    cell_count: int

    @property
    def empty(self) -> bool:
        return self.cell_count == 0


def exposure_in(footprint, grid: ExposureGrid) -> Exposure:
    """Sum population, GDP and wealth over the footprint's cells."""
    cells = np.asarray(footprint.cells, dtype=np.int64).reshape(-1, 2)
    if cells.size == 0:
        return Exposure(0.0, 0.0, 0.0, 0)
    r, c = cells[:, 0], cells[:, 1]
    nr, nc = grid.shape
    if (r < 0).any() or (r >= nr).any() or (c < 0).any() or (c >= nc).any():
        raise IndexError("footprint cell outside the grid")

    def total(arr):
        return float(arr[r, c].sum()) if arr is not None else math.nan

    return Exposure(total(grid.population), total(grid.gdp), total(grid.wealth), len(cells))


def regional_totals(grid: ExposureGrid) -> dict[int, Exposure]:
    out = {}
    for region in grid.region_ids():
        m = grid.region == region
        out[region] = Exposure(float(grid.population[m].sum()),
                               float(grid.gdp[m].sum()) if grid.gdp is not None else math.nan,
                               float(grid.wealth[m].sum()) if grid.wealth is not None else math.nan,
                               int(m.sum()))
    return out
