"""Dependence table of relative damages and gap-filling by conditional means."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .copulas import CopulaFitError, CopulaModel, conditional_sample, pseudo_observations, \
    select_model
from .events import HEADER, event_row
from .normalize import RELATIVE_VARIABLES, NormalizedRecord
from .streams import stream

LOG = logging.getLogger(__name__)

VARIABLES = tuple(RELATIVE_VARIABLES)  # area, fatalities, affected, losses_gdp, losses_wealth
PAIRS = tuple(p for p in combinations(VARIABLES, 2) if set(p) != {"losses_gdp", "losses_wealth"})
N_CONDITIONAL = 10_000


def pair_key(a: str, b: str) -> tuple[str, str]:
    """Canonical (ordered) pair name."""
    if (a, b) in PAIRS:
        return a, b
    if (b, a) in PAIRS:
        return b, a
    raise KeyError(f"no dependence pair for {a!r} and {b!r}")


@dataclass
class DependenceTable:
    models: dict[tuple[str, str], CopulaModel]

    def __getitem__(self, pair):
        return self.models[pair_key(*pair)]

    def has(self, a, b) -> bool:
        try:
            return pair_key(a, b) in self.models
        except KeyError:
            return False

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("pair", "family", "theta", "spearman_rho", "cvm_statistic", "n"))
            for pair in PAIRS:
                if pair in self.models:
                    m = self.models[pair]
                    w.writerow(("&".join(pair), m.family, repr(m.theta), repr(m.spearman_rho),
                                repr(m.cvm_statistic), m.n))

    @classmethod
    def from_csv(cls, path) -> "DependenceTable":
        models = {}
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                pair = tuple(row["pair"].split("&"))
                models[pair] = CopulaModel(row["family"], float(row["theta"]),
                                           float(row["spearman_rho"]),
                                           float(row["cvm_statistic"]), int(row["n"]))
        return cls(models)


def fit_dependence(relative: dict[str, dict[str, float | None]], pairs=PAIRS) -> DependenceTable:
    """Select a copula for every pair from events where both values are known."""
    models = {}
    for a, b in pairs:
        xs, ys = [], []
        for values in relative.values():
            if values.get(a) is not None and values.get(b) is not None:
                xs.append(values[a])
                ys.append(values[b])
        try:
            model = select_model(pseudo_observations(xs), pseudo_observations(ys))
        except (CopulaFitError, ValueError) as exc:
            raise CopulaFitError(f"pair {a}&{b}: {exc}") from None
        LOG.info("%s&%s: %s theta=%.4g rho=%.3f n=%d", a, b, model.family, model.theta,
                 model.spearman_rho, model.n)
        models[(a, b)] = model
    return DependenceTable(models)


class EmpiricalMarginal:
    """Observed values with the rank/(n+1) plotting positions."""

    def __init__(self, values):
        x = np.sort(np.asarray(values, dtype=np.float64))
        if x.size < 2:
            raise ValueError("marginal needs at least two observed values")
        self.sorted = x
        self.positions = np.arange(1, x.size + 1) / (x.size + 1)

    @property
    def n(self):
        return self.sorted.size

    def cdf(self, x: float) -> float:
        """Mid-rank pseudo-observation of `x` within the observed sample."""
        below = np.searchsorted(self.sorted, x, side="left")
        upto = np.searchsorted(self.sorted, x, side="right")
        if upto > below:
            rank = below + (upto - below + 1) / 2.0
        else:
            rank = below + 0.5
        return float(np.clip(rank / (self.n + 1), 1.0 / (2 * (self.n + 1)),
                             1.0 - 1.0 / (2 * (self.n + 1))))

    def quantile(self, p):
        """Linear interpolation between order statistics, flat beyond them."""
        return np.interp(p, self.positions, self.sorted)

    @property
    def mean(self) -> float:
        return float(self.sorted.mean())


def marginals_from(relative: dict[str, dict[str, float | None]]) -> dict[str, EmpiricalMarginal]:
    out = {}
    for var in VARIABLES:
        vals = [v[var] for v in relative.values() if v.get(var) is not None]
        if len(vals) >= 2:
            out[var] = EmpiricalMarginal(vals)
    return out


def choose_conditioning(target: str, available, table: DependenceTable) -> str | None:
    """Available variable with the largest |Spearman rho| against `target`."""
    best, best_rho = None, -1.0
    for var in VARIABLES:
        if var not in available or var == target or not table.has(target, var):
            continue
        rho = abs(table[(target, var)].spearman_rho)
        if rho > best_rho:
            best, best_rho = var, rho
    return best


@dataclass
class FilledEvent:
    record: NormalizedRecord
    values: dict[str, float]               # absolute normalized values, observed or filled
    filled: dict[str, str] = field(default_factory=dict)   # variable -> conditioning variable

    @property
    def event_id(self):
        return self.record.event_id


@dataclass
class GapFillResult:
    events: list[FilledEvent]
    samples: dict[tuple[str, str], np.ndarray]
    skipped: list[tuple[str, str]]

    def by_id(self) -> dict[str, FilledEvent]:
        return {e.event_id: e for e in self.events}


def gap_fill(records, relative: dict[str, dict[str, float | None]],
             potential: dict[str, dict[str, float]], table: DependenceTable,
             seed: int, n_samples: int = N_CONDITIONAL, keep_samples: int | None = None,
             marginals: dict[str, EmpiricalMarginal] | None = None) -> GapFillResult:
    """Fill missing relative damages with conditional-copula means.

    Parameters
    ----------
    records : iterable of NormalizedRecord
    relative : event id -> relative damage per variable (None when missing).
        Events absent from this mapping had an empty footprint.
    potential : event id -> potential exposure per variable.
    table : fitted DependenceTable.
    seed : master seed; each (event, variable) gets its own stream.
    keep_samples : number of absolute samples retained per filled value
        (all of them by default).

    Returns
    -------
    GapFillResult
    """
    if marginals is None:
        marginals = marginals_from(relative)
    keep = n_samples if keep_samples is None else min(keep_samples, n_samples)
    out, samples, skipped = [], {}, []
    for rec in records:
        eid = rec.event_id
        if eid not in relative:
            skipped.append((eid, "empty footprint"))
            continue
        rel = relative[eid]
        available = {v for v in VARIABLES if rel.get(v) is not None}
        if not available:
            skipped.append((eid, "no variable available"))
            continue
        values, filled = {}, {}
        problem = None
        for var in VARIABLES:
            if var in available:
                values[var] = float(getattr(rec, RELATIVE_VARIABLES[var][0]))
                continue
            cond = choose_conditioning(var, available, table)
            if cond is None or var not in marginals or cond not in marginals:
                problem = f"no conditioning variable for {var}"
                break
            # all five families are exchangeable, so pair orientation does not matter
            model = table[(var, cond)]
            u = marginals[cond].cdf(rel[cond])
            rng = stream(seed, "gapfill", eid, var)
            draws = marginals[var].quantile(conditional_sample(model, u, n_samples, rng))
            pot = potential[eid][var]
            values[var] = float(draws.mean()) * pot
            filled[var] = cond
            samples[(eid, var)] = (draws[:keep] * pot).astype(np.float64)
        if problem:
            skipped.append((eid, problem))
            continue
        out.append(FilledEvent(rec, values, filled))
    for eid, why in skipped:
        LOG.warning("gap-fill skipped %s: %s", eid, why)
    return GapFillResult(out, samples, skipped)


FILLED_COLUMNS = tuple(f"{v}_filled" for v in VARIABLES)
FILLED_HEADER = HEADER + FILLED_COLUMNS + ("filled_flags",)


def write_filled(result: GapFillResult, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FILLED_HEADER)
        for fe in result.events:
            w.writerow(event_row(fe.record.event) + [repr(float(fe.values[v])) for v in VARIABLES]
                       + [";".join(v for v in VARIABLES if v in fe.filled)])


def read_filled_values(path) -> dict[str, tuple[dict[str, float], set[str]]]:
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            vals = {v: float(row[f"{v}_filled"]) for v in VARIABLES}
            flags = set(filter(None, row["filled_flags"].split(";")))
            out[row["id"]] = (vals, flags)
    return out


def save_samples(samples: dict[tuple[str, str], np.ndarray], path) -> None:
    """Write samples as one ``.npy`` matrix plus a ``.keys.csv`` row index.

    Plain ``.npy`` is used instead of ``.npz`` because zip members carry
    write times, which would break byte-identical reruns.
    """
    path = Path(path)
    keys = sorted(samples)
    width = max((samples[k].size for k in keys), default=0)
    mat = np.full((len(keys), width), np.nan)
    for i, k in enumerate(keys):
        mat[i, :samples[k].size] = samples[k]
    np.save(path, mat)
    with path.with_suffix(".keys.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("event_id", "variable"))
        w.writerows(keys)


def load_samples(path) -> dict[tuple[str, str], np.ndarray]:
    path = Path(path)
    mat = np.load(path)
    with path.with_suffix(".keys.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    out = {}
    for i, (eid, var) in enumerate(rows):
        row = mat[i]
        out[(eid, var)] = row[np.isfinite(row)]
    return out


def relative_table(records, baseline_exposures, footprint_areas):
    """Relative damages and potential exposures for events with a footprint.

    ``baseline_exposures`` and ``footprint_areas`` are keyed by event id;
    events without an entry (or with an empty footprint) are left out.
    """
    from .normalize import potential_exposure, relative_damages
    rel, pot = {}, {}
    for rec in records:
        eid = rec.event_id
        area = footprint_areas.get(eid, 0.0)
        if eid not in baseline_exposures or not area > 0:
            continue
        rel[eid] = relative_damages(rec, baseline_exposures[eid], area)
        pot[eid] = potential_exposure(baseline_exposures[eid], area)
    return rel, pot


def marginal_mean_fill(relative, potential, var, marginals) -> dict[str, float]:
    """Baseline estimator: every gap gets the marginal mean relative damage."""
    m = marginals[var].mean
    return {eid: m * potential[eid][var] for eid, r in relative.items() if r.get(var) is None
            and math.isfinite(m)}
