"""Synthetic catalogs with known truth, and brute-force oracles.

Nothing here is used by the production stages; the oracles deliberately
re-derive densities and likelihoods instead of calling the main code.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .events import FLOOD_TYPES, FloodEvent
from .normalize import Factors, NormalizedRecord

REL_VARIABLES = ("area", "fatalities", "affected", "losses_wealth")


class SpecError(ValueError):
    pass


class OracleError(RuntimeError):
    pass


# ------------------------------------------------------ synthetic catalog

@dataclass
class SyntheticSpec:
    """Recipe for a synthetic event catalog.

    ``pairs`` maps a variable to ``(family, theta)`` of its copula with the
    root variable `root`; the other variables are conditionally independent
    given the root. ``thinning`` maps ``(period start, quintile)`` to the
    probability of keeping an event of that class.
    """
    n_events: int = 1000
    b_true: float = 0.0
    start_year: int = 1870
    end_year: int = 2016
    root: str = "affected"
    pairs: dict = field(default_factory=lambda: {
        "area": ("frank", 3.0), "fatalities": ("gumbel", 1.5),
        "losses_wealth": ("clayton", 2.0)})
    # scipy.stats distributions of the relative damages
    marginals: dict = field(default_factory=lambda: {
        "area": ("beta", (0.8, 3.0)),
        "fatalities": ("lognorm", (1.5, 0, 2e-6)),
        "affected": ("lognorm", (1.5, 0, 5e-3)),
        "losses_wealth": ("lognorm", (1.5, 0, 1e-3)),
    })
    missing: dict = field(default_factory=dict)
    thinning: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self):
        if not math.isfinite(self.b_true):
            raise SpecError("b_true must be finite")
        if self.n_events < 1:
            raise SpecError("n_events must be positive")
        for name, p in list(self.missing.items()) + list(self.thinning.items()):
            if not 0.0 <= p <= 1.0:
                raise SpecError(f"probability {name}={p} outside [0, 1]")
        for var in self.pairs:
            if var == self.root or var not in REL_VARIABLES:
                raise SpecError(f"bad pair variable {var!r}")


@dataclass
class SyntheticTruth:
    years: np.ndarray
    relative: dict[str, np.ndarray]       # full relative damages
    potential: dict[str, np.ndarray]      # potential exposure per variable
    observed: dict[str, np.ndarray]       # boolean availability after masking
    quintile: np.ndarray                  # severity class of the full catalog
    kept: np.ndarray                      # survived thinning
    b_true: float


def year_probabilities(b, start, end):
    x = np.arange(end - start + 1)
    w = np.exp(b * (x - x.mean()))
    return w / w.sum()


def _uniforms(spec: SyntheticSpec, n, rng):
    """Dependent uniforms: root first, every other variable drawn from its pair copula."""
    from .copulas import CopulaModel
    u = {spec.root: rng.random(n)}
    for var in REL_VARIABLES:
        if var == spec.root:
            continue
        if var in spec.pairs:
            fam, theta = spec.pairs[var]
            u[var] = CopulaModel(fam, theta).hinv(rng.random(n), u[spec.root])
        else:
            u[var] = rng.random(n)
    return u


def _severity_quintiles(rel):
    # average of descending ranks, five near-equal groups, least severe first
    n = len(rel["area"])
    avg = sum(stats.rankdata(-rel[v]) for v in REL_VARIABLES) / len(REL_VARIABLES)
    order = np.lexsort((-np.arange(n), avg))[::-1]
    q = np.empty(n, dtype=int)
    for k, chunk in enumerate(np.array_split(order, 5), start=1):
        q[chunk] = k
    return q


def generate_catalog(spec: SyntheticSpec):
    """Draw a catalog; returns ``(events, records, relative, potential, truth)``.

    `records` carry unit normalization factors so normalized values equal
    reported ones; `relative`/`potential` are in the form gap filling uses,
    restricted to surviving events and with masked values set to None.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_events
    p = year_probabilities(spec.b_true, spec.start_year, spec.end_year)
    years = spec.start_year + rng.choice(p.size, size=n, p=p)
    u = _uniforms(spec, n, rng)
    rel = {}
    for var in REL_VARIABLES:
        name, args = spec.marginals[var]
        rel[var] = getattr(stats, name).ppf(np.clip(u[var], 1e-12, 1 - 1e-12), *args)
    rel["area"] = np.clip(rel["area"], 1e-6, None)
    pop = np.exp(rng.normal(11.0, 1.0, n))
    pot = {
        "area": np.exp(rng.normal(5.0, 1.0, n)),
        "fatalities": pop, "affected": pop,
        "losses_gdp": pop * 3.0e4,
        "losses_wealth": pop * 1.2e5,
    }
    rel["losses_gdp"] = rel["losses_wealth"] * pot["losses_wealth"] / pot["losses_gdp"]
    quint = _severity_quintiles(rel)

    kept = np.ones(n, dtype=bool)
    for (start, q), keep_p in spec.thinning.items():
        sel = (years >= start) & (years <= start + 29) & (quint == q)
        kept[sel] &= rng.random(sel.sum()) < keep_p

    observed = {v: rng.random(n) >= spec.missing.get(v, 0.0) for v in REL_VARIABLES}
    none_left = ~np.any(np.column_stack([observed[v] for v in REL_VARIABLES]), axis=1)
    for i in np.flatnonzero(none_left):
        observed[REL_VARIABLES[rng.integers(len(REL_VARIABLES))]][i] = True
    observed["losses_gdp"] = observed["losses_wealth"]

    events, records, relative, potential = [], [], {}, {}
    for i in np.flatnonzero(kept):
        eid = f"S{i:06d}"
        ftype = FLOOD_TYPES[int(rng.integers(len(FLOOD_TYPES)))]

        def val(var):
            return float(rel[var][i] * pot[var][i]) if observed[var][i] else None

        ev = FloodEvent(eid, "XX", int(years[i]), 1 + int(rng.integers(12)), ftype, ("1",),
                        area_km2=val("area"), fatalities=val("fatalities"),
                        persons_affected=val("affected"), losses_eur2011=val("losses_wealth"))
        events.append(ev)
        records.append(NormalizedRecord(ev, Factors(), ev.fatalities, ev.persons_affected,
                                        ev.losses_eur2011, ev.losses_eur2011, ev.area_km2))
        relative[eid] = {v: (float(rel[v][i]) if observed[v][i] else None)
                         for v in REL_VARIABLES + ("losses_gdp",)}
        potential[eid] = {v: float(pot[v][i]) for v in pot}
    truth = SyntheticTruth(years, rel, pot, observed, quint, kept, spec.b_true)
    return events, records, relative, potential, truth


# --------------------------------------------- conditional-mean quadrature

def _density(family, theta):
    """Copula density from textbook formulas, independent of the main module.

    Archimedean families use c(u,v) = psi''(phi(u)+phi(v)) phi'(u) phi'(v).
    """
    if family == "gaussian":
        r = theta

        def c(u, v):
            x, y = stats.norm.ppf(u), stats.norm.ppf(v)
            joint = stats.multivariate_normal.pdf([x, y], cov=[[1, r], [r, 1]])
            return joint / (stats.norm.pdf(x) * stats.norm.pdf(y))
        return c
    if family == "plackett":
        t = theta

        def c(u, v):
            num = t * (1 + (t - 1) * (u + v - 2 * u * v))
            den = ((1 + (t - 1) * (u + v)) ** 2 - 4 * t * (t - 1) * u * v) ** 1.5
            return num / den
        return c
    if family == "clayton":
        phi = lambda t: (t ** -theta - 1) / theta
        dphi = lambda t: -t ** (-theta - 1)
        d2psi = lambda s: (1 + theta) * (1 + theta * s) ** (-1 / theta - 2)
    elif family == "gumbel":
        phi = lambda t: (-math.log(t)) ** theta
        dphi = lambda t: -theta * (-math.log(t)) ** (theta - 1) / t

        def d2psi(s):
            a = s ** (1 / theta)
            return math.exp(-a) * (a * a / (theta * theta * s * s)
                                   - (1 / theta) * (1 / theta - 1) * a / (s * s))
    elif family == "frank":
        if abs(theta) < 1e-10:
            return lambda u, v: 1.0
        k = math.expm1(-theta)
        phi = lambda t: -math.log(math.expm1(-theta * t) / k)
        dphi = lambda t: theta * math.exp(-theta * t) / math.expm1(-theta * t)

        def d2psi(s):
            g = 1 + k * math.exp(-s)
            return -k * math.exp(-s) / (theta * g * g)
    else:
        raise OracleError(f"unknown family {family!r}")

    def c(u, v):
        return d2psi(phi(u) + phi(v)) * dphi(u) * dphi(v)
    return c


def conditional_mean_oracle(model, u: float, epsabs: float = 1e-9) -> float:
    """E[V | U=u] as the integral of v times the copula density over (0, 1)."""
    if model.family == "frank" and abs(model.theta) < 1e-10:
        return 0.5
    c = _density(model.family, model.theta)
    f = lambda v: v * c(u, v)
    g = lambda v: c(u, v)
    pts = sorted({u, 1.0 - u})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            num, _ = integrate.quad(f, 0.0, 1.0, points=pts, epsabs=epsabs, epsrel=1e-10,
                                    limit=500)
            mass, _ = integrate.quad(g, 0.0, 1.0, points=pts, epsabs=epsabs, epsrel=1e-10,
                                     limit=500)
        except integrate.IntegrationWarning as exc:
            raise OracleError(f"quadrature failed for {model.family} theta={model.theta}, "
                              f"u={u}: {exc}") from None
    if abs(mass - 1.0) > 1e-6:
        raise OracleError(f"conditional density integrates to {mass}, not 1")
    return num


def gaussian_conditional_mean(rho, u):
    """Closed form: V = Phi(rho x + sqrt(1-rho^2) Z) averages to Phi(rho x / sqrt(2 - rho^2))."""
    return float(stats.norm.cdf(rho * stats.norm.ppf(u) / math.sqrt(2 - rho * rho)))


# ------------------------------------------------------- GLM grid oracle

def _loglik_grid(y, x, c_grid, b_grid, xbar):
    # Poisson log-likelihood up to the y! term, on centred x
    best = (-math.inf, 0, 0)
    xc = x - xbar
    sy, sxy = y.sum(), (y * xc).sum()
    for j, b in enumerate(b_grid):
        e = np.exp(b * xc).sum()
        ll = sy * c_grid + b * sxy - np.exp(c_grid) * e
        i = int(np.argmax(ll))
        if ll[i] > best[0]:
            best = (float(ll[i]), i, j)
    return best


def glm_grid_oracle(values, b_bounds=(-0.5, 0.5), c_halfwidth=5.0):
    """Brute-force maximizer of the Poisson log-likelihood of ``a + b x``.

    A coarse grid (step 1e-2) is refined three times by a factor of 100
    around the incumbent, ending at 1e-8 in both coordinates. The search
    runs on the centred intercept; ``a`` is reported at x = 0.
    """
    y = np.asarray(getattr(values, "values", values), dtype=np.float64)
    x = np.arange(y.size, dtype=np.float64)
    if not np.any(y > 0):
        raise OracleError("all-zero series")
    xbar = x.mean()
    c0 = math.log(y.mean())
    step = 1e-2
    b_grid = np.arange(b_bounds[0], b_bounds[1] + step / 2, step)
    c_grid = c0 + np.arange(-c_halfwidth, c_halfwidth + step / 2, step)
    _, i, j = _loglik_grid(y, x, c_grid, b_grid, xbar)
    if i in (0, c_grid.size - 1) or j in (0, b_grid.size - 1):
        raise OracleError("optimum on the grid boundary; widen the bounds")
    c, b = c_grid[i], b_grid[j]
    for _ in range(3):
        new = step / 100
        offs = np.arange(-2 * step, 2 * step + new / 2, new)
        # the window follows the optimum until it is interior
        for _ in range(100):
            _, i, j = _loglik_grid(y, x, c + offs, b + offs, xbar)
            c, b = c + offs[i], b + offs[j]
            if 0 < i < offs.size - 1 and 0 < j < offs.size - 1:
                break
        else:
            raise OracleError("refinement window did not settle")
        step = new
    return c - b * xbar, b
