"""One-parameter bivariate copulas, pseudo-likelihood fitting and
Cramér-von Mises model selection.

All five families are exchangeable, so ``h(v | u)`` also serves for
``h(u | v)`` with the arguments swapped.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special, stats

from . import kernels

LOG = logging.getLogger(__name__)

FAMILIES = ("gaussian", "gumbel", "clayton", "frank", "plackett")

_TINY = 1e-300


class CopulaFitError(RuntimeError):
    pass


class InversionError(RuntimeError):
    pass


class BoundaryWarning(UserWarning):
    """Fitted parameter sits on the edge of the search interval."""


def _prep(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u, v = np.broadcast_arrays(u, v)
    return u, v


def _with_margins(out, u, v):
    """Impose C(u,0)=C(0,v)=0, C(u,1)=u, C(1,v)=v exactly."""
    out = np.where(v >= 1.0, u, out)
    out = np.where(u >= 1.0, v, out)
    out = np.where((u <= 0.0) | (v <= 0.0), 0.0, out)
    return np.clip(out, 0.0, np.minimum(u, v))


def _h_edges(out, v):
    out = np.where(v <= 0.0, 0.0, out)
    out = np.where(v >= 1.0, 1.0, out)
    return np.clip(out, 0.0, 1.0)


def _open(x):
    return np.clip(x, 1e-300, 1.0 - 1e-16)


# ------------------------------------------------------------- gaussian

def _bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF through Owen's T function."""
    h = np.where(h == 0.0, 1e-150, h)
    k = np.where(k == 0.0, 1e-150, k)
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
        beta = np.where((h * k > 0) | ((h * k == 0) & (h + k >= 0)), 0.0, 0.5)
        out = (0.5 * special.ndtr(h) + 0.5 * special.ndtr(k)
               - special.owens_t(h, ah) - special.owens_t(k, ak) - beta)
    return out


class Gaussian:
    name = "gaussian"
    bounds = (-0.999, 0.999)
    independence = 0.0

    @staticmethod
    def cdf(u, v, rho):
        u, v = _prep(u, v)
        x, y = special.ndtri(_open(u)), special.ndtri(_open(v))
        if rho == 0.0:
            out = u * v
        else:
            out = _bvn_cdf(x, y, rho)
        return _with_margins(out, u, v)

    @staticmethod
    def logpdf(u, v, rho):
        u, v = _prep(u, v)
        x, y = special.ndtri(_open(u)), special.ndtri(_open(v))
        r2 = 1.0 - rho * rho
        return -0.5 * math.log(r2) - (rho * rho * (x * x + y * y) - 2 * rho * x * y) / (2 * r2)

    @staticmethod
    def h(v, u, rho):
        u, v = _prep(u, v)
        x, y = special.ndtri(_open(u)), special.ndtri(_open(v))
        out = special.ndtr((y - rho * x) / math.sqrt(1.0 - rho * rho))
        return _h_edges(out, v)

    @staticmethod
    def hinv(w, u, rho):
        w, u = _prep(w, u)
        x = special.ndtri(_open(u))
        return special.ndtr(rho * x + math.sqrt(1.0 - rho * rho) * special.ndtri(w))


# -------------------------------------------------------------- clayton

def _clayton_log_sum(u, v, theta):
    """log(u^-theta + v^-theta - 1), stable for large exponents."""
    t1 = -theta * np.log(u)
    t2 = -theta * np.log(v)
    m = np.logaddexp(t1, t2)
    return m + np.log1p(-np.exp(-m))


class Clayton:
    name = "clayton"
    bounds = (1e-6, 50.0)
    independence = 1e-6

    @staticmethod
    def cdf(u, v, theta):
        u, v = _prep(u, v)
        uu, vv = _open(u), _open(v)
        out = np.exp(-_clayton_log_sum(uu, vv, theta) / theta)
        return _with_margins(out, u, v)

    @staticmethod
    def logpdf(u, v, theta):
        u, v = _prep(_open(u), _open(v))
        return (math.log1p(theta) - (1 + theta) * (np.log(u) + np.log(v))
                - (2 + 1 / theta) * _clayton_log_sum(u, v, theta))

    @staticmethod
    def h(v, u, theta):
        u, v = _prep(u, v)
        uu, vv = _open(u), _open(v)
        out = np.exp((-theta - 1) * np.log(uu) - (1 / theta + 1) * _clayton_log_sum(uu, vv, theta))
        return _h_edges(out, v)

    @staticmethod
    def hinv(w, u, theta):
        w, u = _prep(w, u)
        u = _open(u)
        w = np.clip(w, 1e-300, 1.0)
        # log of (w u^(theta+1))^(-theta/(1+theta))
        la = -theta / (1 + theta) * (np.log(w) + (theta + 1) * np.log(u))
        lu = -theta * np.log(u)
        # log(A - u^-theta + 1) with A >= u^-theta
        inner = la + np.log1p(np.exp(lu - la) * np.expm1(-lu))
        return np.clip(np.exp(-inner / theta), 0.0, 1.0)


# --------------------------------------------------------------- gumbel

class Gumbel:
    name = "gumbel"
    bounds = (1.0, 50.0)
    independence = 1.0

    @staticmethod
    def _xy(u, v):
        return -np.log(_open(u)), -np.log(_open(v))

    @staticmethod
    def cdf(u, v, theta):
        u, v = _prep(u, v)
        x, y = Gumbel._xy(u, v)
        a = (x ** theta + y ** theta) ** (1 / theta)
        return _with_margins(np.exp(-a), u, v)

    @staticmethod
    def logpdf(u, v, theta):
        u, v = _prep(u, v)
        x, y = Gumbel._xy(u, v)
        lx, ly = np.log(x), np.log(y)
        ls = np.logaddexp(theta * lx, theta * ly)
        a = np.exp(ls / theta)
        return (-a + x + y + (theta - 1) * (lx + ly) + (1 / theta - 2) * ls
                + np.log(a + theta - 1))

    @staticmethod
    def h(v, u, theta):
        u, v = _prep(u, v)
        x, y = Gumbel._xy(u, v)
        lx, ly = np.log(x), np.log(y)
        ls = np.logaddexp(theta * lx, theta * ly)
        a = np.exp(ls / theta)
        # C * A^(1-theta) * x^(theta-1) / u
        out = np.exp(-a + (1 - theta) * ls / theta + (theta - 1) * lx + x)
        return _h_edges(out, v)

    @staticmethod
    def hinv(w, u, theta, tol=1e-10, maxiter=100):
        w, u = _prep(w, u)
        x = -np.log(_open(u))
        lw = np.log(np.clip(w, 1e-300, 1.0))
        k = theta - 1.0
        # solve d + k*log1p(d/x) = -log w for d = A - x >= 0 (increasing, concave)
        d = np.zeros_like(x)
        for _ in range(maxiter):
            f = d + k * np.log1p(d / x) + lw
            step = f / (1.0 + k / (x + d))
            d = np.maximum(d - step, 0.0)
            if np.all(np.abs(step) <= tol * np.maximum(d, 1.0) * 1e-3):
                break
        else:
            bad = np.abs(step) > tol * np.maximum(d, 1.0)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise InversionError(
                    f"gumbel h-inverse did not converge (theta={theta}, u={float(u.flat[i])})")
        y = x * np.expm1(theta * np.log1p(d / x)) ** (1 / theta)
        return np.exp(-y)


# ---------------------------------------------------------------- frank

class Frank:
    name = "frank"
    bounds = (-50.0, 50.0)
    independence = 0.0
    _eps = 1e-8

    @staticmethod
    def _log_terms(u, v, theta):
        # a(1-b) and b-c with a=e^(-theta u), b=e^(-theta v), c=e^(-theta); same sign
        with np.errstate(divide="ignore"):
            t1 = -theta * u + np.log(np.abs(np.expm1(-theta * v)))
            t2 = -theta * v + np.log(np.abs(np.expm1(-theta * (1.0 - v))))
        return t1, t2

    @staticmethod
    def cdf(u, v, theta):
        u, v = _prep(u, v)
        if abs(theta) < Frank._eps:
            out = u * v
        elif abs(theta) < 1.0:
            out = -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / np.expm1(-theta)) / theta
        else:
            uu, vv = np.clip(u, 0.0, 1.0), np.clip(v, 0.0, 1.0)
            t1, t2 = Frank._log_terms(uu, vv, theta)
            out = -(np.logaddexp(t1, t2) - math.log(abs(math.expm1(-theta)))) / theta
        return _with_margins(out, u, v)

    @staticmethod
    def logpdf(u, v, theta):
        u, v = _prep(u, v)
        if abs(theta) < Frank._eps:
            return np.zeros(u.shape)
        t1, t2 = Frank._log_terms(u, v, theta)
        return (math.log(-theta * math.expm1(-theta)) - theta * (u + v)
                - 2 * np.logaddexp(t1, t2))

    @staticmethod
    def h(v, u, theta):
        u, v = _prep(u, v)
        if abs(theta) < Frank._eps:
            return _h_edges(v.copy(), v)
        t1, t2 = Frank._log_terms(u, np.clip(v, 0.0, 1.0), theta)
        with np.errstate(invalid="ignore"):
            out = special.expit(t1 - t2)
        return _h_edges(out, v)

    @staticmethod
    def hinv(w, u, theta):
        w, u = _prep(w, u)
        if abs(theta) < Frank._eps:
            return w.copy()
        if abs(theta) < 1.0:
            return -np.log1p(w * np.expm1(-theta) / (w + (1 - w) * np.exp(-theta * u))) / theta
        w = np.clip(w, 1e-300, 1.0)
        lw, l1w = np.log(w), np.log1p(-w)
        num = np.logaddexp(lw - theta, l1w - theta * u)
        den = np.logaddexp(lw, l1w - theta * u)
        return np.clip(-(num - den) / theta, 0.0, 1.0)


# ------------------------------------------------------------- plackett

class Plackett:
    name = "plackett"
    bounds = (1e-4, 1e4)
    independence = 1.0

    @staticmethod
    def _sd(u, v, theta):
        eta = theta - 1.0
        s = 1.0 + eta * (u + v)
        d = np.sqrt(np.maximum(s * s - 4.0 * theta * eta * u * v, 0.0))
        return s, d

    @staticmethod
    def cdf(u, v, theta):
        u, v = _prep(u, v)
        s, d = Plackett._sd(u, v, theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 2.0 * theta * u * v / (s + d)
        return _with_margins(out, u, v)

    @staticmethod
    def logpdf(u, v, theta):
        u, v = _prep(u, v)
        s, d = Plackett._sd(u, v, theta)
        return (math.log(theta) + np.log(1.0 + (theta - 1.0) * (u + v - 2 * u * v))
                - 3.0 * np.log(d))

    @staticmethod
    def h(v, u, theta):
        u, v = _prep(u, v)
        s, d = Plackett._sd(u, v, theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = 0.5 * (1.0 - (1.0 + (theta - 1.0) * u - (theta + 1.0) * v) / d)
        return _h_edges(out, v)

    @staticmethod
    def hinv(w, u, theta):
        w, u = _prep(w, u)
        a = w * (1.0 - w)
        b = theta + a * (theta - 1.0) ** 2
        c = 2.0 * a * (u * theta * theta + 1.0 - u) + theta * (1.0 - 2.0 * a)
        d = math.sqrt(theta) * np.sqrt(theta + 4.0 * a * u * (1.0 - u) * (1.0 - theta) ** 2)
        return np.clip((c - (1.0 - 2.0 * w) * d) / (2.0 * b), 0.0, 1.0)


FAMILY = {cls.name: cls for cls in (Gaussian, Gumbel, Clayton, Frank, Plackett)}


# ---------------------------------------------------------------- model

@dataclass(frozen=True)
class CopulaModel:
    family: str
    theta: float
    spearman_rho: float = math.nan
    cvm_statistic: float = math.nan
    n: int = 0

    @property
    def impl(self):
        return FAMILY[self.family]

    def cdf(self, u, v):
        return self.impl.cdf(u, v, self.theta)

    def logpdf(self, u, v):
        return self.impl.logpdf(u, v, self.theta)

    def h(self, v, u):
        """Conditional CDF of the second margin given the first equals `u`."""
        return self.impl.h(v, u, self.theta)

    def hinv(self, w, u):
        return self.impl.hinv(w, u, self.theta)

    def sample(self, n, rng):
        u = rng.random(n)
        return u, self.hinv(rng.random(n), u)


def pseudo_observations(x) -> np.ndarray:
    """Ranks scaled to (0, 1): ``rank / (n + 1)`` with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two observations")
    return stats.rankdata(x) / (x.size + 1)


def spearman(u, v) -> float:
    ru, rv = stats.rankdata(u), stats.rankdata(v)
    if ru.std() == 0 or rv.std() == 0:
        return 0.0
    return float(np.corrcoef(ru, rv)[0, 1])


MIN_PAIRS = 30


def fit_family(u, v, family: str) -> CopulaModel:
    """Maximum pseudo-likelihood estimate by bounded scalar search."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.size < MIN_PAIRS:
        raise CopulaFitError(f"need at least {MIN_PAIRS} complete pairs, got {u.size}")
    impl = FAMILY[family]
    lo, hi = impl.bounds
    log_scale = family == "plackett"

    def to_theta(t):
        return math.exp(t) if log_scale else t

    def nll(t):
        with np.errstate(all="ignore"):
            val = -np.sum(impl.logpdf(u, v, to_theta(t)))
        return val if np.isfinite(val) else 1e300

    a, b = (math.log(lo), math.log(hi)) if log_scale else (lo, hi)
    res = optimize.minimize_scalar(nll, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-7})
    t = float(res.x)
    # bounded Brent never evaluates the end points; compare explicitly
    for edge in (a, b):
        if nll(edge) < nll(t):
            t = edge
    theta = to_theta(t)
    final = nll(t)
    if not np.isfinite(final) or final >= 1e300:
        raise CopulaFitError(f"{family}: non-finite likelihood at theta={theta}")
    span = b - a
    if min(t - a, b - t) < 1e-5 * span:
        warnings.warn(f"{family}: theta={theta:.6g} clamped at the search boundary",
                      BoundaryWarning, stacklevel=2)
    return CopulaModel(family, theta, spearman(u, v), math.nan, int(u.size))


def cvm_fit_statistic(u, v, model: CopulaModel) -> float:
    """Sum of squared gaps between empirical and fitted copula at the data."""
    emp = kernels.empirical_copula(u, v)
    fitted = model.cdf(u, v)
    return float(np.sum((emp - fitted) ** 2))


def fit_all(u, v, families=FAMILIES) -> dict[str, CopulaModel]:
    out = {}
    for fam in families:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryWarning)
                m = fit_family(u, v, fam)
        except CopulaFitError as exc:
            LOG.info("fit failed: %s", exc)
            continue
        out[fam] = replace(m, cvm_statistic=cvm_fit_statistic(u, v, m))
    return out


def select_model(u, v, families=FAMILIES) -> CopulaModel:
    """Fit every family and keep the one with the smallest Cramér-von Mises statistic."""
    fits = fit_all(u, v, families)
    if not fits:
        raise CopulaFitError("no copula family could be fitted")
    return min(fits.values(), key=lambda m: (m.cvm_statistic, FAMILIES.index(m.family)))


def blanket_test_pvalue(u, v, model: CopulaModel, n_boot=200, rng=None) -> float:
    """Parametric-bootstrap p-value of the Cramér-von Mises statistic."""
    rng = np.random.default_rng(rng)
    s_obs = cvm_fit_statistic(u, v, model) if math.isnan(model.cvm_statistic) \
        else model.cvm_statistic
    n = len(u)
    exceed = 0
    for _ in range(n_boot):
        us, vs = model.sample(n, rng)
        us, vs = pseudo_observations(us), pseudo_observations(vs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryWarning)
            m = fit_family(us, vs, model.family)
        if cvm_fit_statistic(us, vs, m) >= s_obs:
            exceed += 1
    return (exceed + 0.5) / (n_boot + 1)


def conditional_sample(model: CopulaModel, u_given: float, n_samples: int, rng,
                       stratified: bool = True, tol: float = 1e-10) -> np.ndarray:
    """Draw ``V | U = u_given`` by inverting the h-function.

    With ``stratified`` the uniform quantiles are one draw per equal-width
    stratum (shuffled), which keeps every draw exact while making the
    sample mean far less noisy.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if not 0.0 < u_given < 1.0:
        raise ValueError("u_given must lie in (0, 1)")
    if stratified:
        w = (np.arange(n_samples) + rng.random(n_samples)) / n_samples
        rng.shuffle(w)
    else:
        w = rng.random(n_samples)
    w = np.clip(w, 1e-16, 1 - 1e-16)
    v = model.hinv(w, np.full(n_samples, u_given))
    if not np.all(np.isfinite(v)):
        raise InversionError(f"h-inverse failed ({model.family}, theta={model.theta}, u={u_given})")
    resid = np.abs(model.h(v, np.full(n_samples, u_given)) - w)
    slope_ok = np.abs(v - np.clip(v, 1e-300, 1 - 1e-16)) == 0
    bad = (resid > max(tol, 1e-7)) & slope_ok & (v > 1e-12) & (v < 1 - 1e-12)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InversionError(f"h-inverse inaccurate ({model.family}, theta={model.theta}, "
                             f"u={u_given}, w={w[i]}, residual={resid[i]:.2e})")
    return v


# -------------------------------------------------- dependence measures

def kendall_tau(family: str, theta: float) -> float:
    if family == "gaussian":
        return 2.0 / math.pi * math.asin(theta)
    if family == "clayton":
        return theta / (theta + 2.0)
    if family == "gumbel":
        return 1.0 - 1.0 / theta
    if family == "frank":
        if abs(theta) < 1e-8:
            return 0.0
        d1 = _debye1(theta)
        return 1.0 - 4.0 / theta * (1.0 - d1)
    raise ValueError(f"no closed-form Kendall tau for {family}")


def _debye1(x):
    from scipy.integrate import quad
    val, _ = quad(lambda t: t / math.expm1(t) if t != 0 else 1.0, 0.0, abs(x))
    d = val / abs(x)
    return d if x > 0 else d + abs(x) / 2.0
