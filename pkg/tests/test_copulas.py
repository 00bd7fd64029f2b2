import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import copula_samplers
from floodtrend.copulas import (FAMILIES, BoundaryWarning, CopulaFitError, CopulaModel,
                                conditional_sample, cvm_fit_statistic, fit_all, fit_family,
                                kendall_tau, pseudo_observations, select_model, spearman)
from floodtrend.synth import conditional_mean_oracle, gaussian_conditional_mean

SWEEP = {
    "gaussian": [-0.9, -0.5, 0.0, 0.3, 0.8, 0.99],
    "gumbel": [1.0, 1.2, 2.0, 5.0, 20.0],
    "clayton": [1e-4, 0.3, 2.0, 8.0, 30.0],
    "frank": [-20.0, -3.0, 0.0, 1e-9, 2.0, 15.0, 40.0],
    "plackett": [0.01, 0.3, 1.0, 4.0, 200.0],
}
MODELS = [CopulaModel(f, t) for f, ts in SWEEP.items() for t in ts]
IDS = [f"{m.family}-{m.theta:g}" for m in MODELS]
GRID = np.linspace(0.0, 1.0, 100)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_boundary_conditions(m):
    zero, one = np.zeros_like(GRID), np.ones_like(GRID)
    assert np.abs(m.cdf(GRID, zero)).max() <= 1e-12
    assert np.abs(m.cdf(zero, GRID)).max() <= 1e-12
    assert np.abs(m.cdf(GRID, one) - GRID).max() <= 1e-12
    assert np.abs(m.cdf(one, GRID) - GRID).max() <= 1e-12


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_two_increasing(m, rng):
    a = rng.random((2, 2000))
    b = rng.random((2, 2000))
    u1, u2 = np.minimum(a[0], b[0]), np.maximum(a[0], b[0])
    v1, v2 = np.minimum(a[1], b[1]), np.maximum(a[1], b[1])
    vol = m.cdf(u2, v2) - m.cdf(u2, v1) - m.cdf(u1, v2) + m.cdf(u1, v1)
    assert vol.min() >= -1e-12


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_h_is_a_cdf(m):
    inner = np.linspace(0.01, 0.99, 25)
    v = np.linspace(0.0, 1.0, 401)
    for u in inner:
        h = m.h(v, np.full_like(v, u))
        assert abs(h[0]) <= 1e-9 and abs(h[-1] - 1) <= 1e-9
        assert np.all(np.diff(h) >= -1e-12)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_h_matches_numeric_derivative(m):
    u = np.linspace(0.1, 0.9, 9)
    v = np.linspace(0.15, 0.85, 9)
    eps = 1e-6
    num = (m.cdf(u + eps, v) - m.cdf(u - eps, v)) / (2 * eps)
    assert np.allclose(m.h(v, u), num, atol=1e-5)


@pytest.mark.parametrize("m", MODELS, ids=IDS)
def test_hinv_inverts_h(m, rng):
    u, w = rng.uniform(0.001, 0.999, (2, 500))
    v = m.hinv(w, u)
    assert np.all((v >= 0) & (v <= 1))
    ok = (v > 1e-10) & (v < 1 - 1e-10)
    assert np.abs(m.h(v[ok], u[ok]) - w[ok]).max() < 1e-8


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 1), st.floats(0, 1), st.floats(0.0, 1.0))
def test_two_increasing_property(family, a, b, c, d, t):
    lo, hi = {"gaussian": (-0.99, 0.99), "gumbel": (1.0, 20.0), "clayton": (0.01, 20.0),
              "frank": (-30.0, 30.0), "plackett": (0.01, 100.0)}[family]
    m = CopulaModel(family, lo + t * (hi - lo))
    u1, u2 = sorted((a, b))
    v1, v2 = sorted((c, d))
    vol = m.cdf(u2, v2) - m.cdf(u2, v1) - m.cdf(u1, v2) + m.cdf(u1, v1)
    assert vol >= -1e-12
    assert -1e-12 <= m.cdf(u1, v1) <= min(u1, v1) + 1e-12


# ------------------------------------------------------- pseudo-obs

def test_pseudo_observations_examples():
    assert pseudo_observations([5, 1, 3]).tolist() == [0.75, 0.25, 0.5]
    assert pseudo_observations([2.0] * 7).tolist() == [0.5] * 7
    with pytest.raises(ValueError):
        pseudo_observations([1.0])


def test_pseudo_observations_uniform(rng):
    u = pseudo_observations(rng.lognormal(size=1000))
    assert stats.kstest(u, "uniform").statistic < 0.05


# ------------------------------------------------------- fitting

def test_fit_gaussian(rng):
    u, v = copula_samplers.gaussian(0.6, 2000, rng)
    m = fit_family(pseudo_observations(u), pseudo_observations(v), "gaussian")
    assert m.theta == pytest.approx(0.6, abs=0.05)
    assert m.n == 2000


def test_fit_independence(rng):
    u, v = pseudo_observations(rng.random(2000)), pseudo_observations(rng.random(2000))
    assert abs(fit_family(u, v, "frank").theta) < 0.5
    assert abs(fit_family(u, v, "gaussian").theta) < 0.05


def test_fit_clayton_and_tau(rng):
    u, v = copula_samplers.clayton(2.0, 2000, rng)
    m = fit_family(pseudo_observations(u), pseudo_observations(v), "clayton")
    assert m.theta == pytest.approx(2.0, abs=0.3)
    assert stats.kendalltau(u, v)[0] == pytest.approx(kendall_tau("clayton", 2.0), abs=0.03)


def test_fit_needs_thirty_pairs():
    with pytest.raises(CopulaFitError):
        fit_family(np.linspace(0.1, 0.9, 29), np.linspace(0.1, 0.9, 29), "frank")


def test_boundary_warning_on_comonotone():
    u = pseudo_observations(np.arange(100.0))
    with pytest.warns(BoundaryWarning):
        m = fit_family(u, u, "gaussian")
    assert m.theta == pytest.approx(0.999)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        g = fit_family(u, u, "gumbel")
    assert np.isfinite(cvm_fit_statistic(u, u, g))


def test_cvm_independence_closed_form(rng):
    u, v = pseudo_observations(rng.random(30)), pseudo_observations(rng.random(30))
    emp = np.array([np.mean((u <= u[i]) & (v <= v[i])) for i in range(30)])
    expected = float(np.sum((emp - u * v) ** 2))
    assert cvm_fit_statistic(u, v, CopulaModel("gaussian", 0.0)) == pytest.approx(
        expected, rel=1e-12)


def test_selection_prefers_generating_family(rng):
    wins = 0
    for _ in range(10):
        u, v = copula_samplers.clayton(2.0, 1000, rng)
        fits = fit_all(pseudo_observations(u), pseudo_observations(v))
        wins += min(fits.values(), key=lambda m: m.cvm_statistic).family == "clayton"
    assert wins >= 9


def test_select_model_returns_minimum(rng):
    u, v = copula_samplers.gumbel(2.0, 500, rng)
    u, v = pseudo_observations(u), pseudo_observations(v)
    best = select_model(u, v)
    assert best.cvm_statistic == min(m.cvm_statistic for m in fit_all(u, v).values())
    assert best.spearman_rho == pytest.approx(spearman(u, v))


# ------------------------------------------------------- conditional sampling

def test_independence_conditional_mean(rng):
    s = conditional_sample(CopulaModel("frank", 0.0), 0.8, 10_000, rng, stratified=False)
    assert s.mean() == pytest.approx(0.5, abs=0.01)


def test_near_comonotone_concentrates(rng):
    s = conditional_sample(CopulaModel("gaussian", 0.999), 0.3, 10_000, rng)
    assert np.median(np.abs(s - 0.3)) < 0.02


def test_clayton_mean_matches_quadrature(rng):
    m = CopulaModel("clayton", 2.0)
    s = conditional_sample(m, 0.5, 10_000, rng)
    assert s.mean() == pytest.approx(conditional_mean_oracle(m, 0.5), abs=0.005)


def test_gaussian_mean_closed_form(rng):
    m = CopulaModel("gaussian", 0.7)
    assert conditional_sample(m, 0.2, 10_000, rng).mean() == pytest.approx(
        gaussian_conditional_mean(0.7, 0.2), abs=2e-3)


def test_conditional_sampling_seeded():
    m = CopulaModel("gumbel", 2.5)
    a = conditional_sample(m, 0.4, 100, np.random.default_rng(3))
    b = conditional_sample(m, 0.4, 100, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_conditional_sample_arguments(rng):
    with pytest.raises(ValueError):
        conditional_sample(CopulaModel("frank", 1.0), 0.5, 0, rng)
    with pytest.raises(ValueError):
        conditional_sample(CopulaModel("frank", 1.0), 1.0, 10, rng)


@pytest.mark.parametrize("family, theta", [("gaussian", 0.5), ("clayton", 3.0),
                                           ("gumbel", 2.0), ("frank", -4.0),
                                           ("plackett", 6.0)])
def test_model_sampler_matches_textbook_sampler(family, theta, rng):
    # two-sample check of the h-inverse sampler against the frailty constructions
    u1, v1 = CopulaModel(family, theta).sample(4000, rng)
    u2, v2 = copula_samplers.sample(family, theta, 4000, rng)
    assert stats.kendalltau(u1, v1)[0] == pytest.approx(stats.kendalltau(u2, v2)[0], abs=0.04)
    assert stats.ks_2samp(v1, v2).pvalue > 1e-3
