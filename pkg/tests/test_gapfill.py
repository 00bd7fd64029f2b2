import numpy as np
import pytest

from floodtrend.copulas import CopulaModel
from floodtrend.events import FloodEvent
from floodtrend.gapfill import (PAIRS, VARIABLES, DependenceTable, EmpiricalMarginal,
                                choose_conditioning, fit_dependence, gap_fill, load_samples,
                                marginals_from, read_filled_values, save_samples,
                                write_filled)
from floodtrend.normalize import Factors, normalize
from floodtrend.synth import SyntheticSpec, conditional_mean_oracle, generate_catalog

MISSING = {"area": 0.4, "affected": 0.4, "losses_wealth": 0.4, "fatalities": 0.05}


@pytest.fixture(scope="module")
def catalog():
    return generate_catalog(SyntheticSpec(n_events=600, missing=MISSING, seed=11))


@pytest.fixture(scope="module")
def table(catalog):
    return fit_dependence(catalog[2])


def _independent():
    return DependenceTable({p: CopulaModel("frank", 0.0, 0.1) for p in PAIRS})


def test_table_covers_nine_pairs(table, tmp_path):
    assert len(PAIRS) == 9 and set(table.models) == set(PAIRS)
    table.to_csv(tmp_path / "dep.csv")
    back = DependenceTable.from_csv(tmp_path / "dep.csv")
    assert back.models == table.models
    assert table[("affected", "area")] is table[("area", "affected")]


def test_conditioning_is_most_correlated():
    rho = {("area", "fatalities"): 0.352, ("area", "affected"): 0.431,
           ("area", "losses_gdp"): 0.40, ("area", "losses_wealth"): 0.376,
           ("fatalities", "affected"): 0.5, ("fatalities", "losses_gdp"): 0.3,
           ("fatalities", "losses_wealth"): 0.3, ("affected", "losses_gdp"): 0.667,
           ("affected", "losses_wealth"): 0.677}
    t = DependenceTable({p: CopulaModel("frank", 1.0, r) for p, r in rho.items()})
    assert choose_conditioning("losses_wealth", {"area", "affected"}, t) == "affected"
    assert choose_conditioning("losses_gdp", {"area", "affected"}, t) == "affected"
    assert choose_conditioning("affected", {"area", "fatalities"}, t) == "fatalities"
    assert choose_conditioning("area", set(), t) is None


def test_negative_rho_counts_by_magnitude():
    t = DependenceTable({("area", "fatalities"): CopulaModel("frank", -5.0, -0.7),
                         ("area", "affected"): CopulaModel("frank", 1.0, 0.2)})
    assert choose_conditioning("area", {"fatalities", "affected"}, t) == "fatalities"


def test_complete_events_unchanged(catalog, table):
    _, records, rel, pot, _ = catalog
    res = gap_fill(records, rel, pot, table, seed=1, n_samples=500)
    for fe in res.events:
        r = rel[fe.event_id]
        for var in VARIABLES:
            if r[var] is not None:
                assert var not in fe.filled
                assert fe.values[var] == pytest.approx(r[var] * pot[fe.event_id][var], rel=1e-12)
            else:
                assert var in fe.filled


def test_filled_values_bounded(catalog, table):
    _, records, rel, pot, _ = catalog
    res = gap_fill(records, rel, pot, table, seed=1, n_samples=500)
    marg = marginals_from(rel)
    for fe in res.events:
        for var in fe.filled:
            p = pot[fe.event_id][var]
            assert 0 <= fe.values[var] <= marg[var].sorted[-1] * p * (1 + 1e-12)
            s = res.samples[(fe.event_id, var)]
            assert s.size == 500 and s.min() >= marg[var].sorted[0] * p * (1 - 1e-12)


def test_independence_fill_is_marginal_mean(catalog):
    _, records, rel, pot, _ = catalog
    res = gap_fill(records, rel, pot, _independent(), seed=2, n_samples=10_000)
    marg = marginals_from(rel)
    for fe in res.events:
        for var in fe.filled:
            got = fe.values[var] / pot[fe.event_id][var]
            assert got == pytest.approx(marg[var].mean, abs=0.01)
            assert got == pytest.approx(marg[var].mean, rel=0.05)


def test_fill_equals_oracle_through_marginal(catalog, table):
    # conditional mean of the relative damage from quadrature over the copula,
    # pushed through the same empirical marginal
    _, records, rel, pot, _ = catalog
    marg = marginals_from(rel)
    res = gap_fill(records, rel, pot, table, seed=3, n_samples=10_000)
    fe = next(e for e in res.events if "area" in e.filled)
    cond = fe.filled["area"]
    model = table[("area", cond)]
    u = marg[cond].cdf(rel[fe.event_id][cond])
    from floodtrend.synth import _density
    c = _density(model.family, model.theta)
    # piecewise-linear quantile function: dense trapezoid rule instead of adaptive quad
    w = np.linspace(1e-9, 1 - 1e-9, 200_001)
    dens = np.array([c(u, x) for x in w])
    num = np.trapezoid(marg["area"].quantile(w) * dens, w) / np.trapezoid(dens, w)
    assert fe.values["area"] / pot[fe.event_id]["area"] == pytest.approx(num, rel=0.01)
    assert 0 < conditional_mean_oracle(model, u) < 1


def test_gap_fill_deterministic_and_order_free(catalog, table):
    _, records, rel, pot, _ = catalog
    a = gap_fill(records, rel, pot, table, seed=5, n_samples=300)
    b = gap_fill(list(reversed(records)), rel, pot, table, seed=5, n_samples=300)
    assert a.by_id().keys() == b.by_id().keys()
    for eid, fe in a.by_id().items():
        assert fe.values == b.by_id()[eid].values


def test_skips_are_reported(catalog, table):
    _, records, rel, pot, _ = catalog
    rel = dict(rel)
    gone = records[0].event_id
    del rel[gone]
    empty = records[1].event_id
    rel[empty] = {v: None for v in VARIABLES}
    res = gap_fill(records[:5], rel, pot, table, seed=0, n_samples=50)
    assert (gone, "empty footprint") in res.skipped
    assert (empty, "no variable available") in res.skipped
    assert gone not in res.by_id() and empty not in res.by_id()


def test_csv_and_samples_roundtrip(catalog, table, tmp_path):
    _, records, rel, pot, _ = catalog
    res = gap_fill(records[:40], rel, pot, table, seed=0, n_samples=64, keep_samples=16)
    write_filled(res, tmp_path / "filled.csv")
    back = read_filled_values(tmp_path / "filled.csv")
    for fe in res.events:
        vals, flags = back[fe.event_id]
        assert vals == fe.values and flags == set(fe.filled)
    save_samples(res.samples, tmp_path / "s.npy")
    loaded = load_samples(tmp_path / "s.npy")
    assert loaded.keys() == res.samples.keys()
    for k, s in res.samples.items():
        assert s.size == 16 and np.array_equal(loaded[k], s)


def test_empirical_marginal():
    m = EmpiricalMarginal([4.0, 1.0, 2.0])
    assert m.cdf(2.0) == 0.5
    assert m.quantile([0.0, 0.25, 0.375, 0.5, 1.0]).tolist() == [1.0, 1.0, 1.5, 2.0, 4.0]
    assert 0 < m.cdf(-10.0) < 0.25 and 0.75 < m.cdf(10.0) < 1
    with pytest.raises(ValueError):
        EmpiricalMarginal([1.0])


def test_record_level_use():
    ev = FloodEvent("A", "NL", 1950, 1, "river", ("1",), fatalities=3, persons_affected=20)
    rec = normalize(ev, Factors(2.0, 1.0, 1.0))
    rel = {"A": {"area": None, "fatalities": 0.06, "affected": 0.4, "losses_gdp": None,
                 "losses_wealth": None}}
    others = {f"B{i}": {v: (i + 1) / 50 for v in VARIABLES} for i in range(10)}
    rel.update(others)
    pot = {"A": {v: 100.0 for v in VARIABLES}}
    res = gap_fill([rec], rel, pot, _independent(), seed=0, n_samples=2000)
    fe = res.events[0]
    assert fe.values["fatalities"] == 6.0 and fe.values["affected"] == 40.0
    assert set(fe.filled) == {"area", "losses_gdp", "losses_wealth"}
