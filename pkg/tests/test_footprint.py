import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floodtrend.events import FloodEvent
from floodtrend.footprint import (FootprintError, build_footprint, build_footprints,
                                  hazard_mask_for, read_footprints, write_footprints)

REGIONS = np.array([[1, 1, 2, 2, 3],
                    [1, 1, 2, 2, 3],
                    [1, 4, 4, 2, 3],
                    [4, 4, 4, 3, 3],
                    [4, 4, 3, 3, 3]])
MASK = np.array([[0, 1, 1, 0, 0],
                 [0, 1, 1, 1, 0],
                 [0, 0, 1, 1, 1],
                 [0, 0, 1, 1, 0],
                 [0, 0, 0, 0, 0]], dtype=bool)


def _ev(regions, ftype="river", eid="E"):
    return FloodEvent(eid, "XX", 1950, 1, ftype, tuple(str(r) for r in regions), fatalities=1)


def test_hand_drawn_two_regions():
    fp = build_footprint(_ev([1, 2]), MASK, REGIONS)
    # literal enumeration of mask & region in {1, 2}
    assert fp.cell_set() == {(0, 1), (0, 2), (1, 1), (1, 2), (1, 3), (2, 3)}
    fp = build_footprint(_ev([2, 4]), MASK, REGIONS)
    assert fp.cell_set() == {(0, 2), (1, 2), (1, 3), (2, 2), (2, 3), (3, 2)}
    assert len(fp) == 6


def test_full_mask_gives_the_region():
    fp = build_footprint(_ev([3]), np.ones_like(MASK), REGIONS)
    assert fp.cell_set() == {tuple(c) for c in np.argwhere(REGIONS == 3)}


def test_no_hazard_cells_is_empty_not_error():
    fp = build_footprint(_ev([1]), np.zeros_like(MASK), REGIONS)
    assert fp.empty and fp.area_km2(100.0) == 0.0


def test_unknown_region_named():
    with pytest.raises(FootprintError, match="'9'"):
        build_footprint(_ev([9]), MASK, REGIONS)


def test_region_index_mapping():
    fp = build_footprint(_ev(["NL1"]), MASK, REGIONS, region_values={"NL1": 2})
    assert fp.cell_set() == build_footprint(_ev([2]), MASK, REGIONS).cell_set()
    with pytest.raises(FootprintError):
        build_footprint(_ev(["XX9"]), MASK, REGIONS, region_values={"NL1": 2})


def test_misaligned_mask():
    with pytest.raises(FootprintError):
        build_footprint(_ev([1]), MASK[:4], REGIONS)


def test_type_routing():
    river, coastal = MASK, np.zeros_like(MASK)
    coastal[4] = True
    assert hazard_mask_for("flash", river, coastal) is river
    assert hazard_mask_for("coastal", river, coastal) is coastal
    assert (hazard_mask_for("compound", river, coastal) == (river | coastal)).all()
    with pytest.raises(FootprintError):
        hazard_mask_for("dam", river, coastal)


def test_area_and_csv_roundtrip(tmp_path):
    fps = build_footprints([_ev([1, 2], eid="A"), _ev([4], "coastal", eid="B")],
                           MASK, np.zeros_like(MASK), REGIONS)
    assert fps["A"].area_km2(100.0) == pytest.approx(6 * 0.01)
    write_footprints(fps.values(), tmp_path / "fp.csv")
    back = read_footprints(tmp_path / "fp.csv", ["A", "B"])
    assert back["A"].cell_set() == fps["A"].cell_set()
    assert back["B"].empty


_masks = st.lists(st.booleans(), min_size=25, max_size=25).map(
    lambda b: np.array(b).reshape(5, 5))
_regs = st.sets(st.integers(1, 4), min_size=1, max_size=4)


@settings(max_examples=200, deadline=None)
@given(_masks, _masks, _regs, st.integers(1, 4))
def test_union_and_monotonicity(m1, m2, regs, extra):
    ev = _ev(sorted(regs))
    union = build_footprint(ev, m1 | m2, REGIONS).cell_set()
    assert union == (build_footprint(ev, m1, REGIONS).cell_set()
                     | build_footprint(ev, m2, REGIONS).cell_set())
    bigger = build_footprint(_ev(sorted(regs | {extra})), m1, REGIONS).cell_set()
    assert build_footprint(ev, m1, REGIONS).cell_set() <= bigger
    for r, c in union:
        assert (m1 | m2)[r, c] and REGIONS[r, c] in regs
