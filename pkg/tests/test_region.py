import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import direct_mi
from polarcicc.dist import CiccInstance, JointDist
from polarcicc.fixtures import (
    bsc_pair_fixture, case_fixture, constant_y1_fixture, layered_design, same_output_fixture,
)
from polarcicc.region import (
    REGION_COLUMNS, RateTuple, evaluate_region, grid_sweep, membership, region_csv,
    region_report, projected_region,
)


def oracle_bounds(inst):
    f = inst.full
    b1 = min(direct_mi(f, ["U", "X1"], ["Y1"]), direct_mi(f, ["U", "X1"], ["Y2"]))
    iv2 = direct_mi(f, ["V"], ["Y2"], ["U", "X1"])
    iv1 = direct_mi(f, ["V"], ["Y1"], ["U", "X1"])
    return [b1, direct_mi(f, ["U", "V"], ["Y2"], ["X1"]), iv2 + b1, iv2 - iv1,
            direct_mi(f, ["X2"], ["Y1"], ["U", "X1"]), direct_mi(f, ["X2"], ["Y1"], ["U", "V", "X1"])]


@pytest.mark.parametrize("make", [bsc_pair_fixture, lambda: case_fixture("4"), same_output_fixture])
def test_bounds_match_direct_summation(make):
    inst = make()
    b = evaluate_region(inst)
    got = [b.b1, b.b2, b.b3, b.b4, b.b5, b.b6]
    np.testing.assert_allclose(got, oracle_bounds(inst), atol=1e-9)


def test_same_output_has_no_secrecy():
    assert evaluate_region(same_output_fixture()).b4 == 0.0


def test_constant_output_kills_common_rate():
    assert evaluate_region(constant_y1_fixture()).b1 == pytest.approx(0.0, abs=1e-12)


def test_v_equal_x2_needs_no_randomness():
    inst = CiccInstance(bsc_pair_fixture().channel, layered_design(2, 0.1, 0.0))
    assert evaluate_region(inst).b6 == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("case", ["1", "2", "3", "4"])
def test_b6_below_b5(case):
    b = evaluate_region(case_fixture(case))
    assert b.b6 <= b.b5 + 1e-12


def test_output_relabeling_and_null_symbol():
    inst = bsc_pair_fixture()
    b = evaluate_region(inst)
    ch = inst.channel[:, :, ::-1, :]
    pad = np.concatenate([inst.channel, np.zeros(inst.channel.shape[:3] + (1,))], axis=3)
    for c in (ch, pad):
        b2 = evaluate_region(CiccInstance(c, inst.design))
        np.testing.assert_allclose(list(b2.as_dict().values()), list(b.as_dict().values()), atol=1e-12)


class TestMembership:
    b = evaluate_region(case_fixture("1"))

    def test_zero_rates_with_enough_randomness(self):
        ok, bad = membership(RateTuple(self.b.b5, 0, 0, 0), self.b)
        assert ok and not bad

    def test_secrecy_bound(self):
        ok, bad = membership(RateTuple(self.b.b5, 0, 0, max(self.b.b4, 0) + 0.01), self.b)
        assert not ok and any("b4" in v for v in bad)

    def test_corner(self):
        b = self.b
        r2s = max(b.b4, 0.0)
        t = RateTuple(Rr=b.b5, R1=0.0, R2p=b.b2 - r2s, R2s=r2s)
        ok, _ = membership(t, b)
        assert ok == (b.b2 <= b.b3 + 1e-12)

    def test_randomness_lower_bounds(self):
        assert self.b.b6 > 0
        ok, bad = membership(RateTuple(0, 0, 0, 0), self.b)
        assert not ok and "Rr >= b6" in bad

    def test_invalid_rates(self):
        with pytest.raises(ValueError):
            RateTuple(-0.1, 0, 0, 0)
        with pytest.raises(ValueError):
            RateTuple(float("nan"), 0, 0, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_projection_contains_members(self, rr, r1, r2p, r2s):
        t = RateTuple(rr, r1, r2p, r2s)
        ok, _ = membership(t, self.b)
        if ok:
            assert projected_region(self.b).contains(r1, r2p + r2s, r2s)


def test_region_csv():
    rows = [("a", "1", evaluate_region(case_fixture("1")))]
    rd = list(csv.reader(io.StringIO(region_csv(rows))))
    assert rd[0] == REGION_COLUMNS
    assert rd[1][:3] == ["1", "a", "1"]
    assert float(rd[1][3]) == rows[0][2].b1


def test_report_and_sweep():
    rep = region_report(case_fixture("2"))
    assert rep["case"] == "2"
    sweep = grid_sweep(bsc_pair_fixture().channel, steps=3)
    assert len(sweep) == 9
    assert all(b.b6 <= b.b5 + 1e-12 for _, b in sweep)
