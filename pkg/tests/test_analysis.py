import math

import pytest
from hypothesis import given, strategies as st

from hhsrp.analysis import (BreakEvenInput, RunRecord, ber, compare, improvement, instance_class, pper_a,
                            read_runs, rpd, to_csv)


def test_ber_table_value():
    assert ber(240.54, 174.62, 2) == pytest.approx(65.92 / (174.62 - 120.27), abs=1e-12)
    assert ber(240.54, 174.62, 2) == pytest.approx(1.21, abs=0.05)
    assert BreakEvenInput(240.54, 174.62, 2).value == ber(240.54, 174.62, 2)


def test_ber_degenerate(caplog):
    assert math.isnan(ber(400.0, 100.0, 2))
    assert "not positive" in caplog.text


def test_pper_a():
    assert pper_a(30, 10) == pytest.approx(30 / (3.14 * 100))
    with pytest.raises(ValueError):
        pper_a(30, 0)


def test_rpd():
    assert rpd(110.0, 100.0) == pytest.approx(10.0, abs=1e-9)
    assert rpd(100.0, 100.0) == 0.0
    with pytest.raises(ValueError):
        rpd(99.0, 100.0)
    with pytest.raises(ValueError):
        rpd(1.0, 0.0)


@given(st.floats(1, 1e4), st.floats(1, 1e4))
def test_improvement_sign(a, b):
    assert math.copysign(1, improvement(a, b)) == math.copysign(1, a - b) or a == b
    assert improvement(a, a) == 0.0


def records():
    out = []
    for inst, vs, m, std in (("h10_10_0_0", 80.0, 100.0, 60.0), ("h10_10_0_1", 90.0, 100.0, 70.0)):
        out += [RunRecord(inst, "ALNS-VS", 1, vs), RunRecord(inst, "ALNS-VS", 2, vs + 10),
                RunRecord(inst, "ALNS-M", 1, m), RunRecord(inst, "ALNS-STD", 1, std)]
    return out


def test_compare_columns_and_class_means():
    rows = compare(records())
    first, second, cls = rows
    assert first["VS-M%"] == pytest.approx(20.0)
    assert first["STD-VS%"] == pytest.approx(25.0)
    assert first["ALNS-VS avg"] == pytest.approx(85.0)
    assert first["BER"] == pytest.approx(ber(80.0, 60.0, 2))
    assert cls["instance"] == "h10_10_0"
    assert cls["VS-M%"] == pytest.approx((20.0 + 10.0) / 2)


def test_compare_rejects_orphans():
    recs = records()[:-1]
    with pytest.raises(ValueError, match="ALNS-STD, h10_10_0_1"):
        compare(recs)


def test_csv_round(tmp_path):
    text = to_csv([{"a": 1.23456789, "b": math.nan, "c": "x"}])
    assert text.splitlines() == ["a,b,c", "1.2346,NA,x"]
    path = tmp_path / "runs.csv"
    path.write_text("instance,algorithm,seed,objective\nh10_10_0_0,UBA,,12.5\n")
    assert read_runs(path) == [RunRecord("h10_10_0_0", "UBA", 0, 12.5)]


def test_instance_class():
    assert instance_class("h30_10_0_2") == "h30_10_0"
