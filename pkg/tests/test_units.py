import math

import pytest

from pib.units import (COPPER_RESISTIVITY, MIL_MM, OZ_MIL, UnitError, convert_length, mil_to_mm, mm_to_mil,
                       oz_to_um)


def test_mil_is_a_thousandth_inch():
    assert mil_to_mm(1000.0) == pytest.approx(25.4)
    assert mm_to_mil(25.4) == pytest.approx(1000.0)


def test_oz_thickness():
    # 1 oz = 1.378 mil, which is 35.0012 um rather than a round 35
    assert oz_to_um(1.0) == pytest.approx(1.378 * 25.4)
    assert oz_to_um(2.0) == pytest.approx(70.0, abs=0.01)
    assert convert_length(1.0, "oz", "mil") == pytest.approx(OZ_MIL)


@pytest.mark.parametrize("unit", ["mm", "mil", "um", "oz", "µm", "thou"])
def test_round_trip(unit):
    assert convert_length(convert_length(3.7, unit, "mm"), "mm", unit) == pytest.approx(3.7)


def test_aliases_agree():
    assert convert_length(5.0, "µm", "mm") == convert_length(5.0, "um", "mm")
    assert convert_length(5.0, "thou", "mm") == pytest.approx(5 * MIL_MM)


def test_unknown_unit():
    with pytest.raises(UnitError):
        convert_length(1.0, "furlong", "mm")


def test_sheet_resistance_of_one_oz():
    r_sq = COPPER_RESISTIVITY / (oz_to_um(1.0) * 1e-6)
    assert r_sq * 1e3 == pytest.approx(0.4926, abs=1e-3)
    assert math.isclose(COPPER_RESISTIVITY, 1.724e-8)
