import pytest

from boards import regulator_board
from pib.board import BudgetLine, SourceSpec
from pib.ipc import BudgetError, power_budget

SUPPLY = SourceSpec("J1", "HT", "J1-1", 12.0, 20.0)


def test_empty_budget():
    r = power_budget([], SUPPLY)
    assert r.total_input_power == 0.0
    assert r.margin == pytest.approx(240.0)


def test_twelve_drivers():
    r = power_budget([BudgetLine("VM", "HT", 12.0, 1.3, 12)], SUPPLY)
    assert r.total_input_power == pytest.approx(187.2)
    assert r.available_power == pytest.approx(240.0)
    assert r.margin == pytest.approx(52.8)
    assert r.passed


def test_over_budget():
    r = power_budget([BudgetLine("heater", "HT", 12.0, 25.0)], SUPPLY)
    assert r.total_input_power == pytest.approx(300.0)
    assert not r.passed


def test_linear_regulator_losses():
    board = regulator_board(supply=12.0, set_voltage=5.0, iq=0.0)
    supply = board.sources[0]
    r = power_budget([BudgetLine("logic", "VOUT", 5.0, 0.1)], supply, board)
    assert r.total_input_power == pytest.approx(1.2)
    (loss,) = r.regulators
    assert loss.dissipation == pytest.approx(0.7)
    assert loss.output_current == pytest.approx(0.1)


def test_quiescent_current_counts():
    board = regulator_board(supply=12.0, set_voltage=5.0, iq=0.01)
    r = power_budget([BudgetLine("logic", "VOUT", 5.0, 0.1)], board.sources[0], board)
    assert r.total_input_power == pytest.approx(12.0 * 0.11)
    assert r.regulators[0].dissipation == pytest.approx(0.7 + 0.12)


def test_unfed_rail():
    with pytest.raises(BudgetError):
        power_budget([BudgetLine("x", "LT", 5.0, 0.1)], SUPPLY)


def test_bundled_board_budget(example_board):
    r = power_budget(example_board.budget, example_board.sources[0], example_board)
    # three regulators each draw 6 mA of quiescent current from HT
    assert r.total_input_power == pytest.approx(187.2 + 12.0 * 3 * 0.006)
    assert r.margin == pytest.approx(240.0 - 187.416)
