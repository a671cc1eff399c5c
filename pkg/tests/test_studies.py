"""Tests for the rate-table and grid-refinement studies."""

import math

import pytest

from graphfp import (
    lambda_cycle_entropy_exact,
    lambda_lattice_entropy_exact,
    periodic_heat_convergence,
    rates_table,
)
from graphfp.studies import ORDER_COLUMNS, RATES_COLUMNS


def test_rates_table_lattice_columns_and_consistency():
    rows = rates_table("lattice", 4, 6, restarts=8, seed=0)
    assert [r["n"] for r in rows] == [4, 5, 6]
    for row in rows:
        assert set(row) == set(RATES_COLUMNS)
        n = row["n"]
        closed = lambda_lattice_entropy_exact(n, 0.0, 1.0)
        assert row["lambda_closed_form"] == pytest.approx(closed, rel=1e-12)
        assert row["dx"] == pytest.approx(1.0 / (n - 1))
        # estimator and closed form agree at uniform density
        assert row["lambda_estimate"] == pytest.approx(closed, rel=1e-7)
        assert row["predicted_decay"] == pytest.approx(2 * row["lambda_estimate"])
        # the decay fitted from an actual run tracks the prediction
        assert row["fitted_decay"] == pytest.approx(row["predicted_decay"], rel=0.05)
        assert row["fit_r_squared"] >= 0.999
        assert row["limit"] == pytest.approx(math.pi**2)
        ratio = lambda_cycle_entropy_exact(n, 0.0, 1.0) / closed
        assert row["cycle_over_lattice"] == pytest.approx(ratio, rel=1e-12)


def test_rates_table_cycle_and_beta_scaling():
    rows = rates_table("cycle", 5, 5, restarts=8, seed=1, beta=0.5, fit_runs=False)
    (row,) = rows
    closed = 0.5 * lambda_cycle_entropy_exact(5, 0.0, 1.0)
    assert row["lambda_closed_form"] == pytest.approx(closed, rel=1e-12)
    assert row["lambda_estimate"] == pytest.approx(closed, rel=1e-7)
    assert row["limit"] == pytest.approx(0.5 * 4 * math.pi**2)
    assert math.isnan(row["fitted_decay"]) and math.isnan(row["fit_r_squared"])


def test_rates_table_step_and_validation():
    rows = rates_table("lattice", 4, 8, step=2, restarts=4, fit_runs=False)
    assert [r["n"] for r in rows] == [4, 6, 8]
    with pytest.raises(ValueError):
        rates_table("triangle", 4, 6)
    with pytest.raises(ValueError):
        rates_table("lattice", 2, 6)
    with pytest.raises(ValueError):
        rates_table("lattice", 6, 4)


def test_heat_convergence_error_decreases():
    rows = periodic_heat_convergence(levels=2, n0=8)
    assert len(rows) == 2
    for row in rows:
        assert set(row) == set(ORDER_COLUMNS)
        assert row["error"] > 0
        assert row["steps"] > 0
    assert rows[0]["n"] == 8 and rows[1]["n"] == 16
    assert rows[1]["dx"] == pytest.approx(rows[0]["dx"] / 2)
    assert math.isnan(rows[0]["order"])
    assert rows[1]["error"] < rows[0]["error"]
    assert rows[1]["order"] > 0.3


def test_heat_convergence_validation():
    with pytest.raises(ValueError):
        periodic_heat_convergence(levels=0)
    with pytest.raises(ValueError):
        periodic_heat_convergence(n0=2)
