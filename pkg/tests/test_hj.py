import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hetclaw.errors import ConeTooNarrow, GridMismatch
from hetclaw.flux import build_flux
from hetclaw.hj import (
    ValueField, antiderivative, correspondence_check, dp_step, dp_value, legendre,
    observed_order, value_from_field,
)
from hetclaw.solver import Grid1D, InitialData, advance, initial_field

BURGERS = build_flux("homogeneous_quadratic")


def hopf_lax_abs(x, t):
    """Value function of v_t + (v_x)^2 / 2 = 0 with v0 = |x|."""
    ax = np.abs(x)
    return np.where(ax >= t, ax - t / 2, x * x / (2 * t))


def test_hopf_lax_for_abs_initial_value():
    grid = Grid1D(-2, 2, 400)
    v0 = np.abs(grid.interfaces)
    val = dp_value(BURGERS, v0, grid, 0.5)
    err = np.max(np.abs(val.values - hopf_lax_abs(grid.interfaces, 0.5)))
    assert err < 2 * grid.dx


@given(p=st.floats(-3, 3))
def test_lwr_conjugate_closed_form(p):
    val, u = legendre(build_flux("lwr_heterogeneous"), 0.3, p)
    assert float(val) == pytest.approx((p + 1) ** 2 / 4, abs=1e-12)
    assert float(u) == pytest.approx((p + 1) / 2, abs=1e-12)


@given(x=st.floats(-1, 1), p=st.floats(-2, 2))
def test_numerical_conjugate_matches_direct_maximisation(x, p):
    flux = build_flux("convex_combination")
    val, _ = legendre(flux, x, p)
    res = minimize_scalar(lambda u: -(u * p - float(flux.f(x, u))), bounds=(-5, 5),
                          method="bounded", options={"xatol": 1e-12})
    assert float(val) == pytest.approx(-res.fun, abs=1e-9)


def test_antiderivative_and_slopes_roundtrip():
    grid = Grid1D(0, 1, 10)
    cells = np.linspace(0, 1, 10)
    v = ValueField(grid, 0.0, antiderivative(cells, grid.dx))
    assert np.allclose(v.slopes(), cells, atol=1e-14) and v.values[0] == 0.0


def test_stationary_shock_correspondence_exact():
    flux = build_flux("lwr_heterogeneous", v_amp=0.5)
    grid = Grid1D(-3, 3, 300)
    field0 = initial_field(InitialData("riemann_phi"), grid, flux)
    value = dp_value(flux, value_from_field(field0).values, grid, 0.5)
    rep = correspondence_check(value, advance(field0, flux, 0.5))
    assert rep.l1 <= 1e-10


def test_grid_and_time_mismatch():
    grid = Grid1D(-1, 1, 20)
    with pytest.raises(GridMismatch):
        dp_value(BURGERS, np.zeros(20), grid, 0.1)
    field = initial_field(InitialData("riemann_phi"), grid, BURGERS)
    with pytest.raises(GridMismatch):
        correspondence_check(ValueField(Grid1D(-1, 1, 40), 0.0, np.zeros(41)), field)
    with pytest.raises(GridMismatch):
        correspondence_check(ValueField(grid, 0.3, np.zeros(21)), field)


def test_narrow_cone_detected():
    grid = Grid1D(-1, 1, 40)
    x = grid.interfaces
    with pytest.raises(ConeTooNarrow):
        dp_step(BURGERS, x, np.abs(x) * 2.0, 0.02, 1e-4, -2.0, 2.0)


def test_time_step_too_large_rejected():
    grid = Grid1D(-1, 1, 40)
    with pytest.raises(ValueError):
        dp_value(BURGERS, np.abs(grid.interfaces), grid, 0.1, dt=1.0)


def test_observed_order():
    dxs = np.array([0.1, 0.05, 0.025])
    assert observed_order(dxs, 3 * dxs) == pytest.approx(1.0)
    assert observed_order(dxs, dxs ** 2) == pytest.approx(2.0)
    assert observed_order(dxs, [0.0, 0.0, 0.0]) == float("inf")


def test_value_field_csv(tmp_path):
    grid = Grid1D(0, 1, 8)
    ValueField(grid, 0.0, np.arange(9.0)).to_csv(tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "x,v"


@given(shift=st.floats(-0.5, 0.5))
def test_dp_commutes_with_constants(shift):
    grid = Grid1D(-1, 1, 40)
    v0 = np.abs(grid.interfaces - 0.1)
    a = dp_value(BURGERS, v0, grid, 0.1).values
    b = dp_value(BURGERS, v0 + shift, grid, 0.1).values
    assert np.allclose(b - a, shift, atol=1e-12)
