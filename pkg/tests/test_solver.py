import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetclaw.errors import OutOfDomain
from hetclaw.flux import FAMILIES, build_flux
from hetclaw.solver import (
    Grid1D, InitialData, SolutionField, advance, auto_domain, find_layer, godunov_flux,
    initial_field, l1_distances, phi_average, run, scheme_for, steps, traces_at,
)


def brute_force_riemann_flux(flux, x, ul, ur, n=20001):
    """Osher's formula: min of the section for ul <= ur, max otherwise."""
    us = np.linspace(min(ul, ur), max(ul, ur), n)
    vals = flux.f(x, us)
    return float(vals.min() if ul <= ur else vals.max())


@given(x=st.floats(-2, 2), ul=st.floats(-1, 2), ur=st.floats(-1, 2))
def test_godunov_flux_matches_osher_formula(x, ul, ur):
    flux = build_flux("convex_combination")
    assert godunov_flux(flux, x, ul, ur) == pytest.approx(
        brute_force_riemann_flux(flux, x, ul, ur), abs=1e-7)


def test_godunov_flux_is_scalar_for_scalars():
    assert isinstance(godunov_flux(build_flux("gaussian_lwr"), 0.0, 0.2, 0.8), float)


def test_godunov_flux_consistency():
    flux = build_flux("lwr_heterogeneous", v_amp=0.4)
    xs = np.linspace(-2, 2, 11)
    us = np.linspace(-0.5, 1.5, 11)
    assert np.allclose(godunov_flux(flux, xs, us, us), flux.f(xs, us), atol=1e-15)


def test_grid_geometry_and_validation():
    g = Grid1D(-1.0, 1.0, 8)
    assert g.dx == 0.25
    assert len(g.interfaces) == 9 and g.centers[0] == -0.875
    assert int(g.cell_index(0.01)) == 4
    with pytest.raises(ValueError):
        Grid1D(0, 1, 4)
    with pytest.raises(ValueError):
        Grid1D(1, 0, 10)


def test_field_values_are_read_only():
    g = Grid1D(0, 1, 10)
    f = SolutionField(g, 0.0, np.zeros(10))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        SolutionField(g, 0.0, np.zeros(9))


def test_phi_cell_averages_are_exact():
    g = Grid1D(-1, 1, 10)
    vals = phi_average(g, 1.0, 0.0, 0.05)
    # the cell [0, 0.2] holds u_minus on a quarter of its length
    assert vals[5] == pytest.approx(0.25, abs=1e-15)
    assert np.all(vals[:5] == 1.0) and np.all(vals[6:] == 0.0)


def test_piecewise4_validation():
    flux = build_flux("convex_combination")
    g = Grid1D(-3, 3, 60)
    with pytest.raises(ValueError):
        initial_field(InitialData("piecewise4", {"u_m": 0.5}), g, flux)
    with pytest.raises(ValueError):
        initial_field(InitialData("piecewise4", {"x_minus": 1.0, "x_plus": -1.0}), g, flux)
    with pytest.raises(ValueError):
        InitialData("spline")


@pytest.mark.parametrize("family", FAMILIES)
def test_far_field_states_preserved_exactly(family):
    flux = build_flux(family)
    g = Grid1D(-4, 4, 200)
    for c in (flux.u_plus, flux.u_minus):
        f0 = initial_field(InitialData("constant", {"value": c}), g, flux)
        f1 = advance(f0, flux, 1.0)
        assert np.max(np.abs(f1.values - c)) == 0.0


def test_burgers_moving_shock_converges_to_exact_profile():
    flux = build_flux("homogeneous_quadratic")
    errs = []
    for n in (400, 800, 1600):
        g = Grid1D(-2, 3, n)
        out = advance(initial_field(InitialData("riemann_phi"), g, flux), flux, 2.0)
        errs.append(np.sum(np.abs(out.values - phi_average(g, 1.0, 0.0, 1.0))) * g.dx)
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_burgers_rarefaction_matches_self_similar_solution():
    flux = build_flux("homogeneous_quadratic")
    g = Grid1D(-2, 3, 2000)
    data = InitialData("custom_samples", {"function": lambda x: np.where(x < 0, 0.0, 1.0)})
    out = advance(initial_field(data, g, flux), flux, 1.0)
    exact = np.clip(g.centers / 1.0, 0.0, 1.0)
    assert np.sum(np.abs(out.values - exact)) * g.dx < 0.01


def test_steps_land_exactly_on_target():
    flux = build_flux("homogeneous_quadratic")
    f0 = initial_field(InitialData("riemann_phi"), Grid1D(-1, 2, 100), flux)
    times = [f.time for f, _, _ in steps(f0, flux, 0.37)]
    assert times[-1] == 0.37 and np.all(np.diff(times) > 0)
    with pytest.raises(ValueError):
        list(steps(f0, flux, 1.0, cfl=1.5))


def test_history_snapshots_and_interpolation():
    flux = build_flux("homogeneous_quadratic")
    f0 = initial_field(InitialData("riemann_phi"), Grid1D(-1, 2, 100), flux)
    hist = run(f0, flux, 0.5, snapshot_every=5, extra_times=[0.25])
    assert hist.times[0] == 0.0 and hist.times[-1] == 0.5 and 0.25 in hist.times
    mid = hist.at(0.5 * (hist.times[1] + hist.times[2]))
    assert np.allclose(mid.values, 0.5 * (hist.values[1] + hist.values[2]))
    with pytest.raises(OutOfDomain):
        hist.at(0.6)
    assert hist.final.time == 0.5


def test_observers_see_every_step():
    flux = build_flux("homogeneous_quadratic")
    f0 = initial_field(InitialData("riemann_phi"), Grid1D(-1, 2, 100), flux)
    seen = []
    hist = run(f0, flux, 0.3, observers=[lambda f, dt, F: seen.append(dt)])
    assert len(seen) == hist.n_steps and sum(seen) == pytest.approx(0.3, abs=1e-14)


def test_traces_and_out_of_domain():
    flux = build_flux("homogeneous_quadratic")
    g = Grid1D(-1, 1, 20)
    f0 = initial_field(InitialData("riemann_phi"), g, flux)
    assert traces_at(f0, 0.0) == (1.0, 0.0)
    with pytest.raises(OutOfDomain):
        traces_at(f0, 0.99)


def test_find_layer_on_sharp_and_smooth_profiles():
    g = Grid1D(-1, 1, 200)
    sharp = phi_average(g, 1.0, 0.0, 0.0)
    layer = find_layer(sharp, g, 0.02, 1e-3)
    assert layer.is_shock and layer.position == pytest.approx(0.0, abs=1e-12)
    assert layer.jump == 1.0
    smooth = 0.5 - 0.5 * np.tanh(g.centers / 0.5)
    assert not find_layer(smooth, g, 0.0, 1e-3).is_shock


def test_periodic_mode_wraps():
    flux = build_flux("homogeneous_quadratic")
    g = Grid1D(0, 1, 50)
    data = InitialData("custom_samples", {"function": lambda x: 0.5 + 0.3 * np.sin(2 * np.pi * x)})
    f0 = initial_field(data, g, flux, boundary_mode="periodic")
    f1 = advance(f0, flux, 0.5)
    assert f1.mass == pytest.approx(f0.mass, abs=1e-14)


def test_auto_domain_contains_signal_reach():
    flux = build_flux("convex_combination")
    lo, hi = auto_domain(flux, InitialData("piecewise4"), 2.0)
    assert lo < -1 - 2 * flux.speed_bound(0, 1) and hi > 1 + 2 * flux.speed_bound(0, 1)


def test_scheme_cache_reuses_interfaces():
    flux = build_flux("gaussian_lwr")
    g = Grid1D(-1, 1, 40)
    assert scheme_for(flux, g) is scheme_for(flux, g)


samples = st.lists(st.floats(-0.5, 1.5), min_size=16, max_size=48)


@given(vals=samples)
def test_periodic_mass_conservation(vals):
    flux = build_flux("convex_combination")
    g = Grid1D(-2, 2, len(vals))
    f0 = SolutionField(g, 0.0, vals, "periodic")
    f1 = advance(f0, flux, 0.2)
    assert f1.mass == pytest.approx(f0.mass, abs=1e-12)


@given(vals=samples)
def test_invariant_region(vals):
    flux = build_flux("lwr_heterogeneous", v_amp=0.5)
    g = Grid1D(-2, 2, len(vals))
    f0 = SolutionField(g, 0.0, vals, "far_field", vals[0], vals[-1])
    f1 = advance(f0, flux, 0.3)
    lo = min(min(vals), flux.u_plus)
    hi = max(max(vals), flux.u_minus)
    assert f1.values.min() >= lo - 1e-12 and f1.values.max() <= hi + 1e-12


@given(a=samples, shift=st.floats(-0.3, 0.3))
def test_discrete_l1_contraction(a, shift):
    flux = build_flux("convex_combination")
    g = Grid1D(-2, 2, len(a))
    b = np.clip(np.asarray(a) + shift * np.cos(np.arange(len(a))), -0.5, 1.5)
    fa = SolutionField(g, 0.0, a, "periodic")
    fb = SolutionField(g, 0.0, b, "periodic")
    _, d = l1_distances(fa, fb, flux, 0.3)
    assert np.all(np.diff(d) <= 1e-12)


@given(vals=samples)
def test_ordered_data_stays_ordered(vals):
    flux = build_flux("convex_combination")
    g = Grid1D(-2, 2, len(vals))
    lo = SolutionField(g, 0.0, vals, "periodic")
    hi = SolutionField(g, 0.0, np.asarray(vals) + 0.1, "periodic")
    sch = scheme_for(flux, g)
    dt = min(sch.stable_dt(lo, 0.45), sch.stable_dt(hi, 0.45))
    assert np.all(sch.step(hi, dt)[0].values >= sch.step(lo, dt)[0].values - 1e-14)
