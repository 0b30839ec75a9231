import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hetclaw.errors import DegenerateJump, FluxError
from hetclaw.flux import (
    FAMILIES, FluxFamily, build_flux, critical_state, flux_from_function, invert_speed,
    kinked_slope, mollified_heaviside, primitive_gap, rh_speed, slope_gap,
    validate_assumptions,
)

EPS = 0.1


def kernel(t):
    return np.where(np.abs(t) < 1, 15 / 16 * (1 - t * t) ** 2, 0.0)


def mollified_slope_by_quadrature(u, eps=EPS):
    """b = kernel_eps * b~, integrated numerically."""
    val, _ = quad(lambda s: kinked_slope(u - s) * kernel(s / eps) / eps, -eps, eps,
                  points=[u + 0.5, u - 1.5], limit=200)
    return val


def test_gaussian_value_at_origin():
    assert float(build_flux("gaussian_lwr").f(0.0, 0.5)) == pytest.approx(-0.5, abs=1e-15)


def test_lwr_vanishes_at_empty_road():
    flux = build_flux("lwr_heterogeneous")
    assert np.all(flux.f(np.linspace(-4, 4, 9), 0.0) == 0.0)


@pytest.mark.parametrize("u", [-1.2, -0.55, -0.45, 0.3, 1.44, 1.5, 1.57, 2.4])
def test_slope_gap_matches_numerical_convolution(u):
    b = mollified_slope_by_quadrature(u)
    assert u - float(slope_gap(u, EPS)) == pytest.approx(b, abs=1e-12)


@pytest.mark.parametrize("u", [-1.0, -0.5, 0.7, 1.0, 1.6, 2.2])
def test_primitive_gap_is_integral_of_slope_gap(u):
    val, _ = quad(lambda s: float(slope_gap(s, EPS)), 0.0, u, limit=200,
                  points=[-0.6, -0.4, 1.4, 1.6])
    assert float(primitive_gap(u, EPS)) == pytest.approx(val, abs=1e-12)


def test_h_equals_g_at_one():
    flux = build_flux("convex_combination", epsilon=EPS)
    # phi = 1 far right (f = h), phi = 0 far left (f = g)
    assert float(flux.f(10.0, 1.0)) == pytest.approx(float(flux.f(-10.0, 1.0)), abs=1e-12)


def test_mollified_heaviside_endpoints_and_derivative():
    phi, dphi, _ = mollified_heaviside(width=1.0)
    assert float(phi(-0.5)) == 0.0 and float(phi(0.5)) == 1.0
    total, _ = quad(lambda x: float(dphi(x)), -0.5, 0.5)
    assert total == pytest.approx(1.0, abs=1e-12)
    dec, ddec, _ = mollified_heaviside(width=1.0, decreasing=True)
    assert float(dec(-0.5)) == 1.0 and float(ddec(0.1)) < 0


@pytest.mark.parametrize("family", FAMILIES)
def test_stationary_states_have_no_x_dependence(family):
    flux = build_flux(family)
    xs = np.linspace(-5, 5, 201)
    for c in (flux.u_plus, flux.u_minus):
        assert np.max(np.abs(flux.f_x(xs, c))) <= 1e-14


def test_convex_combination_satisfies_all_assumptions():
    rep = validate_assumptions(build_flux("convex_combination"), (-2, 2), (-1, 2.5), 48)
    assert all(c.passed for c in rep.checks.values()), rep.to_json()


def test_gaussian_fails_positivity_with_witness():
    rep = validate_assumptions(build_flux("gaussian_lwr"), (-3, 3), (0, 1), 64)
    p = rep.checks["P"]
    assert not p.passed and p.worst > 0
    x, u = p.witness
    assert float(build_flux("gaussian_lwr").f_xu(x, u)) < 0


def test_negative_heterogeneity_fails_positivity():
    flux = build_flux("negative_heterogeneity")
    rep = validate_assumptions(flux, (-1, 1), (flux.u_plus, flux.u_minus + 0.5), 64)
    assert not rep.checks["P"].passed and rep.checks["S"].passed


def test_broken_stationarity_is_reported():
    bad = flux_from_function(lambda x, u: (1 + 0.3 * np.tanh(x)) * u * u, 1.0, 0.0, 1.4)
    rep = validate_assumptions(bad, (-2, 2), (0, 1), 32)
    assert not rep.checks["S"].passed


@pytest.mark.parametrize("kw", [{"epsilon": 0.3}, {"epsilon": 0.0}, {"alpha": -1.0}])
def test_bad_parameters_rejected(kw):
    with pytest.raises(FluxError):
        build_flux("convex_combination", **kw)


def test_non_monotone_phi_rejected():
    phi = (np.sin, np.cos, lambda x: -np.sin(x))
    with pytest.raises(FluxError):
        build_flux("convex_combination", phi=phi)


def test_unknown_family_and_dataclass_family():
    with pytest.raises(FluxError):
        build_flux("nope")
    flux = build_flux(FluxFamily("homogeneous_quadratic", {"alpha": 2.0}))
    assert flux.alpha == 2.0


def test_rh_speed_burgers_and_degenerate():
    flux = build_flux("homogeneous_quadratic")
    assert rh_speed(flux, 0.0, 1.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(DegenerateJump):
        rh_speed(flux, 0.0, 0.3, 0.3)
    assert flux.sigma == pytest.approx(0.5)


def test_lwr_critical_state_is_half():
    flux = build_flux("lwr_heterogeneous", v_amp=0.5)
    assert np.allclose(critical_state(flux, np.linspace(-3, 3, 7)), 0.5, atol=1e-14)


@given(x=st.floats(-3, 3), p=st.floats(-2.5, 2.5))
def test_invert_speed_roundtrip(x, p):
    flux = build_flux("convex_combination")
    u = invert_speed(flux, x, p)
    assert float(flux.f_u(x, u)) == pytest.approx(p, abs=1e-10)


@given(x=st.floats(-3, 3), u=st.floats(-2, 3), v=st.floats(-2, 3))
def test_speed_envelope_dominates(x, u, v):
    flux = build_flux("convex_combination")
    assert abs(float(flux.f_u(x, u))) <= flux.speed_bound(min(u, v), max(u, v)) + 1e-12


@given(x=st.floats(-3, 3), u=st.floats(-2, 3), w=st.floats(0.01, 1.0))
def test_uniform_convexity(x, u, w):
    flux = build_flux("convex_combination")
    # secant slopes grow at least like alpha
    left = (flux.f(x, u) - flux.f(x, u - w)) / w
    right = (flux.f(x, u + w) - flux.f(x, u)) / w
    assert right - left >= flux.alpha * w - 1e-12


@given(x=st.floats(-3, 3), u=st.floats(-2, 3))
def test_positivity_of_mixed_derivative(x, u):
    assert float(build_flux("convex_combination").f_xu(x, u)) >= 0.0
    assert float(build_flux("negative_heterogeneity").f_xu(x, u)) <= 0.0
