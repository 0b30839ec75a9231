"""Spatially heterogeneous convex fluxes ``f(x, u)``.

A :class:`FluxModel` bundles the flux with its first and mixed partial
derivatives, the two stationary states ``u_plus < u_minus`` and the
uniform-convexity constant.  Built-in families are created with
:func:`build_flux`; :func:`validate_assumptions` samples a flux and reports on
the structural hypotheses (S), (UC), (C2), (N), (FSP) and (P).

All evaluators broadcast over numpy arrays.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateJump, FluxError, NewtonDivergence

FAMILIES = (
    "lwr_heterogeneous",
    "convex_combination",
    "gaussian_lwr",
    "negative_heterogeneity",
    "homogeneous_quadratic",
)


@dataclass(frozen=True, eq=False)
class FluxModel:
    """Evaluatable flux with derivatives and stationary states.

    ``theta(v)`` is the speed envelope ``sup_x |f_u(x, v)|``.  ``conjugate``
    is an optional closed-form Legendre transform ``(x, p) -> (f*, argmax)``.
    ``x_active`` is a window outside of which the flux no longer depends on
    ``x`` (or only negligibly); it is used for sampling.  ``breakpoints`` are
    states where ``f_u`` switches between polynomial pieces; integrals over
    the state variable are split there.
    """

    f: Callable
    f_u: Callable
    f_x: Callable
    f_uu: Callable
    f_xu: Callable
    u_minus: float
    u_plus: float
    alpha: float
    theta: Callable
    family: str = "custom"
    params: Mapping = field(default_factory=dict)
    conjugate: Callable | None = None
    x_active: tuple = (-5.0, 5.0)
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.u_plus < self.u_minus:
            raise FluxError(f"need u_plus < u_minus, got {self.u_plus}, {self.u_minus}")
        if not self.alpha > 0:
            raise FluxError(f"convexity constant must be positive, got {self.alpha}")

    def speed_bound(self, lo, hi):
        """Largest |f_u| over all x and all states in ``[lo, hi]``."""
        # f_u is increasing in u, so the extremes sit at the interval ends
        return max(float(self.theta(lo)), float(self.theta(hi)))

    @property
    def f_minus(self):
        return float(self.f(0.0, self.u_minus))

    @property
    def f_plus(self):
        return float(self.f(0.0, self.u_plus))

    @property
    def sigma(self):
        """Rankine-Hugoniot speed of the simple shock u_minus -> u_plus."""
        return (self.f_minus - self.f_plus) / (self.u_minus - self.u_plus)

    def describe(self):
        return {"family": self.family, "params": dict(self.params),
                "u_minus": self.u_minus, "u_plus": self.u_plus, "alpha": self.alpha}


@dataclass(frozen=True)
class FluxFamily:
    tag: str
    params: Mapping = field(default_factory=dict)


# -- mollifier kernel (1 - t^2)^2 on [-1, 1] and its antiderivatives ---------

def _bump(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, 15.0 / 16.0 * (1.0 - t * t) ** 2, 0.0)


def _bump_slope(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, 15.0 / 4.0 * (t ** 3 - t), 0.0)


def _smooth_step(t):
    # kernel CDF; factored so that both ends are exact
    tc = np.clip(t, -1.0, 1.0)
    return (tc + 1.0) ** 3 * (3.0 * tc * tc - 9.0 * tc + 8.0) / 16.0


def _smooth_ramp(v, eps):
    """Mollified ``max(v, 0)`` with kernel half-width ``eps``."""
    v = np.asarray(v, dtype=float)
    tc = np.clip(v / eps, -1.0, 1.0)
    inner = eps * (tc + 1.0) ** 4 * (tc * tc - 4.0 * tc + 5.0) / 32.0
    return np.where(v >= eps, v, inner)


def _smooth_ramp_integral(v, eps):
    """Antiderivative of :func:`_smooth_ramp` vanishing at -infinity."""
    v = np.asarray(v, dtype=float)
    tc = np.clip(v / eps, -1.0, 1.0)
    inner = eps ** 2 * (tc + 1.0) ** 5 * (tc * tc - 5.0 * tc + 8.0) / 224.0
    return np.where(v >= eps, 0.5 * v * v + eps ** 2 / 14.0, inner)


def mollified_heaviside(width=1.0, center=0.0, decreasing=False):
    """Return ``(phi, phi', phi'')`` for a C^2 step of the given transition width."""
    half = 0.5 * width
    sign = -1.0 if decreasing else 1.0

    def phi(x):
        s = _smooth_step((np.asarray(x, dtype=float) - center) / half)
        return 1.0 - s if decreasing else s

    def dphi(x):
        return sign * _bump((np.asarray(x, dtype=float) - center) / half) / half

    def ddphi(x):
        return sign * _bump_slope((np.asarray(x, dtype=float) - center) / half) / half ** 2

    return phi, dphi, ddphi


# -- the kinked slope b~ of the admissible-flux example, mollified ----------
# a(u) = u and b = eta_eps * b~ with b~ of slope 3/2 below -1/2, 1 in between
# and 2/3 above 3/2.  Writing the gap a - b through mollified ramps gives
# closed forms for b, g = int_0^u b and their derivatives.

def slope_gap(u, eps):
    """``a(u) - b(u) >= 0``; zero on ``[-1/2 + eps, 3/2 - eps]``."""
    u = np.asarray(u, dtype=float)
    return 0.5 * _smooth_ramp(-u - 0.5, eps) + _smooth_ramp(u - 1.5, eps) / 3.0


def slope_gap_du(u, eps):
    u = np.asarray(u, dtype=float)
    return (-0.5 * _smooth_step((-u - 0.5) / eps)
            + _smooth_step((u - 1.5) / eps) / 3.0)


def primitive_gap(u, eps):
    """``h(u) - g(u) = int_0^u (a - b)``."""
    u = np.asarray(u, dtype=float)
    return (_smooth_ramp_integral(u - 1.5, eps) / 3.0
            - 0.5 * _smooth_ramp_integral(-u - 0.5, eps))


def kinked_slope(u):
    """The unmollified b~ exactly as constructed (piecewise linear)."""
    u = np.asarray(u, dtype=float)
    return np.where(u < -0.5, -0.5 + 1.5 * (u + 0.5),
                    np.where(u < 1.5, u, 1.5 + (u - 1.5) * 2.0 / 3.0))


# -- family constructors -----------------------------------------------------

def _convex_combination(params, decreasing):
    eps = float(params.get("epsilon", 0.1))
    if not 0.0 < eps < 0.25:
        raise FluxError(f"epsilon must lie in (0, 1/4), got {eps}")
    width = float(params.get("transition_width", 1.0))
    if width <= 0:
        raise FluxError("transition_width must be positive")
    center = float(params.get("center", 0.0))
    flat_lo, flat_hi = -0.5 + eps, 1.5 - eps
    default_minus = flat_hi if decreasing else 1.0
    u_minus = float(params.get("u_minus", default_minus))
    u_plus = float(params.get("u_plus", 0.0))
    for name, val in (("u_minus", u_minus), ("u_plus", u_plus)):
        if not flat_lo <= val <= flat_hi:
            raise FluxError(f"{name}={val} is not stationary; must lie in "
                            f"[{flat_lo}, {flat_hi}]")

    if "phi" in params:
        phi, dphi, ddphi = params["phi"]
        xs = np.linspace(center - 10 * width, center + 10 * width, 4001)
        steps = np.diff(phi(xs))
        ok = np.all(steps <= 1e-14) if decreasing else np.all(steps >= -1e-14)
        if not ok:
            raise FluxError("phi samples are not monotone in the required direction")
    else:
        phi, dphi, ddphi = mollified_heaviside(width, center, decreasing)

    def f(x, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u * u - (1.0 - phi(x)) * primitive_gap(u, eps)

    def f_u(x, u):
        u = np.asarray(u, dtype=float)
        return u - (1.0 - phi(x)) * slope_gap(u, eps)

    def f_x(x, u):
        return dphi(x) * primitive_gap(u, eps)

    def f_uu(x, u):
        return 1.0 - (1.0 - phi(x)) * slope_gap_du(u, eps)

    def f_xu(x, u):
        return dphi(x) * slope_gap(u, eps)

    def theta(v):
        v = np.asarray(v, dtype=float)
        return np.maximum(np.abs(v), np.abs(v - slope_gap(v, eps)))

    tag = "negative_heterogeneity" if decreasing else "convex_combination"
    clean = {k: v for k, v in params.items() if k != "phi"}
    clean.update(epsilon=eps, transition_width=width, center=center)
    return FluxModel(f, f_u, f_x, f_uu, f_xu, u_minus=u_minus, u_plus=u_plus,
                     alpha=2.0 / 3.0, theta=theta, family=tag, params=clean,
                     x_active=(center - width, center + width),
                     breakpoints=(-0.5 - eps, -0.5 + eps, 1.5 - eps, 1.5 + eps))


def _lwr(params, tag, defaults):
    p = dict(defaults)
    p.update(params)
    v_base, v_amp = float(p["v_base"]), float(p["v_amp"])
    width, center = float(p["v_width"]), float(p["center"])
    if width <= 0:
        raise FluxError("v_width must be positive")
    v_min = v_base + min(v_amp, 0.0)
    v_max = v_base + max(v_amp, 0.0)
    if v_min <= 0:
        raise FluxError(f"velocity profile must stay positive (min {v_min})")

    def V(x):
        r = (np.asarray(x, dtype=float) - center) / width
        return v_base + v_amp * np.exp(-r * r)

    def dV(x):
        r = (np.asarray(x, dtype=float) - center) / width
        return -2.0 * r / width * v_amp * np.exp(-r * r)

    def f(x, u):
        u = np.asarray(u, dtype=float)
        return V(x) * (u * u - u)

    def f_u(x, u):
        return V(x) * (2.0 * np.asarray(u, dtype=float) - 1.0)

    def f_x(x, u):
        u = np.asarray(u, dtype=float)
        return dV(x) * (u * u - u)

    def f_uu(x, u):
        return 2.0 * V(x) + 0.0 * np.asarray(u, dtype=float)

    def f_xu(x, u):
        return dV(x) * (2.0 * np.asarray(u, dtype=float) - 1.0)

    def theta(v):
        return v_max * np.abs(2.0 * np.asarray(v, dtype=float) - 1.0)

    def conjugate(x, p):
        vx = V(x)
        u = 0.5 * (np.asarray(p, dtype=float) / vx + 1.0)
        return u * p - vx * (u * u - u), u

    p.update(v_base=v_base, v_amp=v_amp, v_width=width, center=center)
    return FluxModel(f, f_u, f_x, f_uu, f_xu, u_minus=1.0, u_plus=0.0,
                     alpha=2.0 * v_min, theta=theta, family=tag, params=p,
                     conjugate=conjugate,
                     x_active=(center - 6.0 * width, center + 6.0 * width))


def _homogeneous(params):
    alpha = float(params.get("alpha", 1.0))
    if alpha <= 0:
        raise FluxError(f"alpha must be positive, got {alpha}")
    u_minus = float(params.get("u_minus", 1.0))
    u_plus = float(params.get("u_plus", 0.0))

    def zeros(x, u):
        return 0.0 * np.asarray(x, dtype=float) * np.asarray(u, dtype=float)

    def f(x, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * alpha * u * u + 0.0 * np.asarray(x, dtype=float)

    def f_u(x, u):
        return alpha * np.asarray(u, dtype=float) + 0.0 * np.asarray(x, dtype=float)

    def f_uu(x, u):
        return alpha + zeros(x, u)

    def theta(v):
        return alpha * np.abs(np.asarray(v, dtype=float))

    def conjugate(x, p):
        p = np.asarray(p, dtype=float) + 0.0 * np.asarray(x, dtype=float)
        return 0.5 * p * p / alpha, p / alpha

    return FluxModel(f, f_u, zeros, f_uu, zeros, u_minus=u_minus, u_plus=u_plus,
                     alpha=alpha, theta=theta, family="homogeneous_quadratic",
                     params={"alpha": alpha, "u_minus": u_minus, "u_plus": u_plus},
                     conjugate=conjugate, x_active=(-1.0, 1.0))


def build_flux(family, **params):
    """Build a :class:`FluxModel` from a :class:`FluxFamily` or a tag.

    >>> float(build_flux("gaussian_lwr").f(0.0, 0.5))
    -0.5
    """
    if isinstance(family, FluxFamily):
        params = {**dict(family.params), **params}
        family = family.tag
    if "alpha" in params and float(params["alpha"]) <= 0:
        raise FluxError(f"alpha must be positive, got {params['alpha']}")
    if family == "convex_combination":
        return _convex_combination(params, decreasing=False)
    if family == "negative_heterogeneity":
        return _convex_combination(params, decreasing=True)
    if family == "lwr_heterogeneous":
        return _lwr(params, family, dict(v_base=1.0, v_amp=0.0, v_width=1.0, center=0.0))
    if family == "gaussian_lwr":
        return _lwr(params, family, dict(v_base=1.0, v_amp=1.0, v_width=1.0, center=0.0))
    if family == "homogeneous_quadratic":
        return _homogeneous(params)
    raise FluxError(f"unknown flux family {family!r}; choose from {FAMILIES}")


def flux_from_function(f, u_minus, u_plus, alpha, x_range=(-10.0, 10.0),
                       n_theta=2001, step=1e-6):
    """Wrap a bare ``f(x, u)`` using centred finite differences for derivatives."""

    def _h(z, base):
        return base * np.maximum(1.0, np.abs(z))

    def f_u(x, u):
        u = np.asarray(u, dtype=float)
        h = _h(u, step)
        return (f(x, u + h) - f(x, u - h)) / (2 * h)

    def f_x(x, u):
        x = np.asarray(x, dtype=float)
        h = _h(x, step)
        return (f(x + h, u) - f(x - h, u)) / (2 * h)

    def f_uu(x, u):
        u = np.asarray(u, dtype=float)
        h = _h(u, 1e-4)
        return (f(x, u + h) - 2 * f(x, u) + f(x, u - h)) / (h * h)

    def f_xu(x, u):
        x = np.asarray(x, dtype=float)
        h = _h(x, 1e-4)
        return (f_u(x + h, u) - f_u(x - h, u)) / (2 * h)

    xs = np.linspace(x_range[0], x_range[1], n_theta)

    def theta(v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.max(np.abs(f_u(xs[:, None], v[None, :])), axis=0)
        return out if out.size > 1 else float(out[0])

    return FluxModel(f, f_u, f_x, f_uu, f_xu, u_minus=float(u_minus),
                     u_plus=float(u_plus), alpha=float(alpha), theta=theta,
                     x_active=tuple(x_range))


# -- Rankine-Hugoniot ----------------------------------------------------------

def rh_speed(flux, x, u_left, u_right, jump_floor=1e-10):
    """Jump speed ``(f(x,u_l) - f(x,u_r)) / (u_l - u_r)``."""
    if abs(u_left - u_right) <= jump_floor:
        raise DegenerateJump(f"|u_left - u_right| = {abs(u_left - u_right):.3g} "
                             f"<= {jump_floor:.3g}")
    return float((flux.f(x, u_left) - flux.f(x, u_right)) / (u_left - u_right))


def rh_speed_array(flux, x, u_left, u_right):
    """Vectorised RH speed; falls back to f_u where the states coincide."""
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    du = ul - ur
    safe = np.where(np.abs(du) > 1e-12, du, 1.0)
    quot = (flux.f(x, ul) - flux.f(x, ur)) / safe
    return np.where(np.abs(du) > 1e-12, quot, flux.f_u(x, 0.5 * (ul + ur)))


# -- safeguarded Newton for f_u(x, u) = p --------------------------------------

def invert_speed(flux, x, p, max_iter=50, tol=1e-14):
    """Solve ``f_u(x, u) = p`` for ``u`` (vectorised, bracketed by convexity).

    Because ``f_uu >= alpha`` the root lies within ``|r| / alpha`` of any
    starting guess with residual ``r``; Newton steps leaving that bracket are
    replaced by bisection.
    """
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    u = np.zeros_like(p)
    r = flux.f_u(x, u) - p
    lo = u - np.abs(r) / flux.alpha
    hi = u + np.abs(r) / flux.alpha
    for _ in range(max_iter):
        r = flux.f_u(x, u) - p
        lo = np.where(r < 0, u, lo)
        hi = np.where(r > 0, u, hi)
        slope = flux.f_uu(x, u)
        step = r / slope
        cand = u - step
        outside = (cand <= lo) | (cand >= hi)
        cand = np.where(outside, 0.5 * (lo + hi), cand)
        done = (np.abs(cand - u) <= tol * (1.0 + np.abs(u))) | (r == 0)
        u = np.where(r == 0, u, cand)
        if np.all(done):
            return u
    r = flux.f_u(x, u) - p
    if np.all(np.abs(r) <= 1e-10 * (1.0 + np.abs(p))):
        return u
    raise NewtonDivergence(f"f_u(x,u)=p not solved after {max_iter} iterations "
                           f"(max residual {np.max(np.abs(r)):.3g})")


def critical_state(flux, x):
    """State where ``f_u(x, .)`` vanishes (minimum of the convex section)."""
    return invert_speed(flux, x, np.zeros_like(np.asarray(x, dtype=float)))


# -- assumption checks -----------------------------------------------------------

@dataclass
class AssumptionCheck:
    passed: bool
    worst: float
    witness: tuple
    note: str = ""


@dataclass
class AssumptionReport:
    family: str
    x_range: tuple
    u_range: tuple
    grid_density: int
    checks: dict

    def passed(self, name):
        return self.checks[name].passed

    def to_dict(self):
        return {"family": self.family, "x_range": list(self.x_range),
                "u_range": list(self.u_range), "grid_density": self.grid_density,
                "checks": {k: asdict(v) for k, v in self.checks.items()}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _witness(arr, X, U, idx):
    i = np.unravel_index(idx, arr.shape)
    return (float(X[i]), float(U[i]))


def validate_assumptions(flux, x_range, u_range, grid_density=64):
    """Sample ``flux`` on a grid and check each structural assumption.

    (N) cannot be decided from compact samples; the check compares the flux
    against the quadratic minorant implied by uniform convexity and is flagged
    as heuristic in the report.
    """
    n = max(int(grid_density), 16)
    xs = np.linspace(x_range[0], x_range[1], n)
    us = np.linspace(u_range[0], u_range[1], n)
    X, U = np.meshgrid(xs, us, indexing="ij")
    checks = {}

    fx_stat = np.concatenate([np.abs(flux.f_x(xs, flux.u_plus + 0 * xs)),
                              np.abs(flux.f_x(xs, flux.u_minus + 0 * xs))])
    k = int(np.argmax(fx_stat))
    checks["S"] = AssumptionCheck(
        bool(fx_stat[k] <= 1e-10), float(fx_stat[k]),
        (float(xs[k % n]), flux.u_plus if k < n else flux.u_minus))

    fuu = np.asarray(flux.f_uu(X, U), dtype=float)
    k = int(np.argmin(fuu))
    checks["UC"] = AssumptionCheck(bool(fuu.flat[k] >= flux.alpha - 1e-12),
                                   float(max(flux.alpha - fuu.flat[k], 0.0)),
                                   _witness(fuu, X, U, k),
                                   note=f"min f_uu = {fuu.flat[k]:.6g}")

    h = 1e-5
    hu = h * np.maximum(1.0, np.abs(U))
    hx = h * np.maximum(1.0, np.abs(X))
    errs = [
        np.abs((flux.f(X, U + hu) - flux.f(X, U - hu)) / (2 * hu) - flux.f_u(X, U)),
        np.abs((flux.f(X + hx, U) - flux.f(X - hx, U)) / (2 * hx) - flux.f_x(X, U)),
        np.abs((flux.f_u(X, U + hu) - flux.f_u(X, U - hu)) / (2 * hu) - flux.f_uu(X, U)),
        np.abs((flux.f_u(X + hx, U) - flux.f_u(X - hx, U)) / (2 * hx) - flux.f_xu(X, U)),
    ]
    scale = 1.0 + np.abs(flux.f(X, U))
    err = np.max(np.stack(errs), axis=0) / scale
    k = int(np.argmax(err))
    checks["C2"] = AssumptionCheck(bool(err.flat[k] <= 1e-6), float(err.flat[k]),
                                   _witness(err, X, U, k))

    f0 = np.asarray(flux.f(xs, 0 * xs))
    s0 = np.abs(np.asarray(flux.f_u(xs, 0 * xs)))
    minorant = np.min(f0) - np.max(s0) * np.abs(U) + 0.5 * flux.alpha * U * U
    gap = np.asarray(flux.f(X, U)) - minorant
    k = int(np.argmin(gap))
    checks["N"] = AssumptionCheck(bool(gap.flat[k] >= -1e-9 and flux.alpha > 0),
                                  float(max(-gap.flat[k], 0.0)), _witness(gap, X, U, k),
                                  note="heuristic: superlinear minorant from (UC); "
                                       "growth at infinity is not decidable from samples")

    speeds = np.max(np.abs(np.asarray(flux.f_u(X, U))), axis=0)
    env = np.asarray(flux.theta(us), dtype=float)
    short = speeds - env
    k = int(np.argmax(short))
    checks["FSP"] = AssumptionCheck(bool(np.all(np.isfinite(env)) and short[k] <= 1e-9),
                                    float(max(short[k], 0.0)), (float("nan"), float(us[k])),
                                    note="theta(v) must dominate sampled |f_u(x, v)|")

    fxu = np.asarray(flux.f_xu(X, U), dtype=float)
    k = int(np.argmin(fxu))
    checks["P"] = AssumptionCheck(bool(fxu.flat[k] >= -1e-12),
                                  float(max(-fxu.flat[k], 0.0)), _witness(fxu, X, U, k))

    return AssumptionReport(flux.family, tuple(map(float, x_range)),
                            tuple(map(float, u_range)), n, checks)
