"""Quadratic relative entropies, shift curves and L2 stability diagnostics.

For a reference state ``c`` the pair ``eta(u, c) = (u - c)^2`` and
``Q(x, u, c) = (u - c)^2 q(x, u, c)`` is used, where

    q(x, u, c) = int_0^1 2 z f_u(x, c + z (u - c)) dz

is the normalised entropy flux.  Shift curves move with speed ``q`` at
continuity points and with the Rankine-Hugoniot speed at shocks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .errors import OrderingViolation, ShockFormedEarly
from .flux import build_flux, rh_speed
from .solver import (Grid1D, InitialData, find_layer, initial_field, interface_states,
                     scheme_for, steps)

_GAUSS = {}


def _gauss01(order):
    if order not in _GAUSS:
        nodes, weights = np.polynomial.legendre.leggauss(order)
        _GAUSS[order] = (0.5 * (nodes + 1.0), 0.5 * weights)
    return _GAUSS[order]


def state_quadrature(flux, u, c, order=8):
    """Nodes ``z`` and weights on ``[0, 1]`` for integrals along ``y = c + z (u - c)``.

    The interval is split wherever ``y`` crosses one of ``flux.breakpoints``,
    so piecewise-polynomial integrands of degree below ``2 * order`` are
    integrated exactly.  Output shapes are ``u.shape + (panels * order,)``.
    """
    z, w = _gauss01(order)
    u, c = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(c, dtype=float))
    bps = np.asarray(flux.breakpoints, dtype=float)
    if bps.size == 0:
        shape = u.shape + (order,)
        return np.broadcast_to(z, shape), np.broadcast_to(w, shape)
    du = u - c
    safe = np.where(du == 0, 1.0, du)
    cuts = np.where(du[..., None] == 0, 0.0, (bps - c[..., None]) / safe[..., None])
    cuts = np.sort(np.clip(cuts, 0.0, 1.0), axis=-1)
    ends = np.ones(u.shape + (1,))
    edges = np.concatenate([0 * ends, cuts, ends], axis=-1)
    lo, width = edges[..., :-1, None], np.diff(edges, axis=-1)[..., None]
    return (lo + width * z).reshape(u.shape + (-1,)), (width * w).reshape(u.shape + (-1,))


def _state_integral(flux, deriv, x, u, c, order):
    x, u, c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, u, c)))
    z, w = state_quadrature(flux, u, c, order)
    y = c[..., None] + z * (u - c)[..., None]
    out = np.sum(2.0 * z * w * deriv(x[..., None], y), axis=-1)
    return out if out.ndim else float(out)


def eval_q(flux, x, u, c, order=8):
    """Normalised entropy flux by panel Gauss-Legendre quadrature in ``z``."""
    return _state_integral(flux, flux.f_u, x, u, c, order)


def eval_q_x(flux, x, u, c, order=8):
    """Explicit x-derivative of ``q``; non-negative whenever ``f_xu >= 0``."""
    return _state_integral(flux, flux.f_xu, x, u, c, order)


@dataclass
class QMonotonicity:
    min_dq_du: float
    min_dq_dc: float
    bound_u: float
    bound_c: float
    samples: int

    @property
    def passed(self):
        return self.min_dq_du >= self.bound_u - 1e-6 and self.min_dq_dc >= self.bound_c - 1e-6

    def to_dict(self):
        return {**asdict(self), "passed": self.passed}


def q_monotonicity(flux, x_range, u_range, n=32, h=1e-6):
    """Smallest centred-difference slopes of ``q`` in ``u`` and ``c`` over an ``n^3`` box.

    Uniform convexity forces ``dq/du >= 2 alpha / 3`` and ``dq/dc >= alpha / 3``.
    """
    xs = np.linspace(*x_range, n)
    us = np.linspace(*u_range, n)
    X, U, C = np.meshgrid(xs, us, us, indexing="ij")
    du = (eval_q(flux, X, U + h, C) - eval_q(flux, X, U - h, C)) / (2 * h)
    dc = (eval_q(flux, X, U, C + h) - eval_q(flux, X, U, C - h)) / (2 * h)
    return QMonotonicity(float(du.min()), float(dc.min()), 2 * flux.alpha / 3,
                         flux.alpha / 3, int(X.size))


def eta(u, c):
    return (np.asarray(u, dtype=float) - c) ** 2


def entropy_flux(flux, x, u, c, order=8):
    return eta(u, c) * eval_q(flux, x, u, c, order)


def entropy_flux_quad(flux, x, u, c):
    """``Q(x, u, c)`` by adaptive quadrature over the state variable (scalar inputs)."""
    val, _ = quad(lambda y: 2.0 * (y - c) * flux.f_u(x, y), c, u, epsabs=1e-13, epsrel=1e-12)
    return val


@dataclass
class EntropyPair:
    flux: object
    c: float

    def eta(self, u):
        return eta(u, self.c)

    def Q(self, x, u):
        return entropy_flux(self.flux, x, u, self.c)


# -- relative L2 distance --------------------------------------------------------

def relative_l2(field, shift, sigma_t_offset=0.0, u_minus=None, u_plus=None):
    """L2 distance between the field and ``Phi(. - shift - sigma_t_offset)``.

    The cell straddling the jump is split exactly at the jump position.
    """
    g = field.grid
    um = field.left_state if u_minus is None else u_minus
    up = field.right_state if u_plus is None else u_plus
    v = field.values
    y = float(shift) + float(sigma_t_offset)
    j = int(np.clip(np.floor((y - g.x_left) / g.dx), 0, g.n_cells - 1))
    a = g.x_left + j * g.dx
    frac = min(max((y - a) / g.dx, 0.0), 1.0)
    total = (np.sum((v[:j] - um) ** 2) + np.sum((v[j + 1:] - up) ** 2)) * g.dx
    total += ((v[j] - um) ** 2 * frac + (v[j] - up) ** 2 * (1.0 - frac)) * g.dx
    return float(np.sqrt(total))


# -- shift curves ------------------------------------------------------------------

def shift_speed(flux, field, xi, c, floor, offset=3):
    """Speed of a shift curve at ``xi``: RH speed inside a shock layer, ``q`` elsewhere."""
    g = field.grid
    layer = find_layer(field.values, g, xi, floor, offset)
    a = g.x_left + (layer.first_face - offset) * g.dx
    b = g.x_left + (layer.last_face + offset) * g.dx
    if layer.is_shock and a <= xi <= b:
        return rh_speed(flux, xi, layer.u_left, layer.u_right, jump_floor=floor)
    u = field.values[int(g.cell_index(xi))]
    return eval_q(flux, xi, u, c)


class ShiftTracker:
    """Solver observer integrating both shift curves with the solver's own step."""

    def __init__(self, flux, field, jump_floor=None, ordering_tol=None, offset=3,
                 raise_on_violation=True):
        self.flux = flux
        self.floor = 1e-3 * (flux.u_minus - flux.u_plus) if jump_floor is None else jump_floor
        self.tol = 2.0 * field.grid.dx if ordering_tol is None else ordering_tol
        self.offset = offset
        self.raise_on_violation = raise_on_violation
        self.prev = field
        self.times = [field.time]
        self.xi_plus = [0.0]
        self.xi_minus = [0.0]
        self.worst_gap = 0.0

    def __call__(self, field, dt, _face_fluxes=None):
        p, m = self.xi_plus[-1], self.xi_minus[-1]
        vp = shift_speed(self.flux, self.prev, p, self.flux.u_plus, self.floor, self.offset)
        vm = shift_speed(self.flux, self.prev, m, self.flux.u_minus, self.floor, self.offset)
        p, m = p + dt * vp, m + dt * vm
        self.times.append(field.time)
        self.xi_plus.append(p)
        self.xi_minus.append(m)
        self.prev = field
        gap = p - m
        self.worst_gap = max(self.worst_gap, gap)
        if gap > self.tol and self.raise_on_violation:
            raise OrderingViolation(
                f"xi_plus - xi_minus = {gap:.3g} exceeds {self.tol:.3g} at t={field.time:.6g}")

    def result(self):
        return ShiftPair(np.asarray(self.times), np.asarray(self.xi_plus),
                         np.asarray(self.xi_minus), self.flux.sigma)


@dataclass
class ShiftPair:
    t: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    sigma: float
    weight: float = 0.5

    @property
    def xi_bar(self):
        w = self.weight
        return w * self.xi_minus + (1 - w) * self.xi_plus - self.sigma * self.t

    @property
    def lipschitz(self):
        dt = np.diff(self.t)
        if len(dt) == 0:
            return 0.0
        slopes = np.concatenate([np.diff(self.xi_plus) / dt, np.diff(self.xi_minus) / dt])
        return float(np.max(np.abs(slopes)))

    @property
    def max_gap(self):
        return float(np.max(self.xi_plus - self.xi_minus))


def integrate_shift_curves(history_or_field, flux, horizon=None, cfl=0.45, **tracker_kw):
    """Shift curves for a run started from a field.

    Passing a stored history uses its initial snapshot and re-runs the solver
    so the curves see every step.
    """
    field = history_or_field.snapshot(0) if hasattr(history_or_field, "snapshot") else history_or_field
    if horizon is None:
        horizon = history_or_field.times[-1]
    tracker = ShiftTracker(flux, field, **tracker_kw)
    for f, dt, F in steps(field, flux, horizon, cfl):
        tracker(f, dt, F)
    return tracker.result()


def shift_bound_K(flux, u0_field, lipschitz):
    """Constant ``K`` of the square-root bound on the mean shift, and the linear slope."""
    sigma = abs(flux.sigma)
    dist = relative_l2(u0_field, 0.0, 0.0, flux.u_minus, flux.u_plus)
    V = flux.theta(float(np.max(np.abs(u0_field.values))))
    a = lipschitz + sigma
    K = (np.sqrt(a) + np.sqrt(a + V)) * dist / (flux.u_minus - flux.u_plus)
    return float(K), float(a)


# -- stability experiment -----------------------------------------------------------

@dataclass
class StabilityReport:
    times: list
    relative_l2: list
    initial_norm: float
    num_tol: float
    contraction_pass: bool
    excess: float
    xi_plus: list
    xi_minus: list
    xi_bar: list
    K_bound: float
    linear_slope: float
    lipschitz: float
    sqrt_t_pass: bool
    ordering_pass: bool
    max_ordering_gap: float
    ordering_tol: float
    dx: float
    p_check: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def envelope(self):
        t = np.asarray(self.times)
        return np.minimum(self.K_bound * np.sqrt(t), self.linear_slope * t)

    def to_csv(self, path):
        env = self.K_bound * np.sqrt(np.asarray(self.times))
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "relative_l2", "xi_plus", "xi_minus", "xi_bar", "K_sqrt_t_envelope"])
            for row in zip(self.times, self.relative_l2, self.xi_plus, self.xi_minus,
                           self.xi_bar, env):
                w.writerow([f"{v:.17g}" for v in row])


def stability_run(flux, data, grid, horizon, cfl=0.45, sample_every=1, jump_floor=None,
                  weight=0.5):
    """Evolve ``data``, integrate both shift curves and certify contraction and shift bounds."""
    field0 = initial_field(data, grid, flux)
    field0 = field0.evolve(field0.values, 0.0)
    tracker = ShiftTracker(flux, field0, jump_floor=jump_floor, raise_on_violation=False)
    sigma = flux.sigma
    norm0 = relative_l2(field0, 0.0, 0.0, flux.u_minus, flux.u_plus)
    times, norms = [0.0], [norm0]
    count = 0
    for f, dt, F in steps(field0, flux, horizon, cfl):
        tracker(f, dt, F)
        count += 1
        if count % sample_every == 0 or f.time == horizon:
            mid = weight * tracker.xi_minus[-1] + (1 - weight) * tracker.xi_plus[-1]
            times.append(f.time)
            norms.append(relative_l2(f, mid, 0.0, flux.u_minus, flux.u_plus))
    pair = tracker.result()
    pair.weight = weight
    num_tol = 5.0 * np.sqrt(grid.dx) * float(np.max(np.abs(field0.values)))
    norms_arr = np.asarray(norms)
    excess = float(max(0.0, np.max(norms_arr - norm0)))
    lip = pair.lipschitz
    K, slope = shift_bound_K(flux, field0, lip)
    xb = pair.xi_bar
    env = np.minimum(K * np.sqrt(pair.t), slope * pair.t)
    sqrt_ok = bool(np.all(np.abs(xb) <= K * np.sqrt(pair.t) + 2 * grid.dx)
                   and np.all(np.abs(xb) <= env + 2 * grid.dx))
    lo = float(min(field0.values.min(), flux.u_plus))
    hi = float(max(field0.values.max(), flux.u_minus))
    xs = np.linspace(grid.x_left, grid.x_right, 257)
    us = np.linspace(lo, hi, 65)
    fxu = flux.f_xu(xs[:, None], us[None, :])
    p_check = {"u_range": [lo, hi], "min_f_xu": float(fxu.min()), "passed": bool(fxu.min() >= -1e-10)}
    sample_idx = np.searchsorted(pair.t, times)
    return StabilityReport(
        times=list(map(float, times)), relative_l2=norms_arr.tolist(), initial_norm=norm0,
        num_tol=float(num_tol), contraction_pass=bool(np.all(norms_arr <= norm0 + num_tol)),
        excess=excess, xi_plus=pair.xi_plus[sample_idx].tolist(),
        xi_minus=pair.xi_minus[sample_idx].tolist(), xi_bar=xb[sample_idx].tolist(),
        K_bound=K, linear_slope=slope, lipschitz=lip, sqrt_t_pass=sqrt_ok,
        ordering_pass=bool(pair.max_gap <= 2 * grid.dx), max_ordering_gap=pair.max_gap,
        ordering_tol=2 * grid.dx, dx=grid.dx, p_check=p_check)


# -- negative heterogeneity ------------------------------------------------------------

@dataclass
class GrowthReport:
    times: list
    norms: list
    initial_norm: float
    increase: float
    window_end: float
    strictly_increasing: bool
    control_drift: float | None
    initial_rate_predicted: float
    initial_rate_measured: float
    max_gradient: list
    note: str = ""

    def to_dict(self):
        return asdict(self)

    def passes(self, scale=None):
        eps = np.finfo(float).eps
        scale = max(self.initial_norm, 1.0) if scale is None else scale
        enough = self.increase >= 10 * eps * scale
        beats = self.control_drift is None or self.increase >= 5 * self.control_drift
        return bool(self.strictly_increasing and enough and beats)


def _norm_series(flux, field, horizon, cfl, blowup_factor):
    c = flux.u_minus
    g = field.grid
    grad0 = float(np.max(np.abs(np.diff(field.values)))) / g.dx
    times, norms, grads = [0.0], [float(np.sqrt(np.sum((field.values - c) ** 2) * g.dx))], [grad0]
    shock_time = None
    for f, dt, _ in steps(field, flux, horizon, cfl):
        times.append(f.time)
        norms.append(float(np.sqrt(np.sum((f.values - c) ** 2) * g.dx)))
        grads.append(float(np.max(np.abs(np.diff(f.values)))) / g.dx)
        if shock_time is None and grad0 > 0 and grads[-1] > blowup_factor * grad0:
            shock_time = f.time
    return np.asarray(times), np.asarray(norms), np.asarray(grads), shock_time


def growth_rate(flux, field):
    """Predicted ``d/dt int (u - c)^2 dx`` for a classical solution, ``c = u_minus``.

    Equals ``-2 int int_c^u f_x(x, y) dy dx``, evaluated by panel Gauss quadrature in ``y``.
    """
    c = flux.u_minus
    x = field.grid.centers
    u = field.values
    z, w = state_quadrature(flux, u, c)
    y = c + z * (u - c)[:, None]
    inner = (u - c) * np.sum(w * flux.f_x(x[:, None], y), axis=1)
    return float(-2.0 * np.sum(inner) * field.grid.dx)


def negative_heterogeneity_growth(flux, amplitude=1.0, bump_center=-0.5, bump_width=1.0,
                                  horizon=0.2, n_cells=4000, domain=(-3.0, 3.0), cfl=0.45,
                                  control_flux=None, blowup_factor=10.0, min_samples=5):
    """Track ``||u(t) - u_minus||_2`` for ``u0 = u_minus + bump``.

    With ``control_flux`` the same data is rerun under that flux and its drift
    ``max(0, max_t norm(t) - norm(0))`` is reported.
    """
    grid = Grid1D(domain[0], domain[1], n_cells)
    data = InitialData("constant", {"value": flux.u_minus, "amplitude": amplitude,
                                    "bump_center": bump_center, "bump_width": bump_width})
    field = initial_field(data, grid, flux)
    times, norms, grads, shock_time = _norm_series(flux, field, horizon, cfl, blowup_factor)
    note = ""
    if amplitude == 0.0:
        note = "zero perturbation: norm stays zero"
        window = len(times)
    else:
        window = len(times) if shock_time is None else int(np.searchsorted(times, shock_time))
        if shock_time is not None and window < min_samples:
            raise ShockFormedEarly(
                f"gradient blow-up at t={shock_time:.4g} before growth could be measured")
        if shock_time is not None:
            note = f"shock formed at t={shock_time:.4g}; growth measured before it"
    seg = norms[:window]
    increasing = bool(len(seg) > 1 and np.all(np.diff(seg) > 0))
    increase = float(seg[-1] - seg[0]) if len(seg) > 1 else 0.0
    drift = None
    if control_flux is not None:
        cfield = initial_field(data, grid, control_flux)
        _, cn, _, _ = _norm_series(control_flux, cfield, times[window - 1] if window > 1 else horizon,
                                   cfl, np.inf)
        drift = float(max(0.0, np.max(cn - cn[0])))
    rate_meas = float((norms[1] ** 2 - norms[0] ** 2) / (times[1] - times[0])) if len(times) > 1 else 0.0
    return GrowthReport(times.tolist(), norms.tolist(), float(norms[0]), increase,
                        float(times[window - 1]), increasing, drift,
                        growth_rate(flux, field), rate_meas, grads.tolist(), note)


def twin_flux(flux):
    """Same construction with increasing transition, so that ``f_xu >= 0``."""
    params = {k: v for k, v in flux.params.items() if k != "phi"}
    return build_flux("convex_combination", **params)


# -- discrete entropy residual -----------------------------------------------------

@dataclass
class ResidualReport:
    times: list
    max_positive: list
    min_residual: list
    worst: float
    worst_location: float

    def to_dict(self):
        return asdict(self)


def entropy_residual(history, flux, c, cfl=0.45):
    """One-step cell entropy residual ``d/dt eta + d/dx G`` from every stored snapshot.

    ``G`` is ``Q`` evaluated at the exact interface Riemann state, so for a
    monotone update the residual is non-positive up to consistency errors.
    """
    sch = scheme_for(flux, history.grid)
    dx = history.grid.dx
    times, pos, neg = [], [], []
    worst, where = -np.inf, float("nan")
    for field in history:
        dt = sch.stable_dt(field, cfl)
        if not np.isfinite(dt):
            dt = cfl * dx
        new, _ = sch.step(field, dt)
        ext = sch.padded(field)
        w = interface_states(flux, sch.x_faces, ext[:-1], ext[1:], sch.u_crit)
        G = entropy_flux(flux, sch.x_faces, w, c)
        if field.boundary_mode == "periodic":
            G[0] = G[-1]
        R = (eta(new.values, c) - eta(field.values, c)) / dt + (G[1:] - G[:-1]) / dx
        times.append(field.time)
        pos.append(float(max(R.max(), 0.0)))
        neg.append(float(R.min()))
        if R.max() > worst:
            worst, where = float(R.max()), float(history.grid.centers[int(np.argmax(R))])
    return ResidualReport(times, pos, neg, float(max(worst, 0.0)), where)
