"""Experiment drivers shared by the command line and the acceptance suite.

Each ``run_*`` function takes a validated :class:`RunConfig` and an output
directory, writes its artifacts there and returns ``(criteria, metrics,
artifacts)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .characteristics import CharState, backward_char_from, flux_residuals, integrate_char
from .errors import ConfigError, NoIntersection, NotEmerged, OutOfDomain
from .flux import build_flux, validate_assumptions
from .hj import correspondence_check, dp_value, value_from_field
from .output import write_json, write_snapshot, write_table
from .shock import (default_jump_floor, detect_emergence, emergence_bound, merge_shocks,
                    track_shock, wedge_check)
from .solver import Grid1D, InitialData, auto_domain, find_layer, initial_field, phi_average, run
from .stability import negative_heterogeneity_growth, stability_run, twin_flux


def make_flux(cfg):
    return build_flux(cfg.flux_family, **cfg.flux_params)


def make_data(cfg):
    return InitialData(cfg.data_kind, dict(cfg.data_params))


def make_grid(cfg, flux, data):
    domain = cfg.domain or auto_domain(flux, data, cfg.horizon)
    return Grid1D(float(domain[0]), float(domain[1]), int(cfg.n_cells))


# -- emergence ---------------------------------------------------------------------

@dataclass
class EmergenceStudy:
    history: object
    report: object
    curve_minus: object
    curve_plus: object
    merge_time: float
    wedge: object
    bound: object
    feet: dict | None = None


def emergence_study(flux, data, grid, horizon, cfl=0.45, snapshot_every=10, tolerance=None,
                    jump_floor=None, detect=True):
    """Run piecewise data, track both initial shocks and detect the emergent simple shock."""
    field = initial_field(data, grid, flux)
    history = run(field, flux, horizon, cfl, snapshot_every)
    p = data.params
    floor = default_jump_floor(flux) if jump_floor is None else jump_floor
    report = detect_emergence(history, flux, tolerance, data, floor) if detect else None
    cm = track_shock(history, flux, (float(p.get("x_minus", -1.0)), 0.0), floor)
    cp = track_shock(history, flux, (float(p.get("x_plus", 1.0)), 0.0), floor)
    try:
        t_merge = merge_shocks(cm, cp).origin[1]
    except NoIntersection:
        t_merge = float("inf")
    wedge = wedge_check(cm, cp, flux, floor,
                        t_merge=t_merge if np.isfinite(t_merge) else None)
    feet = characteristic_feet(history, flux, data, report) if report is not None else None
    return EmergenceStudy(history, report, cm, cp, t_merge, wedge, emergence_bound(flux, data),
                          feet)


def characteristic_feet(history, flux, data, report, offset=6):
    """Feet of the backward characteristics from both sides of the detected shock.

    After emergence the left one should start at or left of ``x_minus`` and
    the right one right of ``x_plus``; a foot inside means detection fired
    before the interaction was complete.
    """
    p = data.params
    try:
        left = backward_char_from(history, flux, report.X_detected, report.T_detected, "left",
                                  offset=offset).end.y
        right = backward_char_from(history, flux, report.X_detected, report.T_detected, "right",
                                   offset=offset).end.y
    except OutOfDomain:
        return None
    slack = (offset + 2) * history.grid.dx
    return {"foot_minus": left, "foot_plus": right,
            "consistent": bool(left <= float(p.get("x_minus", -1.0)) + slack
                               and right >= float(p.get("x_plus", 1.0)) - slack)}


def merge_sweep_point(alpha, width, cells_per_unit=200, cfl=0.45):
    """Merge time of the two shocks of the special piecewise data under a heterogeneous LWR flux.

    The speed profile is ``V(x) = (alpha / 2)(1 + exp(-x^2) / 2)`` so the
    uniform convexity constant equals ``alpha``.
    """
    flux = build_flux("lwr_heterogeneous", v_base=alpha / 2, v_amp=alpha / 4, v_width=1.0)
    data = InitialData("piecewise4", {"x_minus": -width / 2, "x0": 0.0, "x_plus": width / 2})
    bound = emergence_bound(flux, data)
    horizon = 6.0 * width / alpha + 2.0
    lo, hi = -width / 2 - 2.0, width / 2 + 2.0
    grid = Grid1D(lo, hi, int(round((hi - lo) * cells_per_unit)))
    history = run(initial_field(data, grid, flux), flux, horizon, cfl, 5)
    cm = track_shock(history, flux, (-width / 2, 0.0))
    cp = track_shock(history, flux, (width / 2, 0.0))
    try:
        t_merge = merge_shocks(cm, cp).origin[1]
    except NoIntersection:
        t_merge = float("inf")
    return {"alpha": alpha, "width": width, "t_merge": t_merge, "t_right": bound.t_right,
            "t_left": bound.t_left, "partial_bound": bound.partial, "horizon": horizon,
            "dx": grid.dx}


# -- gaussian counterexample -----------------------------------------------------------

def max_trace_jump(field, jump_floor=1e-3, probes=None):
    """Largest shock jump found by layer detection across the grid."""
    g = field.grid
    probes = np.arange(g.x_left + 0.5, g.x_right - 0.5, 10 * g.dx) if probes is None else probes
    best, where = 0.0, float("nan")
    for x in probes:
        layer = find_layer(field.values, g, x, jump_floor)
        if layer.is_shock and layer.jump > best:
            best, where = layer.jump, layer.position
    return best, where


# -- individual experiments --------------------------------------------------------------

def run_simulate(cfg, out):
    flux, data = make_flux(cfg), make_data(cfg)
    grid = make_grid(cfg, flux, data)
    field = initial_field(data, grid, flux, cfg.boundary_mode)
    hist = run(field, flux, cfg.horizon, cfg.cfl, cfg.snapshot_every,
               extra_times=cfg.snapshot_times)
    artifacts = []
    wanted = sorted(set(cfg.snapshot_times) | {0.0, float(cfg.horizon)})
    # the stationary states are sub- and supersolutions, so they widen the invariant range
    lo = min(float(field.values.min()), flux.u_plus) - 1e-10
    hi = max(float(field.values.max()), flux.u_minus) + 1e-10
    max_ok = True
    for k, t in enumerate(wanted):
        snap = hist.snapshot(hist.nearest(t))
        artifacts += write_snapshot(snap, out / f"snapshot_{k:03d}")
    for vals in hist.values:
        max_ok &= bool(vals.min() >= lo and vals.max() <= hi)
    final = hist.final
    criteria = {"restricted_max_principle": max_ok}
    metrics = {"final_time": final.time, "steps": hist.n_steps, "dx": grid.dx,
               "mass_change": final.mass - field.mass}
    if data.kind == "riemann_phi":
        # the travelling profile is an exact entropy solution for every family
        jump_at = float(data.params.get("x0", 0.0)) + flux.sigma * final.time
        exact = phi_average(grid, flux.u_minus, flux.u_plus, jump_at)
        metrics["l1_error"] = float(np.sum(np.abs(final.values - exact)) * grid.dx)
        if flux.sigma == 0.0:
            dev = float(np.max(np.abs(final.values - field.values)))
            criteria["stationary_simple_shock"] = dev <= 1e-12
            metrics["stationary_deviation"] = dev
    if data.kind == "constant" and float(data.params.get("amplitude", 0.0)) == 0.0:
        jump, where = max_trace_jump(final)
        metrics["max_trace_jump"] = jump
        metrics["jump_location"] = where
        if flux.family == "gaussian_lwr":
            criteria["trace_jump_forms"] = jump > 0.1
    return criteria, metrics, artifacts


def run_characteristics(cfg, out):
    flux = make_flux(cfg)
    opts = cfg.options.get("characteristics", {})
    seeds = opts.get("seeds", [0.0, 0.5])
    seeds = seeds if isinstance(seeds, list) else [seeds]
    if len(seeds) % 2:
        raise ConfigError("characteristics.seeds must list y, z pairs",
                          {"characteristics.seeds": "odd number of entries"})
    dt = float(opts.get("dt", 1e-3))
    t_end = float(opts.get("t_end", cfg.horizon))
    tol = float(opts.get("flux_tol", 1e-8))
    artifacts, worst = [], 0.0
    for k in range(0, len(seeds), 2):
        traj = integrate_char(flux, CharState(float(seeds[k]), float(seeds[k + 1])), t_end, dt)
        path = out / f"trajectory_{k // 2:03d}.csv"
        traj.to_csv(path, flux)
        artifacts.append(path)
        worst = max(worst, traj.f_residual)
    return {"flux_constancy": worst <= tol}, {"max_flux_residual": worst, "dt": dt}, artifacts


def run_emergence(cfg, out):
    flux, data = make_flux(cfg), make_data(cfg)
    if data.kind != "piecewise4":
        raise ConfigError("emergence needs piecewise4 data", {"data.kind": "must be piecewise4"})
    grid = make_grid(cfg, flux, data)
    try:
        study = emergence_study(flux, data, grid, cfg.horizon, cfg.cfl, cfg.snapshot_every,
                                cfg.options.get("emergence", {}).get("tolerance"),
                                cfg.jump_floor)
    except NotEmerged as exc:
        path = write_json(out / "emergence.json", exc.report.to_dict() if exc.report else {})
        return {"emerged": False}, {"note": str(exc)}, [path]
    rep = study.report
    artifacts = [write_json(out / "emergence.json", rep.to_dict())]
    for name, curve in (("shock_minus", study.curve_minus), ("shock_plus", study.curve_plus)):
        path = out / f"{name}.csv"
        curve.to_csv(path)
        artifacts.append(path)
    artifacts.append(write_json(out / "wedge.json", {**study.wedge.to_dict(),
                                                     "merge_time": study.merge_time}))
    artifacts.append(write_json(out / "characteristic_feet.json", study.feet or {}))
    criteria = {
        "emerged": rep.emerged,
        "post_emergence_error": rep.post_emergence_error <= rep.tolerance,
        "sigma_within_5_percent": rep.sigma_relative_error <= 0.05,
        "wedge": study.wedge.passed,
    }
    metrics = {"T_detected": rep.T_detected, "X_detected": rep.X_detected,
               "sigma_measured": rep.sigma_measured, "sigma_rh": rep.sigma_rh,
               "merge_time": study.merge_time, "partial_bound": study.bound.partial}
    return criteria, metrics, artifacts


def run_stability(cfg, out):
    flux, data = make_flux(cfg), make_data(cfg)
    grid = make_grid(cfg, flux, data)
    opts = cfg.options.get("stability", {})
    rep = stability_run(flux, data, grid, cfg.horizon, cfg.cfl,
                        int(opts.get("sample_every", 1)), cfg.jump_floor,
                        float(opts.get("weight", 0.5)))
    tol = rep.num_tol if cfg.num_tol is None else cfg.num_tol
    ordering_tol = rep.ordering_tol if cfg.ordering_tol is None else cfg.ordering_tol
    artifacts = [write_json(out / "stability.json", rep.to_dict())]
    path = out / "norms.csv"
    rep.to_csv(path)
    artifacts.append(path)
    norms = np.asarray(rep.relative_l2)
    criteria = {
        "contraction": bool(np.all(norms <= rep.initial_norm + tol)),
        "shift_ordering": rep.max_ordering_gap <= ordering_tol,
        "shift_magnitude": rep.sqrt_t_pass,
    }
    metrics = {"initial_norm": rep.initial_norm, "excess": rep.excess, "num_tol": tol,
               "K": rep.K_bound, "max_gap": rep.max_ordering_gap,
               "p_satisfied": rep.p_check["passed"]}
    return criteria, metrics, artifacts


def run_negcheck(cfg, out):
    flux = make_flux(cfg)
    if flux.family != "negative_heterogeneity":
        raise ConfigError("negcheck needs the negative_heterogeneity flux",
                          {"flux.family": "must be negative_heterogeneity"})
    opts = cfg.options.get("negcheck", {})
    domain = cfg.domain or (-3.0, 3.0)
    rep = negative_heterogeneity_growth(
        flux, amplitude=float(opts.get("amplitude", 1.0)),
        bump_center=float(opts.get("bump_center", -0.5)),
        bump_width=float(opts.get("bump_width", 1.0)), horizon=float(cfg.horizon),
        n_cells=int(cfg.n_cells), domain=tuple(domain), cfl=cfg.cfl,
        control_flux=twin_flux(flux))
    artifacts = [write_json(out / "negcheck.json", rep.to_dict())]
    return ({"strict_growth": rep.passes()},
            {"increase": rep.increase, "control_drift": rep.control_drift,
             "window_end": rep.window_end, "predicted_rate": rep.initial_rate_predicted,
             "measured_rate": rep.initial_rate_measured}, artifacts)


def run_hj_check(cfg, out):
    flux, data = make_flux(cfg), make_data(cfg)
    grid = make_grid(cfg, flux, data)
    opts = cfg.options.get("hj", {})
    field0 = initial_field(data, grid, flux)
    hist = run(field0, flux, cfg.horizon, cfg.cfl, 10 ** 9)
    value = dp_value(flux, value_from_field(field0).values, grid, cfg.horizon)
    rep = correspondence_check(value, hist.final)
    path = out / "value.csv"
    value.to_csv(path)
    c = float(opts.get("constant", 1.0))
    artifacts = [path, write_json(out / "hj.json", rep.to_dict())]
    return {"first_order_discrepancy": rep.l1 <= c * grid.dx}, rep.to_dict(), artifacts


def run_validate_flux(cfg, out):
    flux = make_flux(cfg)
    opts = cfg.options.get("validate", {})
    x_range = tuple(opts.get("x_range", [-3.0, 3.0]))
    u_range = tuple(opts.get("u_range", [flux.u_plus, flux.u_minus]))
    rep = validate_assumptions(flux, x_range, u_range, int(opts.get("grid_density", 64)))
    path = out / "assumptions.json"
    path.write_text(rep.to_json() + "\n")
    criteria = {name: check.passed for name, check in rep.checks.items()}
    return criteria, {"family": flux.family}, [path]


RUNNERS = {
    "simulate": run_simulate,
    "characteristics": run_characteristics,
    "emergence": run_emergence,
    "stability": run_stability,
    "negcheck": run_negcheck,
    "hj-check": run_hj_check,
    "validate-flux": run_validate_flux,
}


def char_flux_constancy(flux, n_paths=100, t_end=1.0, dt=1e-3, y_range=(-1.0, 1.0),
                        z_range=(-1.5, 2.5)):
    """Flux residuals of a deterministic lattice of characteristics."""
    side = int(np.ceil(np.sqrt(n_paths)))
    ys = np.linspace(*y_range, side)
    zs = np.linspace(*z_range, side)
    starts = [CharState(float(y), float(z)) for y in ys for z in zs][:n_paths]
    return flux_residuals(flux, starts, t_end, dt)
