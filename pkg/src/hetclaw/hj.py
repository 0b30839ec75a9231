"""Dynamic-programming value function for ``v_t + f(x, v_x) = 0``.

Used to cross-check the finite-volume solution against ``u = v_x``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConeTooNarrow, GridMismatch
from .flux import invert_speed

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def legendre(flux, x, p):
    """Convex conjugate ``f*(x, p) = sup_u (u p - f(x, u))`` and its maximiser."""
    if flux.conjugate is not None:
        val, u = flux.conjugate(x, p)
        return val, u
    u = invert_speed(flux, x, p)
    return u * np.asarray(p, dtype=float) - flux.f(x, u), u


def legendre_value(flux, x, p):
    return legendre(flux, x, p)[0]


@dataclass
class ValueField:
    """Samples of ``v(., t)`` at the cell interfaces of ``grid``."""

    grid: object
    time: float
    values: np.ndarray

    @property
    def nodes(self):
        return self.grid.interfaces

    def slopes(self):
        return np.diff(self.values) / self.grid.dx

    def to_csv(self, path):
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "v"])
            for row in zip(self.nodes, self.values):
                w.writerow([f"{v:.17g}" for v in row])


def antiderivative(cell_values, dx, anchor=0.0):
    """Interface samples of the antiderivative of a cell-average field."""
    return anchor + np.concatenate([[0.0], np.cumsum(np.asarray(cell_values, dtype=float)) * dx])


def value_from_field(field):
    return ValueField(field.grid, field.time, antiderivative(field.values, field.grid.dx))


def _eval_linear(x_nodes, v, x, slope_left, slope_right):
    """Piecewise-linear interpolation with linear extension outside the nodes."""
    out = np.interp(x, x_nodes, v)
    out = np.where(x < x_nodes[0], v[0] + slope_left * (x - x_nodes[0]), out)
    return np.where(x > x_nodes[-1], v[-1] + slope_right * (x - x_nodes[-1]), out)


def dp_step(flux, x_nodes, v, dt, reach, slope_left, slope_right, iters=40):
    """One dynamic-programming step.

    ``v_new(x) = min_y v(y) + dt f*((x + y) / 2, (x - y) / dt)`` over
    ``|x - y| <= reach``.  The best node is refined by golden-section search
    on each adjacent linear piece.
    """
    dx = x_nodes[1] - x_nodes[0]
    m = int(np.ceil(reach / dx))
    offs = np.arange(-m, m + 1) * dx
    x = x_nodes[:, None]
    y = x - offs[None, :]
    inside = np.abs(offs) <= reach * (1 + 1e-12)

    def cost(yy):
        return (_eval_linear(x_nodes, v, yy, slope_left, slope_right)
                + dt * legendre_value(flux, 0.5 * (x + yy), (x - yy) / dt))

    c = np.where(inside[None, :], cost(y), np.inf)
    j = np.argmin(c, axis=1)
    y_best = y[np.arange(len(x_nodes)), j]
    best = c[np.arange(len(x_nodes)), j]
    xs = x_nodes
    for side in (-1.0, 1.0):
        a = y_best
        b = np.clip(y_best + side * dx, xs - reach, xs + reach)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        for _ in range(iters):
            c1 = hi - _INV_PHI * (hi - lo)
            c2 = lo + _INV_PHI * (hi - lo)
            f1 = cost(c1[:, None])[:, 0]
            f2 = cost(c2[:, None])[:, 0]
            left = f1 < f2
            hi = np.where(left, c2, hi)
            lo = np.where(left, lo, c1)
        ym = 0.5 * (lo + hi)
        fm = cost(ym[:, None])[:, 0]
        better = fm < best
        best = np.where(better, fm, best)
        y_best = np.where(better, ym, y_best)
    edge = np.abs(np.abs(xs - y_best) - reach) <= 1e-9 * max(reach, dx)
    if np.any(edge):
        k = int(np.nonzero(edge)[0][0])
        raise ConeTooNarrow(f"minimiser on the cone edge at x={xs[k]:.6g}; increase the reach")
    return best


def dp_value(flux, v0, grid, t_end, dt=None, slope_bound=None, safety=1.5, cfl=0.9):
    """Evolve interface samples ``v0`` to ``t_end`` by dynamic programming.

    The search cone has half-width ``safety * theta(slope_bound) * dt``.
    Outside the grid ``v`` is extended linearly with the boundary slopes,
    which stay fixed when the far-field states are stationary.
    """
    v = np.asarray(v0, dtype=float).copy()
    x_nodes = grid.interfaces
    if v.shape != x_nodes.shape:
        raise GridMismatch("v0 must be sampled at the grid interfaces")
    slopes = np.diff(v) / grid.dx
    bound = float(np.max(np.abs(slopes))) if slope_bound is None else slope_bound
    speed = max(float(flux.theta(bound)), float(flux.speed_bound(float(slopes.min()),
                                                                 float(slopes.max()))), 1e-12)
    if dt is None:
        dt = cfl * grid.dx / speed
    if dt > grid.dx / speed * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3g} exceeds dx / theta = {grid.dx / speed:.3g}")
    reach_per_time = safety * speed
    sl, sr = float(slopes[0]), float(slopes[-1])
    t = 0.0
    while t < t_end - 1e-14 * max(1.0, t_end):
        h = min(dt, t_end - t)
        v = dp_step(flux, x_nodes, v, h, reach_per_time * h, sl, sr)
        t += h
    return ValueField(grid, float(t_end), v)


@dataclass
class CorrespondenceReport:
    l1: float
    linf: float
    worst_location: float
    dx: float
    time: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def correspondence_check(value, field):
    """L1 distance between ``v_x`` (interface differences) and the cell averages ``u``."""
    if value.grid != field.grid:
        raise GridMismatch("value and field live on different grids")
    if abs(value.time - field.time) > 1e-12 * max(1.0, abs(field.time)):
        raise GridMismatch(f"times differ: {value.time} vs {field.time}")
    diff = np.abs(value.slopes() - field.values)
    k = int(np.argmax(diff))
    return CorrespondenceReport(float(np.sum(diff) * field.grid.dx), float(diff[k]),
                                float(field.grid.centers[k]), field.grid.dx, field.time)


def observed_order(dxs, errors, floor=1e-12):
    """Least-squares slope of log(error) against log(dx); ``inf`` when all errors are below ``floor``."""
    errs = np.asarray(errors, dtype=float)
    if np.all(errs <= floor):
        return float("inf")
    errs = np.maximum(errs, floor)
    return float(np.polyfit(np.log(dxs), np.log(errs), 1)[0])
