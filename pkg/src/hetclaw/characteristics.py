"""Genuine characteristics ``y' = f_u(y, z)``, ``z' = -f_x(y, z)``.

``f(y, z)`` is conserved along every solution of this system, which the
trajectory records as ``f_residual``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonFiniteState, OutOfDomain
from .solver import traces_at


@dataclass(frozen=True)
class CharState:
    y: float
    z: float
    t: float = 0.0


@dataclass
class CharTrajectory:
    t: np.ndarray
    y: np.ndarray
    z: np.ndarray
    f_residual: float
    direction: str

    @property
    def start(self):
        return CharState(float(self.y[0]), float(self.z[0]), float(self.t[0]))

    @property
    def end(self):
        return CharState(float(self.y[-1]), float(self.z[-1]), float(self.t[-1]))

    def to_csv(self, path, flux):
        res = np.abs(flux.f(self.y, self.z) - flux.f(self.y[0], self.z[0]))
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y", "z", "f_residual"])
            for row in zip(self.t, self.y, self.z, res):
                w.writerow([f"{v:.17g}" for v in row])


def char_rhs(flux, y, z):
    return flux.f_u(y, z), -flux.f_x(y, z)


def rk4_paths(flux, y0, z0, t0, t_end, dt):
    """Integrate many characteristics at once.

    Returns ``(times, ys, zs)`` with ``ys``/``zs`` shaped ``(n_steps + 1, n_paths)``.
    The last step is shortened to land on ``t_end``; negative direction runs
    the system in reversed time.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end == t0:
        raise ValueError("t_end must differ from the start time")
    sign = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    n = int(np.ceil(span / dt - 1e-9))
    hs = np.full(n, dt)
    hs[-1] = span - dt * (n - 1)
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    ys, zs, ts = [y.copy()], [z.copy()], [float(t0)]
    t = float(t0)
    for h in hs:
        h = sign * h
        k1y, k1z = char_rhs(flux, y, z)
        k2y, k2z = char_rhs(flux, y + 0.5 * h * k1y, z + 0.5 * h * k1z)
        k3y, k3z = char_rhs(flux, y + 0.5 * h * k2y, z + 0.5 * h * k2z)
        k4y, k4z = char_rhs(flux, y + h * k3y, z + h * k3z)
        y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        z = z + h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise NonFiniteState(f"characteristic blew up near t={t + h:.6g}")
        t += h
        ys.append(y)
        zs.append(z)
        ts.append(t)
    ts[-1] = float(t_end)
    return np.asarray(ts), np.asarray(ys), np.asarray(zs)


def integrate_char(flux, start, t_end, dt=1e-3):
    """RK4 trajectory from ``start`` to ``t_end`` (forward or backward)."""
    ts, ys, zs = rk4_paths(flux, start.y, start.z, start.t, t_end, dt)
    ys, zs = ys[:, 0], zs[:, 0]
    res = float(np.max(np.abs(flux.f(ys, zs) - flux.f(ys[0], zs[0]))))
    return CharTrajectory(ts, ys, zs, res, "forward" if t_end > start.t else "backward")


def flux_residuals(flux, starts, t_end, dt=1e-3):
    """Per-path max |f(y, z) - f(y0, z0)| for a batch of characteristics."""
    y0 = np.array([s.y for s in starts])
    z0 = np.array([s.z for s in starts])
    ts, ys, zs = rk4_paths(flux, y0, z0, starts[0].t, t_end, dt)
    return np.max(np.abs(flux.f(ys, zs) - flux.f(ys[0], zs[0])), axis=0)


def default_dt(flux, grid, bound):
    speed = max(flux.theta(bound), 1e-12)
    return grid.dx / (4.0 * speed)


def backward_char_from(history, flux, x, t, side="left", dt=None, offset=0):
    """Backward characteristic seeded with the ``side`` trace of the field at ``(x, t)``.

    ``offset`` moves the trace read that many extra cells away from ``x`` so
    the seed lies outside a smeared shock layer.  The foot point is the
    trajectory's ``end``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    grid = history.grid
    field = history.at(t)
    shift = offset * grid.dx * (-1 if side == "left" else 1)
    ul, ur = traces_at(field, x + shift)
    z = ul if side == "left" else ur
    if dt is None:
        bound = max(abs(float(np.min(field.values))), abs(float(np.max(field.values))))
        dt = default_dt(flux, grid, bound)
    traj = integrate_char(flux, CharState(float(x), z, float(t)), 0.0, dt)
    if traj.y.min() < grid.x_left or traj.y.max() > grid.x_right:
        raise OutOfDomain(f"backward characteristic from x={x} leaves the grid")
    return traj


def crossing_time(flux, a, b, t_max, dt=1e-3, tol=1e-6):
    """First time the characteristics from ``a`` and ``b`` meet within ``tol``.

    Returns ``None`` if they stay separated up to ``t_max``.
    """
    if not a.y < b.y:
        raise ValueError("crossing_time needs a.y < b.y")
    t0 = max(a.t, b.t)
    if a.t != b.t:
        a = integrate_char(flux, a, t0, dt).end if a.t < t0 else a
        b = integrate_char(flux, b, t0, dt).end if b.t < t0 else b
    ts, ys, zs = rk4_paths(flux, [a.y, b.y], [a.z, b.z], t0, t_max, dt)
    gap = ys[:, 1] - ys[:, 0]
    hit = np.nonzero(gap <= tol)[0]
    if len(hit) == 0:
        return None
    k = int(hit[0])
    if k == 0:
        return float(ts[0])
    # refine inside the bracketing step
    lo_t, hi_t = ts[k - 1], ts[k]
    y_lo, z_lo = ys[k - 1], zs[k - 1]
    while hi_t - lo_t > 1e-12 * max(1.0, abs(hi_t)):
        mid = 0.5 * (lo_t + hi_t)
        _, ym, zm = rk4_paths(flux, y_lo, z_lo, lo_t, mid, (mid - lo_t))
        if ym[-1, 1] - ym[-1, 0] <= tol:
            hi_t = mid
        else:
            lo_t, y_lo, z_lo = mid, ym[-1], zm[-1]
    return float(hi_t)
