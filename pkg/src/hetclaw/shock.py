"""Shock tracking, shock merging and detection of the emergent simple shock."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import LostShock, NoIntersection, NotEmerged
from .flux import rh_speed
from .solver import find_layer


def default_jump_floor(flux):
    return 1e-3 * (flux.u_minus - flux.u_plus)


@dataclass
class ShockCurve:
    t: np.ndarray
    s: np.ndarray
    u_l: np.ndarray
    u_r: np.ndarray
    speed: np.ndarray
    face: np.ndarray
    origin: tuple
    dx: float
    domain: tuple
    truncated: bool = False

    def __len__(self):
        return len(self.t)

    def to_csv(self, path):
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s", "u_l", "u_r", "speed"])
            for row in zip(self.t, self.s, self.u_l, self.u_r, self.speed):
                w.writerow([f"{v:.17g}" for v in row])

    def position_at(self, t):
        return float(np.interp(t, self.t, self.s))


def _curve(rows, origin, grid, truncated):
    arr = np.array(rows, dtype=float).reshape(-1, 6)
    return ShockCurve(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
                      arr[:, 5].astype(int), origin, grid.dx,
                      (grid.x_left, grid.x_right), truncated)


def track_shock(history, flux, seed, jump_floor=None, offset=3, t_end=None):
    """Follow the discontinuity through ``seed = (x, t)`` across stored snapshots.

    The position obeys ``ds/dt = rh_speed`` with traces read ``offset`` cells
    outside the steepest nearby layer.  Tracking stops early, with
    ``truncated=True``, once the layer comes near the grid boundary.
    """
    floor = default_jump_floor(flux) if jump_floor is None else jump_floor
    grid = history.grid
    x0, t0 = float(seed[0]), float(seed[1])
    t_stop = history.times[-1] if t_end is None else min(float(t_end), history.times[-1])
    times = [t0] + [t for t in history.times if t0 < t <= t_stop]
    guard = 2 * offset + 1
    s = x0
    rows = []
    truncated = False
    for k, t in enumerate(times):
        if not (grid.x_left < s < grid.x_right):
            truncated = True
            break
        field = history.at(t)
        layer = find_layer(field.values, grid, s, floor, offset)
        if layer.face < guard or layer.face > grid.n_cells - guard:
            truncated = True
            break
        if not layer.is_shock:
            partial = _curve(rows, (x0, t0), grid, False) if rows else None
            where = "at the seed" if not rows else f"at t={t:.6g}, s={s:.6g}"
            err = LostShock(f"no discontinuity above jump_floor={floor:.3g} {where}")
            err.curve = partial
            raise err
        speed = rh_speed(flux, s, layer.u_left, layer.u_right, jump_floor=floor)
        rows.append((t, s, layer.u_left, layer.u_right, speed, layer.face))
        if k + 1 < len(times):
            s += speed * (times[k + 1] - t)
    return _curve(rows, (x0, t0), grid, truncated)


def merge_shocks(a, b, tol=None):
    """Continue two tracked shocks as one from the first time they meet.

    The curves meet when their positions are within ``tol`` (default one
    cell) or when both resolve to the same numerical layer.  The merged
    curve carries the outer traces of the pair.
    """
    if a.s[0] > b.s[0]:
        a, b = b, a
    tol = max(a.dx, b.dx) if tol is None else tol
    common, ia, ib = np.intersect1d(a.t, b.t, return_indices=True)
    if len(common) == 0:
        raise NoIntersection("curves share no sample times")
    meet = (np.abs(b.s[ib] - a.s[ia]) <= tol) | (a.face[ia] == b.face[ib])
    hits = np.nonzero(meet)[0]
    if len(hits) == 0:
        gap = float(np.min(np.abs(b.s[ib] - a.s[ia])))
        raise NoIntersection(f"curves never come within {tol:.3g} (closest gap {gap:.3g})")
    j = int(hits[0])
    ia, ib = ia[j:], ib[j:]
    s = 0.5 * (a.s[ia] + b.s[ib])
    lo, hi = a.domain
    inside = (s > lo) & (s < hi)
    keep = np.cumprod(inside).astype(bool)
    truncated = a.truncated or b.truncated or not keep.all()
    ia, ib, s = ia[keep], ib[keep], s[keep]
    return ShockCurve(common[j:][keep], s, a.u_l[ia], b.u_r[ib],
                      0.5 * (a.speed[ia] + b.speed[ib]), a.face[ia],
                      (float(s[0]), float(common[j])) if len(s) else (float("nan"),) * 2,
                      a.dx, a.domain, truncated)


def merge_time(a, b, tol=None):
    """Time at which two tracked shocks merge."""
    return merge_shocks(a, b, tol).origin[1]


@dataclass
class EmergenceBound:
    """Times by which the outer backward characteristics reach the opposite shock."""

    t_right: float
    t_left: float

    @property
    def partial(self):
        return max(self.t_right, self.t_left)


def emergence_bound(flux, data):
    p = data.params
    um = float(p.get("u_minus", flux.u_minus))
    up = float(p.get("u_plus", flux.u_plus))
    u_M = float(p.get("u_M", um))
    u_m = float(p.get("u_m", up))
    xm, x0, xp = (float(p.get(k, d)) for k, d in
                  (("x_minus", -1.0), ("x0", 0.0), ("x_plus", 1.0)))
    if not (u_m <= up < um <= u_M and xm <= x0 <= xp):
        raise ValueError("invalid piecewise4 parameters")
    denom = flux.alpha * (um - up) ** 2
    return EmergenceBound(2.0 * (u_M - up) * (xp - x0) / denom,
                          2.0 * (um - u_m) * (x0 - xm) / denom)


# -- emergence detection ------------------------------------------------------------

def best_shift(values, grid, u_minus, u_plus, margin_cells=None):
    """Shift ``X`` minimising the L1 distance between ``values`` and ``Phi(. - X)``.

    Every interface is scored with cumulative sums; the best one is refined to
    sub-cell accuracy with a bounded scalar search over its two neighbouring
    cells.  Shifts within ``margin_cells`` of the boundary are excluded.
    """
    n, dx = grid.n_cells, grid.dx
    m = max(n // 20, 2) if margin_cells is None else int(margin_cells)
    left = np.concatenate([[0.0], np.cumsum(np.abs(values - u_minus))])
    right = np.concatenate([np.cumsum(np.abs(values - u_plus)[::-1])[::-1], [0.0]])
    score = left + right
    faces = np.arange(m, n - m + 1)
    k = int(faces[np.argmin(score[faces])])
    jump = u_minus - u_plus

    def err(y):
        j = min(max(int(np.floor((y - grid.x_left) / dx)), 0), n - 1)
        frac = (y - (grid.x_left + j * dx)) / dx
        straddle = u_plus + jump * frac
        return (left[j] + right[j + 1] + abs(values[j] - straddle)) * dx

    lo = grid.x_left + max(k - 1, m) * dx
    hi = grid.x_left + min(k + 1, n - m) * dx
    res = minimize_scalar(err, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * max(1.0, abs(hi))})
    y, e = float(res.x), float(res.fun)
    y_face = grid.x_left + k * dx
    if score[k] * dx <= e:
        y, e = y_face, float(score[k] * dx)
    return y, e


@dataclass
class EmergenceReport:
    emerged: bool
    T_detected: float
    X_detected: float
    sigma_measured: float
    sigma_rh: float
    T_bound_analytic: dict | None
    post_emergence_error: float
    tolerance: float
    note: str = ""
    times: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    shifts: list = field(default_factory=list)

    @property
    def sigma_relative_error(self):
        if self.sigma_rh == 0:
            return abs(self.sigma_measured)
        return abs(self.sigma_measured - self.sigma_rh) / abs(self.sigma_rh)

    def to_dict(self, series=True):
        d = asdict(self)
        if not series:
            for key in ("times", "errors", "shifts"):
                d.pop(key)
        return d

    def to_json(self, series=True):
        return json.dumps(self.to_dict(series), indent=2, allow_nan=True)


def detect_emergence(history, flux, tolerance=None, data=None, jump_floor=None):
    """Earliest stored time after which the field stays L1-close to a shifted simple shock."""
    grid = history.grid
    tol = 10.0 * grid.dx if tolerance is None else float(tolerance)
    floor = default_jump_floor(flux) if jump_floor is None else jump_floor
    sigma = flux.sigma
    bound = None
    if data is not None and data.kind == "piecewise4":
        b = emergence_bound(flux, data)
        bound = {"t_right": b.t_right, "t_left": b.t_left, "partial": b.partial}
    times = np.asarray(history.times, dtype=float)

    v0 = history.values[0]
    if np.max(v0[:-1] - v0[1:]) <= floor and (v0.max() - v0.min()) <= floor:
        report = EmergenceReport(False, float("nan"), float("nan"), float("nan"), sigma,
                                 bound, float("nan"), tol,
                                 note="degenerate data: no jump between the far-field states",
                                 times=times.tolist())
        raise NotEmerged(report.note, report)

    shifts, errs = [], []
    for vals in history.values:
        y, e = best_shift(vals, grid, flux.u_minus, flux.u_plus)
        shifts.append(y)
        errs.append(e)
    shifts, errs = np.asarray(shifts), np.asarray(errs)
    bad = np.nonzero(errs > tol)[0]
    first = 0 if len(bad) == 0 else int(bad[-1]) + 1
    if first >= len(times):
        report = EmergenceReport(False, float("nan"), float("nan"), float("nan"), sigma,
                                 bound, float(errs[-1]), tol,
                                 note="L1 distance to every shifted simple shock stays above tolerance",
                                 times=times.tolist(), errors=errs.tolist(), shifts=shifts.tolist())
        raise NotEmerged(report.note, report)
    post_t, post_y = times[first:], shifts[first:]
    if len(post_t) >= 2 and post_t[-1] > post_t[0]:
        sigma_measured = float(np.polyfit(post_t, post_y, 1)[0])
        note = ""
    else:
        sigma_measured = sigma
        note = "post-emergence window too short to measure the speed; reporting the RH speed"
    return EmergenceReport(True, float(times[first]), float(shifts[first]), sigma_measured,
                           sigma, bound, float(errs[first:].max()), tol, note,
                           times.tolist(), errs.tolist(), shifts.tolist())


# -- wedge diagnostics ---------------------------------------------------------------

def interaction_mask(curve, inner, u_minus, u_plus, floor):
    """Samples where the inner trace lies strictly inside the rarefaction range."""
    trace = curve.u_l if inner == "left" else curve.u_r
    return (trace > u_plus + floor) & (trace < u_minus - floor)


@dataclass
class WedgeCheck:
    passed: bool
    samples_plus: int
    samples_minus: int
    margin_plus: float
    margin_minus: float

    def to_dict(self):
        return asdict(self)


def wedge_check(curve_minus, curve_plus, flux, floor=None, skip=20, t_merge=None,
                resolve_cells=8):
    """Check that the right shock is slower and the left one faster than ``sigma``.

    Only samples where a shock is interacting with the rarefaction (inner
    trace strictly between the far-field states) count, skipping the first
    ``skip`` samples, anything from the merge on, and times at which the two
    layers are closer than ``resolve_cells`` cells (their traces overlap).
    """
    floor = default_jump_floor(flux) if floor is None else floor
    sigma = flux.sigma
    _, ia, ib = np.intersect1d(curve_minus.t, curve_plus.t, return_indices=True)
    apart_times = curve_minus.t[ia][np.abs(curve_plus.face[ib] - curve_minus.face[ia]) >= resolve_cells]

    def pick(curve, inner):
        m = interaction_mask(curve, inner, flux.u_minus, flux.u_plus, floor)
        m[:skip] = False
        m &= np.isin(curve.t, apart_times)
        if t_merge is not None:
            m &= curve.t < t_merge
        return curve.speed[m]

    sp = pick(curve_plus, "left")
    sm = pick(curve_minus, "right")
    margin_plus = float(np.min(sigma - sp)) if len(sp) else float("nan")
    margin_minus = float(np.min(sm - sigma)) if len(sm) else float("nan")
    ok = len(sp) > 0 and len(sm) > 0 and margin_plus > 0 and margin_minus > 0
    return WedgeCheck(bool(ok), int(len(sp)), int(len(sm)), margin_plus, margin_minus)
