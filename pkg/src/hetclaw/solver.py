"""Well-balanced Godunov finite-volume solver for ``u_t + f(x, u)_x = 0``.

The flux is frozen at each interface position inside the exact Riemann
solve, so any state ``c`` with ``f_x(., c) = 0`` is reproduced exactly by the
discrete update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CflViolation, FluxError, NonFiniteState, OutOfDomain
from .flux import critical_state

BOUNDARY_MODES = ("far_field", "periodic")
DATA_KINDS = ("riemann_phi", "piecewise4", "perturbed_phi", "constant", "custom_samples")


@dataclass(frozen=True)
class Grid1D:
    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise ValueError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        if not self.x_right > self.x_left:
            raise ValueError("x_right must exceed x_left")

    @property
    def dx(self):
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def centers(self):
        return self.x_left + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def interfaces(self):
        return self.x_left + np.arange(self.n_cells + 1) * self.dx

    def cell_index(self, x):
        """Index of the cell containing ``x`` (clipped to the grid)."""
        i = np.floor((np.asarray(x, dtype=float) - self.x_left) / self.dx).astype(int)
        return np.clip(i, 0, self.n_cells - 1)

    def contains(self, x):
        return self.x_left <= x <= self.x_right


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Cell averages of ``u(., t)`` on a uniform grid.

    In ``far_field`` mode the ghost cells are clamped to ``left_state`` and
    ``right_state``; in ``periodic`` mode they wrap around.
    """

    grid: Grid1D
    time: float
    values: np.ndarray
    boundary_mode: str = "far_field"
    left_state: float = 0.0
    right_state: float = 0.0

    def __post_init__(self):
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError("values must have one entry per cell")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def evolve(self, values, time):
        return SolutionField(self.grid, time, values, self.boundary_mode,
                             self.left_state, self.right_state)

    @property
    def mass(self):
        return float(np.sum(self.values) * self.grid.dx)

    def summary(self):
        return {"time": self.time, "mass": self.mass, "min": float(self.values.min()),
                "max": float(self.values.max()), "dx": self.grid.dx}


@dataclass(frozen=True)
class InitialData:
    """Initial condition specification.

    Kinds and their parameters (states default to the flux's ``u_minus`` /
    ``u_plus``):

    * ``riemann_phi``: ``x0``.
    * ``piecewise4``: ``x_minus <= x0 <= x_plus`` and ``u_m <= u_plus < u_minus <= u_M``.
    * ``perturbed_phi``: the Riemann data plus ``amplitude * (1 - r^2)^3`` with
      ``r = (x - bump_center) / bump_width``.
    * ``constant``: ``value``, optionally with the same bump parameters.
    * ``custom_samples``: ``values`` (cell averages) or ``function`` of x.
    """

    kind: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATA_KINDS:
            raise ValueError(f"unknown initial data kind {self.kind!r}")


def bump_profile(x, center, width):
    r = (np.asarray(x, dtype=float) - center) / width
    return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 3, 0.0)


def _piecewise_average(grid, breaks, levels):
    """Exact cell averages of a piecewise-constant function.

    ``levels[j]`` holds on ``(breaks[j-1], breaks[j])`` with open ends.
    """
    breaks = np.asarray(breaks, dtype=float)
    levels = np.asarray(levels, dtype=float)
    edges = grid.interfaces
    lo_piece = np.searchsorted(breaks, edges[:-1], side="right")
    hi_piece = np.searchsorted(breaks, edges[1:], side="left")
    out = levels[lo_piece].copy()
    mixed = np.nonzero(lo_piece != hi_piece)[0]
    for i in mixed:
        a, b = edges[i], edges[i + 1]
        pts = np.concatenate([[a], breaks[(breaks > a) & (breaks < b)], [b]])
        mids = 0.5 * (pts[1:] + pts[:-1])
        lv = levels[np.searchsorted(breaks, mids, side="right")]
        out[i] = np.sum(lv * np.diff(pts)) / (b - a)
    return out


def _bump_average(grid, center, width, amplitude, order=8):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    x = grid.centers[:, None] + 0.5 * grid.dx * nodes[None, :]
    return amplitude * bump_profile(x, center, width) @ (0.5 * weights)


def initial_field(data, grid, flux, boundary_mode="far_field"):
    """Sample ``data`` into exact cell averages and wrap it as a field."""
    p = dict(data.params)
    um = float(p.get("u_minus", flux.u_minus))
    up = float(p.get("u_plus", flux.u_plus))
    kind = data.kind
    if kind == "riemann_phi":
        vals = _piecewise_average(grid, [float(p.get("x0", 0.0))], [um, up])
    elif kind == "piecewise4":
        xm, x0, xp = (float(p.get(k, d)) for k, d in
                      (("x_minus", -1.0), ("x0", 0.0), ("x_plus", 1.0)))
        u_m = float(p.get("u_m", up))
        u_M = float(p.get("u_M", um))
        if not (u_m <= up < um <= u_M):
            raise ValueError("piecewise4 needs u_m <= u_plus < u_minus <= u_M")
        if not (xm <= x0 <= xp):
            raise ValueError("piecewise4 needs x_minus <= x0 <= x_plus")
        vals = _piecewise_average(grid, [xm, x0, xp], [um, u_m, u_M, up])
    elif kind == "perturbed_phi":
        vals = _piecewise_average(grid, [float(p.get("x0", 0.0))], [um, up])
        vals = vals + _bump_average(grid, float(p.get("bump_center", -1.0)),
                                    float(p.get("bump_width", 0.75)),
                                    float(p.get("amplitude", 0.25)))
    elif kind == "constant":
        vals = np.full(grid.n_cells, float(p["value"]))
        if float(p.get("amplitude", 0.0)) != 0.0:
            vals = vals + _bump_average(grid, float(p.get("bump_center", 0.0)),
                                        float(p.get("bump_width", 0.5)),
                                        float(p["amplitude"]))
    else:
        if "values" in p:
            vals = np.asarray(p["values"], dtype=float)
        else:
            vals = np.asarray(p["function"](grid.centers), dtype=float)
    return SolutionField(grid, 0.0, vals, boundary_mode,
                         float(vals[0]), float(vals[-1]))


def phi_average(grid, u_minus, u_plus, jump_at):
    """Cell averages of the simple shock profile with its jump at ``jump_at``."""
    return _piecewise_average(grid, [jump_at], [u_minus, u_plus])


# -- numerical flux ---------------------------------------------------------------

def godunov_flux(flux, x_interface, u_left, u_right, u_crit=None):
    """Exact Riemann flux of the convex section ``f(x_interface, .)``.

    Minimum of the section over ``[u_left, u_right]`` when ``u_left <= u_right``,
    maximum over ``[u_right, u_left]`` otherwise.
    """
    x = np.asarray(x_interface, dtype=float)
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    if u_crit is None:
        u_crit = critical_state(flux, np.broadcast_to(x, np.broadcast(x, ul, ur).shape))
    rare = ul <= ur
    sonic = flux.f(x, np.clip(u_crit, np.minimum(ul, ur), np.maximum(ul, ur)))
    out = np.where(rare, sonic, np.maximum(flux.f(x, ul), flux.f(x, ur)))
    return out if out.ndim else float(out)


def interface_states(flux, x_interface, u_left, u_right, u_crit):
    """State of the exact interface Riemann solution at ``x/t = 0``."""
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    rare = ul <= ur
    du = np.where(rare, 1.0, ul - ur)
    speed = (flux.f(x_interface, ul) - flux.f(x_interface, ur)) / du
    shock_state = np.where(speed >= 0, ul, ur)
    return np.where(rare, np.clip(u_crit, ul, ur), shock_state)


class GodunovScheme:
    """Interface geometry and sonic points cached for one (flux, grid) pair."""

    def __init__(self, flux, grid):
        self.flux = flux
        self.grid = grid
        self.x_faces = grid.interfaces
        self.u_crit = critical_state(flux, self.x_faces)

    def padded(self, field):
        v = field.values
        if field.boundary_mode == "periodic":
            return np.concatenate([[v[-1]], v, [v[0]]])
        return np.concatenate([[field.left_state], v, [field.right_state]])

    def face_fluxes(self, field):
        ext = self.padded(field)
        F = godunov_flux(self.flux, self.x_faces, ext[:-1], ext[1:], self.u_crit)
        if field.boundary_mode == "periodic":
            F[0] = F[-1]
        return F

    def stable_dt(self, field, cfl):
        v = field.values
        lo = min(float(v.min()), self.flux.u_plus)
        hi = max(float(v.max()), self.flux.u_minus)
        speed = self.flux.speed_bound(lo, hi)
        if speed <= 0:
            return np.inf
        dt = cfl * self.grid.dx / speed
        if not dt > 0:
            raise CflViolation(f"non-positive time step {dt}")
        return dt

    def step(self, field, dt):
        F = self.face_fluxes(field)
        new = field.values - dt / self.grid.dx * (F[1:] - F[:-1])
        if not np.all(np.isfinite(new)):
            raise NonFiniteState(f"non-finite state at t={field.time + dt:.6g}")
        return field.evolve(new, field.time + dt), F


_SCHEMES: dict = {}


def scheme_for(flux, grid):
    key = (id(flux), grid)
    sch = _SCHEMES.get(key)
    if sch is None or sch.flux is not flux:
        if len(_SCHEMES) > 32:
            _SCHEMES.clear()
        sch = _SCHEMES[key] = GodunovScheme(flux, grid)
    return sch


def steps(field, flux, t_target, cfl=0.45):
    """Yield ``(field, dt, face_fluxes)`` after each explicit step up to ``t_target``.

    The last step is shortened so that the final field sits exactly at
    ``t_target``.
    """
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    if t_target < field.time:
        raise ValueError("t_target precedes the field time")
    sch = scheme_for(flux, field.grid)
    t_target = float(t_target)
    while field.time < t_target:
        dt = min(sch.stable_dt(field, cfl), t_target - field.time)
        new, F = sch.step(field, dt)
        if t_target - new.time <= 1e-14 * max(1.0, abs(t_target)):
            new = new.evolve(new.values, t_target)
        field = new
        yield field, dt, F


def advance(field, flux, t_target, cfl=0.45, on_step=None):
    """Advance ``field`` to exactly ``t_target``."""
    for field, dt, F in steps(field, flux, t_target, cfl):
        if on_step is not None:
            on_step(field, dt, F)
    return field


def l1_distances(field_a, field_b, flux, t_target, cfl=0.45):
    """Advance two fields in lockstep and return ``(times, ||a - b||_L1)`` after every step.

    Both fields share each time step (the smaller of their stable steps), so the
    sequence is the distance between two runs of one monotone scheme.
    """
    if field_a.grid != field_b.grid or field_a.boundary_mode != field_b.boundary_mode:
        raise ValueError("fields must share grid and boundary mode")
    if field_a.time != field_b.time:
        raise ValueError("fields must start at the same time")
    sch = scheme_for(flux, field_a.grid)
    dx = field_a.grid.dx
    times = [field_a.time]
    dists = [float(np.sum(np.abs(field_a.values - field_b.values)) * dx)]
    while field_a.time < t_target:
        dt = min(sch.stable_dt(field_a, cfl), sch.stable_dt(field_b, cfl), t_target - field_a.time)
        field_a, _ = sch.step(field_a, dt)
        field_b, _ = sch.step(field_b, dt)
        if t_target - field_a.time <= 1e-14 * max(1.0, abs(t_target)):
            field_a = field_a.evolve(field_a.values, t_target)
            field_b = field_b.evolve(field_b.values, t_target)
        times.append(field_a.time)
        dists.append(float(np.sum(np.abs(field_a.values - field_b.values)) * dx))
    return np.asarray(times), np.asarray(dists)


@dataclass
class FieldHistory:
    """Snapshots of a run, stored every ``snapshot_every`` solver steps."""

    grid: Grid1D
    times: list
    values: list
    boundary_mode: str = "far_field"
    left_state: float = 0.0
    right_state: float = 0.0
    n_steps: int = 0

    def __len__(self):
        return len(self.times)

    def snapshot(self, i):
        return SolutionField(self.grid, self.times[i], self.values[i], self.boundary_mode,
                             self.left_state, self.right_state)

    def __iter__(self):
        return (self.snapshot(i) for i in range(len(self)))

    @property
    def final(self):
        return self.snapshot(len(self) - 1)

    def nearest(self, t):
        return int(np.argmin(np.abs(np.asarray(self.times) - t)))

    def at(self, t):
        """Field at time ``t`` by linear interpolation between snapshots."""
        times = np.asarray(self.times)
        if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
            raise OutOfDomain(f"t={t} outside stored history [{times[0]}, {times[-1]}]")
        j = int(np.clip(np.searchsorted(times, t), 1, len(times) - 1))
        t0, t1 = times[j - 1], times[j]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        w = min(max(w, 0.0), 1.0)
        vals = (1 - w) * self.values[j - 1] + w * self.values[j]
        return SolutionField(self.grid, float(t), vals, self.boundary_mode,
                             self.left_state, self.right_state)


def run(field, flux, horizon, cfl=0.45, snapshot_every=10, observers: Sequence[Callable] = (),
        extra_times=()):
    """Integrate to ``horizon`` and record a :class:`FieldHistory`.

    Every observer is called as ``obs(field, dt, face_fluxes)`` after each
    step.  ``extra_times`` are additional exact output times.
    """
    hist = FieldHistory(field.grid, [field.time], [field.values], field.boundary_mode,
                        field.left_state, field.right_state)
    stops = sorted({float(t) for t in extra_times if field.time < t < horizon} | {float(horizon)})
    count = 0
    for stop in stops:
        for field, dt, F in steps(field, flux, stop, cfl):
            count += 1
            for obs in observers:
                obs(field, dt, F)
            if count % snapshot_every == 0 or field.time == stop:
                if hist.times[-1] != field.time:
                    hist.times.append(field.time)
                    hist.values.append(field.values)
    hist.n_steps = count
    return hist


def traces_at(field, x):
    """Left/right traces at ``x`` from the cells containing ``x -/+ dx/2``."""
    g = field.grid
    h = 0.5 * g.dx
    if not (g.x_left + h <= x <= g.x_right - h):
        raise OutOfDomain(f"x={x} outside grid interior [{g.x_left + h}, {g.x_right - h}]")
    il = int(g.cell_index(x - h))
    ir = int(g.cell_index(x + h))
    return float(field.values[il]), float(field.values[ir])


@dataclass
class Layer:
    """Steepest descending jump near a query point.

    ``first_face``..``last_face`` is the extent of the smeared layer; the
    traces are read ``offset`` cells beyond it on either side.
    """

    face: int
    position: float
    u_left: float
    u_right: float
    is_shock: bool
    first_face: int = -1
    last_face: int = -1

    @property
    def jump(self):
        return self.u_left - self.u_right


def find_layer(values, grid, x, jump_floor, offset=3, window=None, spread=0.05, max_extent=4):
    """Locate the numerical shock layer closest to ``x``.

    The steepest descending face within ``window`` cells of ``x`` is the layer
    centre.  The layer extends over neighbouring faces (at most
    ``max_extent`` per side) whose drop is at least ``spread`` times the
    steepest one, and traces are read ``offset`` cells outside it.  A layer
    counts as a shock when its jump exceeds ``jump_floor`` and either is
    saturated (doubling the trace offset adds under a quarter of the jump,
    where a smooth gradient adds about 40%) or concentrates a quarter of the
    jump in one face.
    """
    n = grid.n_cells
    w = window if window is not None else 2 * offset + 2
    i = int(grid.cell_index(x))
    lo = max(i - w + 1, 1)
    hi = min(i + w, n - 1)
    faces = np.arange(lo, hi + 1)
    drops = values[faces - 1] - values[faces]
    k = int(faces[np.argmax(drops)])
    top = float(values[k - 1] - values[k])
    kl = k
    while kl > max(1, k - max_extent) and values[kl - 2] - values[kl - 1] >= spread * top:
        kl -= 1
    kr = k
    while kr < min(n - 1, k + max_extent) and values[kr] - values[kr + 1] >= spread * top:
        kr += 1
    il, ir = max(kl - offset, 0), min(kr + offset - 1, n - 1)
    il2, ir2 = max(kl - 2 * offset, 0), min(kr + 2 * offset - 1, n - 1)
    ul, ur = float(values[il]), float(values[ir])
    jump = ul - ur
    wide = float(values[il2] - values[ir2])
    steep = top >= 0.25 * jump
    is_shock = jump > jump_floor and ((wide - jump) <= 0.25 * jump or steep)
    return Layer(k, grid.x_left + k * grid.dx, ul, ur, bool(is_shock), kl, kr)


def data_support(data):
    """Interval outside of which ``data`` equals its far-field states."""
    p = data.params
    pts = [float(p.get("x0", 0.0))]
    if data.kind == "piecewise4":
        pts += [float(p.get("x_minus", -1.0)), float(p.get("x_plus", 1.0))]
    if data.kind in ("perturbed_phi", "constant") and float(p.get("amplitude", 0.0)) != 0.0:
        c = float(p.get("bump_center", -1.0 if data.kind == "perturbed_phi" else 0.0))
        w = float(p.get("bump_width", 0.75 if data.kind == "perturbed_phi" else 0.5))
        pts += [c - w, c + w]
    return min(pts), max(pts)


def auto_domain(flux, data, horizon, margin=1.5, state_range=None):
    """Finite domain wide enough that no signal reaches the boundary by ``horizon``."""
    lo, hi = data_support(data)
    a, b = state_range if state_range is not None else (flux.u_plus, flux.u_minus)
    amp = abs(float(data.params.get("amplitude", 0.0)))
    reach = margin * flux.speed_bound(a - amp, b + amp) * horizon
    return lo - reach - 1.0, hi + reach + 1.0
