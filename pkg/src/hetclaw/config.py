"""Flat ``key = value`` run configuration with dotted sections.

Example::

    experiment = emergence
    flux.family = convex_combination
    flux.epsilon = 0.1
    data.kind = piecewise4
    grid.domain = -3, 10
    grid.n_cells = 4000
    horizon = 14

Lines starting with ``#`` are comments.  Values are parsed as bool, int,
float or comma-separated lists of those, falling back to strings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .flux import FAMILIES
from .solver import BOUNDARY_MODES, DATA_KINDS

EXPERIMENTS = ("simulate", "characteristics", "emergence", "stability", "negcheck",
               "hj-check", "validate-flux")
TOP_LEVEL = {"experiment", "horizon", "cfl", "snapshot_every", "boundary_mode",
             "snapshot_times", "output_dir"}
SECTIONS = {"flux", "data", "grid", "tolerances", "characteristics", "stability",
            "negcheck", "hj", "validate", "emergence", "sweep"}


def parse_value(text):
    text = text.strip()
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part.strip()]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_config_text(text):
    """Parse config text into a flat ``{dotted.key: value}`` dict."""
    out, problems = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems[f"line {lineno}"] = f"expected key = value, got {raw.strip()!r}"
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            problems[key] = f"duplicate key on line {lineno}"
        out[key] = parse_value(value)
    if problems:
        raise ConfigError("malformed config", problems)
    return out


def _section(flat, name):
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in flat.items() if k.startswith(prefix)}


@dataclass
class RunConfig:
    experiment: str = "simulate"
    flux_family: str = "lwr_heterogeneous"
    flux_params: dict = field(default_factory=dict)
    data_kind: str = "riemann_phi"
    data_params: dict = field(default_factory=dict)
    domain: tuple | None = None
    n_cells: int = 1000
    horizon: float = 1.0
    cfl: float = 0.45
    snapshot_every: int = 10
    boundary_mode: str = "far_field"
    snapshot_times: list = field(default_factory=list)
    output_dir: str = "out"
    jump_floor: float | None = None
    ordering_tol: float | None = None
    num_tol: float | None = None
    options: dict = field(default_factory=dict)

    def validate(self):
        p = {}
        if self.experiment not in EXPERIMENTS:
            p["experiment"] = f"must be one of {EXPERIMENTS}, got {self.experiment!r}"
        if self.flux_family not in FAMILIES:
            p["flux.family"] = f"must be one of {FAMILIES}, got {self.flux_family!r}"
        if self.data_kind not in DATA_KINDS:
            p["data.kind"] = f"must be one of {DATA_KINDS}, got {self.data_kind!r}"
        if self.boundary_mode not in BOUNDARY_MODES:
            p["boundary_mode"] = f"must be one of {BOUNDARY_MODES}"
        if not isinstance(self.horizon, (int, float)) or not self.horizon > 0:
            p["horizon"] = "must be a positive number"
        if not isinstance(self.cfl, (int, float)) or not 0 < self.cfl <= 1:
            p["cfl"] = "must lie in (0, 1]"
        if not isinstance(self.n_cells, int) or self.n_cells < 8:
            p["grid.n_cells"] = "must be an integer >= 8"
        if not isinstance(self.snapshot_every, int) or self.snapshot_every < 1:
            p["snapshot_every"] = "must be a positive integer"
        if self.domain is not None:
            d = self.domain
            if len(d) != 2 or not all(isinstance(v, (int, float)) for v in d) or not d[1] > d[0]:
                p["grid.domain"] = "must be two increasing numbers"
        for name in ("jump_floor", "ordering_tol", "num_tol"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, (int, float)) or not v > 0):
                p[f"tolerances.{name}"] = "must be positive"
        for t in self.snapshot_times:
            if not isinstance(t, (int, float)) or not 0 <= t <= self.horizon:
                p["snapshot_times"] = "entries must lie in [0, horizon]"
                break
        if not self.output_dir:
            p["output_dir"] = "must be non-empty"
        if p:
            raise ConfigError("invalid run configuration", p)
        return self

    def to_dict(self):
        d = asdict(self)
        d["domain"] = list(self.domain) if self.domain is not None else None
        return d

    def content_hash(self):
        """SHA-256 of the canonical JSON form, excluding the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **kw):
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        if d.get("domain") is not None:
            d["domain"] = tuple(d["domain"])
        return RunConfig(**d)


def config_from_dict(flat):
    """Build a validated :class:`RunConfig` from a flat dotted-key mapping."""
    problems = {}
    for key in flat:
        head = key.split(".", 1)[0]
        if "." in key and head not in SECTIONS:
            problems[key] = f"unknown section {head!r}"
        elif "." not in key and key not in TOP_LEVEL:
            problems[key] = "unknown key"
    if problems:
        raise ConfigError("unknown configuration keys", problems)
    fl = _section(flat, "flux")
    grid = _section(flat, "grid")
    tol = _section(flat, "tolerances")
    unknown_tol = set(tol) - {"jump_floor", "ordering_tol", "num_tol"}
    unknown_grid = set(grid) - {"domain", "n_cells"}
    if unknown_tol or unknown_grid:
        raise ConfigError("unknown configuration keys",
                          {**{f"tolerances.{k}": "unknown key" for k in unknown_tol},
                           **{f"grid.{k}": "unknown key" for k in unknown_grid}})
    data = _section(flat, "data")
    times = flat.get("snapshot_times", [])
    if not isinstance(times, list):
        times = [] if times is None else [times]
    domain = grid.get("domain")
    options = {s: _section(flat, s) for s in
               ("characteristics", "stability", "negcheck", "hj", "validate", "emergence", "sweep")}
    cfg = RunConfig(
        experiment=flat.get("experiment", "simulate"),
        flux_family=fl.pop("family", "lwr_heterogeneous"),
        flux_params=fl,
        data_kind=data.pop("kind", "riemann_phi"),
        data_params=data,
        domain=tuple(domain) if isinstance(domain, list) else domain,
        n_cells=grid.get("n_cells", 1000),
        horizon=flat.get("horizon", 1.0),
        cfl=flat.get("cfl", 0.45),
        snapshot_every=flat.get("snapshot_every", 10),
        boundary_mode=flat.get("boundary_mode", "far_field"),
        snapshot_times=times,
        output_dir=str(flat.get("output_dir", "out")),
        jump_floor=tol.get("jump_floor"),
        ordering_tol=tol.get("ordering_tol"),
        num_tol=tol.get("num_tol"),
        options={k: v for k, v in options.items() if v},
    )
    return cfg.validate()


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found", {"--config": "file not found"})
    return config_from_dict(parse_config_text(path.read_text()))
