"""Command-line entry point: ``hetclaw <experiment> --config run.cfg``.

Exit status is 0 when every asserted criterion passes, 1 when any fails and
2 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .config import EXPERIMENTS, RunConfig, config_from_dict, parse_config_text
from .errors import ConfigError, HetclawError
from .experiments import RUNNERS
from .output import write_json, write_table

log = logging.getLogger("hetclaw")


@dataclass
class RunManifest:
    config: dict
    content_hash: str
    wall_clock: float
    criteria: dict
    metrics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    status: str = "ok"
    error: str = ""

    @property
    def passed(self):
        return self.status == "ok" and all(self.criteria.values())

    def to_dict(self):
        return asdict(self)


def run(config: RunConfig) -> RunManifest:
    """Execute one experiment and write its artifacts plus ``manifest.json``."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    criteria, metrics, artifacts = RUNNERS[config.experiment](config, out)
    manifest = RunManifest(config.to_dict(), config.content_hash(),
                           time.perf_counter() - start, dict(criteria), dict(metrics),
                           sorted(Path(a).name for a in artifacts))
    write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def _run_isolated(config):
    try:
        return run(config)
    except (HetclawError, ValueError) as exc:
        return RunManifest(config.to_dict(), config.content_hash(), 0.0, {}, status="error",
                           error=f"{type(exc).__name__}: {exc}")


def sweep(configs, workers=None):
    """Run configs in parallel; failures are recorded per run and never abort the sweep."""
    if not configs:
        raise ConfigError("sweep needs at least one configuration", {"sweep": "empty"})
    seen, jobs, results = {}, [], [None] * len(configs)
    for i, cfg in enumerate(configs):
        key = str(Path(cfg.output_dir).resolve())
        if key in seen:
            results[i] = RunManifest(cfg.to_dict(), cfg.content_hash(), 0.0, {}, status="error",
                                     error=f"ConfigError: output_dir collides with run {seen[key]}")
        else:
            seen[key] = i
            jobs.append(i)
    if workers == 1 or len(jobs) <= 1:
        for i in jobs:
            results[i] = _run_isolated(configs[i])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in zip(jobs, pool.map(_run_isolated, [configs[i] for i in jobs])):
                results[i] = res
    return results


def expand_sweep(flat):
    """Cartesian product over every ``sweep.<key> = v1, v2, ...`` entry."""
    axes = {k[len("sweep."):]: v if isinstance(v, list) else [v]
            for k, v in flat.items() if k.startswith("sweep.")}
    base = {k: v for k, v in flat.items() if not k.startswith("sweep.")}
    root = Path(str(base.get("output_dir", "out")))
    configs = []
    for n, combo in enumerate(itertools.product(*axes.values())):
        d = dict(base)
        d.update(dict(zip(axes.keys(), combo)))
        d["output_dir"] = str(root / f"run_{n:03d}")
        configs.append(config_from_dict(d))
    return configs, list(axes.keys())


def write_sweep_summary(path, manifests, axes):
    metric_keys = sorted({k for m in manifests for k, v in m.metrics.items()
                          if isinstance(v, (int, float)) and not isinstance(v, bool)})
    header = ["run"] + axes + ["status", "passed"] + metric_keys
    rows = []
    for n, m in enumerate(manifests):
        flat = _flatten_config(m.config)
        rows.append([f"run_{n:03d}"] + [flat.get(a, "") for a in axes]
                    + [m.status, str(m.passed)] + [m.metrics.get(k, "") for k in metric_keys])
    return write_table(path, header, list(zip(*rows)) if rows else [[] for _ in header])


def _flatten_config(d):
    flat = {"experiment": d["experiment"], "horizon": d["horizon"], "cfl": d["cfl"],
            "grid.n_cells": d["n_cells"], "flux.family": d["flux_family"],
            "data.kind": d["data_kind"]}
    flat.update({f"flux.{k}": v for k, v in d["flux_params"].items()})
    flat.update({f"data.{k}": v for k, v in d["data_params"].items()})
    return flat


def build_parser():
    parser = argparse.ArgumentParser(prog="hetclaw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("sweep",):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--n-cells", type=int, help="override grid.n_cells")
        p.add_argument("--horizon", type=float, help="override the final time")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=None)
    return parser


def _flat_from_args(args):
    flat = parse_config_text(args.config.read_text()) if args.config else {}
    if args.command != "sweep":
        flat["experiment"] = args.command
    if args.out is not None:
        flat["output_dir"] = str(args.out)
    if args.n_cells is not None:
        flat["grid.n_cells"] = args.n_cells
    if args.horizon is not None:
        flat["horizon"] = args.horizon
    return flat


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config is not None and not args.config.exists():
            raise ConfigError(f"config file {args.config} not found", {"--config": "not found"})
        flat = _flat_from_args(args)
        if args.command == "sweep":
            configs, axes = expand_sweep(flat)
            manifests = sweep(configs, args.workers)
            root = Path(str(flat.get("output_dir", "out")))
            root.mkdir(parents=True, exist_ok=True)
            write_sweep_summary(root / "summary.csv", manifests, axes)
            for n, m in enumerate(manifests):
                print(f"run_{n:03d} {'PASS' if m.passed else 'FAIL'} {m.error}".rstrip())
            if any(m.status == "error" for m in manifests):
                return 2
            return 0 if all(m.passed for m in manifests) else 1
        manifest = run(config_from_dict(flat))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        for key, msg in (exc.problems or {}).items():
            print(f"  {key}: {msg}", file=sys.stderr)
        return 2
    except (HetclawError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for name, ok in manifest.criteria.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
