"""Command-line entry points: network/flow generation, training, sweeps,
and report consolidation.

Exit codes: 0 success, 2 usage error (click), 3 invalid config, 4 missing
file, 5 validation error, 1 anything else. Failures print a single
machine-parsable line `error:<category>: <message>` to stderr.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
import time

import click
import yaml

from . import __version__
from .agent import AgentConfig
from .errors import ConfigError, GridlightError, ValidationError
from .net import build_grid
from .netio import ArrivalProfile, generate_flow, load_roadnet, save_flow, save_roadnet
from .runner import ExperimentConfig, config_hash, run_experiment
from .shaping import IAConfig
from .sweep import AxisSpec, SweepConfig, emit_heatmap, run_sweep
from .errors import MetricUndefinedError, NumericError

CONFIG_SCHEMA_VERSION = 1

_EXIT_CODES = [
    (ConfigError, 3, "invalid-config"),
    (FileNotFoundError, 4, "missing-file"),
    (ValidationError, 5, "validation"),
    (MetricUndefinedError, 1, "undefined-metric"),
    (NumericError, 1, "numeric"),
    (GridlightError, 1, "runtime"),
]


def _fail(exc) -> "int":
    for etype, code, category in _EXIT_CODES:
        if isinstance(exc, etype):
            click.echo(f"error:{category}: {exc}", err=True)
            return code
    click.echo(f"error:internal: {exc}", err=True)
    return 1


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (GridlightError, FileNotFoundError) as exc:
            sys.exit(_fail(exc))

    return wrapper


def _default_out(name: str) -> str:
    return os.path.join(os.environ.get("GRIDLIGHT_OUT", "."), name)


def _build_dataclass(cls, doc: dict, context: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in (doc or {}).items():
        if key not in known:
            raise ConfigError(f"unknown key {context}.{key}")
        sub = {"ia": IAConfig, "agent": AgentConfig, "alpha": AxisSpec,
               "beta": AxisSpec, "base": ExperimentConfig}.get(key)
        if sub is not None and isinstance(value, dict):
            kwargs[key] = _build_dataclass(sub, value, f"{context}.{key}")
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {context} section: {exc}") from exc


def load_config_file(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {CONFIG_SCHEMA_VERSION}")
    return doc


def _apply_overrides(cfg, overrides):
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        target = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise ConfigError(f"unknown override path {key!r}")
            target = getattr(target, part)
        if not hasattr(target, parts[-1]):
            raise ConfigError(f"unknown override path {key!r}")
        setattr(target, parts[-1], value)
    return cfg


def experiment_config_from(doc) -> ExperimentConfig:
    return _build_dataclass(ExperimentConfig, doc.get("experiment", {}), "experiment")


def sweep_config_from(doc) -> SweepConfig:
    section = dict(doc.get("sweep", {}))
    if "base" not in section and "experiment" in doc:
        section["base"] = doc["experiment"]
    return _build_dataclass(SweepConfig, section, "sweep")


def _write_manifest(out_dir, cfg, outputs, status: str):
    manifest = {
        "config_hash": config_hash(cfg),
        "tool_version": __version__,
        "created_unix": time.time(),
        "outputs": outputs,
        "status": status,
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")


@click.group()
@click.version_option(__version__)
def main():
    """Grid traffic-signal control lab."""


@main.command("gen-net")
@click.option("--rows", type=int, required=True, help="Grid rows (>= 1).")
@click.option("--cols", type=int, required=True, help="Grid columns (>= 1).")
@click.option("--link-travel", type=float, default=30.0, show_default=True,
              help="Free-flow link traversal time in seconds.")
@click.option("--out", type=click.Path(), default=None,
              help="Output roadnet file [default: $GRIDLIGHT_OUT/roadnet.json].")
@handle_errors
def cmd_gen_net(rows, cols, link_travel, out):
    """Write a rows x cols grid road network file."""
    out = out or _default_out("roadnet.json")
    net = build_grid(rows, cols, link_travel)
    save_roadnet(net, out)
    click.echo(f"wrote {out}: {len(net.intersections)} intersections, {len(net.links)} links")


@main.command("gen-flow")
@click.option("--net", "net_path", type=click.Path(), required=True, help="Roadnet file.")
@click.option("--mean", type=float, required=True, help="Mean arrivals per bin.")
@click.option("--std", type=float, default=0.0, show_default=True,
              help="Std of arrivals per bin.")
@click.option("--bin-width", type=float, default=300.0, show_default=True,
              help="Arrival bin width in seconds.")
@click.option("--duration", type=float, required=True, help="Flow duration in seconds.")
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Output flow file [default: $GRIDLIGHT_OUT/flow.json].")
@handle_errors
def cmd_gen_flow(net_path, mean, std, bin_width, duration, seed, out):
    """Sample a synthetic vehicle flow for a network."""
    out = out or _default_out("flow.json")
    net = load_roadnet(net_path)
    profile = ArrivalProfile(mean=mean, std=std, duration_s=duration, bin_width_s=bin_width)
    flow = generate_flow(profile, net, seed)
    save_flow(flow, out)
    click.echo(f"wrote {out}: {len(flow)} vehicles")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file with an `experiment` section.")
@click.option("--seed", type=int, default=None, help="Override the master seed.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override any experiment field, e.g. --set ia.alpha=0.6.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory [default: $GRIDLIGHT_OUT/train].")
@handle_errors
def cmd_train(config_path, seed, overrides, out):
    """Run one training experiment and write metrics + summary files."""
    out = out or _default_out("train")
    doc = load_config_file(config_path) if config_path else {}
    cfg = experiment_config_from(doc)
    _apply_overrides(cfg, overrides)
    if seed is not None:
        cfg.seed = seed
    cfg.validate()
    os.makedirs(out, exist_ok=True)
    result = run_experiment(cfg, out_dir=out)
    _write_manifest(out, cfg, ["metrics.csv", "summary.json"], "complete")
    fp = result.summary["final_performance"]
    click.echo(f"wrote {out}: {len(result.metrics.travel_times)} episodes, "
               f"final_performance={fp}")


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file with a `sweep` section.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory [default: $GRIDLIGHT_OUT/sweep].")
@click.option("--resume/--no-resume", default=True, show_default=True,
              help="Skip cells already completed under the same config.")
@handle_errors
def cmd_sweep(config_path, out, resume):
    """Run the inequity-coefficient grid search and emit a heatmap file."""
    out = out or _default_out("sweep")
    doc = load_config_file(config_path) if config_path else {}
    cfg = sweep_config_from(doc)
    cfg.validate()
    results = run_sweep(cfg, out, resume=resume)
    heatmap = os.path.join(out, "heatmap.csv")
    emit_heatmap(results, heatmap)
    _write_manifest(out, cfg, ["heatmap.csv", "manifest.json"], "complete")
    click.echo(f"wrote {out}: {len(results)} cells")


@main.command("report")
@click.option("--in-dir", "in_dir", type=click.Path(), required=True,
              help="Directory holding train or sweep outputs.")
@handle_errors
def cmd_report(in_dir):
    """Consolidated summary: final performances, convergence, best cell."""
    if not os.path.isdir(in_dir):
        raise FileNotFoundError(in_dir)
    summary_path = os.path.join(in_dir, "summary.json")
    heatmap_path = os.path.join(in_dir, "heatmap.csv")
    found = False
    if os.path.exists(summary_path):
        found = True
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        click.echo(f"run {summary['config_hash']}: "
                   f"final_performance={summary['final_performance']} "
                   f"convergence=({summary['loose_index']},{summary['tight_index']})")
    if os.path.exists(heatmap_path):
        found = True
        best = None
        with open(heatmap_path, encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("alpha,beta,"):
                raise ValidationError(f"{heatmap_path}: unexpected header")
            for line in fh:
                alpha, beta, mean, std, n = line.strip().split(",")
                row = (float(mean), float(alpha), float(beta), float(std), int(n))
                if row[0] == row[0] and (best is None or row < best):  # skip NaN means
                    best = row
        if best is None:
            raise ValidationError(f"{heatmap_path}: no usable cells")
        click.echo(f"best cell: alpha={best[1]} beta={best[2]} mean_tt_s={best[0]}")
    if not found:
        raise FileNotFoundError(f"{in_dir}: no summary.json or heatmap.csv found")


if __name__ == "__main__":
    main()
