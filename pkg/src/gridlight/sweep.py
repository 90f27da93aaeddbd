"""Grid search over the inequity coefficients with resumable persistence.

Every (alpha, beta) cell runs a configured number of repetitions; each
repetition's seed depends only on the master seed and the cell/repetition
indices, so results are independent of execution order and parallelism.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .runner import ExperimentConfig, config_hash, run_experiment


@dataclass
class AxisSpec:
    lo: float = -1.0
    hi: float = 1.0
    step: float = 0.2

    def values(self):
        if self.step <= 0:
            raise ConfigError("axis step must be positive")
        if self.lo > self.hi:
            raise ConfigError("axis lo must not exceed hi")
        decimals = max(0, -int(np.floor(np.log10(self.step))) + 1)
        count = int(round((self.hi - self.lo) / self.step)) + 1
        return [round(self.lo + k * self.step, decimals) for k in range(count)]


@dataclass
class SweepConfig:
    alpha: AxisSpec = field(default_factory=AxisSpec)
    beta: AxisSpec = field(default_factory=AxisSpec)
    repetitions: int = 3
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    parallelism: int = 1

    def validate(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        self.alpha.values()
        self.beta.values()
        self.base.validate()


@dataclass
class SweepCellResult:
    alpha: float
    beta: float
    finals: list  # per-repetition final performance
    mean: float
    std: float  # unbiased; 0.0 for a single repetition

    @classmethod
    def from_finals(cls, alpha, beta, finals):
        arr = np.asarray(finals, dtype=float)
        std = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        return cls(alpha=alpha, beta=beta, finals=list(map(float, finals)),
                   mean=float(np.mean(arr)), std=std)


def enumerate_grid(cfg: SweepConfig):
    """Cartesian product of the alpha and beta axes, drift-free values."""
    return [(a, b) for a in cfg.alpha.values() for b in cfg.beta.values()]


def derive_seed(master_seed: int, alpha_idx: int, beta_idx: int, repetition: int) -> int:
    """Stable per-repetition seed; independent of grid extent or run order."""
    seq = np.random.SeedSequence([master_seed, 7_777_777, alpha_idx, beta_idx, repetition])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def cell_experiment_config(cfg: SweepConfig, alpha_idx: int, beta_idx: int,
                           repetition: int) -> ExperimentConfig:
    grid_a = cfg.alpha.values()
    grid_b = cfg.beta.values()
    exp = dataclasses.replace(
        cfg.base,
        ia=dataclasses.replace(cfg.base.ia, alpha=grid_a[alpha_idx], beta=grid_b[beta_idx]),
        seed=derive_seed(cfg.base.seed, alpha_idx, beta_idx, repetition),
        repetition=repetition,
    )
    return exp


def _run_cell(args):
    cfg, ai, bi = args
    grid_a = cfg.alpha.values()
    grid_b = cfg.beta.values()
    records = []
    for rep in range(cfg.repetitions):
        exp = cell_experiment_config(cfg, ai, bi, rep)
        try:
            result = run_experiment(exp)
            records.append(
                {
                    "repetition": rep,
                    "seed": exp.seed,
                    "final_performance": result.summary["final_performance"],
                    "final_performance_basis": result.summary["final_performance_basis"],
                    "error": None,
                }
            )
        except Exception as exc:  # cell failures are recorded, not fatal
            records.append(
                {"repetition": rep, "seed": exp.seed, "final_performance": None,
                 "final_performance_basis": None, "error": f"{type(exc).__name__}: {exc}"}
            )
    return ai, bi, grid_a[ai], grid_b[bi], records


def _cell_filename(ai: int, bi: int) -> str:
    return f"cell_a{ai:03d}_b{bi:03d}.json"


def _sweep_hash(cfg: SweepConfig) -> str:
    return config_hash(cfg)


def run_sweep(cfg: SweepConfig, out_dir, resume: bool = True):
    """Run (or resume) every cell x repetition; returns SweepCellResults.

    One JSON file per cell under out_dir; a manifest records completion.
    Cells whose file already exists under the same sweep hash are skipped.
    """
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    sweep_hash = _sweep_hash(cfg)
    grid_a = cfg.alpha.values()
    grid_b = cfg.beta.values()
    cells = [(ai, bi) for ai in range(len(grid_a)) for bi in range(len(grid_b))]

    done = {}
    if resume:
        for ai, bi in cells:
            path = os.path.join(out_dir, _cell_filename(ai, bi))
            if not os.path.exists(path):
                continue
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if doc.get("sweep_hash") == sweep_hash:
                done[(ai, bi)] = doc

    todo = [(cfg, ai, bi) for ai, bi in cells if (ai, bi) not in done]
    if cfg.parallelism == 1 or len(todo) <= 1:
        finished = [_run_cell(args) for args in todo]
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            finished = list(pool.map(_run_cell, todo))

    for ai, bi, alpha, beta, records in finished:
        doc = {
            "sweep_hash": sweep_hash,
            "alpha_idx": ai,
            "beta_idx": bi,
            "alpha": alpha,
            "beta": beta,
            "repetitions": records,
        }
        with open(os.path.join(out_dir, _cell_filename(ai, bi)), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
        done[(ai, bi)] = doc

    manifest = {
        "sweep_hash": sweep_hash,
        "cells": [
            {
                "alpha_idx": ai,
                "beta_idx": bi,
                "file": _cell_filename(ai, bi),
                "complete": all(r["error"] is None for r in done[(ai, bi)]["repetitions"]),
            }
            for ai, bi in cells
        ],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")

    results = []
    for ai, bi in cells:
        doc = done[(ai, bi)]
        finals = [r["final_performance"] for r in doc["repetitions"] if r["final_performance"] is not None]
        if finals:
            results.append(SweepCellResult.from_finals(doc["alpha"], doc["beta"], finals))
        else:
            results.append(SweepCellResult(doc["alpha"], doc["beta"], [], float("nan"), float("nan")))
    return results


def emit_heatmap(results, path) -> None:
    """Plot-ready CSV: alpha,beta,mean_tt_s,std_tt_s,n sorted by (alpha, beta)."""
    if not results:
        raise ConfigError("no sweep results to emit")
    lines = ["alpha,beta,mean_tt_s,std_tt_s,n"]
    for cell in sorted(results, key=lambda c: (c.alpha, c.beta)):
        lines.append(
            f"{cell.alpha!r},{cell.beta!r},{cell.mean!r},{cell.std!r},{len(cell.finals)}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def total_experiments(cfg: SweepConfig) -> int:
    return len(enumerate_grid(cfg)) * cfg.repetitions
