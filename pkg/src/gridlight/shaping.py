"""Inequity-aversion reward shaping.

Smoothed per-agent reward memories decay by gamma * lambda each step; each
agent's intrinsic reward penalizes (or rewards, for negative coefficients)
pairwise advantageous and disadvantageous gaps between memories; the shaped
reward is a linear mix of the extrinsic and intrinsic streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class IAConfig:
    alpha: float = 0.0  # disadvantageous-inequity coefficient, shared
    beta: float = 0.0  # advantageous-inequity coefficient, shared
    lam: float = 0.5  # trace decay
    gamma: float = 0.8  # discount reused in the memory decay
    mix_e: float = 1.0  # extrinsic weight in the linear mix
    mix_i: float = 1.0  # intrinsic weight in the linear mix

    def validate(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ConfigError("lambda must lie in [0, 1]")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("gamma must lie in [0, 1]")
        for name in ("alpha", "beta", "lam", "gamma", "mix_e", "mix_i"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")


def initial_memory(n: int) -> np.ndarray:
    return np.zeros(n)


def update_memory(w: np.ndarray, e: np.ndarray, cfg: IAConfig) -> np.ndarray:
    """Decayed memory update: w <- gamma * lambda * w + e, elementwise."""
    w = np.asarray(w, dtype=float)
    e = np.asarray(e, dtype=float)
    if w.shape != e.shape:
        raise ShapeError(f"memory length {w.shape} != reward length {e.shape}")
    return cfg.gamma * cfg.lam * w + e


def intrinsic_rewards(w: np.ndarray, cfg: IAConfig) -> np.ndarray:
    """Per-agent intrinsic reward from pairwise memory gaps over all peers."""
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if n < 2:
        raise ConfigError("intrinsic rewards need at least 2 agents")
    gap = w[None, :] - w[:, None]  # gap[k, j] = w_j - w_k
    disadvantageous = np.clip(gap, 0.0, None).sum(axis=1)
    advantageous = np.clip(-gap, 0.0, None).sum(axis=1)
    return -(cfg.alpha * disadvantageous + cfg.beta * advantageous) / (n - 1)


def shaped_rewards(e: np.ndarray, i: np.ndarray, cfg: IAConfig) -> np.ndarray:
    """Linear extrinsic/intrinsic mix."""
    e = np.asarray(e, dtype=float)
    i = np.asarray(i, dtype=float)
    if e.shape != i.shape:
        raise ShapeError(f"extrinsic length {e.shape} != intrinsic length {i.shape}")
    return cfg.mix_e * e + cfg.mix_i * i
