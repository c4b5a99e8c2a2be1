"""Monte-Carlo estimate of the best fixed-threshold accumulator performance.

For each candidate threshold, many episodes are rolled out with the one-hot
observation accumulated directly as evidence (unit sensitivity) and a guess
fired as soon as the preferred channel's softmax mass exceeds the threshold.
The best per-threshold mean reward serves as a near-optimal reference for
the learning agents.

Rollouts are vectorized across episodes; tests cross-check this fast path
against a step-by-step loop over the environment and accumulator primitives.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .accumulator import MC_SWEEP_GRID, ThresholdGrid
from .env import EnvConfig


@dataclass(frozen=True)
class CellStats:
    tau: float
    mean_reward: float
    mean_accuracy: float
    mean_decision_time: float
    n_rollouts: int


@dataclass(frozen=True)
class SweepResult:
    epsilon: float
    cells: tuple[CellStats, ...]
    best_tau: float
    best_mean_reward: float


def rollout_fixed_threshold(
    epsilon: float,
    tau: float,
    n: int,
    rng: np.random.Generator,
    config: EnvConfig | None = None,
) -> tuple[float, float, float]:
    """Mean (reward, accuracy, decision time) over n fixed-threshold episodes.

    Timeout episodes count as incorrect and score t_max as their decision
    time. All n episodes advance in lockstep as numpy batches.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"tau must be in [0, 1), got {tau}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cfg = config if config is not None else EnvConfig(epsilon=epsilon)
    n_sym, t_max = cfg.n_symbols, cfg.t_max

    modes = rng.integers(0, n_sym, n)
    nu = np.zeros((n, n_sym))
    reward = np.zeros(n)
    correct = np.zeros(n, dtype=bool)
    dtime = np.full(n, t_max)
    alive = np.ones(n, dtype=bool)
    for t in range(1, t_max + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        m = modes[idx]
        noisy = rng.random(idx.size) < epsilon
        offsets = rng.integers(1, n_sym, idx.size)
        samples = np.where(noisy, (m + offsets) % n_sym, m)
        nu[idx, samples] += 1.0
        z = nu[idx] - nu[idx].max(axis=1, keepdims=True)
        e = np.exp(z)
        rho = e / e.sum(axis=1, keepdims=True)
        best = rho.argmax(axis=1)
        fire = rho[np.arange(idx.size), best] > tau
        fired = idx[fire]
        if fired.size:
            guesses = best[fire]
            ok = guesses == modes[fired]
            reward[fired] = np.where(ok, cfg.r_correct - (t - 1), cfg.r_incorrect)
            correct[fired] = ok
            dtime[fired] = t
            alive[fired] = False
        if t == t_max:
            reward[alive] = cfg.r_timeout
            alive[:] = False
    return float(reward.mean()), float(correct.mean()), float(dtime.mean())


def sweep(
    epsilon: float,
    grid: ThresholdGrid = MC_SWEEP_GRID,
    n: int = 10_000,
    rng: np.random.Generator | None = None,
    config: EnvConfig | None = None,
) -> SweepResult:
    """Roll out every threshold in the grid; pick the best mean reward.

    Ties break toward the lower threshold (faster decisions).
    """
    if len(grid) == 0:
        raise ValueError("threshold grid is empty")
    if rng is None:
        rng = np.random.default_rng()
    cells = []
    for tau in grid.values:
        r, a, d = rollout_fixed_threshold(epsilon, tau, n, rng, config)
        cells.append(CellStats(tau, r, a, d, n))
    best = max(range(len(cells)), key=lambda i: (cells[i].mean_reward, -cells[i].tau))
    return SweepResult(
        epsilon=epsilon,
        cells=tuple(cells),
        best_tau=cells[best].tau,
        best_mean_reward=cells[best].mean_reward,
    )


def write_sweep_csv(results: list[SweepResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["epsilon", "tau", "n", "mean_reward", "mean_accuracy", "mean_decision_time"])
        for res in results:
            for cell in res.cells:
                writer.writerow([
                    repr(res.epsilon), repr(cell.tau), cell.n_rollouts,
                    repr(cell.mean_reward), repr(cell.mean_accuracy),
                    repr(cell.mean_decision_time),
                ])
