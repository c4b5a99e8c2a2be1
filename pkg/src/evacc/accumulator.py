"""Evidence channels with a softmax preference and a threshold-gated decision.

One channel per candidate action stores cumulative evidence since episode
start. The preference over actions is the softmax of the channel totals, and
a decision fires only when the preferred action's softmax mass exceeds a
confidence threshold tau. Below threshold, the default is to do nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AccumulatorState:
    nu: np.ndarray
    sensitivity: float
    n_channels: int


@dataclass(frozen=True)
class Preference:
    rho: np.ndarray


@dataclass(frozen=True)
class ThresholdGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("threshold grid must be non-empty")
        if any(not 0.0 <= v < 1.0 for v in self.values):
            raise ValueError("threshold values must lie in [0, 1)")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("threshold values must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)


# tau grids used by the sweep baseline and the two learning agents
MC_SWEEP_GRID = ThresholdGrid(tuple(i / 10 for i in range(10)))       # 0.0 .. 0.9
THRESHOLD_AGENT_GRID = ThresholdGrid(tuple(i / 10 for i in range(1, 10)))  # 0.1 .. 0.9
JOINT_AGENT_GRID = ThresholdGrid(tuple(i / 10 for i in range(5, 10)))      # 0.5 .. 0.9


def reset_accumulator(n_channels: int, sensitivity: float) -> AccumulatorState:
    if n_channels < 2:
        raise ValueError(f"n_channels must be >= 2, got {n_channels}")
    if sensitivity <= 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    return AccumulatorState(np.zeros(n_channels), float(sensitivity), n_channels)


def accumulate(state: AccumulatorState, kappa: np.ndarray) -> AccumulatorState:
    """Add one step of evidence, scaled by the sensitivity."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (state.n_channels,):
        raise ValueError(f"evidence shape {kappa.shape} != ({state.n_channels},)")
    if np.any(kappa < 0.0) or np.any(kappa > 1.0):
        raise ValueError("evidence components must lie in [0, 1]")
    return AccumulatorState(state.nu + state.sensitivity * kappa,
                            state.sensitivity, state.n_channels)


def preference(state: AccumulatorState) -> Preference:
    """Softmax of the channel totals, computed with max-subtraction."""
    z = state.nu - state.nu.max()
    e = np.exp(z)
    return Preference(e / e.sum())


def decide(rho: Preference, tau: float) -> int | None:
    """Index of the strongest channel if its preference exceeds tau, else None.

    Ties break toward the lowest index.
    """
    best = int(np.argmax(rho.rho))
    if rho.rho[best] > tau:
        return best
    return None
