"""Mode-guessing environment: hidden symbol, noisy samples, timed episodes.

Each episode hides one symbol out of ``n_symbols``. At every step the agent
sees a noisy sample (the hidden symbol with probability ``1 - epsilon``, any
other symbol with probability ``epsilon / (n_symbols - 1)``) and may either
guess or wait. Guessing ends the episode: a correct guess at step t pays
``r_correct - (t - 1)``, a wrong guess pays ``r_incorrect``. Waiting pays 0
until the step budget runs out, at which point the episode ends with
``r_timeout``.

Step indexing convention: t=1 is the step at which the first sample has been
observed, so a correct guess after a single observation pays ``r_correct``
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ONEHOT10 = "onehot10"
BINARY4 = "binary4"
ENCODINGS = (ONEHOT10, BINARY4)

NO_GUESS = "no_guess"
CORRECT_GUESS = "correct_guess"
INCORRECT_GUESS = "incorrect_guess"
TIMEOUT = "timeout"


@dataclass
class EnvConfig:
    epsilon: float
    n_symbols: int = 10
    t_max: int = 30
    r_correct: float = 30.0
    r_incorrect: float = -30.0
    r_timeout: float = -30.0
    encoding: str = ONEHOT10

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.n_symbols < 2:
            raise ValueError(f"n_symbols must be >= 2, got {self.n_symbols}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")


@dataclass
class EpisodeState:
    hidden_mode: int
    t: int = 1
    terminated: bool = False


@dataclass
class Observation:
    encoding: str
    payload: np.ndarray


@dataclass
class StepOutcome:
    observation: Observation | None
    reward: float
    terminated: bool
    outcome_kind: str


def reset(config: EnvConfig, rng: np.random.Generator) -> EpisodeState:
    """Start a new episode with a freshly drawn hidden symbol."""
    mode = int(rng.integers(0, config.n_symbols))
    return EpisodeState(hidden_mode=mode, t=1, terminated=False)


def draw_sample(state: EpisodeState, config: EnvConfig, rng: np.random.Generator) -> int:
    """Draw one noisy sample for the current step.

    Returns the hidden symbol with probability 1 - epsilon, otherwise a
    uniformly chosen different symbol (each with probability epsilon / (n-1)).
    """
    if state.terminated:
        raise RuntimeError("draw_sample called on a terminated episode")
    n = config.n_symbols
    if rng.random() < config.epsilon:
        offset = int(rng.integers(1, n))
        return (state.hidden_mode + offset) % n
    return state.hidden_mode


def encode_observation(symbol: int, encoding: str) -> Observation:
    """Encode a symbol as a one-hot vector or a 4-bit binary vector (MSB first)."""
    if not 0 <= symbol <= 9:
        raise ValueError(f"symbol must be in 0..9, got {symbol}")
    if encoding == ONEHOT10:
        payload = np.zeros(10)
        payload[symbol] = 1.0
    elif encoding == BINARY4:
        payload = np.array([(symbol >> k) & 1 for k in (3, 2, 1, 0)], dtype=float)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return Observation(encoding=encoding, payload=payload)


def decode_binary4(payload: np.ndarray) -> int:
    bits = [int(round(b)) for b in payload]
    return (bits[0] << 3) | (bits[1] << 2) | (bits[2] << 1) | bits[3]


def observe(state: EpisodeState, config: EnvConfig, rng: np.random.Generator) -> Observation:
    """Draw and encode the sample for the current step."""
    return encode_observation(draw_sample(state, config, rng), config.encoding)


def step(
    state: EpisodeState,
    config: EnvConfig,
    agent_guess: int | None,
    rng: np.random.Generator,
) -> StepOutcome:
    """Advance the episode given the agent's reaction to the step-t sample.

    No guess before the deadline: reward 0, the next step's observation is
    drawn and delivered, t advances. No guess at t = t_max: timeout. A guess
    terminates immediately with the correct/incorrect reward.
    """
    if state.terminated:
        raise RuntimeError("step called on a terminated episode")
    if agent_guess is None:
        if state.t >= config.t_max:
            state.terminated = True
            return StepOutcome(None, config.r_timeout, True, TIMEOUT)
        state.t += 1
        obs = observe(state, config, rng)
        return StepOutcome(obs, 0.0, False, NO_GUESS)
    if agent_guess == state.hidden_mode:
        state.terminated = True
        reward = config.r_correct - (state.t - 1)
        return StepOutcome(None, reward, True, CORRECT_GUESS)
    state.terminated = True
    return StepOutcome(None, config.r_incorrect, True, INCORRECT_GUESS)


def draw_samples(
    modes: np.ndarray, epsilon: float, n_symbols: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized sample draw for a batch of episodes (one sample per mode)."""
    n = modes.shape[0]
    noisy = rng.random(n) < epsilon
    offsets = rng.integers(1, n_symbols, n)
    return np.where(noisy, (modes + offsets) % n_symbols, modes)
