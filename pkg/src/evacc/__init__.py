"""Evidence-accumulation decision agents for a noisy symbol-guessing task."""

from .a2c import A2CConfig, Transition, a2c_loss, one_step_return, update_episode
from .accumulator import (
    JOINT_AGENT_GRID,
    MC_SWEEP_GRID,
    THRESHOLD_AGENT_GRID,
    AccumulatorState,
    Preference,
    ThresholdGrid,
    accumulate,
    decide,
    preference,
    reset_accumulator,
)
from .agents import (
    A2CRnnAgent,
    EpisodeResult,
    EvalRecord,
    JointAgent,
    RngStreams,
    ThresholdAgent,
    evaluate,
    make_agent,
    train,
)
from .env import EnvConfig, EpisodeState, Observation, StepOutcome
from .harness import ExperimentConfig, emit_curves, emit_table, run_experiment
from .mc_oracle import SweepResult, rollout_fixed_threshold, sweep

__all__ = [
    "A2CConfig", "A2CRnnAgent", "AccumulatorState", "EnvConfig", "EpisodeResult",
    "EpisodeState", "EvalRecord", "ExperimentConfig", "JOINT_AGENT_GRID",
    "JointAgent", "MC_SWEEP_GRID", "Observation", "Preference", "RngStreams",
    "StepOutcome", "SweepResult", "THRESHOLD_AGENT_GRID", "ThresholdAgent",
    "ThresholdGrid", "Transition", "a2c_loss", "accumulate", "decide",
    "emit_curves", "emit_table", "evaluate", "make_agent", "one_step_return",
    "preference", "reset_accumulator", "rollout_fixed_threshold",
    "run_experiment", "sweep", "train", "update_episode",
]

__version__ = "0.1.0"
