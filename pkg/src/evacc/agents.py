"""The three learning agents and their training/evaluation loops.

* A2CRnnAgent: forced action selection. A recurrent policy over 11 actions
  (10 guesses + a do-nothing action) reads 4-bit observations; guessing is an
  explicit action the policy must pick.
* ThresholdAgent: one-hot observations are accumulated directly as evidence;
  a feedforward policy picks the confidence threshold each step, and the
  accumulator fires a guess only when the preferred channel clears it.
* JointAgent: evidence is sampled per channel from Beta distributions whose
  concentrations a network predicts from the 4-bit observation, while a
  second network picks the threshold. Both are trained from the same reward.

All agents learn with one-step-return A2C and one Adam step per episode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import env
from .a2c import A2CConfig, Transition, episode_loss, update_episode
from .accumulator import (
    JOINT_AGENT_GRID,
    THRESHOLD_AGENT_GRID,
    ThresholdGrid,
    accumulate,
    decide,
    preference,
    reset_accumulator,
)
from .autodiff import AdamState, ParameterStore, Tape, uniform_init

N_SYMBOLS = 10
NO_OP = 10

RNN_HIDDEN = 25
THRESHOLD_HIDDEN = 25
EVIDENCE_HIDDEN = 20
CRITIC_HIDDEN = 16


@dataclass
class EpisodeResult:
    reward: float
    correct: bool
    decision_time: int
    timed_out: bool
    fire_preference: float | None = None
    fire_tau: float | None = None


@dataclass
class EvalRecord:
    episodes_trained: int
    accuracy: float
    mean_decision_time: float
    mean_reward: float


LearningCurve = list[EvalRecord]


@dataclass
class RngStreams:
    """Named substreams of one root seed.

    Evaluation draws from its own lineage so inserting or removing
    evaluations never perturbs the training trajectory.
    """

    init: np.random.Generator
    env: np.random.Generator
    action: np.random.Generator
    eval_master: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        init_ss, env_ss, action_ss, eval_ss = np.random.SeedSequence(seed).spawn(4)
        return cls(
            init=np.random.default_rng(init_ss),
            env=np.random.default_rng(env_ss),
            action=np.random.default_rng(action_ss),
            eval_master=eval_ss,
        )

    def next_eval_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.eval_master.spawn(1)[0])


def sample_categorical(p: np.ndarray, rng: np.random.Generator) -> int:
    r = rng.random()
    return min(int(np.searchsorted(np.cumsum(p), r, side="right")), p.shape[0] - 1)


class A2CRnnAgent:
    """Recurrent forced-selection baseline: embed -> Elman cell -> 11-way policy."""

    kind = "a2c_rnn"

    def __init__(self, epsilon: float, cfg: A2CConfig, init_rng: np.random.Generator):
        self.env_config = env.EnvConfig(epsilon=epsilon, encoding=env.BINARY4)
        self.cfg = cfg
        p = ParameterStore()
        p.add("w_embed", uniform_init((RNN_HIDDEN, 4), init_rng))
        p.add("b_embed", np.zeros(RNN_HIDDEN))
        p.add("w_ih", uniform_init((RNN_HIDDEN, RNN_HIDDEN), init_rng))
        p.add("b_ih", np.zeros(RNN_HIDDEN))
        p.add("w_hh", uniform_init((RNN_HIDDEN, RNN_HIDDEN), init_rng))
        p.add("b_hh", np.zeros(RNN_HIDDEN))
        p.add("w_pol", uniform_init((N_SYMBOLS + 1, RNN_HIDDEN), init_rng))
        p.add("b_pol", np.zeros(N_SYMBOLS + 1))
        p.add("w_val", uniform_init((1, RNN_HIDDEN), init_rng))
        p.add("b_val", np.zeros(1))
        self.params = p
        self.adam = AdamState(p)

    def parameter_stores(self) -> dict[str, ParameterStore]:
        return {"policy": self.params}

    def run_episode(
        self,
        env_rng: np.random.Generator,
        action_rng: np.random.Generator,
        learn: bool,
    ) -> EpisodeResult:
        cfg = self.env_config
        p = self.params
        tape = Tape() if learn else None
        state = env.reset(cfg, env_rng)
        obs = env.observe(state, cfg, env_rng)
        h = ad.constant(np.zeros(RNN_HIDDEN))
        transitions: list[Transition] = []
        while True:
            x = ad.constant(obs.payload)
            e = ad.relu(ad.linear(x, p["w_embed"], p["b_embed"], tape), tape)
            h = ad.elman_cell(e, h, p["w_ih"], p["b_ih"], p["w_hh"], p["b_hh"], tape)
            probs = ad.softmax(ad.linear(h, p["w_pol"], p["b_pol"], tape), tape)
            a = sample_categorical(probs.value, action_rng)
            if learn:
                v = ad.index(ad.linear(h, p["w_val"], p["b_val"], tape), 0, tape)
                logp, ent = ad.categorical_logprob_entropy(probs, a, tape)
                if transitions and not transitions[-1].terminal:
                    transitions[-1].next_value = float(v.value)
            guess = a if a != NO_OP else None
            out = env.step(state, cfg, guess, env_rng)
            if learn:
                transitions.append(
                    Transition(logp, v, out.reward, ent, 0.0, out.terminated))
            if out.terminated:
                result = EpisodeResult(
                    reward=out.reward,
                    correct=out.outcome_kind == env.CORRECT_GUESS,
                    decision_time=state.t,
                    timed_out=out.outcome_kind == env.TIMEOUT,
                )
                break
            obs = out.observation
        if learn:
            update_episode(transitions, tape, p, self.adam, self.cfg)
        return result


class ThresholdAgent:
    """Accumulates one-hot observations directly; learns only the threshold."""

    kind = "threshold"

    def __init__(
        self,
        epsilon: float,
        cfg: A2CConfig,
        init_rng: np.random.Generator,
        grid: ThresholdGrid = THRESHOLD_AGENT_GRID,
        sensitivity: float = 1.0,
    ):
        self.env_config = env.EnvConfig(epsilon=epsilon, encoding=env.ONEHOT10)
        self.cfg = cfg
        self.grid = grid
        self.sensitivity = sensitivity
        p = ParameterStore()
        p.add("w_hidden", uniform_init((THRESHOLD_HIDDEN, N_SYMBOLS), init_rng))
        p.add("b_hidden", np.zeros(THRESHOLD_HIDDEN))
        p.add("w_pol", uniform_init((len(grid), THRESHOLD_HIDDEN), init_rng))
        p.add("b_pol", np.zeros(len(grid)))
        p.add("w_val", uniform_init((1, THRESHOLD_HIDDEN), init_rng))
        p.add("b_val", np.zeros(1))
        self.params = p
        self.adam = AdamState(p)

    def parameter_stores(self) -> dict[str, ParameterStore]:
        return {"policy": self.params}

    def run_episode(
        self,
        env_rng: np.random.Generator,
        action_rng: np.random.Generator,
        learn: bool,
    ) -> EpisodeResult:
        cfg = self.env_config
        p = self.params
        tape = Tape() if learn else None
        state = env.reset(cfg, env_rng)
        obs = env.observe(state, cfg, env_rng)
        acc = reset_accumulator(N_SYMBOLS, self.sensitivity)
        transitions: list[Transition] = []
        while True:
            x = ad.constant(obs.payload)
            hid = ad.relu(ad.linear(x, p["w_hidden"], p["b_hidden"], tape), tape)
            probs = ad.softmax(ad.linear(hid, p["w_pol"], p["b_pol"], tape), tape)
            k = sample_categorical(probs.value, action_rng)
            tau = self.grid.values[k]
            if learn:
                v = ad.index(ad.linear(hid, p["w_val"], p["b_val"], tape), 0, tape)
                logp, ent = ad.categorical_logprob_entropy(probs, k, tape)
                if transitions and not transitions[-1].terminal:
                    transitions[-1].next_value = float(v.value)
            acc = accumulate(acc, obs.payload)
            rho = preference(acc)
            channel = decide(rho, tau)
            out = env.step(state, cfg, channel, env_rng)
            if learn:
                transitions.append(
                    Transition(logp, v, out.reward, ent, 0.0, out.terminated))
            if out.terminated:
                result = EpisodeResult(
                    reward=out.reward,
                    correct=out.outcome_kind == env.CORRECT_GUESS,
                    decision_time=state.t,
                    timed_out=out.outcome_kind == env.TIMEOUT,
                    fire_preference=float(rho.rho[channel]) if channel is not None else None,
                    fire_tau=tau if channel is not None else None,
                )
                break
            obs = out.observation
        if learn:
            update_episode(transitions, tape, p, self.adam, self.cfg)
        return result


@dataclass
class JointHyperparams:
    lr_evidence: float = 2e-3
    lr_threshold: float = 1e-3
    lr_critic: float = 1e-3
    beta_entropy_evidence: float = 0.1
    beta_entropy_threshold: float = 0.5
    gamma: float = 0.95
    eta: float = 1.0
    sensitivity: float = 3.5


def _accumulator_summary(acc_state, t: int, t_max: int) -> np.ndarray:
    """Progress features for the critics: where the race stands and the clock."""
    rho = preference(acc_state).rho
    rho_sorted = np.sort(rho)[::-1]
    nu_sorted = np.sort(acc_state.nu)[::-1]
    return np.concatenate([
        rho_sorted,
        [rho_sorted[0] - rho_sorted[1], (nu_sorted[0] - nu_sorted[1]) / 5.0, t / t_max],
    ])


class JointAgent:
    """Learns the evidence mapping and the threshold at the same time.

    The two policy networks follow the fixed recipe (4 -> 20 relu -> Beta
    concentration heads through softplus + 1; 4 -> 25 relu -> 5-way threshold
    choice). Each learner has a private critic: a small MLP over the raw
    observation plus an accumulator summary, so one-step targets can credit
    how much a step of evidence actually advanced the race. Evidence heads
    start sparse (low alpha, high beta) and the threshold policy starts
    biased toward the most cautious grid value.
    """

    kind = "joint"

    def __init__(
        self,
        epsilon: float,
        hp: JointHyperparams,
        init_rng: np.random.Generator,
        grid: ThresholdGrid = JOINT_AGENT_GRID,
    ):
        self.env_config = env.EnvConfig(epsilon=epsilon, encoding=env.BINARY4)
        self.hp = hp
        self.grid = grid
        self.sensitivity = hp.sensitivity
        self.cfg_evidence = A2CConfig(
            gamma=hp.gamma, eta=hp.eta,
            beta_entropy=hp.beta_entropy_evidence, lr=hp.lr_evidence)
        self.cfg_threshold = A2CConfig(
            gamma=hp.gamma, eta=hp.eta,
            beta_entropy=hp.beta_entropy_threshold, lr=hp.lr_threshold)

        ev = ParameterStore()
        ev.add("w_hidden", uniform_init((EVIDENCE_HIDDEN, 4), init_rng))
        ev.add("b_hidden", np.zeros(EVIDENCE_HIDDEN))
        ev.add("w_alpha", uniform_init((N_SYMBOLS, EVIDENCE_HIDDEN), init_rng))
        ev.add("b_alpha", np.full(N_SYMBOLS, -1.0))
        ev.add("w_beta", uniform_init((N_SYMBOLS, EVIDENCE_HIDDEN), init_rng))
        ev.add("b_beta", np.full(N_SYMBOLS, 2.0))
        self.evidence = ev

        th = ParameterStore()
        th.add("w_hidden", uniform_init((THRESHOLD_HIDDEN, 4), init_rng))
        th.add("b_hidden", np.zeros(THRESHOLD_HIDDEN))
        th.add("w_pol", uniform_init((len(grid), THRESHOLD_HIDDEN), init_rng))
        b_pol = np.zeros(len(grid))
        b_pol[-1] = 2.0
        th.add("b_pol", b_pol)
        self.threshold = th

        n_feat = 4 + N_SYMBOLS + 3
        self.critic_evidence = self._make_critic(n_feat, init_rng)
        self.critic_threshold = self._make_critic(n_feat, init_rng)

        self.adam_evidence = AdamState(ev)
        self.adam_threshold = AdamState(th)
        self.adam_critic_evidence = AdamState(self.critic_evidence)
        self.adam_critic_threshold = AdamState(self.critic_threshold)

    @staticmethod
    def _make_critic(n_inputs: int, init_rng: np.random.Generator) -> ParameterStore:
        c = ParameterStore()
        c.add("w1", uniform_init((CRITIC_HIDDEN, n_inputs), init_rng))
        c.add("b1", np.zeros(CRITIC_HIDDEN))
        c.add("w2", uniform_init((1, CRITIC_HIDDEN), init_rng))
        c.add("b2", np.zeros(1))
        return c

    def parameter_stores(self) -> dict[str, ParameterStore]:
        return {
            "evidence": self.evidence,
            "threshold": self.threshold,
            "critic_evidence": self.critic_evidence,
            "critic_threshold": self.critic_threshold,
        }

    @staticmethod
    def _critic_value(critic: ParameterStore, feat: np.ndarray, tape):
        """Scalar v = w2 relu(w1 f + b1) + b2, fused into one tape node."""
        w1, b1 = critic["w1"], critic["b1"]
        w2, b2 = critic["w2"], critic["b2"]
        pre = w1.value @ feat + b1.value
        hid = np.maximum(pre, 0.0)
        v = float(w2.value[0] @ hid + b2.value[0])

        def factory(node):
            def bwd(g):
                gh = (g * w2.value[0]) * (pre > 0.0)
                w1.grad += np.outer(gh, feat)
                b1.grad += gh
                w2.grad[0] += g * hid
                b2.grad[0] += g
            return bwd

        return ad._emit(tape, v, factory)

    def run_episode(
        self,
        env_rng: np.random.Generator,
        action_rng: np.random.Generator,
        learn: bool,
    ) -> EpisodeResult:
        cfg = self.env_config
        ev, th = self.evidence, self.threshold
        tape = Tape() if learn else None
        state = env.reset(cfg, env_rng)
        obs = env.observe(state, cfg, env_rng)
        acc = reset_accumulator(N_SYMBOLS, self.sensitivity)
        tr_evidence: list[Transition] = []
        tr_threshold: list[Transition] = []
        while True:
            x = ad.constant(obs.payload)
            hid_e = ad.relu(ad.linear(x, ev["w_hidden"], ev["b_hidden"], tape), tape)
            alpha = ad.add_const(
                ad.softplus(ad.linear(hid_e, ev["w_alpha"], ev["b_alpha"], tape), tape),
                1.0, tape)
            beta = ad.add_const(
                ad.softplus(ad.linear(hid_e, ev["w_beta"], ev["b_beta"], tape), tape),
                1.0, tape)
            kappa = ad.beta_sample(alpha.value, beta.value, action_rng)

            hid_t = ad.relu(ad.linear(x, th["w_hidden"], th["b_hidden"], tape), tape)
            probs_t = ad.softmax(ad.linear(hid_t, th["w_pol"], th["b_pol"], tape), tape)
            k = sample_categorical(probs_t.value, action_rng)
            tau = self.grid.values[k]

            if learn:
                feat = np.concatenate(
                    [obs.payload, _accumulator_summary(acc, state.t, cfg.t_max)])
                v_e = self._critic_value(self.critic_evidence, feat, tape)
                v_t = self._critic_value(self.critic_threshold, feat, tape)
                logp_e = ad.vsum(ad.beta_logprob(alpha, beta, kappa, tape), tape)
                ent_e = ad.vsum(ad.beta_entropy(alpha, beta, tape), tape)
                logp_t, ent_t = ad.categorical_logprob_entropy(probs_t, k, tape)
                if tr_evidence and not tr_evidence[-1].terminal:
                    tr_evidence[-1].next_value = float(v_e.value)
                    tr_threshold[-1].next_value = float(v_t.value)

            acc = accumulate(acc, kappa)
            rho = preference(acc)
            channel = decide(rho, tau)
            out = env.step(state, cfg, channel, env_rng)
            if learn:
                tr_evidence.append(
                    Transition(logp_e, v_e, out.reward, ent_e, 0.0, out.terminated))
                tr_threshold.append(
                    Transition(logp_t, v_t, out.reward, ent_t, 0.0, out.terminated))
            if out.terminated:
                result = EpisodeResult(
                    reward=out.reward,
                    correct=out.outcome_kind == env.CORRECT_GUESS,
                    decision_time=state.t,
                    timed_out=out.outcome_kind == env.TIMEOUT,
                    fire_preference=float(rho.rho[channel]) if channel is not None else None,
                    fire_tau=tau if channel is not None else None,
                )
                break
            obs = out.observation
        if learn:
            loss_e, _, _ = episode_loss(tr_evidence, self.cfg_evidence, tape)
            loss_t, _, _ = episode_loss(tr_threshold, self.cfg_threshold, tape)
            total = ad.add(loss_e, loss_t, tape)
            ad.backward(tape, total)
            ad.adam_step(self.evidence, self.adam_evidence, self.hp.lr_evidence)
            ad.adam_step(self.threshold, self.adam_threshold, self.hp.lr_threshold)
            ad.adam_step(self.critic_evidence, self.adam_critic_evidence, self.hp.lr_critic)
            ad.adam_step(self.critic_threshold, self.adam_critic_threshold, self.hp.lr_critic)
        return result


def evaluate(
    agent,
    n_eval: int,
    rng: np.random.Generator,
    episodes_trained: int = 0,
) -> EvalRecord:
    """Run n_eval episodes with learning off and stochastic action selection."""
    if n_eval < 1:
        raise ValueError(f"n_eval must be >= 1, got {n_eval}")
    t_max = agent.env_config.t_max
    total_reward = 0.0
    total_correct = 0
    total_dt = 0
    for _ in range(n_eval):
        res = agent.run_episode(rng, rng, learn=False)
        total_reward += res.reward
        total_correct += res.correct
        total_dt += t_max if res.timed_out else res.decision_time
    return EvalRecord(
        episodes_trained=episodes_trained,
        accuracy=total_correct / n_eval,
        mean_decision_time=total_dt / n_eval,
        mean_reward=total_reward / n_eval,
    )


def train(
    agent,
    episodes: int,
    eval_interval: int,
    eval_episodes: int,
    streams: RngStreams,
    initial_eval: bool = False,
) -> LearningCurve:
    """Train with periodic frozen-parameter evaluations.

    Evaluations run every eval_interval episodes; with episodes=0 (or with
    initial_eval set) a single record is taken before any training.
    """
    curve: LearningCurve = []
    if initial_eval or episodes == 0:
        curve.append(evaluate(agent, eval_episodes, streams.next_eval_rng(), 0))
    for ep in range(1, episodes + 1):
        agent.run_episode(streams.env, streams.action, learn=True)
        if ep % eval_interval == 0:
            curve.append(
                evaluate(agent, eval_episodes, streams.next_eval_rng(), ep))
    return curve


def make_agent(kind: str, epsilon: float, init_rng: np.random.Generator, **overrides):
    """Construct one of the three agents with its calibrated defaults."""
    if kind == "a2c_rnn":
        cfg = A2CConfig(gamma=overrides.get("gamma", 0.95),
                        eta=overrides.get("eta", 1.0),
                        beta_entropy=overrides.get("beta_entropy", 5.0),
                        lr=overrides.get("lr", 1e-3))
        return A2CRnnAgent(epsilon, cfg, init_rng)
    if kind == "threshold":
        cfg = A2CConfig(gamma=overrides.get("gamma", 0.95),
                        eta=overrides.get("eta", 1.0),
                        beta_entropy=overrides.get("beta_entropy", 0.5),
                        lr=overrides.get("lr", 1e-4))
        return ThresholdAgent(epsilon, cfg, init_rng,
                              sensitivity=overrides.get("sensitivity", 1.0))
    if kind == "joint":
        hp = JointHyperparams(
            lr_evidence=overrides.get("lr_evidence", 2e-3),
            lr_threshold=overrides.get("lr_threshold", 1e-3),
            lr_critic=overrides.get("lr_critic", 1e-3),
            beta_entropy_evidence=overrides.get("beta_entropy_evidence", 0.1),
            beta_entropy_threshold=overrides.get("beta_entropy_threshold", 0.5),
            gamma=overrides.get("gamma", 0.95),
            eta=overrides.get("eta", 1.0),
            sensitivity=overrides.get("sensitivity", 3.5),
        )
        return JointAgent(epsilon, hp, init_rng)
    raise ValueError(f"unknown agent kind {kind!r}")


DEFAULT_EPISODES = {"a2c_rnn": 50_000, "threshold": 50_000, "joint": 150_000}
