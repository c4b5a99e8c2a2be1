"""Advantage actor-critic pieces: 1-step returns and the per-episode update.

The loss minimized for one step is

    -(G - v_detached) * logprob + eta * (G - v)^2 - beta * entropy

so gradient descent raises the log-probability of advantaged actions,
regresses the value head toward the 1-step target, and rewards policy
entropy. The advantage coefficient uses a detached value: the policy term
does not push gradients through the critic.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import AdamState, Node, ParameterStore, Tape


@dataclass
class Transition:
    logprob: Node
    value: Node
    reward: float
    entropy: Node
    next_value: float = 0.0
    terminal: bool = False


@dataclass
class A2CConfig:
    gamma: float = 0.95
    eta: float = 1.0
    beta_entropy: float = 1.0
    lr: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.eta < 0 or self.beta_entropy < 0 or self.lr <= 0:
            raise ValueError("eta and beta_entropy must be >= 0, lr > 0")


def one_step_return(tr: Transition, gamma: float) -> float:
    """G = r + gamma * v(next state), with no bootstrap past a terminal."""
    if tr.terminal:
        return tr.reward
    return tr.reward + gamma * tr.next_value


def a2c_loss(tr: Transition, G: float, cfg: A2CConfig, tape: Tape | None) -> Node:
    """Single-step loss; G must come from the same gamma as cfg.

    Fused into one tape node: the three terms only touch the transition's
    logprob, value, and entropy scalars directly.
    """
    logprob, value, entropy = tr.logprob, tr.value, tr.entropy
    advantage = G - float(value.value)
    eta, beta = cfg.eta, cfg.beta_entropy
    loss_value = (-advantage * float(logprob.value)
                  + eta * advantage * advantage
                  - beta * float(entropy.value))

    def factory(node):
        def bwd(g):
            if logprob.track:
                ad._add_grad(logprob, -advantage * g)
            if value.track:
                ad._add_grad(value, -2.0 * eta * advantage * g)
            if entropy.track:
                ad._add_grad(entropy, -beta * g)
        return bwd

    return ad._emit(tape, loss_value, factory)


def episode_loss(
    transitions: list[Transition], cfg: A2CConfig, tape: Tape | None
) -> tuple[Node, float, float]:
    """Summed per-step loss for one episode, plus mean loss/advantage values."""
    if not transitions:
        raise ValueError("episode has no transitions")
    losses = []
    adv_total = 0.0
    for tr in transitions:
        G = one_step_return(tr, cfg.gamma)
        adv_total += G - float(tr.value.value)
        losses.append(a2c_loss(tr, G, cfg, tape))
    total = ad.add_n(losses, tape)
    n = len(transitions)
    return total, float(total.value) / n, adv_total / n


def update_episode(
    transitions: list[Transition],
    tape: Tape,
    params: ParameterStore,
    adam: AdamState,
    cfg: A2CConfig,
) -> tuple[float, float]:
    """One combined gradient step for a whole episode recorded on one tape."""
    total, mean_loss, mean_adv = episode_loss(transitions, cfg, tape)
    ad.backward(tape, total)
    ad.adam_step(params, adam, cfg.lr)
    return mean_loss, mean_adv
