"""Minimal reverse-mode differentiation on numpy vectors and matrices.

Ops record nodes on a Tape in execution order; since every node is created
after its inputs, the insertion order is topological and the backward pass
is a single reverse sweep. Parameters live outside tapes in a ParameterStore
and accumulate gradients across the sweep (so reusing a weight at every step
of a recurrent chain yields full backpropagation through time).

Passing tape=None runs any op in inference mode: values are computed but
nothing is recorded and no gradients can flow.
"""

from __future__ import annotations

import struct

import numpy as np
from scipy.special import digamma, expit, gammaln, zeta


class Node:
    __slots__ = ("value", "grad", "track", "bwd")

    def __init__(self, value, track=False, bwd=None):
        self.value = value
        self.grad = None
        self.track = track
        self.bwd = bwd


class Tape:
    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[Node] = []

    def _record(self, node: Node):
        self.nodes.append(node)


def constant(value) -> Node:
    """Wrap a plain value; never receives gradient."""
    return Node(np.asarray(value, dtype=float))


def _add_grad(node: Node, g):
    # copy on first write: g may alias a buffer shared with another node
    if node.grad is None:
        node.grad = np.array(g, dtype=float) if isinstance(g, np.ndarray) else g
    elif isinstance(node.grad, np.ndarray):
        node.grad += g
    else:
        node.grad = node.grad + g


def _emit(tape: Tape | None, value, bwd_factory) -> Node:
    if tape is None:
        return Node(value)
    node = Node(value, track=True)
    node.bwd = bwd_factory(node)
    tape.nodes.append(node)
    return node


def linear(x: Node, w: Node, b: Node, tape: Tape | None) -> Node:
    """y = W x + b."""
    y = w.value @ x.value + b.value

    def factory(node):
        def bwd(g):
            if w.track:
                w.grad += np.outer(g, x.value)
            if b.track:
                b.grad += g
            if x.track:
                _add_grad(x, w.value.T @ g)
        return bwd

    return _emit(tape, y, factory)


def relu(x: Node, tape: Tape | None) -> Node:
    y = np.maximum(x.value, 0.0)

    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, g * (x.value > 0.0))
        return bwd

    return _emit(tape, y, factory)


def softmax(x: Node, tape: Tape | None) -> Node:
    z = x.value - x.value.max()
    e = np.exp(z)
    p = e / e.sum()

    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, p * (g - g @ p))
        return bwd

    return _emit(tape, p, factory)


def elman_cell(
    x: Node, h: Node,
    w_ih: Node, b_ih: Node, w_hh: Node, b_hh: Node,
    tape: Tape | None,
) -> Node:
    """h' = relu(W_ih x + b_ih + W_hh h + b_hh), fused for the hot path."""
    pre = w_ih.value @ x.value + b_ih.value + w_hh.value @ h.value + b_hh.value
    out = np.maximum(pre, 0.0)

    def factory(node):
        def bwd(g):
            gp = g * (pre > 0.0)
            if w_ih.track:
                w_ih.grad += np.outer(gp, x.value)
            if b_ih.track:
                b_ih.grad += gp
            if w_hh.track:
                w_hh.grad += np.outer(gp, h.value)
            if b_hh.track:
                b_hh.grad += gp
            if x.track:
                _add_grad(x, w_ih.value.T @ gp)
            if h.track:
                _add_grad(h, w_hh.value.T @ gp)
        return bwd

    return _emit(tape, out, factory)


def index(x: Node, i: int, tape: Tape | None) -> Node:
    """Differentiable scalar extraction x[i]."""
    y = float(x.value[i])

    def factory(node):
        def bwd(g):
            if x.track:
                gx = np.zeros_like(x.value)
                gx[i] = g
                _add_grad(x, gx)
        return bwd

    return _emit(tape, y, factory)


def categorical_logprob_entropy(
    probs: Node, idx: int, tape: Tape | None
) -> tuple[Node, Node]:
    """log p[idx] and the entropy of the whole distribution, both differentiable."""
    p = probs.value
    if not 0 <= idx < p.shape[0]:
        raise IndexError(f"action index {idx} out of range for {p.shape[0]} actions")
    logp = np.log(np.maximum(p, 1e-300))

    def lp_factory(node):
        def bwd(g):
            if probs.track:
                gx = np.zeros_like(p)
                gx[idx] = g / p[idx]
                _add_grad(probs, gx)
        return bwd

    def ent_factory(node):
        def bwd(g):
            if probs.track:
                _add_grad(probs, -g * (logp + 1.0))
        return bwd

    lp_node = _emit(tape, float(logp[idx]), lp_factory)
    ent_node = _emit(tape, float(-(p * logp).sum()), ent_factory)
    return lp_node, ent_node


def softplus(x: Node, tape: Tape | None) -> Node:
    """log(1 + exp(x)), overflow-safe; derivative is the logistic sigmoid."""
    y = np.logaddexp(0.0, x.value)

    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, g * expit(x.value))
        return bwd

    return _emit(tape, y, factory)


X_EPS = 1e-6


def beta_logprob(alpha, beta, x, tape: Tape | None) -> Node:
    """Elementwise Beta log-density at x, differentiable in alpha and beta.

    x is data (a sample), clamped into [X_EPS, 1 - X_EPS); values outside
    [0, 1] are rejected. Gradients with respect to x are not propagated:
    sampling is credited through the log-density alone (score function).
    """
    a_node = alpha if isinstance(alpha, Node) else constant(alpha)
    b_node = beta if isinstance(beta, Node) else constant(beta)
    a = np.atleast_1d(np.asarray(a_node.value, dtype=float))
    b = np.atleast_1d(np.asarray(b_node.value, dtype=float))
    if a.min() <= 0 or b.min() <= 0:
        raise ValueError("beta concentration parameters must be positive")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if xv.min() < 0.0 or xv.max() > 1.0:
        raise ValueError("beta sample outside [0, 1]")
    xv = np.clip(xv, X_EPS, 1.0 - X_EPS)
    log_x = np.log(xv)
    log_1mx = np.log1p(-xv)
    ln_beta_fn = gammaln(a) + gammaln(b) - gammaln(a + b)
    val = (a - 1.0) * log_x + (b - 1.0) * log_1mx - ln_beta_fn

    def factory(node):
        def bwd(g):
            dig_ab = digamma(a + b)
            if a_node.track:
                _add_grad(a_node, g * (log_x - digamma(a) + dig_ab))
            if b_node.track:
                _add_grad(b_node, g * (log_1mx - digamma(b) + dig_ab))
        return bwd

    return _emit(tape, val, factory)


def beta_entropy(alpha, beta, tape: Tape | None) -> Node:
    """Elementwise differential entropy of Beta(alpha, beta)."""
    a_node = alpha if isinstance(alpha, Node) else constant(alpha)
    b_node = beta if isinstance(beta, Node) else constant(beta)
    a = np.atleast_1d(np.asarray(a_node.value, dtype=float))
    b = np.atleast_1d(np.asarray(b_node.value, dtype=float))
    if a.min() <= 0 or b.min() <= 0:
        raise ValueError("beta concentration parameters must be positive")
    ln_beta_fn = gammaln(a) + gammaln(b) - gammaln(a + b)
    val = (ln_beta_fn
           - (a - 1.0) * digamma(a)
           - (b - 1.0) * digamma(b)
           + (a + b - 2.0) * digamma(a + b))

    def factory(node):
        def bwd(g):
            # trigamma(x) = zeta(2, x)
            common = (a + b - 2.0) * zeta(2, a + b)
            if a_node.track:
                _add_grad(a_node, g * (common - (a - 1.0) * zeta(2, a)))
            if b_node.track:
                _add_grad(b_node, g * (common - (b - 1.0) * zeta(2, b)))
        return bwd

    return _emit(tape, val, factory)


def beta_sample(alpha, beta, rng: np.random.Generator):
    """Draw from Beta(alpha, beta) via the two-gamma ratio, clamped to (0, 1)."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    if a.min() <= 0 or b.min() <= 0:
        raise ValueError("beta concentration parameters must be positive")
    g1 = rng.standard_gamma(a)
    g2 = rng.standard_gamma(b)
    return np.minimum(np.maximum(g1 / (g1 + g2), X_EPS), 1.0 - X_EPS)


def add(a: Node, b: Node, tape: Tape | None) -> Node:
    def factory(node):
        def bwd(g):
            if a.track:
                _add_grad(a, g)
            if b.track:
                _add_grad(b, g)
        return bwd

    return _emit(tape, a.value + b.value, factory)


def add_n(nodes: list[Node], tape: Tape | None) -> Node:
    def factory(node):
        def bwd(g):
            for n in nodes:
                if n.track:
                    _add_grad(n, g)
        return bwd

    return _emit(tape, sum(n.value for n in nodes), factory)


def scale(x: Node, c: float, tape: Tape | None) -> Node:
    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, g * c)
        return bwd

    return _emit(tape, x.value * c, factory)


def add_const(x: Node, c: float, tape: Tape | None) -> Node:
    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, g)
        return bwd

    return _emit(tape, x.value + c, factory)


def square(x: Node, tape: Tape | None) -> Node:
    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, g * 2.0 * x.value)
        return bwd

    return _emit(tape, x.value * x.value, factory)


def vsum(x: Node, tape: Tape | None) -> Node:
    """Sum of a vector node's components, as a scalar node."""
    y = float(np.sum(x.value))

    def factory(node):
        def bwd(g):
            if x.track:
                _add_grad(x, np.full_like(x.value, g))
        return bwd

    return _emit(tape, y, factory)


def backward(tape: Tape, loss: Node) -> None:
    """Reverse sweep from loss; gradients accumulate into parameter buffers.

    Tape-node gradients are transient scratch for one sweep, so calling
    backward again adds exactly one more gradient unit to the parameters.
    """
    try:
        on_tape = tape.nodes[-1] is loss or loss in tape.nodes
    except IndexError:
        on_tape = False
    if not on_tape:
        raise ValueError("loss node was not recorded on this tape")
    for node in tape.nodes:
        node.grad = None
    loss.grad = (1.0 if not isinstance(loss.value, np.ndarray)
                 else np.ones_like(loss.value))
    for node in reversed(tape.nodes):
        if node.grad is not None and node.bwd is not None:
            node.bwd(node.grad)


class ParameterStore:
    """Named trainable tensors with persistent gradient buffers."""

    def __init__(self):
        self._params: dict[str, Node] = {}

    def add(self, name: str, value: np.ndarray) -> Node:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        node = Node(np.array(value, dtype=float), track=True)
        node.grad = np.zeros_like(node.value)
        self._params[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def flatten_values(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self._params.values()])


def uniform_init(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Weights uniform in +-sqrt(1/fan_in); fan-in is the last dimension."""
    bound = np.sqrt(1.0 / shape[-1])
    return rng.uniform(-bound, bound, shape)


class AdamState:
    """First/second moment buffers and step counter for one ParameterStore."""

    def __init__(self, store: ParameterStore,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.value) for name, p in store.items()}


def adam_step(store: ParameterStore, adam: AdamState, lr: float) -> None:
    """One bias-corrected Adam update from the accumulated gradients.

    Gradient buffers are zeroed afterwards.
    """
    adam.step += 1
    c1 = 1.0 - adam.beta1 ** adam.step
    c2 = 1.0 - adam.beta2 ** adam.step
    for name, p in store.items():
        g = p.grad
        m = adam.m[name]
        v = adam.v[name]
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)
    store.zero_grad()


_MAGIC = b"EVACPAR1"


def save_parameters(store: ParameterStore, path) -> None:
    """Write all tensors as named little-endian float64 payloads."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(store.names())))
        for name, p in store.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", p.value.ndim))
            for d in p.value.shape:
                fh.write(struct.pack("<I", d))
            fh.write(p.value.astype("<f8").tobytes())


def load_parameters(store: ParameterStore, path) -> None:
    """Load tensors saved by save_parameters into matching parameters."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint")
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n_items), dtype="<f8").reshape(shape)
            if name not in store:
                raise ValueError(f"{path}: unknown parameter {name!r}")
            p = store[name]
            if p.value.shape != shape:
                raise ValueError(f"{path}: shape mismatch for {name!r}")
            p.value[...] = data
