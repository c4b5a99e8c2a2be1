"""Shared test utilities: leaf nodes and an independent finite-difference oracle."""

from __future__ import annotations

import numpy as np

from evacc.autodiff import Node


def leaf(value) -> Node:
    """A trainable leaf node with a zeroed gradient buffer."""
    node = Node(np.array(value, dtype=float), track=True)
    node.grad = np.zeros_like(node.value)
    return node


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar-valued f() w.r.t. array x, in place."""
    grad = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f()
        flat_x[i] = orig - h
        fm = f()
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(1, |a|, |b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))


def beta_quadrature(f, n: int = 10_000) -> float:
    """Integrate f over (0, 1) with an endpoint-clustering substitution.

    x = u^2 (3 - 2u) maps midpoints of a uniform grid in u onto points that
    crowd both endpoints, which tames integrable boundary singularities such
    as Beta densities with concentration parameters below one.
    """
    u = (np.arange(n) + 0.5) / n
    x = u * u * (3.0 - 2.0 * u)
    w = 6.0 * u * (1.0 - u) / n
    return float(np.sum(f(x) * w))
