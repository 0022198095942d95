"""Linear-softmax classifier head on the readout vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class HeadParams:
    W: np.ndarray  # (M, D_out)
    b: np.ndarray  # (M,)

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent head shapes W{self.W.shape}, b{self.b.shape}")

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def D_out(self) -> int:
        return self.W.shape[1]

    @property
    def size(self) -> int:
        return self.W.size + self.b.size

    def copy(self) -> "HeadParams":
        return HeadParams(self.W.copy(), self.b.copy())


def init_head(D_out: int, M: int, rng: np.random.Generator) -> HeadParams:
    """Fan-in uniform initialisation: every entry i.i.d. ``Unif(-D_out**-0.5, D_out**-0.5)``."""
    if D_out < 1 or M < 2:
        raise ValueError(f"need D_out >= 1 and M >= 2, got D_out={D_out}, M={M}")
    a = 1.0 / np.sqrt(D_out)
    W = rng.uniform(-a, a, size=(M, D_out))
    b = rng.uniform(-a, a, size=M)
    return HeadParams(W, b)


def _check(p: np.ndarray, head: HeadParams) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != head.D_out:
        raise ValueError(f"readout has length {p.shape[-1]}, head expects {head.D_out}")
    return p


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def head_forward(p: np.ndarray, head: HeadParams) -> np.ndarray:
    """Class probabilities ``softmax(W p + b)`` for one readout or a batch."""
    p = _check(p, head)
    return softmax(p @ head.W.T + head.b)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(q: np.ndarray, c) -> np.ndarray | float:
    """``-ln q_c``; ``c`` is a 0-based class index (or array of them)."""
    q = np.asarray(q, dtype=float)
    c = np.asarray(c)
    out = -np.log(np.take_along_axis(np.atleast_2d(q), np.atleast_1d(c)[:, None], axis=-1)[:, 0])
    return float(out[0]) if q.ndim == 1 else out


def head_loss(p: np.ndarray, head: HeadParams, c) -> np.ndarray | float:
    """Cross-entropy computed from logits (log-sum-exp, no ``log(q)`` round trip)."""
    p = _check(p, head)
    ls = log_softmax(np.atleast_2d(p) @ head.W.T + head.b)
    out = -np.take_along_axis(ls, np.atleast_1d(c)[:, None], axis=-1)[:, 0]
    return float(out[0]) if p.ndim == 1 else out


def head_gradient(p: np.ndarray, head: HeadParams, c):
    """Gradients of ``-ln q_c`` with respect to ``W``, ``b`` and ``p``.

    Batched input gives per-sample gradients with a leading batch axis.
    """
    p = _check(p, head)
    q = head_forward(p, head)
    r = q.copy()
    if p.ndim == 1:
        r[int(c)] -= 1.0
        return np.outer(r, p), r, head.W.T @ r
    c = np.asarray(c)
    r[np.arange(len(c)), c] -= 1.0
    return r[:, :, None] * p[:, None, :], r, r @ head.W
