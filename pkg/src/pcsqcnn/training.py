"""Exact-readout gradients, Adam and the training loop.

Gradients are reverse-mode.  The readout ``p_z = sum |psi_{z,c}|^2 / N^2``
turns the head gradient ``dL/dp`` into an adjoint state
``lam = (dL/dp_z) psi / N^2`` (so that ``dL = 2 Re <lam, dpsi>``), which is
pulled back through the linear steps with their adjoints.  At a multiplexer
block ``V = exp(iA)`` the coefficient derivative is
``dL/dtheta_a = 2 Re tr(dV[P_a] E^T)`` with ``E = sum conj(lam_out) psi_in^T``;
the Frechet derivative ``dV`` comes from the eigendecomposition of ``A``
(divided differences of ``exp(i .)`` on the spectrum).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .encoding import EncoderConfig, encode_frqi
from .head import HeadParams, head_forward, head_gradient, head_loss
from .layers import (
    LayerStack,
    _canonical,
    _mux_apply,
    adjoint_step,
    block_shape,
    expi_divided_differences,
    pauli_strings,
    run_steps,
)
from .readout import _readout_order, exact_readout
from .state import StateTensor, condition_names

log = logging.getLogger(__name__)

CHUNK = 64


def _adjoint_from_readout(final: StateTensor, g: np.ndarray) -> StateTensor:
    st = final.transpose(_readout_order(final))
    nx, ny, nf = st.size("x"), st.size("y"), st.size("f")
    lead = (g.shape[0],) if final.batched else ()
    ncond = st.amplitudes.ndim - len(lead) - 3
    gg = g.reshape(lead + (nx, ny, nf) + (1,) * ncond)
    lam = st.replace(gg * st.amplitudes / final.norm_target)
    return lam.transpose(final.axes)


def _block_gradient(psi_in: StateTensor, lam_out: StateTensor, layer: int, w, v, n_f: int, per_sample: bool):
    cond = condition_names(layer - 1) if layer >= 2 else None
    psi, _ = _canonical(psi_in, cond)
    lam, _ = _canonical(lam_out, cond)
    # E[b, m, x, y, f, g] = sum_r conj(lam_f) psi_g
    E = np.conj(np.swapaxes(lam, -1, -2)) @ psi
    if not per_sample:
        E = E.sum(axis=0)
    vh = np.conj(np.swapaxes(v, -1, -2))
    phi = expi_divided_differences(w)
    Et = np.swapaxes(E, -1, -2)
    gamma = v @ (phi * (vh @ Et @ v)) @ vh
    P = pauli_strings(n_f)
    # 2 Re tr(gamma P_a)
    return 2.0 * np.real(np.einsum("...fg,agf->...a", gamma, P, optimize=True))


def quantum_backward(stack: LayerStack, encoded: StateTensor, g: np.ndarray, per_sample: bool = False):
    """Pull a readout cotangent ``g`` (shape ``(B, D_out)``) back to the Pauli coefficients.

    Returns ``(readout, grads)`` where ``grads[l-1]`` matches ``params.theta[l-1]``
    (with a leading batch axis when ``per_sample``).
    """
    final, tape = run_steps(stack, encoded, record=True)
    p = exact_readout(final)
    lam = _adjoint_from_readout(final, g)
    grads: list = [None] * stack.layout.Q
    n_f = stack.layout.n_f
    for step in reversed(stack.steps()):
        if step[0] == "mux":
            layer, psi_in, V, w, v = tape.pop()
            grads[layer - 1] = _block_gradient(psi_in, lam, layer, w, v, n_f, per_sample)
            lam = _mux_apply(lam, layer, np.conj(np.swapaxes(V, -1, -2)))
        else:
            lam = adjoint_step(step, lam)
    return p, grads


def readout_probs(stack: LayerStack, encoded: StateTensor) -> np.ndarray:
    return exact_readout(run_steps(stack, encoded))


def loss_and_grad(stack: LayerStack, head: HeadParams, encoded: StateTensor, labels, per_sample: bool = False):
    """Cross-entropy and its gradients for a batch.

    Without ``per_sample`` the loss is the batch mean and gradients are of
    that mean.  With ``per_sample`` every returned quantity carries a
    leading batch axis and refers to the single-sample loss.
    """
    labels = np.asarray(labels)
    if not encoded.batched:
        raise ValueError("loss_and_grad expects a batched encoded state")
    B = labels.shape[0]
    final = run_steps(stack, encoded)
    p = exact_readout(final)
    dW, db, dp = head_gradient(p, head, labels)
    losses = head_loss(p, head, labels)
    scale = 1.0 if per_sample else 1.0 / B
    _, dtheta = quantum_backward(stack, encoded, dp * scale, per_sample=per_sample)
    if per_sample:
        return losses, dtheta, dW, db
    return float(losses.mean()), dtheta, dW.mean(axis=0), db.mean(axis=0)


def grad_quantum(stack: LayerStack, head: HeadParams, encoded: StateTensor, label: int) -> np.ndarray:
    """Full flat gradient ``(theta..., W, b)`` of one sample's loss."""
    if not encoded.batched:
        encoded = encoded.replace(encoded.amplitudes[None], ("batch",) + encoded.axes)
    _, dtheta, dW, db = loss_and_grad(stack, head, encoded, [label])
    return np.concatenate([t.ravel() for t in dtheta] + [dW.ravel(), db.ravel()])


def gradient_masks(layout, n_classes: int) -> dict[str, np.ndarray]:
    """Boolean masks over the flat gradient vector."""
    sizes = [int(np.prod(block_shape(layout, l))) for l in range(1, layout.Q + 1)]
    PQ = sum(sizes)
    total = PQ + n_classes * layout.D_out + n_classes
    masks = {}
    m = np.zeros(total, bool)
    m[:PQ] = True
    masks["quantum"] = m
    m = np.zeros(total, bool)
    m[: sizes[0]] = True
    masks["first"] = m
    m = np.zeros(total, bool)
    m[PQ - sizes[-1]: PQ] = True
    masks["last"] = m
    m = np.zeros(total, bool)
    m[PQ:] = True
    masks["head"] = m
    return masks


# ----------------------------------------------------------------------------
# optimisation


class Adam:
    """Adam over a list of arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], lr=3e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    lr: float = 3e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 256
    eval_batch_size: int = 1600
    eval_every: int = 10
    seed: int = 0
    threads: int = 1
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ValueError("batch sizes must be positive")


def encode_images(images: np.ndarray, enc: EncoderConfig) -> StateTensor:
    return encode_frqi(np.asarray(images, dtype=float), enc)


def _slice(encoded: StateTensor, idx) -> StateTensor:
    return encoded.replace(encoded.amplitudes[idx])


def _chunks(n: int, size: int = CHUNK):
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def batch_loss_and_grad(stack, head, encoded: StateTensor, labels, threads: int = 1):
    """Mean loss and gradients, reduced over fixed-size chunks in a fixed order.

    Chunk boundaries do not depend on ``threads``, so results are identical
    for any thread count.
    """
    labels = np.asarray(labels)
    B = labels.shape[0]
    parts = _chunks(B)

    def work(sl):
        loss, dth, dW, db = loss_and_grad(stack, head, _slice(encoded, sl), labels[sl])
        w = (sl.stop - sl.start) / B
        return loss * w, [t * w for t in dth], dW * w, db * w

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, parts))
    else:
        results = [work(sl) for sl in parts]
    loss, dth, dW, db = results[0]
    dth = [t.copy() for t in dth]
    for r in results[1:]:
        loss += r[0]
        for a, b in zip(dth, r[1]):
            a += b
        dW = dW + r[2]
        db = db + r[3]
    return loss, dth, dW, db


def predict_readout(stack: LayerStack, encoded: StateTensor, batch_size: int = 1600, threads: int = 1) -> np.ndarray:
    n = encoded.amplitudes.shape[0]
    parts = _chunks(n, batch_size)

    def work(sl):
        return readout_probs(stack, _slice(encoded, sl))

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return np.concatenate(list(ex.map(work, parts)))
    return np.concatenate([work(sl) for sl in parts])


def evaluate(stack, head, encoded: StateTensor, labels, batch_size: int = 1600, threads: int = 1) -> dict:
    P = predict_readout(stack, encoded, batch_size, threads)
    return evaluate_readouts(P, head, labels)


def evaluate_readouts(P: np.ndarray, head: HeadParams, labels) -> dict:
    labels = np.asarray(labels)
    loss = head_loss(P, head, labels)
    q = head_forward(P, head)
    return {"loss": float(np.mean(loss)), "accuracy": float(np.mean(q.argmax(axis=1) == labels))}


def train(
    stack: LayerStack,
    head: HeadParams,
    train_images: np.ndarray,
    train_labels,
    cfg: TrainConfig,
    test_images: np.ndarray | None = None,
    test_labels=None,
    callback=None,
):
    """Minibatch Adam on the exact-readout cross-entropy.

    Parameters are updated in place on ``stack.params`` and ``head``; the
    same objects are returned with the history (list of metric rows).
    """
    train_labels = np.asarray(train_labels)
    n = train_labels.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    enc_train = encode_images(train_images, cfg.encoder)
    enc_test = encode_images(test_images, cfg.encoder) if test_images is not None else None
    params = list(stack.params.theta) + [head.W, head.b]
    opt = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    history: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rngmod.stream(cfg.seed, "shuffle", epoch).permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, dth, dW, db = batch_loss_and_grad(
                stack, head, _slice(enc_train, idx), train_labels[idx], cfg.threads
            )
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at epoch {epoch}, batch starting {start}; "
                    f"max |theta| = {max(np.abs(t).max() for t in stack.params.theta):.3g}, "
                    f"max |W| = {np.abs(head.W).max():.3g}"
                )
            opt.step(dth + [dW, db])
            running += loss * len(idx)
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            row = {"epoch": epoch, "split": "train", "batch_loss": running / n}
            row.update(evaluate(stack, head, enc_train, train_labels, cfg.eval_batch_size, cfg.threads))
            history.append(row)
            if enc_test is not None:
                row = {"epoch": epoch, "split": "test"}
                row.update(evaluate(stack, head, enc_test, test_labels, cfg.eval_batch_size, cfg.threads))
                history.append(row)
            log.info("epoch %d: %s", epoch, history[-1])
            if callback is not None:
                callback(epoch, history)
    return stack, head, history
