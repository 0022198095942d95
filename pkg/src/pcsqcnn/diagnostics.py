"""Parameter accounting, gradient diagnostics, bound checks and finite-shot probes."""

from __future__ import annotations

import numpy as np

from . import rng as rngmod
from .encoding import EncoderConfig, bilinear_resize, encode_frqi, offset_bounds, place_and_translate
from .head import HeadParams, head_gradient, head_loss, init_head
from .layers import LayerStack, MultiplexerParams, block_shape
from .readout import sample_shots_batch
from .state import RegisterLayout, build_layout
from .training import loss_and_grad, predict_readout, quantum_backward, readout_probs


def count_parameters(layout: RegisterLayout, n_classes: int | None = None) -> dict:
    """Quantum and head parameter counts, with the closed form as a cross-check."""
    M = layout.n_classes if n_classes is None else n_classes
    d = 2
    p_blk = 4**layout.n_f
    per_layer = [int(np.prod(block_shape(layout, l))) for l in range(1, layout.Q + 1)]
    PQ = p_blk * sum((1 if l == 1 else 2**d) * 2 ** (d * (layout.n_l + layout.Q - l)) for l in range(1, layout.Q + 1))
    if layout.Q >= 2:
        closed = p_blk * (
            2 ** (d * (layout.n_l + layout.Q - 1))
            + 2**d * 2 ** (d * layout.n_l) * (2 ** (d * (layout.Q - 1)) - 1) // (2**d - 1)
        )
    else:
        closed = p_blk * 2 ** (d * layout.n_l)
    if not (PQ == closed == sum(per_layer)):
        raise AssertionError(f"parameter count mismatch: sum={PQ}, closed={closed}, layers={per_layer}")
    head = M * layout.D_out + M
    return {
        "n_idx": layout.n_idx,
        "Q": layout.Q,
        "n_f": layout.n_f,
        "total_qubits": layout.n_tot,
        "readout_shape": layout.readout_shape,
        "D_out": layout.D_out,
        "quantum": PQ,
        "classifier": head,
        "total": PQ + head,
        "per_layer": per_layer,
        "p_blk": p_blk,
    }


def _flat_per_sample(dtheta: list[np.ndarray]) -> np.ndarray:
    B = dtheta[0].shape[0]
    return np.concatenate([t.reshape(B, -1) for t in dtheta], axis=1)


def per_sample_quantum_gradients(stack, head, images, labels, enc: EncoderConfig) -> np.ndarray:
    """``(N, P_Q)`` matrix of single-sample quantum gradients."""
    encoded = encode_frqi(np.asarray(images, dtype=float), enc)
    out = []
    for start in range(0, len(labels), 64):
        sl = slice(start, start + 64)
        sub = encoded.replace(encoded.amplitudes[sl])
        _, dth, _, _ = loss_and_grad(stack, head, sub, np.asarray(labels)[sl], per_sample=True)
        out.append(_flat_per_sample(dth))
    return np.concatenate(out)


def quantum_masks(layout: RegisterLayout) -> dict[str, np.ndarray]:
    sizes = [int(np.prod(block_shape(layout, l))) for l in range(1, layout.Q + 1)]
    PQ = sum(sizes)
    masks = {"all": np.ones(PQ, bool)}
    m = np.zeros(PQ, bool)
    m[: sizes[0]] = True
    masks["first"] = m
    m = np.zeros(PQ, bool)
    m[PQ - sizes[-1]:] = True
    masks["last"] = m
    return masks


def gradient_norms(G: np.ndarray, masks: dict[str, np.ndarray]) -> dict:
    """``||G_D||`` (norm of the mean gradient) and ``R_D`` (RMS per-sample norm) per mask."""
    if G.shape[0] == 0:
        raise ValueError("empty dataset")
    out = {}
    for name, m in masks.items():
        g = G[:, m]
        out[name] = {
            "G_D": float(np.linalg.norm(g.mean(axis=0))),
            "R_D": float(np.sqrt(np.mean(np.sum(g * g, axis=1)))),
        }
    return out


def empirical_gradient(stack, head, images, labels, enc: EncoderConfig | None = None) -> dict:
    enc = enc or EncoderConfig(n_f=stack.layout.n_f)
    if len(labels) == 0:
        raise ValueError("empty dataset")
    G = per_sample_quantum_gradients(stack, head, images, labels, enc)
    return gradient_norms(G, quantum_masks(stack.layout))


def readout_jacobian(stack: LayerStack, image: np.ndarray, enc: EncoderConfig) -> list[np.ndarray]:
    """``d p / d theta`` per layer, shaped ``(D_out, *theta_layer.shape)``."""
    D = stack.layout.D_out
    enc_state = encode_frqi(np.repeat(np.asarray(image, float)[None], D, axis=0), enc)
    _, grads = quantum_backward(stack, enc_state, np.eye(D), per_sample=True)
    return grads


def layer_energies(stack: LayerStack, image: np.ndarray, enc: EncoderConfig) -> list[float]:
    """Sum of squared readout sensitivities over every coordinate of each layer."""
    return [float(np.sum(J**2)) for J in readout_jacobian(stack, image, enc)]


def coordinate_bound(layout: RegisterLayout, M: int) -> float:
    """Right-hand side ``8 M Q / (3 * 2**(2 (n_l + Q - 1)))`` of the per-coordinate estimate."""
    return 8 * M * layout.Q / (3 * 2 ** (2 * (layout.n_l + layout.Q - 1)))


def check_sensitivity_bounds(layout: RegisterLayout, trials: int = 50, seed: int = 0, images=None) -> dict:
    """Layer-energy and aggregate gradient-energy bounds at random initialisations.

    Each trial draws quantum coefficients from ``Unif(0, 2 pi)``, a fan-in
    uniform head, a random image (unless ``images`` are given) and a label.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    M = layout.n_classes
    p_blk = 4**layout.n_f
    enc = EncoderConfig(n_f=layout.n_f)
    N = layout.N
    energies, gq2, head_margin = [], [], []
    for t in range(trials):
        stack = LayerStack(layout, MultiplexerParams.uniform(layout, seed, purpose=f"bounds-q-{t}"))
        head = init_head(layout.D_out, M, rngmod.stream(seed, "bounds-head", t))
        g = rngmod.stream(seed, "bounds-data", t)
        img = images[t % len(images)] if images is not None else g.random((N, N))
        label = int(g.integers(M))
        energies.append(layer_energies(stack, img, enc))
        enc_state = encode_frqi(img[None], enc)
        _, dth, _, _ = loss_and_grad(stack, head, enc_state, [label])
        gq2.append(float(sum(np.sum(d**2) for d in dth)))
        # softmax-head bound: ||W^T (q - e_c)||^2 <= 2 ||W||_op^2
        _, _, dp = head_gradient(readout_probs(stack, enc_state)[0], head, label)
        head_margin.append(2.0 * np.linalg.norm(head.W, 2) ** 2 - float(dp @ dp))
    energies = np.array(energies)
    gq2 = np.array(gq2)
    PQ = count_parameters(layout)["quantum"]
    agg_bound = 8 * M / 3 * p_blk * layout.Q
    mean = float(gq2.mean())
    sem = float(gq2.std(ddof=1) / np.sqrt(trials))
    return {
        "layout": (layout.n_idx, layout.Q, layout.n_f),
        "trials": trials,
        "layer_energy_max": float(energies.max()),
        "layer_energy_bound": 4.0 * p_blk,
        "layer_energy_ok": bool(np.all(energies <= 4.0 * p_blk)),
        "head_bound_ok": bool(min(head_margin) >= 0.0),
        "head_bound_min_margin": float(min(head_margin)),
        "mean_GQ2": mean,
        "sem_GQ2": sem,
        "GQ2_bound": agg_bound,
        "GQ2_ok": bool(mean - 3 * sem <= agg_bound),
        "GQ2_mean_below_bound": bool(mean <= agg_bound),
        "bound_constant": 8 * M * layout.Q / 3,
        "per_coordinate_mean": mean / PQ,
        "per_coordinate_bound": coordinate_bound(layout, M),
    }


# ----------------------------------------------------------------------------
# depth-family gradient diagnostics


def class_balanced_subset(labels, n: int, n_classes: int = 10) -> np.ndarray:
    """First ``n / n_classes`` indices of every class, in ascending order."""
    labels = np.asarray(labels)
    per = n // n_classes
    idx = []
    for c in range(n_classes):
        hits = np.flatnonzero(labels == c)[:per]
        if len(hits) < per:
            raise ValueError(f"class {c} has only {len(hits)} examples, need {per}")
        idx.append(hits)
    return np.sort(np.concatenate(idx))


def depth_family_inputs(images, Q: int, seed: int):
    """Resize to ``2**(Q-1)``, place on a ``2**Q`` canvas and shift by seeded fixed offsets."""
    patch, canvas = 2 ** (Q - 1), 2**Q
    lo, hi = offset_bounds(patch, canvas)
    g = rngmod.stream(seed, "diag-offsets", Q)
    offsets = g.integers(lo, hi, size=(len(images), 2), endpoint=True)
    small = bilinear_resize(np.asarray(images, float), patch, patch)
    out = np.stack([place_and_translate(s, canvas, tuple(o)) for s, o in zip(small, offsets)])
    return out, offsets


def depth_family_diagnostics(images, labels, Qs, n_f: int, inits: int, seed: int, n_classes: int = 10) -> list[dict]:
    """``||G_D||`` and ``R_D`` statistics over random initialisations for each depth (``n_l = 1``)."""
    rows = []
    enc = EncoderConfig(n_f=n_f)
    for Q in Qs:
        layout = build_layout(Q, Q, n_f, n_classes)
        x, offsets = depth_family_inputs(images, Q, seed)
        samples = {k: {"G_D": [], "R_D": []} for k in ("all", "first", "last")}
        for i in range(inits):
            stack = LayerStack(layout, MultiplexerParams.uniform(layout, seed, purpose=f"diag-q-{Q}-{i}"))
            head = init_head(layout.D_out, n_classes, rngmod.stream(seed, "diag-head", Q, i))
            norms = empirical_gradient(stack, head, x, labels, enc)
            for k, v in norms.items():
                samples[k]["G_D"].append(v["G_D"])
                samples[k]["R_D"].append(v["R_D"])
        for k, d in samples.items():
            for stat, vals in d.items():
                vals = np.array(vals)
                rows.append(
                    {
                        "Q": Q,
                        "mask": k,
                        "quantity": stat,
                        "mean": float(vals.mean()),
                        "p25": float(np.percentile(vals, 25)),
                        "p75": float(np.percentile(vals, 75)),
                        "offsets": offsets.tolist(),
                    }
                )
    return rows


# ----------------------------------------------------------------------------
# finite-shot probes


def loss_histogram(
    stack, head: HeadParams, images, labels, shots, batch_size: int, passes: int, seed: int,
    enc: EncoderConfig | None = None, readouts: np.ndarray | None = None,
) -> dict:
    """Batch-mean cross-entropies under shot-sampled readouts.

    Returns ``{n_shot: array (passes, n_batches)}`` plus ``"exact": (1, n_batches)``.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n % batch_size:
        raise ValueError(f"test set size {n} is not divisible by batch size {batch_size}")
    if readouts is not None:
        P = np.asarray(readouts, dtype=float)
    else:
        enc = enc or EncoderConfig(n_f=stack.layout.n_f)
        P = predict_readout(stack, encode_frqi(np.asarray(images, float), enc))
    nb = n // batch_size

    def batch_means(R):
        return head_loss(R, head, labels).reshape(nb, batch_size).mean(axis=1)

    out = {"exact": batch_means(P)[None]}
    for s in shots:
        rows = []
        for k in range(passes):
            R = sample_shots_batch(P, int(s), seed, f"hist-pass-{k}")
            rows.append(batch_means(R))
        out[int(s)] = np.array(rows)
    return out


def _top2(C: np.ndarray):
    w, v = np.linalg.eigh(C)
    w, v = w[::-1][:2], v[:, ::-1][:, :2]
    # deterministic sign: largest-magnitude component positive
    for j in range(2):
        i = np.argmax(np.abs(v[:, j]))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    return w, v


def landscape_probe(
    head: HeadParams, readouts: np.ndarray, labels, n_shot: int, grid: np.ndarray,
    eig_tol: float = 1e-14, min_valid: float = 0.10,
) -> dict:
    """Mean loss over the local shot-noise plane of each sample's readout.

    For every sample the two leading eigenpairs of
    ``(diag(p) - p p^T) / n_shot`` give directions ``u, v``; the readout is
    moved to ``p + a u + b v`` without renormalisation and counts only when
    it stays in the simplex (sum tolerance ``1e-5``).
    """
    grid = np.asarray(grid, dtype=float)
    if not np.allclose(grid, -grid[::-1]):
        raise ValueError("grid must be symmetric about 0")
    P = np.asarray(readouts, dtype=float)
    labels = np.asarray(labels)
    n = len(labels)
    dirs, keep = [], []
    for i, p in enumerate(P):
        C = (np.diag(p) - np.outer(p, p)) / n_shot
        w, v = _top2(C)
        if w[1] <= eig_tol * max(1.0, w[0]) or w[0] <= eig_tol:
            continue
        keep.append(i)
        dirs.append((np.sqrt(w[0]) * v[:, 0], np.sqrt(w[1]) * v[:, 1]))
    keep = np.array(keep, dtype=int)
    G = len(grid)
    L = np.full((G, G), np.nan)
    frac = np.zeros((G, G))
    if len(keep):
        U = np.stack([d[0] for d in dirs])
        V = np.stack([d[1] for d in dirs])
        base = P[keep]
        lab = labels[keep]
        for ia, a in enumerate(grid):
            for ib, b in enumerate(grid):
                q = base + a * U + b * V if (a or b) else base
                valid = np.all(q >= 0, axis=1) & (q.sum(axis=1) <= 1 + 1e-5)
                frac[ia, ib] = valid.sum() / n
                if valid.any():
                    L[ia, ib] = float(np.mean(head_loss(q[valid], head, lab[valid])))
    masked = np.where(frac < min_valid, np.nan, L)
    return {"loss": L, "loss_masked": masked, "valid_fraction": frac, "skipped": int(n - len(keep)), "grid": grid}
