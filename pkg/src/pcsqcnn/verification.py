"""Property battery behind ``pcsqcnn verify``.

Each ``check_*`` function returns a :class:`CheckResult`; ``run_all`` runs
the battery in a fixed order.  The functions take their tolerances as
arguments so tests can call them at the stated thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .diagnostics import check_sensitivity_bounds, count_parameters, landscape_probe
from .encoding import EncoderConfig, encode_frqi
from .head import HeadParams, head_loss, init_head
from .layers import (
    LayerStack,
    MultiplexerParams,
    _mux_apply,
    apply_fourier,
    g_rotation_product,
    junction_matrix,
    mux_blocks,
    _phase_gradient,
)
from .readout import readout_entropy, sample_shots_batch, total_variation
from .state import StateTensor, apply_operator, build_layout, condition_names
from .symmetry import build_pcs_unitary, check_pcs_equivariance, commutant_dimension, extract_blocks, qft, random_unitary
from .training import loss_and_grad, predict_readout


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        items = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {items}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


def layer_unitary(stack: LayerStack, layer: int, branch: int = 0) -> np.ndarray:
    """Dense matrix of one layer (basis change, multiplexer, inverse) on the active register.

    For layers after the first, ``branch = 2 b_x + b_y`` selects the
    classical condition on the most recent pooled pair.
    """
    M = 2 ** stack.layout.active_width(layer)
    D = stack.layout.D_f
    n = M * M * D
    basis = np.eye(n, dtype=complex).reshape(n, M, M, D)
    if layer >= 2:
        bx, by = divmod(branch, 2)
        amps = np.zeros((n, 2, 2, M, M, D), dtype=complex)
        amps[:, bx, by] = basis
        axes = ("batch",) + condition_names(layer - 1) + ("x", "y", "f")
    else:
        amps, axes = basis, ("batch", "x", "y", "f")
    st = StateTensor(amps, axes)
    if stack.basis == "fourier":
        st = apply_fourier(apply_fourier(st, "x"), "y")
    else:
        R = stack.rbc[layer - 1]
        st = apply_operator(apply_operator(st, R, "x"), R, "y")
    st = _mux_apply(st, layer, mux_blocks(stack.params, layer)[0])
    if stack.basis == "fourier":
        st = apply_fourier(apply_fourier(st, "x", True), "y", True)
    else:
        Rh = stack.rbc[layer - 1].conj().T
        st = apply_operator(apply_operator(st, Rh, "x"), Rh, "y")
    out = st.amplitudes if layer == 1 else st.amplitudes[:, bx, by]
    return out.reshape(n, n).T


# ----------------------------------------------------------------------------


def check_equivariance(draws: int = 20, tol: float = 1e-10, rbc_seeds: int = 100, rbc_floor: float = 1e-3,
                       rbc_fraction: float = 0.95, seed: int = 0) -> CheckResult:
    worst = 0.0
    count = 0
    for n_idx in (1, 2, 3):
        for Q in (1, 2):
            if Q > n_idx:
                continue
            for n_f in (1, 2):
                layout = build_layout(n_idx, Q, n_f)
                for d in range(draws):
                    params = MultiplexerParams.uniform(layout, seed, purpose=f"equiv-{n_idx}-{Q}-{n_f}-{d}")
                    stack = LayerStack(layout, params, mode="explicit")
                    for l in range(1, Q + 1):
                        M = 2 ** layout.active_width(l)
                        for m in range(layout.branches(l)):
                            U = layer_unitary(stack, l, m)
                            worst = max(worst, check_pcs_equivariance(U, (M, M), layout.D_f))
                            count += 1
    layout = build_layout(2, 1, 1)
    broken = 0
    for s in range(rbc_seeds):
        params = MultiplexerParams.uniform(layout, seed, purpose=f"equiv-rbc-{s}")
        stack = LayerStack(layout, params, mode="explicit", basis="random", rbc_seed=s)
        if check_pcs_equivariance(layer_unitary(stack, 1), (4, 4), 2) > rbc_floor:
            broken += 1
    frac = broken / rbc_seeds
    return CheckResult(
        "equivariance",
        worst <= tol and frac >= rbc_fraction,
        {"pcs_layers": count, "max_commutator": worst, "rbc_broken_fraction": frac},
    )


def check_commutant(tol: float = 1e-12, seed: int = 0) -> CheckResult:
    dim = commutant_dimension(4, 2)
    g = rngmod.stream(seed, "commutant")
    err = 0.0
    for dims in ((4,), (4, 4), (2, 8)):
        blocks = np.stack([random_unitary(2, g) for _ in range(int(np.prod(dims)))]).reshape(dims + (2, 2))
        U = build_pcs_unitary(blocks)
        err = max(err, float(np.abs(extract_blocks(U, dims, 2) - blocks).max()))
    return CheckResult("commutant", dim == 16 and err <= tol, {"null_dim": dim, "expected": 16, "roundtrip_err": err})


def check_junction(tol_matrix: float = 1e-12, tol_readout: float = 1e-10, draws: int = 10, seed: int = 0) -> CheckResult:
    kerr = serr = gerr = 0.0
    for N in (4, 8, 16):
        S = np.zeros((N, N), dtype=complex)
        for b in (0, 1):
            P = np.zeros((N // 2, N))
            P[np.arange(N // 2), 2 * np.arange(N // 2) + b] = 1.0
            K = junction_matrix(N, b)
            kerr = max(kerr, float(np.abs(K - qft(N // 2) @ P @ qft(N).conj().T).max()))
            S += K.conj().T @ K
        serr = max(serr, float(np.abs(S - np.eye(N)).max()))
        G = _phase_gradient(N)
        R = g_rotation_product(N)
        phase = G[0] / R[0]
        gerr = max(gerr, float(np.abs(G - phase * R).max()))
    rerr = 0.0
    g = rngmod.stream(seed, "junction-images")
    for n_idx, Q in ((2, 2), (3, 2), (3, 3)):
        for d in range(draws):
            n_f = 1 + d % 2
            layout = build_layout(n_idx, Q, n_f)
            params = MultiplexerParams.uniform(layout, seed, purpose=f"junction-{n_idx}-{Q}-{d}")
            enc = encode_frqi(g.random((3, 2**n_idx, 2**n_idx)), EncoderConfig(n_f=n_f))
            a = predict_readout(LayerStack(layout, params, "reduced"), enc)
            b = predict_readout(LayerStack(layout, params, "explicit"), enc)
            rerr = max(rerr, float(np.abs(a - b).max()))
    ok = max(kerr, serr, gerr) <= tol_matrix and rerr <= tol_readout
    return CheckResult("junction", ok, {"K_err": kerr, "completeness_err": serr, "G_err": gerr, "readout_err": rerr})


# ----------------------------------------------------------------------------


def _flat_loss_grad(stack, head, enc, labels):
    loss, dth, dW, db = loss_and_grad(stack, head, enc, labels)
    return loss, np.concatenate([t.ravel() for t in dth] + [dW.ravel(), db.ravel()])


def _loss_at(layout, mode, basis, flat, PQ, head_shape, enc, labels):
    M, D = head_shape
    stack = LayerStack(layout, MultiplexerParams.from_flat(layout, flat[:PQ]), mode, basis)
    W = flat[PQ:PQ + M * D].reshape(M, D)
    b = flat[PQ + M * D:]
    return loss_and_grad(stack, HeadParams(W, b), enc, labels)[0]


FD_FLOOR = 1e-8
# Relative errors are only meaningful above the central-difference roundoff
# eps * |L| / h; below it the denominator is lifted to roundoff / FD_NOISE_REL.
FD_NOISE_REL = 1e-6


def gradient_fd_errors(layout, params, head, images, labels, coords: int, rng: np.random.Generator,
                       h: float = 1e-5, mode: str = "reduced", basis: str = "fourier", include: np.ndarray | None = None):
    """Relative errors ``|g - fd| / max(|g|, |fd|, floor)`` on randomly chosen coordinates.

    The floor only matters for coordinates whose exact derivative vanishes
    or is tiny. The central difference then returns roundoff of order
    ``eps * |L| / h``, so the floor is that roundoff divided by
    ``FD_NOISE_REL`` (and never below ``FD_FLOOR``). Such coordinates are in
    effect held to an absolute error at the roundoff level.
    """
    enc = encode_frqi(np.asarray(images, float), EncoderConfig(n_f=layout.n_f))
    stack = LayerStack(layout, params, mode, basis)
    _, grad = _flat_loss_grad(stack, head, enc, labels)
    PQ = params.size
    base = np.concatenate([params.flatten(), head.W.ravel(), head.b.ravel()])
    pick = rng.choice(base.size, coords, replace=False)
    if include is not None:
        pick = np.unique(np.concatenate([include, pick]))
    errs = []
    for i in pick:
        vals = []
        for s in (1.0, -1.0):
            x = base.copy()
            x[i] += s * h
            vals.append(_loss_at(layout, mode, basis, x, PQ, head.W.shape, enc, labels))
        fd = (vals[0] - vals[1]) / (2 * h)
        roundoff = np.finfo(float).eps * max(abs(vals[0]), abs(vals[1])) / h
        floor = max(FD_FLOOR, roundoff / FD_NOISE_REL)
        errs.append(abs(grad[i] - fd) / max(abs(grad[i]), abs(fd), floor))
    return np.array(errs), pick


def degenerate_params(layout) -> MultiplexerParams:
    """All first-layer generators equal to the identity, so every block spectrum is degenerate."""
    params = MultiplexerParams.zeros(layout)
    params.theta[0][..., 0] = 1.0
    return params


def check_gradients(instances: int = 10, coords: int = 20, tol: float = 1e-6, seed: int = 0) -> CheckResult:
    g = rngmod.stream(seed, "fd-check")
    worst = 0.0
    total = 0
    shapes = [(Q, n_f) for Q in (1, 2) for n_f in (1, 2)]
    for i in range(instances):
        degenerate = i == instances - 1
        Q, n_f = (2, 1) if degenerate else shapes[i % len(shapes)]
        layout = build_layout(2, Q, n_f)
        if degenerate:
            params = degenerate_params(layout)
            params.theta[1][:] = g.uniform(0, 2 * np.pi, params.theta[1].shape)
        else:
            params = MultiplexerParams.uniform(layout, seed, purpose=f"fd-{i}")
        head = init_head(layout.D_out, 10, g)
        images = g.random((3, 4, 4))
        labels = g.integers(10, size=3)
        errs, _ = gradient_fd_errors(layout, params, head, images, labels, coords, g)
        worst = max(worst, float(errs.max()))
        total += errs.size
    return CheckResult("gradients", worst <= tol, {"instances": instances, "coordinates": total, "max_rel_err": worst})


# ----------------------------------------------------------------------------

ACCOUNTING_ROWS = (
    # (label, n_idx, Q, n_f, quantum, classifier)
    ("canvas32 Q=1 n_f=1", 5, 1, 1, 4096, 20490),
    ("canvas32 Q=3 n_f=3", 5, 3, 3, 147456, 5130),
    ("direct16 Q=1 n_f=3", 4, 1, 3, 16384, 20490),
    ("canvas32 Q=3 n_f=2", 5, 3, 2, 36864, 2570),
)


def check_accounting() -> CheckResult:
    detail = {}
    ok = True
    for label, n_idx, Q, n_f, pq, hd in ACCOUNTING_ROWS:
        c = count_parameters(build_layout(n_idx, Q, n_f))
        good = c["quantum"] == pq and c["classifier"] == hd
        ok &= good
        detail[label] = f"{c['quantum']}+{c['classifier']}={c['total']}"
    return CheckResult("accounting", ok, detail)


def check_bounds(trials: int = 50, seed: int = 0) -> CheckResult:
    ok = True
    detail = {}
    for Q in (1, 2):
        for n_f in (1, 2):
            rep = check_sensitivity_bounds(build_layout(2, Q, n_f), trials=trials, seed=seed)
            good = rep["layer_energy_ok"] and rep["head_bound_ok"] and rep["GQ2_mean_below_bound"]
            ok &= good
            detail[f"Q{Q}nf{n_f}"] = (
                f"E={rep['layer_energy_max']:.3g}/{rep['layer_energy_bound']:.0f} "
                f"G2={rep['mean_GQ2']:.3g}/{rep['GQ2_bound']:.4g} "
                f"coord={rep['per_coordinate_mean']:.3g}/{rep['per_coordinate_bound']:.3g} "
                f"const={rep['bound_constant']:.4g}"
            )
    return CheckResult("bounds", ok, detail)


def check_shots(passes: int = 100, ratio_floor: float = 1.8, seed: int = 0) -> CheckResult:
    layout = build_layout(3, 2, 1)
    stack = LayerStack(layout, MultiplexerParams.uniform(layout, seed, purpose="shots-model"))
    head = init_head(layout.D_out, 10, rngmod.stream(seed, "shots-head"))
    g = rngmod.stream(seed, "shots-data")
    images = g.random((20, 8, 8))
    labels = g.integers(10, size=20)
    P = predict_readout(stack, encode_frqi(images, EncoderConfig(n_f=1)))
    sums_ok = grid_ok = entropy_ok = True
    med = {}
    for n in (128, 512):
        tv = []
        for k in range(passes):
            R = sample_shots_batch(P, n, seed, f"shots-pass-{k}")
            sums_ok &= bool(np.allclose(R.sum(axis=1), 1.0, atol=1e-12))
            grid_ok &= bool(np.allclose(R * n, np.rint(R * n), atol=1e-9))
            H = readout_entropy(R)
            entropy_ok &= bool(np.all(H <= min(np.log2(layout.D_out), np.log2(n)) + 1e-12))
            tv.append(total_variation(R, P))
        med[n] = float(np.median(tv))
    ratio = med[128] / med[512]
    grid = np.linspace(-2, 2, 5)
    probe = landscape_probe(head, P, labels, 128, grid)
    exact = float(np.mean(head_loss(P, head, labels)))
    centre = probe["loss"][2, 2]
    cerr = abs(centre - exact)
    ok = sums_ok and grid_ok and entropy_ok and ratio >= ratio_floor and cerr <= 1e-12 and probe["valid_fraction"][2, 2] == 1.0
    return CheckResult(
        "finite-shot",
        ok,
        {"sums": sums_ok, "multiples": grid_ok, "entropy": entropy_ok, "tv_ratio": ratio, "centre_err": cerr},
    )


def run_all(seed: int = 0, quick: bool = False) -> list[CheckResult]:
    draws = 4 if quick else 20
    return [
        check_equivariance(draws=draws, seed=seed),
        check_commutant(seed=seed),
        check_junction(draws=3 if quick else 10, seed=seed),
        check_gradients(instances=4 if quick else 10, coords=8 if quick else 20, seed=seed),
        check_accounting(),
        check_bounds(trials=10 if quick else 50, seed=seed),
        check_shots(passes=30 if quick else 100, seed=seed),
    ]


__all__ = [
    "CheckResult",
    "layer_unitary",
    "check_equivariance",
    "check_commutant",
    "check_junction",
    "check_gradients",
    "check_accounting",
    "check_bounds",
    "check_shots",
    "run_all",
]
