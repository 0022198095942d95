"""Fourier-mode multiplexer layers, junctions, pooling and the random-basis control.

The quantum core is compiled into a flat list of steps (basis changes,
multiplexers, junctions, pooling reshapes).  Every step is linear in the
amplitudes, so the same list replayed backwards with adjoint steps gives
the reverse-mode gradient (see :mod:`pcsqcnn.training`).

Register-to-bit conventions:

* reduced junction: the alias selector is the most significant bit of the
  Fourier index, ``k = q + sigma * N/2``;
* explicit pooling: the pooled bit is the least significant computational
  bit, ``r = 2q + s``.

In both cases the retained bit becomes a condition axis named
``cx<l>``/``cy<l>`` after layer ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import rng as rngmod
from .state import BATCH, RegisterLayout, StateTensor, apply_operator, condition_names, merge_axes, split_axis

_PAULI_1Q = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

DEGENERATE_GAP = 1e-9


@lru_cache(maxsize=None)
def pauli_strings(n: int) -> np.ndarray:
    """All ``4**n`` Pauli strings on ``n`` qubits, shape ``(4**n, 2**n, 2**n)``.

    String ``alpha`` has base-4 digits (I, X, Y, Z) = (0, 1, 2, 3) with qubit 0
    as the least significant digit; qubit 0 is the least significant bit of
    the register index, so it is the last Kronecker factor.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out = np.empty((4**n, 2**n, 2**n), dtype=complex)
    for alpha in range(4**n):
        digits = [(alpha >> (2 * j)) & 3 for j in range(n)]
        m = np.ones((1, 1), dtype=complex)
        for j in reversed(range(n)):
            m = np.kron(m, _PAULI_1Q[digits[j]])
        out[alpha] = m
    out.setflags(write=False)
    return out


def hermitian_generator(theta: np.ndarray, n_f: int) -> np.ndarray:
    """``A = sum_alpha theta_alpha P_alpha`` for a stack of coefficient vectors."""
    theta = np.asarray(theta, dtype=float)
    P = pauli_strings(n_f)
    if theta.shape[-1] != P.shape[0]:
        raise ValueError(f"expected {P.shape[0]} Pauli coefficients, got {theta.shape[-1]}")
    return np.tensordot(theta, P, axes=([-1], [0]))


def expi_hermitian(A: np.ndarray):
    """``exp(iA)`` for Hermitian ``A`` (stacked), returning ``(U, evals, evecs)``."""
    w, v = np.linalg.eigh(A)
    U = (v * np.exp(1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return U, w, v


def pauli_block(theta: np.ndarray, n_f: int) -> np.ndarray:
    """Feature unitary ``exp(i sum_alpha theta_alpha P_alpha)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != 4**n_f:
        raise ValueError(f"pauli_block needs {4**n_f} coefficients for n_f={n_f}, got {theta.shape[-1]}")
    return expi_hermitian(hermitian_generator(theta, n_f))[0]


def expi_divided_differences(w: np.ndarray) -> np.ndarray:
    """First divided differences of ``exp(i x)`` on eigenvalue pairs.

    ``out[..., p, q] = (e^{i w_p} - e^{i w_q}) / (w_p - w_q)`` with the
    limit ``i e^{i w_p}`` when the gap is below ``DEGENERATE_GAP``.
    """
    e = np.exp(1j * w)
    dw = w[..., :, None] - w[..., None, :]
    de = e[..., :, None] - e[..., None, :]
    close = np.abs(dw) < DEGENERATE_GAP
    mid = 0.5 * (w[..., :, None] + w[..., None, :])
    safe = np.where(close, 1.0, dw)
    return np.where(close, 1j * np.exp(1j * mid), de / safe)


# ----------------------------------------------------------------------------
# parameters


def block_shape(layout: RegisterLayout, layer: int) -> tuple[int, int, int, int]:
    M = 2 ** layout.active_width(layer)
    return (layout.branches(layer), M, M, 4**layout.n_f)


def count_quantum_parameters(layout: RegisterLayout) -> int:
    return int(sum(np.prod(block_shape(layout, l)) for l in range(1, layout.Q + 1)))


@dataclass
class MultiplexerParams:
    """Trainable Pauli coefficients, one array per layer.

    ``theta[l - 1]`` has shape ``(branches, M, M, 4**n_f)`` indexed by
    ``(m, k_x, k_y, alpha)`` with branch ``m = 2 * b_x + b_y`` of the most
    recently pooled pair.  The canonical flat order is ``(layer, m, k, alpha)``
    with ``k = k_x * M + k_y``.
    """

    layout: RegisterLayout
    theta: list[np.ndarray]

    def __post_init__(self):
        if len(self.theta) != self.layout.Q:
            raise ValueError(f"expected {self.layout.Q} layers of parameters, got {len(self.theta)}")
        for l, t in enumerate(self.theta, start=1):
            if t.shape != block_shape(self.layout, l):
                raise ValueError(
                    f"layer {l} parameters have shape {t.shape}, expected {block_shape(self.layout, l)}"
                )

    @classmethod
    def zeros(cls, layout: RegisterLayout) -> "MultiplexerParams":
        return cls(layout, [np.zeros(block_shape(layout, l)) for l in range(1, layout.Q + 1)])

    @classmethod
    def uniform(cls, layout: RegisterLayout, seed: int, purpose: str = "init-quantum") -> "MultiplexerParams":
        """Every coefficient i.i.d. ``Unif(0, 2 pi)``."""
        g = rngmod.stream(seed, purpose)
        return cls(
            layout,
            [g.uniform(0.0, 2 * np.pi, size=block_shape(layout, l)) for l in range(1, layout.Q + 1)],
        )

    @property
    def size(self) -> int:
        return int(sum(t.size for t in self.theta))

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.theta])

    @classmethod
    def from_flat(cls, layout: RegisterLayout, flat: np.ndarray) -> "MultiplexerParams":
        flat = np.asarray(flat, dtype=float)
        out, start = [], 0
        for l in range(1, layout.Q + 1):
            shp = block_shape(layout, l)
            n = int(np.prod(shp))
            out.append(flat[start:start + n].reshape(shp).copy())
            start += n
        if start != flat.size:
            raise ValueError(f"flat vector has {flat.size} entries, layout needs {start}")
        return cls(layout, out)

    def layer_slices(self) -> list[slice]:
        out, start = [], 0
        for t in self.theta:
            out.append(slice(start, start + t.size))
            start += t.size
        return out

    def copy(self) -> "MultiplexerParams":
        return MultiplexerParams(self.layout, [t.copy() for t in self.theta])


# ----------------------------------------------------------------------------
# random-basis control


def build_rbc_unitary(seed: int, n_active: int, layer: int = 0) -> np.ndarray:
    """Fixed random spatial unitary ``exp(iH)`` on ``n_active`` qubits.

    ``H = sum_{alpha != I} g_alpha P_alpha`` with ``g_alpha`` i.i.d. standard
    normal from the ``(seed, "rbc", layer)`` stream.
    """
    if n_active < 1:
        raise ValueError(f"n_active must be >= 1, got {n_active}")
    P = pauli_strings(n_active)
    g = rngmod.stream(seed, "rbc", layer, n_active).standard_normal(P.shape[0] - 1)
    H = np.tensordot(g, P[1:], axes=([0], [0]))
    H = 0.5 * (H + H.conj().T)
    return expi_hermitian(H)[0]


# ----------------------------------------------------------------------------
# elementary steps


def _canonical(state: StateTensor, cond: tuple[str, str] | None):
    """Return amplitudes as ``(B, m, x, y, R, f)`` plus the inverse mapping."""
    axes = list(state.axes)
    lead = [BATCH] if state.batched else []
    head = lead + (list(cond) if cond else []) + ["x", "y"]
    rest = [a for a in axes if a not in head and a != "f"]
    order = head + rest + ["f"]
    psi = state.transpose(order).amplitudes
    sh = psi.shape
    nb = sh[0] if state.batched else 1
    o = len(lead)
    m = 4 if cond else 1
    mx, my = sh[o + (2 if cond else 0)], sh[o + (3 if cond else 1)]
    D = sh[-1]
    canon = psi.reshape(nb, m, mx, my, -1, D)

    def restore(arr: np.ndarray) -> StateTensor:
        return state.replace(arr.reshape(sh), order).transpose(state.axes)

    return canon, restore


def mux_blocks(params: MultiplexerParams, layer: int):
    """Unitaries of layer ``layer`` plus their eigendecompositions."""
    A = hermitian_generator(params.theta[layer - 1], params.layout.n_f)
    return expi_hermitian(A)


def _mux_apply(state: StateTensor, layer: int, V: np.ndarray) -> StateTensor:
    cond = condition_names(layer - 1) if layer >= 2 else None
    if cond:
        for c in cond:
            if c not in state.axes:
                raise ValueError(f"layer {layer} needs condition axis {c!r}; state axes are {state.axes}")
    canon, restore = _canonical(state, cond)
    if canon.shape[1:4] != V.shape[:3]:
        raise ValueError(f"state active shape {canon.shape[1:4]} does not match parameter shape {V.shape[:3]}")
    out = canon @ np.swapaxes(V, -1, -2)[None, :, :, :]
    return restore(out)


def apply_multiplexer(state: StateTensor, layer: int, params: MultiplexerParams) -> StateTensor:
    """Apply ``sum_m |m><m| (x) sum_k |k><k| (x) V_k(m)`` for ``layer``."""
    V = mux_blocks(params, layer)[0]
    return _mux_apply(state, layer, V)


def apply_fourier(state: StateTensor, axis: str, inverse: bool = False) -> StateTensor:
    """Unitary DFT (``w = exp(-2 pi i/N)``) or its adjoint along ``axis``."""
    i = state.index(axis)
    f = np.fft.ifft if inverse else np.fft.fft
    return state.replace(f(state.amplitudes, axis=i, norm="ortho"))


def _phase_gradient(N: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(N // 2) / N)


def _bit_select(state: StateTensor, bit_axis: str, coarse_axis: str, vec: np.ndarray) -> np.ndarray:
    """Broadcast factor equal to ``vec`` along ``coarse_axis`` where ``bit_axis == 1``, else 1."""
    vshape = [vec.size if a == coarse_axis else 1 for a in state.axes]
    bshape = [2 if a == bit_axis else 1 for a in state.axes]
    bit = np.arange(2).reshape(bshape)
    return np.where(bit == 1, vec.reshape(vshape), 1.0)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def apply_reduced_junction(state: StateTensor, axis: str, new_axis: str) -> StateTensor:
    """Fixed fine-to-coarse Fourier junction on ``axis`` in deferred-measurement form.

    Splits the alias selector ``sigma`` (``k = q + sigma N/2``), applies a
    Hadamard to it, and multiplies the coarse index by ``exp(2 pi i q / N)`` on
    the ``sigma = 1`` branch.  The selector is kept as ``new_axis``.
    """
    N = state.size(axis)
    if N < 4:
        raise ValueError(f"reduced junction needs an active axis of size >= 4, got {N}")
    s = split_axis(state, axis, "alias", new_axis)
    s = apply_operator(s, _H, new_axis)
    return s.replace(s.amplitudes * _bit_select(s, new_axis, axis, _phase_gradient(N)))


def _reduced_junction_adjoint(state: StateTensor, axis: str, bit_axis: str) -> StateTensor:
    N = 2 * state.size(axis)
    s = state.replace(state.amplitudes * np.conj(_bit_select(state, bit_axis, axis, _phase_gradient(N))))
    s = apply_operator(s, _H, bit_axis)
    return merge_axes(s, (axis, bit_axis), "alias")


def apply_explicit_pooling(state: StateTensor, axis: str, new_axis: str) -> StateTensor:
    """Deferred parity measurement: expose the least significant bit as ``new_axis``."""
    if state.size(axis) < 4:
        raise ValueError(f"explicit pooling needs an active axis of size >= 4, got {state.size(axis)}")
    return split_axis(state, axis, "lsb", new_axis)


def junction_matrix(N: int, b: int) -> np.ndarray:
    """The postselected junction map ``K_b`` as an ``(N/2, N)`` matrix via the reduced form."""
    out = np.zeros((N // 2, N), dtype=complex)
    for k in range(N):
        e = np.zeros(N, dtype=complex)
        e[k] = 1.0
        st = apply_reduced_junction(StateTensor(e, ("x",)), "x", "c")
        out[:, k] = st.amplitudes[:, b]
    return out


def g_rotation_product(N: int) -> np.ndarray:
    """Diagonal of the tensor product of Z-rotations implementing the phase gradient."""
    n = int(np.log2(N))
    diag = np.ones(N // 2, dtype=complex)
    for q in range(N // 2):
        for j in range(n - 1):
            theta = np.pi / 2 ** (n - 1 - j)
            bit = (q >> j) & 1
            diag[q] *= np.exp(-1j * theta / 2) if bit == 0 else np.exp(1j * theta / 2)
    return diag


# ----------------------------------------------------------------------------
# layer stack


@dataclass
class LayerStack:
    """Complete quantum core: layout, pipeline mode, basis and parameters.

    ``mode`` is ``"reduced"`` (Fourier junctions between layers) or
    ``"explicit"`` (basis change, multiplexer, inverse basis change and LSB
    pooling per layer).  ``basis="random"`` replaces the Fourier transforms by
    fixed per-layer random unitaries and requires explicit mode.
    """

    layout: RegisterLayout
    params: MultiplexerParams
    mode: str = "reduced"
    basis: str = "fourier"
    rbc_seed: int = 0
    rbc: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mode not in ("reduced", "explicit"):
            raise ValueError(f"mode must be 'reduced' or 'explicit', got {self.mode!r}")
        if self.basis not in ("fourier", "random"):
            raise ValueError(f"basis must be 'fourier' or 'random', got {self.basis!r}")
        if self.basis == "random" and self.mode != "explicit":
            raise ValueError("the random-basis control requires explicit pooling")
        if self.params.layout != self.layout:
            raise ValueError("parameter layout does not match stack layout")
        if self.basis == "random" and not self.rbc:
            self.rbc = [
                build_rbc_unitary(self.rbc_seed, self.layout.active_width(l), layer=l)
                for l in range(1, self.layout.Q + 1)
            ]

    def steps(self) -> list[tuple]:
        Q = self.layout.Q
        out: list[tuple] = []
        if self.mode == "reduced":
            out += [("fourier", "x", False), ("fourier", "y", False)]
            for l in range(1, Q):
                cx, cy = condition_names(l)
                out += [("mux", l), ("junction", "x", cx), ("junction", "y", cy)]
            out += [("mux", Q), ("fourier", "x", True), ("fourier", "y", True)]
            return out
        for l in range(1, Q + 1):
            if self.basis == "fourier":
                fwd = [("fourier", "x", False), ("fourier", "y", False)]
                bwd = [("fourier", "x", True), ("fourier", "y", True)]
            else:
                R = self.rbc[l - 1]
                fwd = [("basis", "x", R), ("basis", "y", R)]
                bwd = [("basis", "x", R.conj().T), ("basis", "y", R.conj().T)]
            out += fwd + [("mux", l)] + bwd
            if l < Q:
                cx, cy = condition_names(l)
                out += [("pool", "x", cx), ("pool", "y", cy)]
        return out


def _check_input(stack: LayerStack, state: StateTensor) -> None:
    n = 2**stack.layout.n_idx
    if state.size("x") != n or state.size("y") != n or state.size("f") != stack.layout.D_f:
        raise ValueError(
            f"encoded state shape {state.amplitudes.shape} does not match layout "
            f"(N={n}, D_f={stack.layout.D_f})"
        )


def run_steps(stack: LayerStack, state: StateTensor, record: bool = False):
    """Forward pass; with ``record`` also return the multiplexer inputs and blocks."""
    _check_input(stack, state)
    tape = []
    for step in stack.steps():
        kind = step[0]
        if kind == "fourier":
            state = apply_fourier(state, step[1], inverse=step[2])
        elif kind == "basis":
            state = apply_operator(state, step[2], step[1])
        elif kind == "mux":
            layer = step[1]
            V, w, v = mux_blocks(stack.params, layer)
            if record:
                tape.append((layer, state, V, w, v))
            state = _mux_apply(state, layer, V)
        elif kind == "junction":
            state = apply_reduced_junction(state, step[1], step[2])
        elif kind == "pool":
            state = apply_explicit_pooling(state, step[1], step[2])
        else:  # pragma: no cover
            raise AssertionError(kind)
    return (state, tape) if record else state


def forward_quantum(stack: LayerStack, encoded: StateTensor) -> StateTensor:
    """Evolve an encoded image (or batch) through the quantum core."""
    return run_steps(stack, encoded)


def adjoint_step(step: tuple, lam: StateTensor) -> StateTensor:
    """Apply the adjoint of a non-multiplexer step."""
    kind = step[0]
    if kind == "fourier":
        return apply_fourier(lam, step[1], inverse=not step[2])
    if kind == "basis":
        return apply_operator(lam, step[2].conj().T, step[1])
    if kind == "junction":
        return _reduced_junction_adjoint(lam, step[1], step[2])
    if kind == "pool":
        return merge_axes(lam, (step[1], step[2]), "lsb")
    raise ValueError(f"no adjoint for step {kind!r}")
