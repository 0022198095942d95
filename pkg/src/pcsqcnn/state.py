"""Register layout and the named-axis statevector.

Amplitudes are stored per semantic axis rather than per qubit: the x and y
index registers are each one array dimension of size ``2**width``, the
feature register is one dimension of size ``D_f`` and pooled qubits become
binary condition axes appended at the end.  An optional leading ``batch``
axis holds independent samples.  Inside an axis the integer position is the
spatial (or Fourier) index itself; the qubit-level view uses little-endian
bits, qubit 0 being the least significant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BATCH = "batch"


@dataclass(frozen=True)
class RegisterLayout:
    """Register widths and derived dimensions of one model configuration.

    ``n_idx`` index qubits per spatial axis, ``Q`` quantum layers and ``n_f``
    feature qubits.  Each of the ``Q - 1`` pooling steps removes one index
    qubit per axis, leaving ``n_l`` per axis at readout.
    """

    n_idx: int
    Q: int
    n_f: int
    n_classes: int = 10

    def __post_init__(self):
        for name in ("n_idx", "Q", "n_f"):
            if int(getattr(self, name)) != getattr(self, name):
                raise TypeError(f"{name} must be an integer")
        if self.n_idx < 1:
            raise ValueError(f"n_idx must be >= 1, got {self.n_idx}")
        if self.n_f < 1:
            raise ValueError(f"n_f must be >= 1, got {self.n_f}")
        if not 1 <= self.Q <= self.n_idx:
            raise ValueError(
                f"Q must satisfy 1 <= Q <= n_idx (got Q={self.Q}, n_idx={self.n_idx}); "
                "no index qubits would survive pooling"
            )
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")

    @property
    def N(self) -> int:
        return 2**self.n_idx

    @property
    def n_l(self) -> int:
        return self.n_idx - self.Q + 1

    @property
    def n_tot(self) -> int:
        return 2 * self.n_idx + self.n_f

    @property
    def n_meas(self) -> int:
        return 2 * self.n_l + self.n_f

    @property
    def D_f(self) -> int:
        return 2**self.n_f

    @property
    def D_out(self) -> int:
        return 2**self.n_meas

    def active_width(self, layer: int) -> int:
        """Index qubits per axis seen by ``layer`` (1-based)."""
        if not 1 <= layer <= self.Q:
            raise ValueError(f"layer must be in 1..{self.Q}, got {layer}")
        return self.n_l + self.Q - layer

    def branches(self, layer: int) -> int:
        """Number of condition branches feeding ``layer``'s multiplexer."""
        return 1 if layer == 1 else 4

    @property
    def condition_schedule(self) -> list[tuple[str, str]]:
        """Names of the (x, y) condition axes created after each non-final layer."""
        return [condition_names(l) for l in range(1, self.Q)]

    @property
    def readout_shape(self) -> tuple[int, int, int]:
        return (2**self.n_l, 2**self.n_l, self.D_f)


def build_layout(n_idx: int, Q: int, n_f: int, n_classes: int = 10) -> RegisterLayout:
    return RegisterLayout(n_idx=n_idx, Q=Q, n_f=n_f, n_classes=n_classes)


def condition_names(layer: int) -> tuple[str, str]:
    return (f"cx{layer}", f"cy{layer}")


@dataclass(frozen=True)
class StateTensor:
    """Complex amplitudes of the full register with named axes.

    ``norm_target`` is the squared norm the pipeline must preserve; for the
    unnormalised image encoding it equals ``N_x * N_y``.
    """

    amplitudes: np.ndarray
    axes: tuple[str, ...]
    norm_target: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.amplitudes.ndim != len(self.axes):
            raise ValueError(
                f"{self.amplitudes.ndim}-d amplitudes but {len(self.axes)} axis names {self.axes}"
            )
        if len(set(self.axes)) != len(self.axes):
            raise ValueError(f"duplicate axis names in {self.axes}")

    @property
    def batched(self) -> bool:
        return bool(self.axes) and self.axes[0] == BATCH

    def size(self, axis: str) -> int:
        return self.amplitudes.shape[self.index(axis)]

    def index(self, axis: str) -> int:
        try:
            return self.axes.index(axis)
        except ValueError:
            raise KeyError(f"state has no axis {axis!r}; axes are {self.axes}") from None

    def qubits(self) -> float:
        """Total qubit count, excluding the batch axis."""
        return float(
            sum(np.log2(n) for a, n in zip(self.axes, self.amplitudes.shape) if a != BATCH)
        )

    def squared_norm(self) -> np.ndarray | float:
        sq = np.abs(self.amplitudes) ** 2
        if self.batched:
            return sq.reshape(sq.shape[0], -1).sum(axis=1)
        return float(sq.sum())

    def replace(self, amplitudes: np.ndarray, axes: Sequence[str] | None = None) -> "StateTensor":
        return StateTensor(
            amplitudes,
            tuple(self.axes if axes is None else axes),
            self.norm_target,
            dict(self.meta),
        )

    def transpose(self, axes: Sequence[str]) -> "StateTensor":
        order = [self.index(a) for a in axes]
        if sorted(order) != list(range(len(self.axes))):
            raise ValueError(f"{axes} is not a permutation of {self.axes}")
        return self.replace(np.transpose(self.amplitudes, order), axes)


def apply_operator(state: StateTensor, op: np.ndarray, target_axes: str | Sequence[str]) -> StateTensor:
    """Contract the square matrix ``op`` against the named axes.

    For several target axes the operator acts on their C-order flattening,
    i.e. the first listed axis is the most significant.
    """
    if isinstance(target_axes, str):
        target_axes = (target_axes,)
    target_axes = tuple(target_axes)
    if BATCH in target_axes:
        raise ValueError("operators cannot act on the batch axis")
    pos = [state.index(a) for a in target_axes]
    dims = [state.amplitudes.shape[p] for p in pos]
    dim = int(np.prod(dims))
    op = np.asarray(op)
    if op.shape != (dim, dim):
        raise ValueError(f"operator shape {op.shape} does not match target axes {target_axes} of size {dim}")
    psi = np.moveaxis(state.amplitudes, pos, range(len(pos)))
    rest = psi.shape[len(pos):]
    out = (op @ psi.reshape(dim, -1)).reshape(tuple(dims) + rest)
    return state.replace(np.moveaxis(out, range(len(pos)), pos))


def _check_power_of_two(n: int, axis: str) -> None:
    if n < 2 or n & (n - 1):
        raise ValueError(f"axis {axis!r} has size {n}, need a power of two >= 2 to split")


def split_axis(state: StateTensor, axis: str, position: str, new_axis: str) -> StateTensor:
    """Expose one bit of ``axis`` as a new binary axis appended at the end.

    ``position="lsb"`` takes the least significant computational bit,
    ``r = 2q + s``.  ``position="alias"`` takes the alias selector of a
    Fourier index, ``k = q + sigma * N/2`` (the most significant bit).  The
    remaining coarse index keeps the name ``axis``.
    """
    n = state.size(axis)
    _check_power_of_two(n, axis)
    if new_axis in state.axes:
        raise ValueError(f"axis {new_axis!r} already exists")
    i = state.index(axis)
    shape = list(state.amplitudes.shape)
    if position == "lsb":
        split = shape[:i] + [n // 2, 2] + shape[i + 1:]
        bit = i + 1
    elif position == "alias":
        split = shape[:i] + [2, n // 2] + shape[i + 1:]
        bit = i
    else:
        raise ValueError(f"position must be 'lsb' or 'alias', got {position!r}")
    psi = np.moveaxis(state.amplitudes.reshape(split), bit, -1)
    return state.replace(psi, state.axes + (new_axis,))


def merge_axes(state: StateTensor, axes: tuple[str, str], position: str) -> StateTensor:
    """Inverse of :func:`split_axis`: fold binary axis ``axes[1]`` back into ``axes[0]``."""
    coarse, bit = axes
    if state.size(bit) != 2:
        raise ValueError(f"axis {bit!r} is not binary")
    if position not in ("lsb", "alias"):
        raise ValueError(f"position must be 'lsb' or 'alias', got {position!r}")
    names = [a for a in state.axes if a != bit]
    psi = np.moveaxis(state.amplitudes, state.index(bit), -1)
    ci = names.index(coarse)
    psi = np.moveaxis(psi, -1, ci + 1 if position == "lsb" else ci)
    shape = list(psi.shape)
    merged = shape[:ci] + [shape[ci] * shape[ci + 1]] + shape[ci + 2:]
    return state.replace(psi.reshape(merged), names)
