"""Pixel and qubit cyclic shifts, the QFT, and translation-equivariance checks.

Dense matrices throughout; the sizes involved in checks are small
(at most 32 sites per axis).  Multi-axis operators act on the C-order
flattening of ``(x, y, ..., feature)``.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np


def shift(N: int) -> np.ndarray:
    """Pixel cyclic shift ``T|j> = |j + 1 mod N>``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return np.roll(np.eye(N, dtype=complex), 1, axis=0)


def qcs(L: int) -> np.ndarray:
    """Qubit cyclic shift on ``L`` little-endian qubits.

    ``S(|q_0>|q_1>...|q_{L-1}>) = |q_{L-1}>|q_0>...|q_{L-2}>``: the value of
    qubit ``j`` moves to qubit ``j + 1 mod L``, a left rotation of the bit
    string of the basis index.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    dim = 2**L
    S = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        rotated = ((j << 1) | (j >> (L - 1))) & (dim - 1)
        S[rotated, j] = 1.0
    return S


def qft(N: int) -> np.ndarray:
    """Unitary DFT with entries ``w**(k j) / sqrt(N)``, ``w = exp(-2 pi i / N)``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    k = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(k, k) / N) / np.sqrt(N)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def axis_generator(index_dims: Sequence[int], feature_dim: int, axis: int) -> np.ndarray:
    """``T`` on one index axis, identity on the others and on the features."""
    factors = [shift(n) if i == axis else np.eye(n) for i, n in enumerate(index_dims)]
    return kron_all(factors + [np.eye(feature_dim)])


def _as_dims(index_dims) -> tuple[int, ...]:
    if np.isscalar(index_dims):
        return (int(index_dims),)
    return tuple(int(n) for n in index_dims)


def check_pcs_equivariance(U: np.ndarray, index_dims, feature_dim: int) -> float:
    """Largest Frobenius norm of ``[U, T_axis (x) I]`` over the shift generators."""
    dims = _as_dims(index_dims)
    dim = int(np.prod(dims)) * feature_dim
    if U.shape != (dim, dim):
        raise ValueError(f"U has shape {U.shape}, expected {(dim, dim)} for index {dims} x feature {feature_dim}")
    worst = 0.0
    for axis in range(len(dims)):
        T = axis_generator(dims, feature_dim, axis)
        worst = max(worst, float(np.linalg.norm(U @ T - T @ U)))
    return worst


def _fourier(dims: Sequence[int], feature_dim: int) -> np.ndarray:
    return kron_all([qft(n) for n in dims] + [np.eye(feature_dim)])


def build_pcs_unitary(blocks: np.ndarray, index_dims=None, atol: float = 1e-10) -> np.ndarray:
    """Assemble ``(F^dag (x) I) (direct sum of blocks) (F (x) I)``.

    ``blocks`` has shape ``(*index_dims, D, D)``; one feature unitary per
    Fourier mode (tuple).
    """
    blocks = np.asarray(blocks, dtype=complex)
    dims = _as_dims(index_dims) if index_dims is not None else tuple(blocks.shape[:-2])
    D = blocks.shape[-1]
    if blocks.shape != dims + (D, D):
        raise ValueError(f"blocks have shape {blocks.shape}, expected {dims + (D, D)}")
    flat = blocks.reshape(-1, D, D)
    err = np.linalg.norm(np.conj(np.swapaxes(flat, -1, -2)) @ flat - np.eye(D), axis=(-2, -1))
    if err.max() > atol:
        raise ValueError(f"block {int(err.argmax())} is not unitary (deviation {err.max():.3e})")
    K = flat.shape[0]
    B = np.zeros((K * D, K * D), dtype=complex)
    for k in range(K):
        B[k * D:(k + 1) * D, k * D:(k + 1) * D] = flat[k]
    F = _fourier(dims, D)
    return F.conj().T @ B @ F


def extract_blocks(U: np.ndarray, index_dims, feature_dim: int, tol: float = 1e-8) -> np.ndarray:
    """Recover the Fourier-mode blocks of a PCS-equivariant unitary."""
    dims = _as_dims(index_dims)
    comm = check_pcs_equivariance(U, dims, feature_dim)
    if comm > tol:
        raise ValueError(f"U is not PCS-equivariant: commutator norm {comm:.3e} exceeds {tol:.1e}")
    D = feature_dim
    F = _fourier(dims, D)
    B = F @ U @ F.conj().T
    K = int(np.prod(dims))
    blocks = np.stack([B[k * D:(k + 1) * D, k * D:(k + 1) * D] for k in range(K)])
    return blocks.reshape(dims + (D, D))


def commutant_dimension(N: int, feature_dim: int, tol: float = 1e-9) -> int:
    """Dimension of ``{X : X (T (x) I) = (T (x) I) X}`` over complex matrices."""
    A = axis_generator((N,), feature_dim, 0)
    n = A.shape[0]
    I = np.eye(n)
    # column-major vec: vec(XA - AX) = (A^T (x) I - I (x) A) vec(X)
    L = np.kron(A.T, I) - np.kron(I, A)
    s = np.linalg.svd(L, compute_uv=False)
    return int(np.sum(s <= tol * max(1.0, s.max())))


def mismatch_witness(n: int) -> tuple[int, dict]:
    """Exhibit that qubit cyclic shifts and pixel cyclic shifts differ on ``n`` qubits.

    For ``n >= 2`` the all-zero address is the witness: ``S T|0> != T S|0>``.
    For ``n = 1``, ``S = I`` while ``T = X``, and ``Z`` commutes with the former
    but not with the latter.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    N = 2**n
    S, T = qcs(n), shift(N)
    e0 = np.zeros(N, dtype=complex)
    e0[0] = 1.0
    report: dict = {"n": n, "convention": "S rotates little-endian bits left (q_j -> q_{j+1})"}
    report["permutations_fix_zero"] = bool(np.allclose(S @ e0, e0))
    report["T_moves_zero"] = int(np.argmax(np.abs(T @ e0)))
    if n == 1:
        Z = np.diag([1.0, -1.0]).astype(complex)
        report["S_is_identity"] = bool(np.allclose(S, np.eye(2)))
        report["T_is_X"] = bool(np.allclose(T, np.array([[0, 1], [1, 0]])))
        report["comm_Z_S"] = float(np.linalg.norm(Z @ S - S @ Z))
        report["comm_Z_T"] = float(np.linalg.norm(Z @ T - T @ Z))
        report["mismatch"] = report["comm_Z_S"] == 0.0 and report["comm_Z_T"] > 0.0
        return 0, report
    st = S @ T @ e0
    ts = T @ S @ e0
    report["ST_zero"] = int(np.argmax(np.abs(st)))
    report["TS_zero"] = int(np.argmax(np.abs(ts)))
    report["mismatch"] = not np.allclose(st, ts)
    return 0, report


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
