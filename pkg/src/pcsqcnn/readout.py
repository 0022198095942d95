"""Marginal readout, finite-shot sampling and readout entropy."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import rng as rngmod
from .state import BATCH, StateTensor

NORM_TOL = 1e-8


def _readout_order(state: StateTensor) -> list[str]:
    lead = [BATCH] if state.batched else []
    conds = [a for a in state.axes if a not in (BATCH, "x", "y", "f")]
    return lead + ["x", "y", "f"] + conds


def exact_readout(state: StateTensor) -> np.ndarray:
    """Probabilities over the surviving ``(x, y, f)`` coordinates, flattened x-major.

    Condition axes are summed out and the result is divided by the encoded
    squared norm ``N_x * N_y``.  Returns ``(D_out,)`` or ``(B, D_out)``.
    """
    norm = np.atleast_1d(state.squared_norm())
    rel = np.abs(norm - state.norm_target) / state.norm_target
    if rel.max() > NORM_TOL:
        raise ValueError(
            f"state squared norm {norm[rel.argmax()]:.12g} deviates from {state.norm_target:.12g}; "
            "pipeline corrupted"
        )
    st = state.transpose(_readout_order(state))
    d_out = st.size("x") * st.size("y") * st.size("f")
    sq = np.abs(st.amplitudes) ** 2
    lead = sq.shape[:1] if state.batched else ()
    p = sq.reshape(lead + (d_out, -1)).sum(axis=-1)
    return p / state.norm_target


def sample_shots(p: np.ndarray, n_shot: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical frequencies of ``n_shot`` multinomial draws from ``p``.

    One uniform per shot, mapped through the cumulative distribution.
    """
    if n_shot < 1:
        raise ValueError(f"n_shot must be >= 1, got {n_shot}")
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = rng.random(n_shot)
    idx = np.searchsorted(cdf, u, side="right")
    counts = np.bincount(idx, minlength=p.size)
    return counts / n_shot


def sample_shots_batch(
    P: np.ndarray, n_shot: int, seed: int, purpose: str, indices: Iterable[int] | None = None
) -> np.ndarray:
    """Shot-sample each row of ``P`` with a stream keyed by ``(seed, purpose, n_shot, index)``."""
    P = np.atleast_2d(P)
    indices = range(P.shape[0]) if indices is None else list(indices)
    return np.stack(
        [sample_shots(p, n_shot, rngmod.stream(seed, purpose, n_shot, i)) for p, i in zip(P, indices)]
    )


def readout_entropy(p: np.ndarray) -> np.ndarray | float:
    """Shannon entropy in bits along the last axis, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    h = terms.sum(axis=-1)
    return float(h) if h.ndim == 0 else h


def total_variation(p: np.ndarray, q: np.ndarray) -> np.ndarray | float:
    d = 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)
    return float(d) if np.ndim(d) == 0 else d
