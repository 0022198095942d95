"""Image preprocessing and FRQI-like address encoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import BATCH, StateTensor


@dataclass(frozen=True)
class EncoderConfig:
    """Affine brightness-to-angle map ``p = a + (b - a) * x``."""

    a: float = 0.0
    b: float = np.pi
    n_f: int = 1

    def __post_init__(self):
        if self.b == self.a:
            raise ValueError("encoder angle range is empty (a == b)")
        if self.n_f < 1:
            raise ValueError(f"n_f must be >= 1, got {self.n_f}")


def _is_pow2(n: int) -> bool:
    return n >= 1 and not n & (n - 1)


def _resize_weights(n_in: int, n_out: int):
    # half-pixel centres, edge clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an ``(..., H, W)`` array; output clamped to [0, 1]."""
    image = np.asarray(image, dtype=float)
    if image.ndim < 2 or image.shape[-1] == 0 or image.shape[-2] == 0:
        raise ValueError(f"cannot resize an empty image of shape {image.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {(out_h, out_w)}")
    h, w = image.shape[-2:]
    if (h, w) == (out_h, out_w):
        return image.copy()
    r0, r1, wr = _resize_weights(h, out_h)
    c0, c1, wc = _resize_weights(w, out_w)
    rows = image[..., r0, :] * (1.0 - wr)[:, None] + image[..., r1, :] * wr[:, None]
    out = rows[..., c0] * (1.0 - wc) + rows[..., c1] * wc
    return np.clip(out, 0.0, 1.0)


def canvas_anchor(patch: int, canvas: int) -> int:
    """Top-left coordinate of a centred patch (floor for odd margins)."""
    return (canvas - patch) // 2


def offset_bounds(patch: int, canvas: int) -> tuple[int, int]:
    """Inclusive range of legal offsets keeping the patch inside the canvas."""
    a = canvas_anchor(patch, canvas)
    return -a, canvas - patch - a


def place_and_translate(patch: np.ndarray, canvas: int, offset: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Copy ``patch`` onto a zero ``canvas x canvas`` image at the centred
    anchor shifted by ``offset = (dx, dy)``; ``dx`` moves rows (first axis).

    There is no wraparound: offsets pushing the patch past the border raise.
    """
    patch = np.asarray(patch, dtype=float)
    ph, pw = patch.shape[-2:]
    if ph > canvas or pw > canvas:
        raise ValueError(f"patch {patch.shape[-2:]} does not fit a {canvas}x{canvas} canvas")
    dx, dy = (int(o) for o in offset)
    top = canvas_anchor(ph, canvas) + dx
    left = canvas_anchor(pw, canvas) + dy
    if top < 0 or left < 0 or top + ph > canvas or left + pw > canvas:
        raise ValueError(
            f"offset {offset} moves the {ph}x{pw} patch outside the {canvas}x{canvas} canvas"
        )
    out = np.zeros(patch.shape[:-2] + (canvas, canvas))
    out[..., top:top + ph, left:left + pw] = patch
    return out


def encode_frqi(image: np.ndarray, cfg: EncoderConfig | None = None) -> StateTensor:
    """Encode an ``N x N`` image (or an ``(B, N, N)`` stack) as a state tensor.

    Pixel ``(u, v)`` (row, column) becomes address ``|u>_x |v>_y`` carrying the
    feature state ``sin(p)|0> + cos(p)|1>`` on the least significant feature
    qubit, the other feature qubits in ``|0>``.  No ``1/N`` prefactor is
    applied, so the squared norm is ``N**2``.
    """
    cfg = cfg or EncoderConfig()
    image = np.asarray(image, dtype=float)
    batched = image.ndim == 3
    if image.ndim not in (2, 3):
        raise ValueError(f"expected an (N, N) image or (B, N, N) stack, got shape {image.shape}")
    nx, ny = image.shape[-2:]
    if nx != ny or not _is_pow2(nx) or nx < 2:
        raise ValueError(f"image must be N x N with N a power of two >= 2, got {nx}x{ny}")
    p = cfg.a + (cfg.b - cfg.a) * image
    amps = np.zeros(image.shape + (2**cfg.n_f,), dtype=complex)
    amps[..., 0] = np.sin(p)
    amps[..., 1] = np.cos(p)
    axes = (BATCH, "x", "y", "f") if batched else ("x", "y", "f")
    return StateTensor(amps, axes, norm_target=float(nx * ny), meta={"N": nx})
