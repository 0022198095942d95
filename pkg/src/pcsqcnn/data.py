"""IDX ingestion and benchmark construction."""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .encoding import bilinear_resize, offset_bounds, place_and_translate

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    """Malformed IDX content; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset: int, message: str):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{path}: byte offset {offset}: {message}")


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise IDXFormatError(path, len(raw), "file shorter than the magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IDXFormatError(path, 0, f"magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise IDXFormatError(path, len(raw), "truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    need = header + int(np.prod(dims))
    if len(raw) < need:
        raise IDXFormatError(path, len(raw), f"truncated payload, expected {need} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=need - header, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to ``[0, 1]`` as ``(count, rows, cols)`` float64, plus int64 labels."""
    images = _read_idx(images_path, IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IDXFormatError(labels_path, 4, f"label count {labels.shape[0]} != image count {images.shape[0]}")
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 images ``(count, rows, cols)`` and labels in IDX layout."""
    images = np.asarray(images)
    if images.dtype != np.uint8:
        images = np.clip(np.rint(np.asarray(images, float) * 255.0), 0, 255).astype(np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def sklearn_digits() -> tuple[np.ndarray, np.ndarray]:
    """The 8x8 scikit-learn digits, rescaled from ``0..16`` to ``[0, 1]``."""
    from sklearn.datasets import load_digits

    d = load_digits()
    return d.images / 16.0, d.target.astype(np.int64)


@dataclass(frozen=True)
class DatasetSpec:
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    regime: str = "translated"
    per_class: int | None = 1000
    resize: int = 16
    canvas: int = 32
    max_offset: int = 8
    seed: int = 0
    source: str = "idx"  # "idx" or "sklearn-digits"
    test_per_class: int | None = None

    def __post_init__(self):
        if self.regime not in ("translated", "full"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.source not in ("idx", "sklearn-digits"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.resize > self.canvas:
            raise ValueError(f"resize {self.resize} exceeds canvas {self.canvas}")
        lo, hi = offset_bounds(self.resize, self.canvas)
        if self.regime == "translated" and not (0 <= self.max_offset <= min(-lo, hi)):
            raise ValueError(f"max offset {self.max_offset} does not fit a {self.resize} patch on a {self.canvas} canvas")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Benchmark:
    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray
    train_offsets: np.ndarray | None = None
    test_offsets: np.ndarray | None = None


def balanced_subset(labels: np.ndarray, per_class: int, seed: int, purpose: str = "subset", n_classes: int = 10) -> np.ndarray:
    """Seeded global shuffle, then the first ``per_class`` hits of each class (kept in shuffled order)."""
    order = rngmod.stream(seed, purpose).permutation(len(labels))
    shuffled = labels[order]
    picks = []
    for c in range(n_classes):
        hits = order[shuffled == c][:per_class]
        if len(hits) < per_class:
            raise ValueError(f"class {c} has {len(hits)} examples, need {per_class}")
        picks.append(hits)
    chosen = np.zeros(len(labels), bool)
    chosen[np.concatenate(picks)] = True
    return order[chosen[order]]


def _translate_all(images, spec: DatasetSpec, purpose: str):
    small = bilinear_resize(images, spec.resize, spec.resize)
    g = rngmod.stream(spec.seed, purpose)
    offsets = g.integers(-spec.max_offset, spec.max_offset, size=(len(images), 2), endpoint=True)
    out = np.stack([place_and_translate(s, spec.canvas, tuple(o)) for s, o in zip(small, offsets)])
    return out, offsets


def _full(images, spec: DatasetSpec):
    h = images.shape[-1]
    if spec.resize == h and spec.canvas > h:
        return np.stack([place_and_translate(im, spec.canvas) for im in images])
    small = bilinear_resize(images, spec.resize, spec.resize)
    if spec.canvas == spec.resize:
        return small
    return np.stack([place_and_translate(s, spec.canvas) for s in small])


def _load_sources(spec: DatasetSpec):
    if spec.source == "sklearn-digits":
        # the digits set has no fixed split: the balanced training subset is
        # drawn first and every remaining image becomes the test set
        X, y = sklearn_digits()
        idx = balanced_subset(y, spec.per_class or 100, spec.seed)
        rest = np.setdiff1d(np.arange(len(y)), idx)
        return X[idx], y[idx], X[rest], y[rest]
    missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels") if getattr(spec, k) is None]
    if missing:
        raise ValueError(f"dataset spec lacks paths: {', '.join(missing)}")
    Xtr, ytr = load_idx(spec.train_images, spec.train_labels)
    Xte, yte = load_idx(spec.test_images, spec.test_labels)
    if spec.per_class is not None:
        idx = balanced_subset(ytr, spec.per_class, spec.seed)
        Xtr, ytr = Xtr[idx], ytr[idx]
    return Xtr, ytr, Xte, yte


def build_benchmark(spec: DatasetSpec) -> Benchmark:
    """Prepare a frozen train/test pair; a deterministic function of the spec and its seed."""
    Xtr, ytr, Xte, yte = _load_sources(spec)
    if np.any((ytr < 0) | (ytr > 9)) or np.any((yte < 0) | (yte > 9)):
        raise ValueError("labels must lie in 0..9")
    if spec.test_per_class is not None:
        idx = balanced_subset(yte, spec.test_per_class, spec.seed, purpose="test-subset")
        Xte, yte = Xte[idx], yte[idx]
    if spec.regime == "translated":
        tr, otr = _translate_all(Xtr, spec, "offsets-train")
        te, ote = _translate_all(Xte, spec, "offsets-test")
        return Benchmark(tr, ytr, te, yte, otr, ote)
    return Benchmark(_full(Xtr, spec), ytr, _full(Xte, spec), yte)
