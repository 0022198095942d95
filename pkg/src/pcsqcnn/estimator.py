"""scikit-learn wrappers: a canvas preprocessing transformer and the classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import rng as rngmod
from .encoding import EncoderConfig, bilinear_resize, offset_bounds, place_and_translate
from .head import head_forward, init_head
from .layers import LayerStack, MultiplexerParams
from .state import build_layout
from .training import TrainConfig, encode_images, predict_readout, train


def _as_images(X, side: int | None = None) -> np.ndarray:
    """Accept ``(n, H, W)`` stacks or ``(n, H*W)`` flat rows of a square image."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 3:
        return X
    X = check_array(X)
    s = side or int(round(np.sqrt(X.shape[1])))
    if s * s != X.shape[1]:
        raise ValueError(f"flat rows of length {X.shape[1]} are not square images")
    return X.reshape(len(X), s, s)


class CanvasTransformer(TransformerMixin, BaseEstimator):
    """Resize images to ``resize`` and place them on a ``canvas``, optionally translated.

    With ``max_offset > 0`` every image gets an offset drawn uniformly from
    ``{-max_offset..max_offset}`` per axis, keyed by ``(random_state, row)``.
    Output rows are flattened canvases.
    """

    def __init__(self, resize=16, canvas=32, max_offset=0, random_state=0):
        self.resize = resize
        self.canvas = canvas
        self.max_offset = max_offset
        self.random_state = random_state

    def fit(self, X, y=None):
        lo, hi = offset_bounds(self.resize, self.canvas)
        if not 0 <= self.max_offset <= min(-lo, hi):
            raise ValueError(f"max_offset {self.max_offset} does not fit resize {self.resize} on canvas {self.canvas}")
        self.n_features_in_ = int(np.prod(np.asarray(X).shape[1:]))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        imgs = bilinear_resize(np.clip(_as_images(X), 0.0, 1.0), self.resize, self.resize)
        if self.max_offset:
            g = rngmod.stream(int(self.random_state), "canvas-offsets")
            offs = g.integers(-self.max_offset, self.max_offset, size=(len(imgs), 2), endpoint=True)
        else:
            offs = np.zeros((len(imgs), 2), dtype=int)
        out = np.stack([place_and_translate(im, self.canvas, tuple(o)) for im, o in zip(imgs, offs)])
        return out.reshape(len(out), -1)


class PCSQCNNClassifier(ClassifierMixin, BaseEstimator):
    """Hybrid quantum-classical image classifier trained on exact readouts.

    Inputs are square images with values in ``[0, 1]`` whose side is
    ``2**n_idx``, given as ``(n, N, N)`` arrays or flattened rows.

    Parameters
    ----------
    n_idx, Q, n_f : int
        Address qubits per axis, number of layers, feature qubits.
    mode : {"reduced", "explicit"}
        Reduced Fourier junctions or explicit pooling (same function).
    basis : {"fourier", "random"}
        ``"random"`` builds the random-basis control (explicit mode only).
    epochs, batch_size, learning_rate :
        Adam training schedule.
    random_state : int
        Seed for initialisation, data order and the random basis.
    """

    def __init__(self, n_idx=4, Q=2, n_f=2, mode="reduced", basis="fourier", epochs=100, batch_size=100,
                 learning_rate=3e-2, encoder_range=(0.0, np.pi), random_state=0, threads=1):
        self.n_idx = n_idx
        self.Q = Q
        self.n_f = n_f
        self.mode = mode
        self.basis = basis
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.encoder_range = encoder_range
        self.random_state = random_state
        self.threads = threads

    def _encoder(self) -> EncoderConfig:
        a, b = self.encoder_range
        return EncoderConfig(float(a), float(b), self.n_f)

    def fit(self, X, y):
        side = 2**self.n_idx
        X2 = np.asarray(X, dtype=float)
        X2, y = check_X_y(X2.reshape(len(X2), -1), y)
        images = _as_images(X2, side)
        self.classes_ = unique_labels(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        yi = np.searchsorted(self.classes_, y)
        seed = int(self.random_state)
        self.layout_ = build_layout(self.n_idx, self.Q, self.n_f, len(self.classes_))
        mode = "explicit" if self.basis == "random" else self.mode
        params = MultiplexerParams.uniform(self.layout_, seed)
        self.stack_ = LayerStack(self.layout_, params, mode, self.basis, seed)
        self.head_ = init_head(self.layout_.D_out, len(self.classes_), rngmod.stream(seed, "init-head"))
        cfg = TrainConfig(
            lr=self.learning_rate, epochs=self.epochs, batch_size=self.batch_size,
            eval_every=max(1, self.epochs), seed=seed, threads=self.threads, encoder=self._encoder(),
        )
        _, _, self.history_ = train(self.stack_, self.head_, images, yi, cfg)
        self.n_features_in_ = side * side
        return self

    def readout(self, X) -> np.ndarray:
        """Exact readout distributions, shape ``(n, D_out)``."""
        check_is_fitted(self, "stack_")
        images = _as_images(np.asarray(X, dtype=float).reshape(len(X), -1), 2**self.n_idx)
        return predict_readout(self.stack_, encode_images(images, self._encoder()), threads=self.threads)

    def predict_proba(self, X) -> np.ndarray:
        return head_forward(self.readout(X), self.head_)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
