import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from pcsqcnn import CanvasTransformer, PCSQCNNClassifier


@pytest.fixture
def toy():
    # class 0 lights the left half, class 1 the right half
    rng = np.random.default_rng(0)
    X = rng.random((40, 4, 4)) * 0.2
    y = np.repeat(["left", "right"], 20)
    X[:20, :, :2] += 0.8
    X[20:, :, 2:] += 0.8
    return X, y


def test_params_and_clone():
    clf = PCSQCNNClassifier(n_idx=2, Q=1, n_f=1, epochs=5)
    p = clf.get_params()
    assert p["n_idx"] == 2 and p["learning_rate"] == 3e-2
    assert clone(clf).get_params() == p


def test_fit_predict_toy(toy):
    X, y = toy
    clf = PCSQCNNClassifier(n_idx=2, Q=1, n_f=1, epochs=60, batch_size=40, random_state=1).fit(X, y)
    assert list(clf.classes_) == ["left", "right"]
    proba = clf.predict_proba(X)
    assert proba.shape == (40, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert clf.score(X, y) >= 0.9
    assert clf.readout(X.reshape(40, -1)).shape == (40, clf.layout_.D_out)


def test_fit_is_deterministic(toy):
    X, y = toy
    a = PCSQCNNClassifier(n_idx=2, Q=1, n_f=1, epochs=3, random_state=4).fit(X, y)
    b = PCSQCNNClassifier(n_idx=2, Q=1, n_f=1, epochs=3, random_state=4).fit(X, y)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


def test_rejects_single_class_and_unfitted(toy):
    X, _ = toy
    with pytest.raises(ValueError):
        PCSQCNNClassifier(n_idx=2, Q=1, n_f=1).fit(X, np.zeros(40))
    with pytest.raises(Exception):
        PCSQCNNClassifier(n_idx=2).predict(X)


def test_canvas_pipeline():
    rng = np.random.default_rng(1)
    X = rng.random((20, 8, 8))
    y = np.arange(20) % 2
    t = CanvasTransformer(resize=4, canvas=8, max_offset=2, random_state=0)
    Z = t.fit_transform(X)
    assert Z.shape == (20, 64)
    assert np.array_equal(Z, t.transform(X))
    pipe = make_pipeline(t, PCSQCNNClassifier(n_idx=3, Q=2, n_f=1, epochs=1, batch_size=20))
    assert pipe.fit(X, y).predict(X).shape == (20,)
    with pytest.raises(ValueError):
        CanvasTransformer(resize=4, canvas=8, max_offset=3).fit(X)
