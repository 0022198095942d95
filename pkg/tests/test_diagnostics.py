import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcsqcnn.diagnostics import (
    check_sensitivity_bounds,
    class_balanced_subset,
    count_parameters,
    coordinate_bound,
    depth_family_inputs,
    gradient_norms,
    landscape_probe,
    layer_energies,
    loss_histogram,
    quantum_masks,
)
from pcsqcnn.encoding import EncoderConfig
from pcsqcnn.head import HeadParams, head_loss, init_head
from pcsqcnn.layers import LayerStack, MultiplexerParams
from pcsqcnn.state import build_layout


@pytest.mark.parametrize(
    "n_idx,Q,n_f,qubits,quantum,head",
    [
        (1, 1, 1, 3, 16, 90),
        (5, 1, 1, 11, 4096, 20490),
        (5, 3, 3, 13, 147456, 5130),
        (4, 1, 3, 11, 16384, 20490),
        (5, 3, 2, 12, 36864, 2570),
    ],
)
def test_accounting_rows(n_idx, Q, n_f, qubits, quantum, head):
    c = count_parameters(build_layout(n_idx, Q, n_f))
    assert (c["total_qubits"], c["quantum"], c["classifier"]) == (qubits, quantum, head)
    # independent count: allocate the parameter arrays and measure them
    assert MultiplexerParams.zeros(build_layout(n_idx, Q, n_f)).size == quantum


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 3))
def test_accounting_sum_matches_closed_form(n_idx, Q, n_f):
    if Q > n_idx:
        return
    c = count_parameters(build_layout(n_idx, Q, n_f))
    n_l = n_idx - Q + 1
    # blocks per layer: one branch at l = 1, four afterwards; 4**(n_l + Q - l) pixels
    brute = sum(4**n_f * (1 if l == 1 else 4) * 4 ** (n_l + Q - l) for l in range(1, Q + 1))
    assert c["quantum"] == brute == sum(c["per_layer"])
    assert c["readout_shape"] == (2**n_l, 2**n_l, 2**n_f)


def test_single_sample_norms_coincide(rng):
    G = rng.standard_normal((1, 12))
    masks = {"all": np.ones(12, bool)}
    r = gradient_norms(G, masks)["all"]
    assert r["G_D"] == pytest.approx(r["R_D"], rel=1e-14)


def test_cancelling_gradients(rng):
    g = rng.standard_normal(7)
    r = gradient_norms(np.stack([g, -g]), {"all": np.ones(7, bool)})["all"]
    assert r["G_D"] == 0.0
    assert r["R_D"] == pytest.approx(np.linalg.norm(g))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12))
def test_cross_term_identity(seed, n):
    # N^2 ||G_D||^2 = sum_i ||g_i||^2 + sum_{i != j} <g_i, g_j>
    G = np.random.default_rng(seed).standard_normal((n, 5))
    r = gradient_norms(G, {"all": np.ones(5, bool)})["all"]
    gram = G @ G.T
    assert n**2 * r["G_D"] ** 2 == pytest.approx(np.trace(gram) + (gram.sum() - np.trace(gram)), rel=1e-10)
    assert r["G_D"] <= r["R_D"] + 1e-12


def test_empty_gradient_set_rejected():
    with pytest.raises(ValueError, match="empty"):
        gradient_norms(np.zeros((0, 3)), {"all": np.ones(3, bool)})


def test_masks_partition_layers():
    lay = build_layout(3, 3, 1)
    m = quantum_masks(lay)
    c = count_parameters(lay)
    assert m["first"].sum() == c["per_layer"][0] and m["last"].sum() == c["per_layer"][-1]
    assert not (m["first"] & m["last"]).any()


def test_zero_image_energy_below_bound():
    lay = build_layout(2, 2, 1)
    stack = LayerStack(lay, MultiplexerParams.uniform(lay, 3))
    e = layer_energies(stack, np.zeros((4, 4)), EncoderConfig(n_f=1))
    assert all(0.0 <= v <= 4 * 4**1 for v in e)


def test_bound_check_report():
    lay = build_layout(2, 1, 1)
    r = check_sensitivity_bounds(lay, trials=5, seed=0)
    assert r["layer_energy_ok"] and r["head_bound_ok"]
    assert r["bound_constant"] == pytest.approx(80 * 1 / 3)
    assert r["per_coordinate_bound"] == pytest.approx(coordinate_bound(lay, 10))
    with pytest.raises(ValueError):
        check_sensitivity_bounds(lay, trials=1)


def test_class_balanced_subset_and_inputs():
    labels = np.repeat(np.arange(10), 15)[::-1]
    idx = class_balanced_subset(labels, 100)
    assert len(idx) == 100 and np.all(np.bincount(labels[idx]) == 10)
    assert np.all(np.diff(idx) > 0)
    with pytest.raises(ValueError):
        class_balanced_subset(labels, 200)
    imgs = np.random.default_rng(0).random((6, 8, 8))
    a, oa = depth_family_inputs(imgs, 2, 5)
    b, ob = depth_family_inputs(imgs, 2, 5)
    assert a.shape == (6, 4, 4) and np.array_equal(a, b) and np.array_equal(oa, ob)


def _readouts(rng, n=40, D=8):
    return rng.dirichlet(np.ones(D), size=n)


def test_histogram_shape_and_exact_rows(rng):
    lay = build_layout(2, 1, 1)
    head = init_head(lay.D_out, 10, rng)
    P = _readouts(rng, 4000, lay.D_out)
    labels = rng.integers(10, size=4000)
    h = loss_histogram(None, head, None, labels, [32, 128], 100, 3, 0, readouts=P)
    assert h[32].shape == (3, 40) and h["exact"].shape == (1, 40)
    np.testing.assert_allclose(h["exact"][0], head_loss(P, head, labels).reshape(40, 100).mean(axis=1))
    again = loss_histogram(None, head, None, labels, [32, 128], 100, 3, 0, readouts=P)
    assert np.array_equal(h[128], again[128])
    with pytest.raises(ValueError, match="divisible"):
        loss_histogram(None, head, None, labels[:-1], [32], 100, 1, 0, readouts=P[:-1])


def test_landscape_centre_and_skips(rng):
    head = init_head(8, 10, rng)
    P = _readouts(rng)
    labels = rng.integers(10, size=len(P))
    grid = np.linspace(-3, 3, 13)
    res = landscape_probe(head, P, labels, 128, grid)
    assert res["loss"][6, 6] == pytest.approx(float(head_loss(P, head, labels).mean()), rel=1e-12)
    assert res["valid_fraction"][6, 6] == 1.0 and res["skipped"] == 0
    P2 = P.copy()
    P2[0] = np.eye(8)[2]
    assert landscape_probe(head, P2, labels, 128, grid)["skipped"] == 1
    with pytest.raises(ValueError):
        landscape_probe(head, P, labels, 128, np.array([0.0, 1.0]))


def test_shot_noise_eigenvalues_halve(rng):
    from pcsqcnn.diagnostics import _top2

    p = rng.dirichlet(np.ones(6))
    C = np.diag(p) - np.outer(p, p)
    w1, _ = _top2(C / 100)
    w2, _ = _top2(C / 200)
    np.testing.assert_allclose(w2, w1 / 2, rtol=1e-12)
