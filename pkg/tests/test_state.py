import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcsqcnn.state import StateTensor, apply_operator, build_layout, merge_axes, split_axis
from pcsqcnn.symmetry import random_unitary


@pytest.mark.parametrize(
    "args, n_tot, n_l, n_meas, d_out",
    [
        ((4, 1, 3), 11, 4, 11, 2048),
        ((5, 3, 2), 12, 3, 8, 256),
        ((1, 1, 1), 3, 1, 3, 8),
    ],
)
def test_layout_derived_fields(args, n_tot, n_l, n_meas, d_out):
    lay = build_layout(*args)
    assert (lay.n_tot, lay.n_l, lay.n_meas, lay.D_out) == (n_tot, n_l, n_meas, d_out)


@pytest.mark.parametrize("args", [(2, 3, 1), (2, 0, 1), (2, 1, 0), (0, 1, 1)])
def test_layout_rejects_bad_shapes(args):
    with pytest.raises(ValueError):
        build_layout(*args)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 3))
def test_layout_identities(n_idx, Q, n_f):
    if Q > n_idx:
        return
    lay = build_layout(n_idx, Q, n_f)
    assert lay.n_tot == 2 * n_idx + n_f
    assert lay.n_meas == 2 * lay.n_l + n_f
    assert lay.D_out == 2 ** (2 * lay.n_l + n_f)


def _random_state(rng, shape, axes):
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return StateTensor(a, axes)


def test_identity_operator_is_bitwise_noop(rng):
    s = _random_state(rng, (4, 4, 2), ("x", "y", "f"))
    out = apply_operator(s, np.eye(4), "y")
    assert np.array_equal(out.amplitudes, s.amplitudes)


def test_pauli_x_flips_feature():
    a = np.zeros((4, 4, 2), dtype=complex)
    a[..., 1] = 1.0
    out = apply_operator(StateTensor(a, ("x", "y", "f")), np.array([[0, 1], [1, 0]]), "f")
    assert np.all(out.amplitudes[..., 0] == 1.0) and np.all(out.amplitudes[..., 1] == 0.0)


def test_unitary_preserves_norm(rng):
    s = _random_state(rng, (4, 2, 2), ("x", "y", "f"))
    out = apply_operator(s, random_unitary(4, rng), "x")
    assert out.squared_norm() == pytest.approx(s.squared_norm(), rel=1e-12)


def test_multi_axis_operator_matches_kron(rng):
    s = _random_state(rng, (2, 4, 2), ("x", "y", "f"))
    A, B = random_unitary(2, rng), random_unitary(4, rng)
    joint = apply_operator(s, np.kron(A, B), ("x", "y"))
    seq = apply_operator(apply_operator(s, A, "x"), B, "y")
    np.testing.assert_allclose(joint.amplitudes, seq.amplitudes, atol=1e-13)


def test_operator_dimension_mismatch(rng):
    s = _random_state(rng, (4, 4, 2), ("x", "y", "f"))
    with pytest.raises(ValueError):
        apply_operator(s, np.eye(3), "x")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_apply_operator_is_linear(seed, alpha, beta):
    g = np.random.default_rng(seed)
    psi = _random_state(g, (4, 2, 2), ("x", "y", "f"))
    phi = _random_state(g, (4, 2, 2), ("x", "y", "f"))
    op = g.standard_normal((4, 4)) + 1j * g.standard_normal((4, 4))
    lhs = apply_operator(psi.replace(alpha * psi.amplitudes + beta * phi.amplitudes), op, "x").amplitudes
    rhs = alpha * apply_operator(psi, op, "x").amplitudes + beta * apply_operator(phi, op, "x").amplitudes
    np.testing.assert_allclose(lhs, rhs, atol=1e-11)


def test_split_lsb_index_arithmetic():
    a = np.zeros((8, 1), dtype=complex)
    a[5, 0] = 1.0
    s = split_axis(StateTensor(a, ("x", "f")), "x", "lsb", "c")
    assert s.axes == ("x", "f", "c")
    assert s.amplitudes[2, 0, 1] == 1.0  # 5 = 2*2 + 1


def test_split_alias_index_arithmetic():
    a = np.zeros((8, 1), dtype=complex)
    a[6, 0] = 1.0
    s = split_axis(StateTensor(a, ("x", "f")), "x", "alias", "c")
    assert s.amplitudes[2, 0, 1] == 1.0  # 6 = 2 + 1*4


@pytest.mark.parametrize("position", ["lsb", "alias"])
def test_split_merge_roundtrip_bitwise(rng, position):
    s = _random_state(rng, (3, 8, 4, 2), ("batch", "x", "y", "f"))
    back = merge_axes(split_axis(s, "y", position, "c"), ("y", "c"), position)
    assert back.axes == s.axes
    assert np.array_equal(back.amplitudes, s.amplitudes)


def test_split_rejects_non_power_of_two(rng):
    s = _random_state(rng, (6, 2), ("x", "f"))
    with pytest.raises(ValueError):
        split_axis(s, "x", "lsb", "c")
    with pytest.raises(ValueError):
        split_axis(_random_state(rng, (4, 2), ("x", "f")), "x", "middle", "c")


def test_qubit_bookkeeping_after_split(rng):
    s = _random_state(rng, (8, 8, 2), ("x", "y", "f"))
    s2 = split_axis(split_axis(s, "x", "lsb", "cx"), "y", "alias", "cy")
    assert s2.qubits() == s.qubits() == 7
