import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pcsqcnn.encoding import EncoderConfig, bilinear_resize, encode_frqi, offset_bounds, place_and_translate
from pcsqcnn.state import apply_operator
from pcsqcnn.symmetry import shift


def test_constant_image_survives_resize():
    out = bilinear_resize(np.full((5, 7), 0.3), 16, 3)
    np.testing.assert_allclose(out, 0.3, atol=1e-15)


def test_half_pixel_ramp():
    # source coords for 2 -> 4: (i + .5)/2 - .5 = -0.25, 0.25, 0.75, 1.25 -> clamp -> 0, .25, .75, 1
    out = bilinear_resize(np.array([[0.0, 1.0], [0.0, 1.0]]), 4, 4)
    for row in out:
        np.testing.assert_allclose(row, [0.0, 0.25, 0.75, 1.0])


def test_identity_resize_is_bitwise(rng):
    img = rng.random((28, 28))
    assert np.array_equal(bilinear_resize(img, 28, 28), img)


def test_resize_rejects_empty():
    with pytest.raises(ValueError):
        bilinear_resize(np.zeros((4, 4)), 0, 3)


def test_centered_placement():
    out = place_and_translate(np.ones((16, 16)), 32)
    assert out[8:24, 8:24].all() and out.sum() == 256


def test_max_offset_placement():
    out = place_and_translate(np.ones((16, 16)), 32, (8, 8))
    assert out[16:32, 16:32].all() and out.sum() == 256


def test_offset_bounds_and_overflow():
    assert offset_bounds(16, 32) == (-8, 8)
    with pytest.raises(ValueError):
        place_and_translate(np.ones((16, 16)), 32, (9, 0))


def test_28_in_32_occupies_rows_2_to_29():
    out = place_and_translate(np.ones((28, 28)), 32)
    rows = np.flatnonzero(out.any(axis=1))
    assert rows[0] == 2 and rows[-1] == 29


def test_zero_patch_gives_zero_canvas():
    assert not place_and_translate(np.zeros((4, 4)), 8, (-2, 2)).any()


def test_encoding_examples():
    s = encode_frqi(np.full((4, 4), 0.5))
    np.testing.assert_allclose(s.amplitudes[..., 0], 1.0, atol=1e-15)
    np.testing.assert_allclose(s.amplitudes[..., 1], 0.0, atol=1e-15)
    s = encode_frqi(np.ones((4, 4)))
    np.testing.assert_allclose(s.amplitudes[..., 1], -1.0)
    img = np.full((2, 2), 0.5)
    img[1, 0] = 0.0
    s = encode_frqi(img)
    np.testing.assert_allclose(s.amplitudes[1, 0], [0.0, 1.0])


def test_encoding_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        encode_frqi(np.zeros((6, 6)))
    with pytest.raises(ValueError):
        EncoderConfig(a=1.0, b=1.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (8, 8), elements=st.floats(0, 1)), st.integers(1, 3))
def test_encoding_norm_and_auxiliary_qubits(img, n_f):
    s = encode_frqi(img, EncoderConfig(n_f=n_f))
    assert s.squared_norm() == pytest.approx(64.0, rel=1e-12)
    assert not s.amplitudes[..., 2:].any()


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(0, 1)), st.integers(0, 3))
def test_encoding_commutes_with_pixel_shift(img, k):
    s = encode_frqi(img)
    shifted = encode_frqi(np.roll(img, k, axis=0))
    T = np.linalg.matrix_power(shift(4), k)
    assert np.array_equal(apply_operator(s, T, "x").amplitudes, shifted.amplitudes)
