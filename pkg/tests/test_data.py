import struct

import numpy as np
import pytest

from pcsqcnn.data import (
    DatasetSpec,
    IDXFormatError,
    balanced_subset,
    build_benchmark,
    load_idx,
    write_idx,
)


@pytest.fixture
def idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    imgs = rng.integers(0, 256, size=(60, 28, 28), dtype=np.uint8)
    imgs[0, 0, 0] = 255
    imgs[0, 0, 1] = 0
    labels = np.arange(60) % 10
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(ip, lp, imgs, labels)
    return ip, lp, imgs, labels


def test_idx_round_trip(idx_pair):
    ip, lp, imgs, labels = idx_pair
    X, y = load_idx(ip, lp)
    assert X.dtype == np.float64 and X.shape == (60, 28, 28)
    assert X[0, 0, 0] == 1.0 and X[0, 0, 1] == 0.0
    np.testing.assert_array_equal(X * 255, imgs)
    np.testing.assert_array_equal(y, labels)


def test_idx_header_layout(idx_pair):
    ip, lp, *_ = idx_pair
    assert struct.unpack(">4I", ip.read_bytes()[:16]) == (0x803, 60, 28, 28)
    assert struct.unpack(">2I", lp.read_bytes()[:8]) == (0x801, 60)


def test_bad_magic_reports_offset(idx_pair, tmp_path):
    ip, lp, *_ = idx_pair
    raw = bytearray(ip.read_bytes())
    raw[3] = 0x01
    bad = tmp_path / "bad.idx"
    bad.write_bytes(bytes(raw))
    with pytest.raises(IDXFormatError) as e:
        load_idx(bad, lp)
    assert e.value.offset == 0 and "magic" in str(e.value)


def test_truncated_payload(idx_pair, tmp_path):
    ip, lp, *_ = idx_pair
    cut = tmp_path / "cut.idx"
    cut.write_bytes(ip.read_bytes()[:-5])
    with pytest.raises(IDXFormatError, match="truncated") as e:
        load_idx(cut, lp)
    assert e.value.offset == len(cut.read_bytes())


def test_count_mismatch(idx_pair, tmp_path):
    ip, _, imgs, labels = idx_pair
    ip2, lp2 = tmp_path / "a.idx", tmp_path / "b.idx"
    write_idx(ip2, lp2, imgs, labels[:59])
    with pytest.raises(IDXFormatError, match="count"):
        load_idx(ip, lp2)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_idx(tmp_path / "none", tmp_path / "none2")


def test_balanced_subset_rules():
    labels = np.arange(200) % 10
    idx = balanced_subset(labels, 7, seed=3)
    assert np.all(np.bincount(labels[idx], minlength=10) == 7)
    assert np.array_equal(idx, balanced_subset(labels, 7, seed=3))
    assert not np.array_equal(idx, balanced_subset(labels, 7, seed=4))
    with pytest.raises(ValueError, match="class"):
        balanced_subset(labels, 21, seed=0)


def _spec(ip, lp, **kw):
    return DatasetSpec(str(ip), str(lp), str(ip), str(lp), **kw)


def test_translated_benchmark(idx_pair):
    ip, lp, *_ = idx_pair
    spec = _spec(ip, lp, per_class=3, seed=11)
    a, b = build_benchmark(spec), build_benchmark(spec)
    assert a.train_images.shape == (30, 32, 32) and a.test_images.shape == (60, 32, 32)
    assert np.array_equal(a.train_images, b.train_images) and np.array_equal(a.test_offsets, b.test_offsets)
    assert np.abs(a.train_offsets).max() <= 8 and np.abs(a.test_offsets).max() <= 8
    assert a.train_images.min() >= 0.0 and a.train_images.max() <= 1.0
    c = build_benchmark(_spec(ip, lp, per_class=3, seed=12))
    assert not np.array_equal(a.train_offsets, c.train_offsets)


def test_offsets_cover_range(idx_pair):
    ip, lp, *_ = idx_pair
    b = build_benchmark(_spec(ip, lp, per_class=None, max_offset=2, seed=0))
    assert set(np.unique(b.train_offsets)) == {-2, -1, 0, 1, 2}


def test_full_regime_centres_28_on_32(idx_pair):
    ip, lp, imgs, _ = idx_pair
    b = build_benchmark(_spec(ip, lp, regime="full", per_class=None, resize=28, canvas=32))
    X = b.test_images
    assert X.shape == (60, 32, 32)
    assert not X[:, :2].any() and not X[:, 30:].any() and not X[:, :, :2].any() and not X[:, :, 30:].any()
    np.testing.assert_array_equal(X[:, 2:30, 2:30] * 255, imgs)


def test_spec_validation(idx_pair):
    ip, lp, *_ = idx_pair
    with pytest.raises(ValueError):
        DatasetSpec(regime="rotated")
    with pytest.raises(ValueError):
        DatasetSpec(resize=16, canvas=32, max_offset=9)
    with pytest.raises(ValueError, match="class"):
        build_benchmark(_spec(ip, lp, per_class=7))
    with pytest.raises(ValueError, match="paths"):
        build_benchmark(DatasetSpec())


def test_digits_source_split_is_disjoint():
    b = build_benchmark(DatasetSpec(source="sklearn-digits", per_class=20, resize=8, canvas=16, max_offset=4))
    assert b.train_images.shape == (200, 16, 16)
    assert len(b.test_labels) == 1797 - 200
