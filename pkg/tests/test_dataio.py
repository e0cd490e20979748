import os

import numpy as np
import pytest

from robustdepth.dataio import (
    PadOffsets,
    crop_back,
    random_crop,
    read_depth_png16,
    read_manifest,
    read_rgb_png,
    resize_depth_nearest,
    resize_rgb_bilinear,
    write_depth_png16,
    write_manifest,
    write_rgb_png,
    zero_pad,
    SampleRecord,
)
from robustdepth.depthmap import DepthMap, RgbImage
from robustdepth.errors import DataError
from robustdepth.synthetic import generate_synthetic_scene


def _random_depth(rng, h=24, w=32, lo=0.5, hi=60.0, holes=0.3):
    values = rng.uniform(lo, hi, size=(h, w)).astype(np.float32)
    valid = rng.random((h, w)) > holes
    values[~valid] = 0.0
    return DepthMap(values=values, valid=valid)


def test_depth_png16_worked_values(tmp_path):
    values = np.array([[20.0, 0.0], [5.0, 255.996]], dtype=np.float32)
    valid = np.array([[True, False], [True, True]])
    d = DepthMap(values=values, valid=valid)
    path = str(tmp_path / "d.png")
    write_depth_png16(d, path)
    back = read_depth_png16(path)
    # raw 5120 = 20.0 m * 256
    assert back.values[0, 0] == pytest.approx(20.0)
    assert not back.valid[0, 1]
    assert back.valid.sum() == 3


def test_depth_png16_round_trip_bound(tmp_path):
    rng = np.random.default_rng(21)
    d = _random_depth(rng)
    path = str(tmp_path / "d.png")
    write_depth_png16(d, path)
    back = read_depth_png16(path)
    assert np.array_equal(back.valid, d.valid)
    err = np.abs(back.values[d.valid] - d.values[d.valid])
    assert err.max() <= 1 / (2 * 256.0) + 1e-9


def test_depth_png16_overflow(tmp_path):
    d = DepthMap(values=np.full((2, 2), 300.0, np.float32), valid=np.ones((2, 2), bool))
    with pytest.raises(ValueError, match="overflow"):
        write_depth_png16(d, str(tmp_path / "d.png"))


def test_depth_png16_rejects_rgb_file(tmp_path):
    img = RgbImage(values=np.zeros((4, 4, 3), np.float32))
    path = str(tmp_path / "rgb.png")
    write_rgb_png(img, path)
    with pytest.raises(DataError, match="16-bit"):
        read_depth_png16(path)


def test_rgb_png_round_trip(tmp_path):
    rng = np.random.default_rng(22)
    img = RgbImage(values=(rng.integers(0, 256, size=(8, 8, 3)) / 255.0).astype(np.float32))
    path = str(tmp_path / "rgb.png")
    write_rgb_png(img, path)
    back = read_rgb_png(path)
    np.testing.assert_allclose(back.values, img.values, atol=1e-7)


def test_resize_identity_and_constant():
    rng = np.random.default_rng(23)
    img = RgbImage(values=rng.random((12, 16, 3)).astype(np.float32))
    same = resize_rgb_bilinear(img, 16, 12)
    np.testing.assert_array_equal(same.values, img.values)

    const = RgbImage(values=np.full((12, 16, 3), 0.25, np.float32))
    small = resize_rgb_bilinear(const, 5, 7)
    np.testing.assert_allclose(small.values, 0.25, atol=1 / 255 + 1e-7)

    d = DepthMap(values=np.full((12, 16), 3.0, np.float32), valid=np.ones((12, 16), bool))
    for w, h in ((16, 12), (8, 6), (5, 9)):
        out = resize_depth_nearest(d, w, h)
        assert out.values.shape == (h, w)
        np.testing.assert_array_equal(out.values, 3.0)


def test_resize_halving_dimensions():
    rng = np.random.default_rng(24)
    img = RgbImage(values=rng.random((480, 640, 3)).astype(np.float32))
    out = resize_rgb_bilinear(img, 320, 240)
    assert (out.height, out.width) == (240, 320)


def test_depth_resize_never_crosses_validity_edge():
    # Left half valid 2 m, right half invalid garbage: any interpolation
    # would leak; nearest sampling must yield only 2 m or invalid.
    values = np.zeros((16, 16), np.float32)
    values[:, :8] = 2.0
    valid = np.zeros((16, 16), bool)
    valid[:, :8] = True
    d = DepthMap(values=values, valid=valid)
    out = resize_depth_nearest(d, 7, 5)
    assert set(np.unique(out.values[out.valid])) == {2.0}


def test_zero_pad_and_crop_back():
    rng = np.random.default_rng(25)
    img = RgbImage(values=rng.random((370, 1240, 3)).astype(np.float32))
    padded, off = zero_pad(img, 1248, 384)
    assert padded.values.shape == (384, 1248, 3)
    assert off == PadOffsets(top=14, left=0, src_height=370, src_width=1240)
    # padded region exactly zero (top rows and right columns)
    assert padded.values[:14].max() == 0.0
    assert padded.values[:, 1240:].max() == 0.0
    back = crop_back(padded, off)
    np.testing.assert_array_equal(back.values, img.values)


def test_zero_pad_identity_when_already_target():
    img = RgbImage(values=np.random.default_rng(0).random((384, 1248, 3)).astype(np.float32))
    padded, off = zero_pad(img, 1248, 384)
    assert off.top == 0 and off.left == 0
    np.testing.assert_array_equal(padded.values, img.values)


def test_zero_pad_rejects_oversize():
    img = RgbImage(values=np.zeros((400, 100, 3), np.float32))
    with pytest.raises(ValueError):
        zero_pad(img, 1248, 384)


def test_random_crop_deterministic_and_aligned():
    rng1 = np.random.default_rng(31)
    rng2 = np.random.default_rng(31)
    base = np.random.default_rng(32)
    img = RgbImage(values=base.random((300, 400, 3)).astype(np.float32))
    depth = DepthMap(values=base.uniform(1, 5, (300, 400)).astype(np.float32),
                     valid=np.ones((300, 400), bool))
    c1 = random_crop(img, depth, 320, 240, rng1)
    with pytest.raises(ValueError):
        random_crop(img, depth, 500, 240, np.random.default_rng(0))
    c2 = random_crop(img, depth, 320, 240, rng2)
    np.testing.assert_array_equal(c1[0].values, c2[0].values)
    np.testing.assert_array_equal(c1[1].values, c2[1].values)
    assert c1[0].values.shape == (240, 320, 3)


def test_random_crop_identity_when_exact():
    img = RgbImage(values=np.zeros((240, 320, 3), np.float32))
    depth = DepthMap(values=np.ones((240, 320), np.float32), valid=np.ones((240, 320), bool))
    cimg, cdep = random_crop(img, depth, 320, 240, np.random.default_rng(0))
    assert cimg.values.shape == (240, 320, 3)
    np.testing.assert_array_equal(cdep.values, depth.values)


def test_random_crop_origin_roughly_uniform():
    # chi-square sanity over the crop-origin distribution; origins are
    # recovered by stamping the row index into the depth raster
    rng = np.random.default_rng(33)
    img = RgbImage(values=np.zeros((12, 10, 3), np.float32))
    stamped = DepthMap(
        values=(np.arange(12, dtype=np.float32)[:, None] + 1.0).repeat(10, axis=1),
        valid=np.ones((12, 10), bool),
    )
    n_rows = 12 - 8 + 1
    counts = np.zeros(n_rows)
    draws = 10000
    for _ in range(draws):
        _, cdep = random_crop(img, stamped, 10, 8, rng)
        counts[int(cdep.values[0, 0]) - 1] += 1
    expected = draws / n_rows
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # 4 dof; p=0.001 critical value 18.47
    assert chi2 < 18.47


def test_manifest_round_trip(tmp_path):
    rgb, depth = generate_synthetic_scene("low", 32, 32, seed=1)
    rgb_path = str(tmp_path / "a_rgb.png")
    depth_path = str(tmp_path / "a_depth.png")
    write_rgb_png(rgb, rgb_path)
    write_depth_png16(depth, depth_path)
    rec = SampleRecord("a", rgb_path, depth_path, "low", "synthetic")
    manifest = str(tmp_path / "m.tsv")
    write_manifest([rec], manifest)
    back = read_manifest(manifest)
    assert len(back) == 1
    assert back[0].image_id == "a"
    assert back[0].range_tag == "low"


def test_manifest_errors(tmp_path):
    manifest = str(tmp_path / "m.tsv")
    with open(manifest, "w") as f:
        f.write("a\tmissing_rgb.png\tmissing_depth.png\tlow\tsynthetic\n")
    with pytest.raises(DataError, match="not found"):
        read_manifest(manifest)
    with open(manifest, "w") as f:
        f.write("a\tb\tc\n")
    with pytest.raises(DataError, match="5 tab-separated"):
        read_manifest(manifest)
    with pytest.raises(DataError):
        read_manifest(str(tmp_path / "nope.tsv"))


def test_synthetic_scene_deterministic_and_bounded():
    a_rgb, a_d = generate_synthetic_scene("low", 64, 64, seed=5)
    b_rgb, b_d = generate_synthetic_scene("low", 64, 64, seed=5)
    np.testing.assert_array_equal(a_rgb.values, b_rgb.values)
    np.testing.assert_array_equal(a_d.values, b_d.values)
    assert a_d.valid.all()
    assert a_d.values.min() >= 0.5
    assert a_d.values.max() <= 8.0

    c_rgb, c_d = generate_synthetic_scene("low", 64, 64, seed=6)
    assert not np.array_equal(a_d.values, c_d.values)


def test_synthetic_scene_max_depth_cap():
    _, lo = generate_synthetic_scene("low", 64, 64, seed=7, max_depth=4.0)
    assert lo.max_depth() == pytest.approx(4.0)
    assert lo.max_depth() < 5.89
    _, hi = generate_synthetic_scene("low", 64, 64, seed=7, max_depth=7.5)
    assert hi.max_depth() > 5.89
    _, big = generate_synthetic_scene("high", 64, 64, seed=7)
    assert big.max_depth() == pytest.approx(80.0)


def test_synthetic_scene_rejects_bad_size():
    with pytest.raises(ValueError, match="divisible by 32"):
        generate_synthetic_scene("low", 60, 64, seed=0)
