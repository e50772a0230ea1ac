"""Raster primitive tests: CIELAB against an independent reference, crops, sharpening, PNG I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pengauge.errors import PengaugeError
from pengauge.imaging import (
    BinaryMask,
    Image,
    LabeledMask,
    center_crop,
    lab_to_rgb,
    read_binary_mask,
    read_image,
    read_labeled_mask,
    rgb_to_lab,
    sharpen,
    write_binary_mask,
    write_image,
    write_labeled_mask,
)


def solid(w, h, color):
    return Image(np.full((h, w, 3), color, dtype=np.uint8))


class TestRgbToLab:
    def test_black_is_zero(self):
        lab = rgb_to_lab(solid(2, 2, (0, 0, 0))).pixels
        assert np.allclose(lab, 0.0)

    def test_white_point_maps_to_l100(self):
        lab = rgb_to_lab(solid(2, 2, (255, 255, 255))).pixels
        assert np.allclose(lab[..., 0], 100.0, atol=1e-6)
        assert np.allclose(lab[..., 1:], 0.0, atol=1e-6)

    def test_mid_gray(self):
        # frozen from the OpenCV reference implementation: L = 50.034
        lab = rgb_to_lab(solid(1, 1, (119, 119, 119))).pixels[0, 0]
        assert lab[0] == pytest.approx(50.0, abs=0.5)
        assert lab[1] == pytest.approx(0.0, abs=1e-6)
        assert lab[2] == pytest.approx(0.0, abs=1e-6)

    def test_matches_opencv_reference(self):
        cv2 = pytest.importorskip("cv2")
        rng = np.random.default_rng(7)
        arr = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
        ours = rgb_to_lab(Image(arr)).pixels
        ref = cv2.cvtColor(arr.astype(np.float32) / 255.0, cv2.COLOR_RGB2Lab).astype(np.float64)
        # reference uses slightly different white-point constants; 0.5 covers it
        assert np.abs(ours - ref).max() < 0.5

    @given(st.integers(0, 255))
    def test_gray_axis_has_zero_chroma(self, v):
        lab = rgb_to_lab(solid(1, 1, (v, v, v))).pixels[0, 0]
        assert abs(lab[1]) < 1e-6 and abs(lab[2]) < 1e-6

    def test_lab_roundtrip(self):
        rng = np.random.default_rng(3)
        arr = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        back = lab_to_rgb(rgb_to_lab(Image(arr)).pixels)
        assert np.array_equal(back, arr)


class TestCenterCrop:
    def test_half_crop_of_full_hd(self):
        img = Image(np.zeros((1080, 1920, 3), dtype=np.uint8))
        img.pixels[270:810, 480:1440] = 9
        out = center_crop(img, 0.5)
        assert (out.width, out.height) == (960, 540)
        assert (out.pixels == 9).all()

    def test_identity(self):
        rng = np.random.default_rng(0)
        img = Image(rng.integers(0, 256, (7, 9, 3), dtype=np.uint8))
        out = center_crop(img, 1.0)
        assert np.array_equal(out.pixels, img.pixels)

    def test_odd_crop_indices(self):
        # 10x10 at 0.3 -> the 3x3 block at rows/cols 3..5
        base = np.arange(100, dtype=np.uint8).reshape(10, 10)
        img = Image(np.stack([base] * 3, axis=-1))
        out = center_crop(img, 0.3)
        assert (out.width, out.height) == (3, 3)
        assert np.array_equal(out.pixels[..., 0], base[3:6, 3:6])

    def test_rejects_bad_fraction(self):
        img = solid(4, 4, (1, 1, 1))
        for f in (0.0, -0.5, 1.5):
            with pytest.raises(PengaugeError):
                center_crop(img, f)

    def test_per_axis_fractions(self):
        img = solid(20, 10, (1, 1, 1))
        out = center_crop(img, (0.5, 1.0))
        assert (out.width, out.height) == (10, 10)


class TestSharpen:
    def test_uniform_unchanged(self):
        img = solid(6, 5, (13, 200, 77))
        assert np.array_equal(sharpen(img).pixels, img.pixels)

    def test_single_white_pixel(self):
        img = solid(5, 5, (0, 0, 0))
        img.pixels[2, 2] = 255
        out = sharpen(img).pixels[..., 0]
        assert out[2, 2] == 255  # 5*255 clamps
        for r, c in [(1, 2), (3, 2), (2, 1), (2, 3)]:
            assert out[r, c] == 0  # -255 clamps
        assert out[1, 1] == 0  # corner taps are zero

    def test_step_edge_matches_1d_oracle(self):
        # rows constant -> 2-d kernel collapses to the 1-d kernel [-1, 3, -1]
        row = np.array([50, 50, 50, 180, 180], dtype=np.int64)
        padded = np.concatenate([[row[0]], row, [row[-1]]])
        oracle = np.clip(np.array([3 * padded[i + 1] - padded[i] - padded[i + 2] for i in range(5)]), 0, 255)
        img = Image(np.stack([np.tile(row.astype(np.uint8), (5, 1))] * 3, axis=-1))
        out = sharpen(img).pixels[2, :, 0]
        assert np.array_equal(out, oracle)
        assert out[3] > 180  # overshoot on the bright side


class TestMaskIO:
    def test_binary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        mask = BinaryMask(rng.random((32, 32)) < 0.5)
        p = tmp_path / "m.png"
        write_binary_mask(mask, p)
        back = read_binary_mask(p)
        assert np.array_equal(back.bits, mask.bits)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 32), st.integers(1, 32), st.integers(0, 2**32 - 1))
    def test_binary_roundtrip_property(self, w, h, seed):
        import io

        rng = np.random.default_rng(seed)
        mask = BinaryMask(rng.random((h, w)) < rng.random())
        buf = io.BytesIO()
        write_binary_mask(mask, buf)
        buf.seek(0)
        assert np.array_equal(read_binary_mask(buf).bits, mask.bits)

    def test_out_of_palette_rejected(self, tmp_path):
        from PIL import Image as PILImage

        arr = np.zeros((4, 4), dtype=np.uint8)
        arr[1, 1] = 7
        p = tmp_path / "bad.png"
        PILImage.fromarray(arr, mode="L").save(p)
        with pytest.raises(PengaugeError, match="out-of-palette"):
            read_binary_mask(p)

    def test_labeled_roundtrip_and_palette(self, tmp_path):
        rng = np.random.default_rng(5)
        mask = LabeledMask(rng.integers(0, 5, (16, 16), dtype=np.uint8))
        p = tmp_path / "lm.png"
        write_labeled_mask(mask, p)
        assert np.array_equal(read_labeled_mask(p).classes, mask.classes)

        from PIL import Image as PILImage

        PILImage.fromarray(np.full((4, 4), 9, dtype=np.uint8), mode="L").save(tmp_path / "bad.png")
        with pytest.raises(PengaugeError, match="out-of-palette"):
            read_labeled_mask(tmp_path / "bad.png")


class TestImageIO:
    def test_full_hd_pixel_count(self, tmp_path):
        rng = np.random.default_rng(2)
        img = Image(rng.integers(0, 256, (1080, 1920, 3), dtype=np.uint8))
        p = tmp_path / "frame.png"
        write_image(img, p)
        back = read_image(p)
        assert back.width * back.height == 2_073_600
        assert np.array_equal(back.pixels, img.pixels)

    def test_corrupt_file(self, tmp_path):
        p = tmp_path / "junk.png"
        p.write_bytes(b"not a png at all")
        with pytest.raises(PengaugeError, match="corrupt-file"):
            read_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PengaugeError, match="missing-file"):
            read_image(tmp_path / "nope.png")
