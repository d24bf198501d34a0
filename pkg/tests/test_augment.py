import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yolomu.augment import (
    AugmentConfig,
    adjust_brightness,
    adjust_hue,
    adjust_saturation,
    augment_sample,
    hsv_to_rgb,
    letterbox,
    resize_bilinear,
    rgb_to_hsv,
    sample_params,
    to_grayscale,
)
from yolomu.imageio import ImageFormatError, decode_ppm, encode_ppm, read_image, write_image


def px(*rgb):
    return np.array([[rgb]], dtype=np.uint8)


def random_image(h, w, seed=0):
    return np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)


class TestResize:
    def test_checker(self):
        img = np.array([[[0] * 3, [255] * 3], [[255] * 3, [0] * 3]], np.uint8)
        assert resize_bilinear(img, 1, 1).tolist() == [[[128, 128, 128]]]

    def test_constant(self):
        img = np.full((7, 5, 3), (10, 200, 33), np.uint8)
        out = resize_bilinear(img, 13, 3)
        assert out.shape == (3, 13, 3) and np.all(out == img[0, 0])

    def test_full_frame_dims(self):
        img = np.zeros((1920, 2560, 3), np.uint8)
        assert resize_bilinear(img, 640, 640).shape == (640, 640, 3)

    def test_identity_size(self):
        img = random_image(6, 9)
        np.testing.assert_array_equal(resize_bilinear(img, 9, 6), img)

    def test_integer_downscale_averages(self):
        img = random_image(4, 4, 1)
        out = resize_bilinear(img, 2, 2)
        want = np.rint(img.reshape(2, 2, 2, 2, 3).mean(axis=(1, 3)))
        np.testing.assert_array_equal(out, want)

    def test_bad_size(self):
        with pytest.raises(ValueError):
            resize_bilinear(random_image(2, 2), 0, 3)


class TestHsv:
    def test_red(self):
        assert rgb_to_hsv(px(255, 0, 0))[0, 0].tolist() == [0.0, 1.0, 1.0]

    def test_gray(self):
        h, s, v = rgb_to_hsv(px(128, 128, 128))[0, 0]
        assert h == 0 and s == 0 and v == pytest.approx(128 / 255)

    def test_gray_round_trip_exact(self):
        grays = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1)
        np.testing.assert_array_equal(hsv_to_rgb(rgb_to_hsv(grays)), grays)

    def test_round_trip_random(self):
        pix = np.random.default_rng(0).integers(0, 256, (10_000, 3), dtype=np.uint8)
        back = hsv_to_rgb(rgb_to_hsv(pix))
        assert np.abs(back.astype(int) - pix).max() <= 1

    @given(st.tuples(*[st.integers(0, 255)] * 3))
    @settings(max_examples=300, deadline=None)
    def test_ranges(self, rgb):
        h, s, v = rgb_to_hsv(np.array(rgb, np.uint8))
        assert 0 <= h < 360 and 0 <= s <= 1 and 0 <= v <= 1


class TestColourOps:
    def test_hue_red(self):
        assert adjust_hue(px(255, 0, 0), 0.10).tolist() == [[[255, 153, 0]]]

    def test_hue_gray_fixed(self):
        img = to_grayscale(random_image(5, 5))
        np.testing.assert_array_equal(adjust_hue(img, 0.07), img)

    def test_hue_inverse(self):
        img = random_image(20, 20, 2)
        back = adjust_hue(adjust_hue(img, 0.1), -0.1)
        assert np.abs(back.astype(int) - img).max() <= 1

    def test_saturation(self):
        img = px(128, 64, 64)
        assert rgb_to_hsv(img)[0, 0, 1] == 0.5
        out = adjust_saturation(img, 0.75)
        h, s, v = rgb_to_hsv(out)[0, 0]
        assert s == pytest.approx(0.375) and v == pytest.approx(128 / 255)
        assert out.tolist() == [[[128, 80, 80]]]

    def test_saturation_ceiling(self):
        assert adjust_saturation(px(255, 0, 0), 1.25).tolist() == [[[255, 0, 0]]]

    def test_brightness(self):
        assert adjust_brightness(px(100, 100, 100), 1.05).tolist() == [[[105, 105, 105]]]
        assert adjust_brightness(px(255, 255, 255), 1.05).tolist() == [[[255, 255, 255]]]

    def test_unit_scales_are_identity(self):
        img = random_image(16, 16, 3)
        for out in (adjust_saturation(img, 1.0), adjust_brightness(img, 1.0), adjust_hue(img, 0.0)):
            assert np.abs(out.astype(int) - img).max() <= 1

    def test_grayscale(self):
        assert to_grayscale(px(255, 0, 0)).tolist() == [[[76, 76, 76]]]
        img = random_image(8, 8, 4)
        g = to_grayscale(img)
        assert np.all(g[..., 0] == g[..., 1]) and np.all(g[..., 1] == g[..., 2])
        np.testing.assert_array_equal(to_grayscale(g), g)

    def test_gray_survives_sat_and_hue(self):
        g = to_grayscale(random_image(8, 8, 5))
        np.testing.assert_array_equal(adjust_saturation(g, 1.2), g)
        np.testing.assert_array_equal(adjust_hue(g, -0.05), g)


class TestPipeline:
    def test_deterministic(self):
        img, boxes = random_image(40, 50, 6), [[0.5, 0.5, 0.2, 0.3]]
        cfg = AugmentConfig(target_size=32, master_seed=99, gray_probability=0.5)
        a = augment_sample(img, boxes, cfg, 7)
        b = augment_sample(img, boxes, cfg, 7)
        assert a[0].tobytes() == b[0].tobytes() and np.array_equal(a[1], b[1])

    def test_order_independent(self):
        cfg = AugmentConfig(master_seed=5)
        forward = [sample_params(cfg, i) for i in range(50)]
        backward = [sample_params(cfg, i) for i in reversed(range(50))][::-1]
        assert forward == backward

    def test_degenerate_config_is_resize(self):
        img = random_image(30, 20, 7)
        cfg = AugmentConfig(target_size=24, gray_probability=0, hue_limit=0, sat_limit=0, bright_limit=0)
        out, _ = augment_sample(img, np.zeros((0, 4)), cfg, 0)
        np.testing.assert_array_equal(out, resize_bilinear(img, 24, 24))

    def test_boxes_unchanged(self):
        boxes = np.random.default_rng(0).uniform(0, 1, (6, 4))
        _, out = augment_sample(random_image(10, 10), boxes, AugmentConfig(target_size=16), 3)
        assert out.tobytes() == boxes.tobytes()

    def test_bad_boxes(self):
        with pytest.raises(ValueError):
            augment_sample(random_image(4, 4), [[0.5, 0.5, 1.2, 0.1]], AugmentConfig(target_size=8), 0)

    def test_gray_frequency(self):
        cfg = AugmentConfig(master_seed=2024)
        hits = sum(sample_params(cfg, i)["grayscale"] for i in range(10_000))
        assert abs(hits / 10_000 - 0.15) <= 0.01

    def test_parameter_ranges(self):
        cfg = AugmentConfig(master_seed=1)
        for i in range(2000):
            p = sample_params(cfg, i)
            assert abs(p["hue_offset"]) <= 0.10
            assert 0.75 <= p["sat_scale"] <= 1.25 and 0.95 <= p["bright_scale"] <= 1.05

    def test_endpoint_sampling(self):
        cfg = AugmentConfig(sampling="endpoints")
        values = {round(sample_params(cfg, i)["sat_scale"], 12) for i in range(200)}
        assert values == {0.75, 1.25}

    def test_config_validation(self):
        for bad in ({"gray_probability": 1.5}, {"hue_limit": -0.1}, {"sampling": "gauss"}, {"target_size": 0}):
            with pytest.raises(ValueError):
                AugmentConfig(**bad)

    def test_letterbox(self):
        img = np.full((20, 40, 3), 200, np.uint8)
        canvas, scale, (left, top) = letterbox(img, 32)
        assert scale == 0.8 and (left, top) == (0, 8)
        assert np.all(canvas[:8] == 114) and np.all(canvas[8:24] == 200) and np.all(canvas[24:] == 114)

    def test_letterbox_boxes_follow_pixels(self):
        img = np.zeros((20, 40, 3), np.uint8)
        img[5:15, 10:20] = 255  # box cx=15/40, cy=10/20, w=10/40, h=10/20
        cfg = AugmentConfig(target_size=32, letterbox=True, gray_probability=0, hue_limit=0, sat_limit=0, bright_limit=0)
        out, boxes = augment_sample(img, [[15 / 40, 0.5, 0.25, 0.5]], cfg, 0)
        cx, cy, w, h = boxes[0] * 32
        assert (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2) == pytest.approx((8, 12, 16, 20))
        assert np.all(out[13:19, 9:15] == 255)


class TestPpm:
    def test_round_trip(self, tmp_path):
        img = random_image(7, 11, 8)
        write_image(tmp_path / "a.ppm", img)
        np.testing.assert_array_equal(read_image(tmp_path / "a.ppm"), img)
        assert (tmp_path / "a.ppm").read_bytes() == encode_ppm(img)

    def test_header_comments(self):
        data = b"P6\n# made by hand\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6])
        assert decode_ppm(data).tolist() == [[[1, 2, 3], [4, 5, 6]]]

    def test_errors(self):
        with pytest.raises(ImageFormatError):
            decode_ppm(b"P3\n1 1\n255\n0 0 0")
        with pytest.raises(ImageFormatError):
            decode_ppm(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(ImageFormatError):
            decode_ppm(b"P6\n1 1\n65535\n" + bytes(6))

    def test_png_via_pillow(self, tmp_path):
        pytest.importorskip("PIL")
        img = random_image(5, 6, 9)
        write_image(tmp_path / "a.png", img)
        np.testing.assert_array_equal(read_image(tmp_path / "a.png"), img)
