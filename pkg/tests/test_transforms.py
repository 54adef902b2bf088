import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from codial import transforms as T
from codial.rng import RngStream, stream


def rand_img(rng, h=16, w=16, c=3):
    return rng.random((h, w, c)).astype(np.float32)


# -- rotate90 / hflip -------------------------------------------------------

def test_rotate_zero_turns_is_identity(rng):
    img = rand_img(rng, 5, 7)
    assert np.array_equal(T.rotate90(img, 0), img)


def test_rotate_inverse(rng):
    img = rand_img(rng, 6, 9)
    assert np.array_equal(T.rotate90(T.rotate90(img, 1), 3), img)


def test_rotate_permutation_oracle(rng):
    img = rand_img(rng, 2, 1, 1)
    out = T.rotate90(img, 1)
    assert out.shape == (1, 2, 1)
    h, w = img.shape[:2]
    expected = np.empty((w, h, 1), np.float32)
    for r in range(h):
        for c in range(w):
            expected[w - 1 - c, r] = img[r, c]
    assert np.array_equal(out, expected)
    assert out[0, 0, 0] == img[0, 0, 0] and out[0, 1, 0] == img[1, 0, 0]


def test_rotate_general_permutation_oracle(rng):
    img = rand_img(rng, 4, 6)
    out = T.rotate90(img, 1)
    for r in range(4):
        for c in range(6):
            assert np.array_equal(out[6 - 1 - c, r], img[r, c])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.integers(0, 7), st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**31))
def test_rotate_z4_law(a, b, h, w, seed):
    img = np.random.default_rng(seed).random((h, w, 3)).astype(np.float32)
    assert np.array_equal(T.rotate90(T.rotate90(img, a), b), T.rotate90(img, (a + b) % 4))


def test_hflip(rng):
    img = rand_img(rng, 5, 6)
    assert np.array_equal(T.hflip(T.hflip(img)), img)
    sym = np.concatenate([img, img[:, ::-1]], axis=1)
    assert np.array_equal(T.hflip(sym), sym)
    pair = np.array([[[0.2], [0.7]]], np.float32)
    assert np.array_equal(T.hflip(pair), np.array([[[0.7], [0.2]]], np.float32))


# -- warp -------------------------------------------------------------------

def test_zero_offset_warp_is_identity(rng):
    img = rand_img(rng, 64, 64)
    field = T.make_warp_field(64, 64, np.zeros((16, 2)))
    np.testing.assert_allclose(T.warp(img, field), img, atol=1e-6)


def test_warp_bound_on_64px():
    assert T.warp_bound(64, 64) == pytest.approx(6.4)
    for seed in range(50):
        f = T.sample_warp_field(64, 64, stream(seed, purpose="warp"))
        assert f.bound == pytest.approx(6.4)
        assert np.all(np.abs(f.offsets) <= 6.4)


def test_constant_field_is_translation(rng):
    img = rand_img(rng, 32, 40)
    field = T.make_warp_field(32, 40, np.tile([3.0, 0.0], (16, 1)))
    # direct oracle: shift rows down by 3 with mirror padding at the top
    expected = np.pad(img, ((3, 0), (0, 0), (0, 0)), mode="reflect")[:32]
    np.testing.assert_allclose(T.warp(img, field), expected, atol=1e-6)


def test_warp_rejects_excess_offset():
    with pytest.raises(ValueError):
        T.make_warp_field(64, 64, np.full((16, 2), 7.0))


def test_warp_changes_image(rng):
    img = rand_img(rng, 32, 32)
    out = T.warp(img, T.sample_warp_field(32, 32, stream(1)))
    assert out.shape == img.shape and not np.allclose(out, img)
    assert out.min() >= 0 and out.max() <= 1


# -- crop -------------------------------------------------------------------

def test_degenerate_crop_is_plain_resize(rng):
    img = rand_img(rng, 40, 40)
    cfg = T.AuxConfig(crop_area=(1.0, 1.0), crop_aspect=(1.0, 1.0), out_size=24)
    np.testing.assert_array_equal(T.random_crop(img, cfg, stream(0)), T.resize_bilinear(img, 24))


def test_crop_area_fraction_distribution():
    cfg = T.AuxConfig()
    g = stream(11, purpose="crop")
    fracs = []
    while len(fracs) < 10_000:
        fracs.extend(f for f, _ in T.sample_crop_box(64, 64, cfg, g).draws)
    assert min(fracs) >= 0.08 and max(fracs) <= 1.0
    ks = stats.kstest(fracs, stats.uniform(loc=0.08, scale=0.92).cdf).statistic
    assert ks < 0.02


@pytest.mark.parametrize("shape", [(8, 8), (31, 17), (64, 64), (50, 90)])
def test_crop_output_size(rng, shape):
    cfg = T.AuxConfig(out_size=32)
    for seed in range(5):
        assert T.random_crop(rand_img(rng, *shape), cfg, stream(seed)).shape == (32, 32, 3)


def test_crop_rejects_tiny_input(rng):
    with pytest.raises(ValueError):
        T.random_crop(rand_img(rng, 7, 10), T.AuxConfig(), stream(0))


def test_crop_box_within_bounds():
    cfg = T.AuxConfig()
    g = stream(5)
    for _ in range(500):
        b = T.sample_crop_box(30, 50, cfg, g)
        assert 0 <= b.top and b.top + b.height <= 30
        assert 0 <= b.left and b.left + b.width <= 50
        assert 3 / 4 <= b.aspect <= 4 / 3


def test_crop_fallback_is_centre_square():
    cfg = T.AuxConfig(crop_area=(1.0, 1.0), crop_aspect=(2.0, 2.0))
    b = T.sample_crop_box(20, 30, cfg, stream(0))
    assert b.fallback and (b.top, b.left, b.height, b.width) == (0, 5, 20, 20)


# -- colour jitter ------------------------------------------------------------

ONES = {"brightness": 1.0, "contrast": 1.0, "saturation": 1.0, "hue": 1.0}


def test_identity_factors(rng):
    img = rand_img(rng, 12, 12)
    np.testing.assert_allclose(T.color_jitter(img, T.AuxConfig(), stream(0), factors=ONES), img, atol=1e-6)


def test_brightness_halves(rng):
    img = rand_img(rng, 8, 8)
    out = T.color_jitter(img, T.AuxConfig(), stream(0), factors={**ONES, "brightness": 0.5}, order=["brightness"])
    np.testing.assert_allclose(out, img * 0.5, atol=1e-7)


def test_order_matters():
    # a saturated pixel: brightening then reducing contrast differs from the reverse because of clamping
    img = np.array([[[0.9, 0.9, 0.9]], [[0.1, 0.1, 0.1]]], np.float32)
    f = {**ONES, "brightness": 1.5, "contrast": 0.5}
    a = T.color_jitter(img, T.AuxConfig(), stream(0), factors=f, order=["brightness", "contrast"])
    b = T.color_jitter(img, T.AuxConfig(), stream(0), factors=f, order=["contrast", "brightness"])
    assert not np.allclose(a, b)


def test_hue_half_turn():
    red = np.array([[[1.0, 0.0, 0.0]]], np.float32)
    out = T.color_jitter(red, T.AuxConfig(), stream(0), factors={**ONES, "hue": 2.0}, order=["hue"])
    np.testing.assert_allclose(out, [[[0.0, 1.0, 1.0]]], atol=1e-6)  # 180 degrees: red -> cyan


def test_single_channel_jitter_only_brightness_contrast(rng):
    img = rand_img(rng, 8, 8, 1)
    out = T.color_jitter(img, T.AuxConfig(), stream(3))
    assert out.shape == img.shape
    assert out.min() >= 0 and out.max() <= 1


def test_jitter_in_range(rng):
    img = rand_img(rng, 10, 10)
    for seed in range(20):
        out = T.color_jitter(img, T.AuxConfig(), stream(seed))
        assert out.min() >= 0 and out.max() <= 1


# -- blur -------------------------------------------------------------------

def test_blur_kernel_size():
    assert T.blur_kernel_size(64, 64) == 7
    assert T.blur_kernel_size(16, 16) == 3
    assert T.blur_kernel_size(100, 40) == 5


def test_blur_constant_image():
    img = np.full((20, 20, 3), 0.42, np.float32)
    np.testing.assert_allclose(T.gaussian_blur(img, T.AuxConfig(), stream(0)), img, atol=1e-6)


def test_blur_tiny_sigma_is_near_identity(rng):
    img = rand_img(rng, 32, 32)
    np.testing.assert_allclose(T.gaussian_blur(img, T.AuxConfig(), None, sigma=0.1), img, atol=1e-3)


def test_blur_matches_dense_2d_convolution():
    img = np.zeros((15, 15, 1), np.float32)
    img[7, 7] = 1.0
    img[1, 13] = 1.0  # near the border to exercise reflection
    sigma, size = 1.0, T.blur_kernel_size(15, 15, 0.3)
    r = size // 2
    g = np.array([[np.exp(-(i * i + j * j) / 2.0) for j in range(-r, r + 1)] for i in range(-r, r + 1)])
    g /= g.sum()

    def refl(i, n):
        return -i if i < 0 else (2 * (n - 1) - i if i > n - 1 else i)

    expected = np.zeros((15, 15))
    for y in range(15):
        for x in range(15):
            expected[y, x] = sum(
                g[i + r, j + r] * img[refl(y + i, 15), refl(x + j, 15), 0]
                for i in range(-r, r + 1) for j in range(-r, r + 1)
            )
    out = T.blur_with_sigma(img, sigma, size)
    np.testing.assert_allclose(out[..., 0], expected, atol=1e-5)


def test_blur_sigma_draws_in_range(rng):
    cfg = T.AuxConfig()
    g = stream(2)
    for _ in range(200):
        s = T._uniform(g, *cfg.blur_sigma)
        assert 0.1 <= s <= 2.0


# -- make_views -------------------------------------------------------------

def test_make_views_labels(rng):
    views = T.make_views(rand_img(rng, 64, 64), T.AuxConfig(), stream(0))
    assert len(views) == 5
    assert sorted(v.label for v in views) == [0, 1, 2, 3, 4]
    assert all(v.image.shape == (64, 64, 3) for v in views)


def test_make_views_pipeline_reduction(rng):
    img = rand_img(rng, 48, 48)
    cfg = T.AuxConfig(flip=False, crop=False, jitter=False, blur=False, out_size=32)
    views = T.make_views(img, cfg, stream(0), flip=False)
    np.testing.assert_array_equal(views[0].image, T.resize_bilinear(T.trim(img, 2), 32))
    np.testing.assert_array_equal(views[2].image, T.rotate90(views[0].image, 2))
    np.testing.assert_array_equal(views[1].image, T.rotate90(views[0].image, 1))


def test_make_views_deterministic(rng):
    img = rand_img(rng, 64, 64)
    cfg = T.AuxConfig(blur=True)
    a = T.make_views(img, cfg, RngStream(9, 2, 17, "views"))
    b = T.make_views(img, cfg, RngStream(9, 2, 17, "views"))
    assert all(x.image.tobytes() == y.image.tobytes() for x, y in zip(a, b))
    c = T.make_views(img, cfg, RngStream(9, 2, 18, "views"))
    assert any(x.image.tobytes() != y.image.tobytes() for x, y in zip(a, c))


def test_make_views_feed_ten_pairs(rng):
    from itertools import combinations

    views = T.make_views(rand_img(rng, 32, 32), T.AuxConfig(out_size=32), stream(0))
    assert len(list(combinations([v.label for v in views], 2))) == 10


def test_views_use_different_crops(rng):
    img = rand_img(rng, 64, 64)
    cfg = T.AuxConfig(jitter=False, flip=False)
    views = T.make_views(img, cfg, stream(4))
    assert not np.array_equal(T.rotate90(views[1].image, 3), views[0].image)


def test_transform_group_laws_on_100_images():
    g = np.random.default_rng(0)
    for _ in range(100):
        img = g.random((g.integers(2, 20), g.integers(2, 20), 3)).astype(np.float32)
        a, b = g.integers(0, 4, 2)
        assert np.array_equal(T.rotate90(T.rotate90(img, a), b), T.rotate90(img, (a + b) % 4))
        assert np.array_equal(T.hflip(T.hflip(img)), img)
