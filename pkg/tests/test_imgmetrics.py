import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from costroute.errors import ValidationError
from costroute.imgmetrics import Image, Kernel, convolve, gaussian_kernel, read_netpbm, sharpness, write_netpbm

from oracles import checkerboard, dense_blur, dense_sharpness

# 1-D normalizer: sum_{k=-3}^{3} exp(-k^2/2); centre = 1/Z^2 (mpmath, 30 digits)
CENTER_WEIGHT_SIGMA1 = 0.159241125690702454400733701248


def test_kernel_shape_and_center():
    k = gaussian_kernel(1.0)
    assert k.radius == 3 and k.weights.shape == (7, 7)
    assert k.weights[3, 3] == k.weights.max()
    assert abs(math.fsum(k.weights.ravel()) - 1.0) <= 1e-12
    assert k.weights[3, 3] == pytest.approx(CENTER_WEIGHT_SIGMA1, abs=1e-15)
    assert np.array_equal(k.weights, k.weights[::-1, :]) and np.array_equal(k.weights, k.weights[:, ::-1])
    assert gaussian_kernel(0.5).radius == 2
    for bad in (0.0, -1.0):
        with pytest.raises(ValidationError):
            gaussian_kernel(bad)


def test_identity_kernel_and_constant():
    rng = np.random.default_rng(0)
    img = Image(rng.uniform(size=(6, 5, 3)))
    assert np.array_equal(convolve(img, Kernel(np.array([[1.0]]))).pixels, img.pixels)
    for level in (0.0, 0.3, 1.0):
        const = Image(np.full((9, 4), level))
        assert np.array_equal(convolve(const, gaussian_kernel(1.0)).pixels, const.pixels)
        assert sharpness(const) == 0.0


def test_impulse_matches_dense_oracle():
    px = np.zeros((5, 5, 1))
    px[2, 2, 0] = 1.0
    got = convolve(Image(px), gaussian_kernel(1.0)).pixels
    assert np.max(np.abs(got - dense_blur(px))) <= 1e-15
    assert got.shape == px.shape


def test_checkerboard_fixture():
    px = checkerboard()[:, :, None]
    s = sharpness(Image(px))
    assert s == pytest.approx(dense_sharpness(px), rel=1e-12)
    blurred = convolve(Image(px), gaussian_kernel(1.0))
    assert sharpness(blurred) < s


def test_all_black():
    assert sharpness(Image(np.zeros((3, 3, 3)))) == 0.0


@pytest.mark.parametrize("shape", [(1, 1, 1), (1, 7, 1), (4, 9, 3), (11, 6, 1)])
def test_random_matches_dense_oracle(shape):
    px = np.random.default_rng(sum(shape)).uniform(size=shape)
    assert sharpness(Image(px)) == pytest.approx(dense_sharpness(px), rel=1e-12)
    assert np.max(np.abs(convolve(Image(px), gaussian_kernel(1.0)).pixels - dense_blur(px))) <= 1e-14


images = arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10), st.sampled_from([1, 3])),
                elements=st.floats(0, 1))


@settings(max_examples=60, deadline=None)
@given(images)
def test_flip_and_rotation_invariance(px):
    s = sharpness(Image(px))
    assert s >= 0.0
    for t in (px[::-1], px[:, ::-1], px[::-1, ::-1]):
        assert sharpness(Image(t)) == pytest.approx(s, rel=1e-12, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(images, st.sampled_from([0.25, 0.5, 1.0]))
def test_scale_invariance(px, alpha):
    assert sharpness(Image(alpha * px)) == pytest.approx(sharpness(Image(px)), rel=1e-12, abs=1e-300)


def test_netpbm_parse_p5_with_comment():
    data = b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 51, 255, 102, 153, 204])
    img = read_netpbm(data)
    assert (img.height, img.width, img.channels) == (2, 3, 1)
    assert img.pixels[0, :, 0].tolist() == [0.0, 0.2, 1.0]
    # a raster byte that looks like whitespace right after the separator is data
    img = read_netpbm(b"P5 1 1 255\n\n")
    assert img.pixels[0, 0, 0] == 10 / 255


def test_netpbm_p6_roundtrip():
    rng = np.random.default_rng(4)
    raw = rng.integers(0, 256, size=(3, 4, 3), dtype=np.uint8)
    data = b"P6\n4 3\n255\n" + raw.tobytes()
    img = read_netpbm(data)
    assert img.channels == 3
    assert np.array_equal(np.rint(img.pixels * 255).astype(np.uint8), raw)
    assert write_netpbm(img) == data


@pytest.mark.parametrize(
    "data",
    [b"P3\n1 1\n255\n0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n255", b"P5\n0 1\n255\n"],
)
def test_netpbm_rejects(data):
    with pytest.raises(ValidationError):
        read_netpbm(data)


def test_image_validation():
    with pytest.raises(ValidationError):
        Image(np.full((2, 2), 1.5))
    with pytest.raises(ValidationError):
        Image(np.zeros((2, 2, 2)))
    with pytest.raises(ValidationError):
        Image(np.zeros((0, 2)))
