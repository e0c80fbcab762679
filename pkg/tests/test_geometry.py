import numpy as np
import pytest
from hypothesis import given, strategies as st

from mavot.errors import ContractError
from mavot.features import PATCH_SIZE, ROI_SIZE
from mavot.geometry import BoundingBox, RoiTransform, crop_resize
from mavot.tracker import make_roi, sample_foreground

from oracles import naive_bilinear


def ramp(h, w):
    y, x = np.mgrid[0:h, 0:w].astype(np.float32)
    return np.stack([x / w, y / h, (x + y) / (w + h)], axis=-1)


def test_box_basics():
    b = BoundingBox(10, 20, 30, 40)
    assert b.center == (25.0, 40.0)
    assert b.area == 1200
    assert tuple(b) == (10, 20, 30, 40)
    assert b.scaled(2.0) == BoundingBox(-5, 0, 60, 80)
    assert b.with_center(0, 0) == BoundingBox(-15, -20, 30, 40)
    assert b.format() == "10.00,20.00,30.00,40.00"
    assert BoundingBox.parse("10, 20,30,40") == b
    assert BoundingBox.parse(b.format()) == b


@pytest.mark.parametrize("text", ["1,2,3", "a,b,c,d", "1,2,3,nan", ""])
def test_box_parse_errors(text):
    with pytest.raises(ValueError):
        BoundingBox.parse(text)


def test_box_clip_and_intersect():
    b = BoundingBox(-10, 5, 30, 100)
    assert b.clipped(50, 60) == BoundingBox(0, 5, 20, 55)
    assert b.intersects(50, 60)
    assert not BoundingBox(50, 0, 10, 10).intersects(50, 60)
    assert BoundingBox(80, 80, 5, 5).clipped(50, 60).area == 0


def test_make_roi_centre_zoom():
    frame = ramp(600, 600)
    # centre (180, 180), 2.25 x 160 = 360 wide
    roi, t = make_roi(frame, BoundingBox(100, 100, 160, 160))
    assert (t.sx, t.sy, t.sw, t.sh) == (0.0, 0.0, 360.0, 360.0)
    assert roi.shape == (360, 360, 3)
    # unit scale, integer offset: exact copy
    np.testing.assert_array_equal(roi, frame[0:360, 0:360])
    _, t = make_roi(frame, BoundingBox(120, 120, 160, 160))
    assert (t.sx, t.sy) == (20.0, 20.0)


def test_make_roi_corner_padding():
    frame = ramp(300, 300)
    roi, t = make_roi(frame, BoundingBox(0, 0, 80, 80))
    assert (t.sx, t.sy, t.sw, t.sh) == (-50.0, -50.0, 180.0, 180.0)
    # the first 50 source pixels are off-frame: 100 ROI pixels replicate row/col 0
    assert np.allclose(roi[:99, 150], roi[0, 150], atol=1e-6)
    assert np.allclose(roi[150, :99], roi[150, 0], atol=1e-6)
    assert not np.allclose(roi[101:, 150], roi[0, 150], atol=1e-6)
    np.testing.assert_allclose(roi, naive_bilinear(frame, (-50, -50, 180, 180), 360, 360), atol=1e-5)


@given(st.floats(-60, 250), st.floats(-60, 250), st.floats(8, 200), st.floats(8, 200))
def test_roi_roundtrip(x, y, w, h):
    box = BoundingBox(x, y, w, h)
    _, t = make_roi(np.zeros((16, 16, 3), np.float32), box)
    c = (ROI_SIZE - PATCH_SIZE) / 2.0
    back = t.window_to_image(c, c, PATCH_SIZE, PATCH_SIZE)
    for a, b in zip(back, box):
        assert abs(a - b) <= 1e-6 * max(1.0, abs(b))


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(1, 500), st.floats(1, 500))
def test_transform_inverse(u, v, sw, sh):
    t = RoiTransform(3.5, -7.0, sw, sh, 360, 360)
    x, y = t.to_image(u, v)
    uu, vv = t.to_roi(x, y)
    assert uu == pytest.approx(u, abs=1e-9) and vv == pytest.approx(v, abs=1e-9)


def test_sample_foreground_exact_crop():
    frame = ramp(300, 320)
    patch = sample_foreground(frame, BoundingBox(40, 30, 160, 160))
    np.testing.assert_array_equal(patch, frame[30:190, 40:200])


def test_sample_foreground_upsamples():
    frame = ramp(200, 200)
    patch = sample_foreground(frame, BoundingBox(20, 20, 80, 80))
    assert patch.shape == (160, 160, 3)
    np.testing.assert_allclose(patch, naive_bilinear(frame, (20, 20, 80, 80), 160, 160), atol=1e-5)


def test_sample_foreground_right_border_replicates():
    frame = ramp(200, 200)
    patch = sample_foreground(frame, BoundingBox(120, 20, 160, 160))
    # columns past x=199 repeat the last frame column
    np.testing.assert_array_equal(patch[:, 80:], np.repeat(frame[20:180, 199:200], 80, axis=1))


@given(st.integers(0, 2**31 - 1), st.floats(-40, 60), st.floats(-40, 60),
       st.floats(5, 90), st.floats(5, 90), st.integers(3, 17), st.integers(3, 17))
def test_crop_resize_matches_naive(seed, sx, sy, sw, sh, ow, oh):
    img = np.random.default_rng(seed).random((23, 29, 3)).astype(np.float32)
    got = crop_resize(img, (sx, sy, sw, sh), ow, oh)
    np.testing.assert_allclose(got, naive_bilinear(img, (sx, sy, sw, sh), ow, oh), atol=1e-5)


def test_zero_padding():
    img = np.ones((10, 10, 3), np.float32)
    out = crop_resize(img, (-10, 0, 10, 10), 10, 10, padding="zero")
    assert not out[:, :9].any()


def test_crop_resize_errors():
    img = np.ones((10, 10, 3), np.float32)
    with pytest.raises(ContractError):
        crop_resize(img, (0, 0, 0, 5), 4, 4)
    with pytest.raises(ContractError):
        crop_resize(img, (0, 0, 5, 5), 4, 4, padding="mirror")
