import numpy as np
import pytest

from salientbox.errors import InvalidParameterError
from salientbox.models import BinaryMask, CellBox, Orientation, SaliencyMap
from salientbox.rasterops import (
    blur_array,
    connected_components,
    gaussian_blur,
    gaussian_kernel,
    line_max,
    resample_array,
    roi_max,
    threshold_map,
    upsample_array,
    upsample_bilinear,
)


def test_threshold_is_inclusive():
    values = np.zeros((4, 4))
    values[1, 2] = 0.71
    mask = threshold_map(SaliencyMap(values), 0.7)
    assert mask.count() == 1
    assert mask.bits[1, 2]

    assert threshold_map(SaliencyMap(np.zeros((4, 4))), 0.5).count() == 0
    assert threshold_map(SaliencyMap(values), 0.0).count() == 16
    assert threshold_map(SaliencyMap(np.full((2, 2), 0.7)), 0.7).count() == 4


def test_threshold_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        threshold_map(SaliencyMap.zeros(3, 3), 1.5)


def test_threshold_masks_are_nested(rng):
    thresholds = np.linspace(0.0, 1.0, 10)
    for _ in range(100):
        saliency = SaliencyMap(rng.random((8, 11)))
        masks = [threshold_map(saliency, t).bits for t in thresholds]
        for looser, tighter in zip(masks, masks[1:]):
            assert not (tighter & ~looser).any()


def test_blur_zero_sigma_is_identity(rng):
    saliency = SaliencyMap(rng.random((5, 7)))
    assert np.array_equal(gaussian_blur(saliency, 0.0).values, saliency.values)


def test_blur_keeps_constants():
    blurred = gaussian_blur(SaliencyMap(np.full((6, 9), 0.4)), 2.5)
    assert np.allclose(blurred.values, 0.4, atol=1e-9)


def test_blur_matches_dense_convolution():
    impulse = np.zeros((9, 9))
    impulse[4, 4] = 1.0
    kernel = gaussian_kernel(1.0)
    assert kernel.size == 7
    assert kernel.sum() == pytest.approx(1.0)

    blurred = gaussian_blur(SaliencyMap(impulse), 1.0).values
    dense = np.zeros((9, 9))
    dense[1:8, 1:8] = np.outer(kernel, kernel)
    assert blurred[4, 4] == pytest.approx(kernel[3] ** 2)
    assert np.allclose(blurred, dense, atol=1e-12)
    assert blurred.sum() == pytest.approx(1.0, abs=1e-6)


def test_blur_stays_within_input_range(rng):
    values = rng.uniform(0.2, 0.8, (12, 12))
    blurred = gaussian_blur(SaliencyMap(values), 3.0).values
    assert blurred.min() >= values.min()
    assert blurred.max() <= values.max()


def test_blur_rejects_negative_sigma():
    with pytest.raises(InvalidParameterError):
        gaussian_blur(SaliencyMap.zeros(3, 3), -1.0)


def test_upsample_half_pixel_alignment():
    out = upsample_bilinear(SaliencyMap.from_rows([[0.0, 1.0]]), 4, 1)
    assert np.allclose(out.values, [[0.0, 0.25, 0.75, 1.0]])


def test_upsample_edge_cases(rng):
    assert np.allclose(upsample_bilinear(SaliencyMap.from_rows([[0.3]]), 5, 4).values, 0.3)
    values = rng.random((6, 5))
    assert np.allclose(upsample_bilinear(SaliencyMap(values), 5, 6).values, values, atol=1e-9)
    grown = upsample_bilinear(SaliencyMap(values), 80, 96)
    assert (grown.height, grown.width) == (96, 80)
    assert grown.values.max() <= values.max()
    assert grown.values.min() >= values.min()


def test_resample_matches_upsample_then_blur(rng):
    for shape, out, sigma in [((14, 14), (224, 224), 2.0), ((28, 20), (448, 320), 10.0), ((6, 9), (6, 9), 1.5), ((3, 4), (12, 7), 0.0)]:
        values = rng.random(shape)
        expected = blur_array(upsample_array(values, *out), sigma)
        assert np.allclose(resample_array(values, *out, sigma), expected, atol=1e-12)

    values = rng.random((5, 5))
    same = resample_array(values, 5, 5, 0.0)
    assert np.array_equal(same, values) and same is not values
    with pytest.raises(InvalidParameterError):
        resample_array(values, 5, 5, -1.0)


def test_components_use_eight_connectivity():
    assert connected_components(BinaryMask(np.zeros((4, 4), dtype=bool))) == []

    diagonal = np.zeros((4, 4), dtype=bool)
    diagonal[0, 0] = diagonal[1, 1] = True
    (component,) = connected_components(BinaryMask(diagonal))
    assert component.extent == CellBox(0, 0, 1, 1)
    assert component.pixel_count == 2

    apart = np.zeros((4, 4), dtype=bool)
    apart[0, 0] = apart[2, 2] = True
    assert len(connected_components(BinaryMask(apart))) == 2


def test_components_ordered_by_first_pixel():
    bits = np.zeros((6, 6), dtype=bool)
    bits[3:5, 0:2] = True  # starts on row 3
    bits[0, 4] = True  # starts on row 0, right
    bits[0, 1] = True  # starts on row 0, left
    components = connected_components(BinaryMask(bits))
    assert [c.extent.y0 for c in components] == [0, 0, 3]
    assert [c.extent.x0 for c in components] == [1, 4, 0]
    assert [c.id for c in components] == [0, 1, 2]


def test_components_partition_foreground(rng):
    for _ in range(20):
        bits = rng.random((10, 10)) < 0.35
        components = connected_components(BinaryMask(bits))
        assert sum(c.pixel_count for c in components) == int(bits.sum())
        owner = np.full(bits.shape, -1)
        for c in components:
            for x, y in c.pixels:
                assert c.extent.contains(int(x), int(y))
                owner[y, x] = c.id
        # no 8-adjacent pair crosses between two components
        for y, x in zip(*np.nonzero(bits)):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < 10 and 0 <= nx < 10 and bits[ny, nx]:
                        assert owner[ny, nx] == owner[y, x]


def test_roi_max_tie_break_and_local_max(rng):
    constant = SaliencyMap(np.full((6, 6), 0.3))
    assert roi_max(constant, CellBox(2, 1, 4, 3)) == (0.3, (2, 1))

    values = np.zeros((10, 10))
    values[5, 5] = 0.9
    assert roi_max(SaliencyMap(values), CellBox(3, 3, 7, 7)) == (0.9, (5, 5))

    values = rng.random((10, 10))
    roi = CellBox(1, 2, 4, 6)
    value, (x, y) = roi_max(SaliencyMap(values), roi)
    window = values[2:7, 1:5]
    assert value == window.max()
    assert values[y, x] == value
    assert roi_max(SaliencyMap(values), CellBox.full(10, 10))[0] == values.max()


def test_roi_max_outside_map():
    with pytest.raises(InvalidParameterError):
        roi_max(SaliencyMap.zeros(4, 4), CellBox(5, 5, 8, 8))


def test_line_max_matches_scan(rng):
    assert line_max(SaliencyMap.zeros(5, 5), Orientation.VERTICAL, 2) == 0.0
    values = rng.random((8, 8))
    saliency = SaliencyMap(values)
    for position in range(8):
        assert line_max(saliency, Orientation.VERTICAL, position) == max(values[y, position] for y in range(8))
        assert line_max(saliency, Orientation.HORIZONTAL, position) == max(values[position, x] for x in range(8))
    with pytest.raises(InvalidParameterError):
        line_max(saliency, Orientation.HORIZONTAL, 8)
