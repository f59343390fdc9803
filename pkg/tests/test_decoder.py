import numpy as np
import pytest

from salientbox.config import DecoderConfig
from salientbox.decoder import (
    BoxDecoder,
    detect,
    find_peaks,
    find_separating_line,
    multi_detect,
    preprocess,
    single_detect,
)
from salientbox.encoder import encode_gt
from salientbox.errors import NoSeparatorError
from salientbox.models import (
    BoundingBox,
    CellBox,
    DecodeBranch,
    Orientation,
    Peak,
    SaliencyMap,
    SubitizingOutput,
)
from salientbox.rasterops import roi_max


def sub(category, confidence):
    return SubitizingOutput(category=category, confidence=confidence)


@pytest.fixture
def two_blob_map(encoder_config) -> SaliencyMap:
    # mu (3, 7) and (10, 7), sigma 2 cells, ROIs x 1..5 and 8..12
    boxes = [BoundingBox(cx=48, cy=112, w=64, h=64), BoundingBox(cx=160, cy=112, w=64, h=64)]
    return encode_gt(boxes, encoder_config)


@pytest.fixture
def one_blob_map(encoder_config, centered_box) -> SaliencyMap:
    return encode_gt([centered_box], encoder_config)


def test_preprocess_identity_at_native_resolution(rng, native_decoder):
    saliency = SaliencyMap(rng.random((6, 6)))
    assert np.array_equal(preprocess(saliency, native_decoder).values, saliency.values)


def test_preprocess_upsamples_then_blurs(one_blob_map, upsampled_decoder):
    out = preprocess(one_blob_map, upsampled_decoder)
    assert (out.width, out.height) == (224, 224)
    assert out.values.max() <= one_blob_map.values.max() + 1e-6


def test_preprocess_keeps_impulse_location():
    values = np.zeros((9, 9))
    values[3, 5] = 1.0
    out = preprocess(SaliencyMap(values), DecoderConfig(decode_resolution="native", smooth_sigma=1.0))
    assert np.unravel_index(np.argmax(out.values), out.values.shape) == (3, 5)


def test_single_detect_on_encoded_gaussian(one_blob_map):
    assert single_detect(SaliencyMap.zeros(14, 14), 0.7) is None
    box, score = single_detect(one_blob_map, 0.7)
    assert box == CellBox(6, 6, 8, 8)
    assert score == 1.0


def test_single_detect_prefers_higher_score():
    values = np.zeros((14, 14))
    values[2:5, 2:5] = 0.75
    values[3, 3] = 1.0
    values[9:12, 9:12] = 0.75
    values[10, 10] = 0.8
    box, score = single_detect(SaliencyMap(values), 0.7)
    assert box == CellBox(2, 2, 4, 4)
    assert score == 1.0


def test_single_detect_ties_go_to_larger_then_topmost():
    values = np.zeros((10, 10))
    values[1, 1] = 0.9
    values[6, 6:8] = 0.9
    box, _ = single_detect(SaliencyMap(values), 0.7)
    assert box == CellBox(6, 6, 7, 6)

    values = np.zeros((10, 10))
    values[6, 2] = 0.9
    values[1, 7] = 0.9
    box, _ = single_detect(SaliencyMap(values), 0.7)
    assert box == CellBox(7, 1, 7, 1)


def test_find_peaks_basic(one_blob_map, two_blob_map):
    thresholds = [0.95, 0.9, 0.8, 0.6]
    assert find_peaks(SaliencyMap.zeros(14, 14), thresholds) == []
    assert find_peaks(one_blob_map, thresholds) == [Peak(location=(7, 7), value=1.0)]
    peaks = find_peaks(two_blob_map, thresholds, target=2)
    assert sorted(p.location for p in peaks) == [(3, 7), (10, 7)]


def test_find_peaks_stops_once_target_is_reached():
    values = np.zeros((12, 12))
    values[2, 2] = 0.97
    values[8, 8] = 0.85
    saliency = SaliencyMap(values)
    thresholds = [0.95, 0.9, 0.8, 0.6]
    assert [p.location for p in find_peaks(saliency, thresholds, target=1)] == [(2, 2)]
    assert [p.location for p in find_peaks(saliency, thresholds)] == [(2, 2), (8, 8)]
    assert len(find_peaks(saliency, thresholds, target=3)) == 2


def test_separating_line_midpoint_tie_break():
    line = find_separating_line(SaliencyMap.zeros(14, 14), Peak((2, 5), 1.0), Peak((10, 5), 1.0))
    assert line.orientation == Orientation.VERTICAL
    assert line.position == 6
    assert line.score == 0.0

    line = find_separating_line(SaliencyMap.zeros(14, 14), Peak((3, 2), 1.0), Peak((4, 10), 1.0))
    assert line.orientation == Orientation.HORIZONTAL
    assert line.position == 6


def test_separating_line_follows_valley():
    values = np.zeros((14, 14))
    values[5] = [0, 0, 0, 1, 0.8, 0.6, 0.4, 0.1, 0.4, 0.6, 0.8, 1, 0, 0]
    line = find_separating_line(SaliencyMap(values), Peak((3, 5), 1.0), Peak((11, 5), 1.0))
    assert line.position == 7
    assert line.score == pytest.approx(0.1)


def test_separating_line_needs_a_gap():
    with pytest.raises(NoSeparatorError):
        find_separating_line(SaliencyMap.zeros(8, 8), Peak((4, 4), 1.0), Peak((5, 4), 1.0))


def test_multi_detect_two_blobs(two_blob_map, native_decoder):
    result = multi_detect(two_blob_map, sub("2", 0.9), native_decoder)
    centers = sorted((b.box.cx, b.box.cy) for b in result.boxes)
    assert len(centers) == 2
    for (cx, cy), mu in zip(centers, [(3, 7), (10, 7)]):
        # map pixel units: cell x spans [x, x + 1)
        assert abs(cx - 0.5 - mu[0]) <= 1.0
        assert abs(cy - 0.5 - mu[1]) <= 1.0
    first, second = sorted(result.boxes, key=lambda b: b.box.cx)
    assert first.box.x1 <= second.box.x0


def test_multi_detect_count_may_fall_short(one_blob_map, native_decoder):
    result = multi_detect(one_blob_map, sub("2", 0.9), native_decoder)
    assert result.predicted_count == 1


def test_multi_detect_on_empty_map(native_decoder):
    assert multi_detect(SaliencyMap.zeros(14, 14), sub("3+", 0.95), native_decoder).boxes == []


def test_category_zero_is_always_empty(two_blob_map, upsampled_decoder):
    result = detect(two_blob_map, sub("0", 0.99), upsampled_decoder)
    assert result.boxes == []
    assert result.branch == DecodeBranch.EMPTY


def test_single_branch_native_coordinates(one_blob_map, native_decoder):
    result = detect(one_blob_map, sub("1", 0.95), native_decoder)
    assert result.branch == DecodeBranch.SINGLE
    (scored,) = result.boxes
    assert scored.box.corners() == (96.0, 96.0, 144.0, 144.0)
    assert scored.score == 1.0


def test_box_rescale_recovers_extent(one_blob_map):
    cfg = DecoderConfig.for_profile(224, box_rescale=True)
    (scored,) = detect(one_blob_map, sub("1", 0.95), cfg).boxes
    assert abs(scored.box.cx - 112) <= 8
    assert abs(scored.box.cy - 112) <= 8
    assert abs(scored.box.w / 2 - 32) <= 0.15 * 32
    assert abs(scored.box.h / 2 - 32) <= 0.15 * 32


def test_low_confidence_single_goes_multi(two_blob_map, native_decoder):
    result = detect(two_blob_map, sub("1", 0.5), native_decoder)
    assert result.branch == DecodeBranch.MULTI
    assert result.predicted_count == 2


def test_scores_equal_roi_max_of_preprocessed_map(two_blob_map, native_decoder):
    result = detect(two_blob_map, sub("2", 0.9), native_decoder)
    prepared = preprocess(two_blob_map, native_decoder)
    for scored in result.boxes:
        x0, y0, x1, y1 = (int(round(v / 16)) for v in scored.box.corners())
        assert scored.score == roi_max(prepared, CellBox(x0, y0, x1 - 1, y1 - 1))[0]


def test_fallback_needs_confident_count(native_decoder):
    values = np.zeros((14, 14))
    values[5:8, 5:8] = 0.62
    values[6, 6] = 0.65
    saliency = SaliencyMap(values)

    confident = detect(saliency, sub("3+", 0.9), native_decoder)
    assert confident.predicted_count == 1
    assert confident.boxes[0].score == pytest.approx(0.65)
    assert any("falling back" in e for e in confident.trace.escalations)

    assert detect(saliency, sub("3+", 0.5), native_decoder).boxes == []


def test_raising_theta_c_never_adds_peaks(rng):
    thetas = [0.6, 0.7, 0.8, 0.9]
    decoders = [BoxDecoder(DecoderConfig(theta_c=t, decode_resolution="native", smooth_sigma=0.0)) for t in thetas]
    for _ in range(100):
        saliency = preprocess(SaliencyMap(rng.random((14, 14))), DecoderConfig(decode_resolution="native"))
        counts = [len(d.reliable_peaks(saliency)) for d in decoders]
        assert counts == sorted(counts, reverse=True)


def test_decoding_is_deterministic(two_blob_map, upsampled_decoder):
    first = detect(two_blob_map, sub("3+", 0.8), upsampled_decoder)
    second = detect(two_blob_map, sub("3+", 0.8), upsampled_decoder)
    assert first.model_dump() == second.model_dump()
