import asyncio
import json

import numpy as np
import pytest

from salientbox.config import DecoderConfig, ToolkitConfig
from salientbox.encoder import encode_gt
from salientbox.errors import FormatError
from salientbox.formats import AnnotationRecord, emit_map, parse_map
from salientbox.models import BoundingBox, SubitizingOutput
from salientbox.pipeline import Pipeline
from salientbox.storage.local_disk import FileMapStore, JsonRecordStore
from salientbox.synth import generate_dataset, oracle_subitizing


@pytest.fixture
def pipeline():
    return Pipeline(ToolkitConfig(threads=2), DecoderConfig.for_profile(224))


def _annotation(image, boxes):
    return AnnotationRecord(image=image, width=224, height=224, stride=16, count=len(boxes), boxes=boxes)


def test_encode_writes_one_map_per_boxed_record(pipeline, workspace, centered_box):
    records = [
        _annotation("one", [centered_box]),
        AnnotationRecord(image="counted", width=224, height=224, stride=16, count=2),
    ]
    report = pipeline.encode(records, FileMapStore(workspace / "maps"))
    assert report.ok
    assert report.skipped == ["counted"]
    assert [p.endswith("one.rsdmap") for p in report.written] == [True]

    text = (workspace / "maps" / "one.rsdmap").read_text()
    expected = encode_gt([centered_box], records[0].encoder_config())
    assert parse_map(text).allclose(expected, atol=1e-6)


def test_encode_keeps_going_past_bad_records(pipeline, workspace, centered_box):
    thin = BoundingBox(cx=100, cy=100, w=8, h=64)
    report = pipeline.encode(
        [_annotation("thin", [thin]), _annotation("good", [centered_box])],
        FileMapStore(workspace / "maps"),
    )
    assert list(report.invalid) == ["thin"]
    assert (workspace / "maps" / "good.rsdmap").exists()
    assert not (workspace / "maps" / "thin.rsdmap").exists()


def test_decode_round_trip(pipeline, workspace):
    scenes = list(generate_dataset(3, 6, k_range=(0, 3)))
    maps = FileMapStore(workspace / "maps")
    pipeline.synthesize(scenes, None, maps, JsonRecordStore(workspace / "annotations"))
    subitizing = {s.image: oracle_subitizing(s) for s in scenes}

    report = pipeline.decode(maps, subitizing, JsonRecordStore(workspace / "detections"))
    assert report.ok and len(report.written) == 6
    detections = {d.image: d for d in pipeline.load_detections(JsonRecordStore(workspace / "detections"))}
    for scene in scenes:
        assert detections[scene.image].count_pred == len(scene.boxes)
    assert pipeline.metrics["boxes"] == sum(len(s.boxes) for s in scenes)


def test_decode_flags_missing_subitizing(pipeline, workspace, centered_box):
    maps = FileMapStore(workspace / "maps")
    maps.put_sync("a", encode_gt([centered_box], _annotation("a", []).encoder_config()))
    maps.put_sync("b", encode_gt([], _annotation("b", []).encoder_config()))
    report = pipeline.decode(maps, {"a": SubitizingOutput(category="1", confidence=0.9)}, JsonRecordStore(workspace / "detections"))
    assert list(report.invalid) == ["b"]
    assert (workspace / "detections" / "a.json").exists()


def test_unreadable_map_is_an_io_error(pipeline, workspace):
    (workspace / "maps" / "broken.rsdmap").write_text("RSDMAP 1\n2 2\n0 0\n")
    report = pipeline.decode(
        FileMapStore(workspace / "maps"),
        SubitizingOutput(category="0", confidence=1.0),
        JsonRecordStore(workspace / "detections"),
    )
    assert list(report.io_errors) == ["broken"]
    assert "broken.rsdmap:4" in report.io_errors["broken"]


def test_record_store_accepts_file_or_directory(workspace, centered_box):
    records = [_annotation("x", [centered_box]), _annotation("y", [])]
    combined = workspace / "all.json"
    combined.write_text(json.dumps([r.model_dump(mode="json") for r in records]))
    assert JsonRecordStore(combined).load_annotations_sync() == records

    store = JsonRecordStore(workspace / "annotations")
    for record in records:
        store.put_sync(record.image, record)
    assert sorted(store.load_annotations_sync(), key=lambda r: r.image) == records
    with pytest.raises(FileNotFoundError):
        JsonRecordStore(workspace / "missing").load_annotations_sync()


def test_map_store_single_file(workspace):
    path = workspace / "maps" / "solo.rsdmap"
    path.write_text(emit_map(encode_gt([], _annotation("solo", []).encoder_config())))
    store = FileMapStore(path)
    assert store.list_images_sync() == ["solo"]
    assert not store.get_sync("solo").values.any()
    with pytest.raises(FileNotFoundError):
        FileMapStore(workspace / "nowhere").list_images_sync()


def test_bad_json_surfaces_as_format_error(workspace):
    (workspace / "annotations" / "bad.json").write_text("{")
    with pytest.raises(FormatError):
        JsonRecordStore(workspace / "annotations").load_annotations_sync()


def test_sync_api_refuses_running_loop(pipeline, workspace):
    async def call_sync():
        return pipeline.load_maps(FileMapStore(workspace / "maps"))

    with pytest.raises(RuntimeError):
        asyncio.run(call_sync())


def test_async_api_inside_a_loop(pipeline, workspace, centered_box):
    maps = FileMapStore(workspace / "maps")
    maps.put_sync("a", encode_gt([centered_box], _annotation("a", []).encoder_config()))
    loaded = asyncio.run(pipeline.load_maps_async(maps))
    assert list(loaded) == ["a"]
    assert np.isclose(loaded["a"].values.max(), 1.0)
