from __future__ import annotations

import asyncio
import logging
from typing import Awaitable, Callable, Dict, Iterable, List, Mapping, Optional, Union

from pydantic import BaseModel, Field

from salientbox.config import DecoderConfig, ToolkitConfig
from salientbox.decoder import BoxDecoder
from salientbox.encoder import encode_gt
from salientbox.errors import FormatError, InvalidParameterError, SalientBoxError
from salientbox.formats import AnnotationRecord, DetectionRecord
from salientbox.models import NoiseSpec, SaliencyMap, SceneSpec, SubitizingOutput
from salientbox.storage.base import MapStore, RecordStore
from salientbox.synth import render_scene

logger = logging.getLogger(__name__)

SubitizingSource = Union[SubitizingOutput, Mapping[str, SubitizingOutput]]


class PipelineReport(BaseModel):
    """Outcome of one batch command."""

    written: List[str] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list)
    # image id -> message
    invalid: Dict[str, str] = Field(default_factory=dict)
    io_errors: Dict[str, str] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.invalid and not self.io_errors


class Pipeline:
    """Batch front end: per-image work runs in worker threads, bounded by ``threads``."""

    def __init__(
        self,
        config: Optional[ToolkitConfig] = None,
        decoder_config: Optional[DecoderConfig] = None,
    ) -> None:
        self.config = config or ToolkitConfig.from_env()
        self.decoder = BoxDecoder(decoder_config or DecoderConfig.for_profile(self.config.profile))
        self.metrics: Dict[str, int] = {"images": 0, "boxes": 0, "failures": 0}

    def encode(self, records: Iterable[AnnotationRecord], out: MapStore) -> PipelineReport:
        return self._run_async(self.encode_async(records, out))

    async def encode_async(self, records: Iterable[AnnotationRecord], out: MapStore) -> PipelineReport:
        report = PipelineReport()

        async def encode_one(record: AnnotationRecord) -> None:
            if not record.has_boxes:
                logger.warning("%s: count-only record, no map written", record.image)
                report.skipped.append(record.image)
                return
            saliency = await asyncio.to_thread(encode_gt, record.boxes, record.encoder_config())
            report.written.append(await out.put(record.image, saliency))

        await self._for_each({record.image: record for record in records}, encode_one, report)
        return report

    def decode(self, maps: MapStore, subitizing: SubitizingSource, out: RecordStore) -> PipelineReport:
        return self._run_async(self.decode_async(maps, subitizing, out))

    async def decode_async(self, maps: MapStore, subitizing: SubitizingSource, out: RecordStore) -> PipelineReport:
        report = PipelineReport()
        images = await maps.list_images()

        async def decode_one(image: str) -> None:
            if isinstance(subitizing, SubitizingOutput):
                sub = subitizing
            elif image in subitizing:
                sub = subitizing[image]
            else:
                raise InvalidParameterError("no subitizing record")
            saliency = await maps.get(image)
            result = await asyncio.to_thread(self.decoder.detect, saliency, sub)
            for escalation in result.trace.escalations:
                logger.debug("%s: %s", image, escalation)
            self.metrics["boxes"] += result.predicted_count
            report.written.append(await out.put_detection(DetectionRecord.from_result(image, result, sub)))

        await self._for_each({image: image for image in images}, decode_one, report)
        return report

    def synthesize(
        self,
        scenes: Iterable[SceneSpec],
        noise: Optional[NoiseSpec],
        maps: MapStore,
        records: RecordStore,
    ) -> PipelineReport:
        return self._run_async(self.synthesize_async(scenes, noise, maps, records))

    async def synthesize_async(
        self,
        scenes: Iterable[SceneSpec],
        noise: Optional[NoiseSpec],
        maps: MapStore,
        records: RecordStore,
    ) -> PipelineReport:
        report = PipelineReport()

        async def write_one(scene: SceneSpec) -> None:
            saliency = await asyncio.to_thread(render_scene, scene, noise)
            await records.put_annotation(AnnotationRecord.from_scene(scene))
            report.written.append(await maps.put(scene.image, saliency))

        await self._for_each({scene.image: scene for scene in scenes}, write_one, report)
        return report

    def load_annotations(self, store: RecordStore) -> List[AnnotationRecord]:
        return self._run_async(store.load_annotations())

    def load_detections(self, store: RecordStore) -> List[DetectionRecord]:
        return self._run_async(store.load_detections())

    def load_subitizing(self, store: RecordStore) -> Dict[str, SubitizingOutput]:
        return self._run_async(store.load_subitizing())

    def load_maps(self, store: MapStore) -> Dict[str, SaliencyMap]:
        return self._run_async(self.load_maps_async(store))

    async def load_maps_async(self, store: MapStore) -> Dict[str, SaliencyMap]:
        images = await store.list_images()
        maps = await asyncio.gather(*(store.get(image) for image in images))
        return dict(zip(images, maps))

    async def _for_each(
        self,
        items: Mapping[str, object],
        work: Callable[[object], Awaitable[None]],
        report: PipelineReport,
    ) -> None:
        semaphore = asyncio.Semaphore(self.config.threads)

        async def guarded(image: str, item: object) -> None:
            async with semaphore:
                try:
                    await work(item)
                except (FormatError, OSError) as exc:
                    logger.error("%s: %s", image, exc)
                    report.io_errors[image] = str(exc)
                except (SalientBoxError, ValueError) as exc:
                    logger.error("%s: %s", image, exc)
                    report.invalid[image] = str(exc)
            self.metrics["images"] += 1

        await asyncio.gather(*(guarded(image, item) for image, item in items.items()))
        report.written.sort()
        self.metrics["failures"] += len(report.invalid) + len(report.io_errors)

    def _run_async(self, coro):
        try:
            loop = asyncio.get_running_loop()
        except RuntimeError:
            loop = None
        if loop and loop.is_running():
            coro.close()
            raise RuntimeError("Pipeline sync API called inside an event loop; use *_async methods.")
        return asyncio.run(coro)
