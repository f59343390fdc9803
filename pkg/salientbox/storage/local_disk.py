from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Dict, List, Union

from salientbox.formats import (
    AnnotationRecord,
    DetectionRecord,
    dump_record,
    emit_map,
    parse_annotations,
    parse_detections,
    parse_map,
    parse_subitizing,
    read_pgm,
)
from salientbox.models import SaliencyMap, SubitizingOutput
from salientbox.storage.base import MapStore, RecordStore

MAP_SUFFIXES = (".rsdmap", ".pgm")


def atomic_write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    tmp_path.write_text(text, encoding="utf-8")
    tmp_path.replace(path)
    return str(path)


def load_map(path: Path) -> SaliencyMap:
    if path.suffix == ".pgm":
        return read_pgm(path)
    return parse_map(path.read_text(encoding="utf-8"), path=path)


class FileMapStore(MapStore):
    """Maps stored one per file; ``root`` may also name a single map file."""

    def __init__(self, root: Union[str, Path], suffix: str = ".rsdmap") -> None:
        self.root = Path(root)
        self.suffix = suffix

    async def put(self, image: str, saliency: SaliencyMap) -> str:
        return await asyncio.to_thread(self.put_sync, image, saliency)

    def put_sync(self, image: str, saliency: SaliencyMap) -> str:
        return atomic_write(self.root / f"{image}{self.suffix}", emit_map(saliency))

    async def get(self, image: str) -> SaliencyMap:
        return await asyncio.to_thread(self.get_sync, image)

    def get_sync(self, image: str) -> SaliencyMap:
        return load_map(self._resolve_path(image))

    async def list_images(self) -> List[str]:
        return await asyncio.to_thread(self.list_images_sync)

    def list_images_sync(self) -> List[str]:
        if self.root.is_file():
            return [self.root.stem]
        if not self.root.exists():
            raise FileNotFoundError(f"no such map file or directory: {self.root}")
        return sorted({p.stem for p in self.root.iterdir() if p.is_file() and p.suffix in MAP_SUFFIXES})

    def _resolve_path(self, image: str) -> Path:
        if self.root.is_file():
            return self.root
        for suffix in (self.suffix, *MAP_SUFFIXES):
            path = self.root / f"{image}{suffix}"
            if path.exists():
                return path
        raise FileNotFoundError(f"no map for image {image!r} under {self.root}")


class JsonRecordStore(RecordStore):
    """JSON records in a single file (object or array) or a directory of ``*.json`` files."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)

    def _sources(self) -> List[Path]:
        if self.root.is_file():
            return [self.root]
        if not self.root.exists():
            raise FileNotFoundError(f"no such record file or directory: {self.root}")
        return sorted(p for p in self.root.glob("*.json") if p.is_file())

    async def load_annotations(self) -> List[AnnotationRecord]:
        return await asyncio.to_thread(self.load_annotations_sync)

    def load_annotations_sync(self) -> List[AnnotationRecord]:
        records: List[AnnotationRecord] = []
        for path in self._sources():
            records.extend(parse_annotations(path.read_text(encoding="utf-8"), path=path))
        return records

    async def load_detections(self) -> List[DetectionRecord]:
        return await asyncio.to_thread(self.load_detections_sync)

    def load_detections_sync(self) -> List[DetectionRecord]:
        records: List[DetectionRecord] = []
        for path in self._sources():
            records.extend(parse_detections(path.read_text(encoding="utf-8"), path=path))
        return records

    async def load_subitizing(self) -> Dict[str, SubitizingOutput]:
        return await asyncio.to_thread(self.load_subitizing_sync)

    def load_subitizing_sync(self) -> Dict[str, SubitizingOutput]:
        outputs: Dict[str, SubitizingOutput] = {}
        for path in self._sources():
            outputs.update(parse_subitizing(path.read_text(encoding="utf-8"), path=path))
        return outputs

    async def put_detection(self, record: DetectionRecord) -> str:
        return await asyncio.to_thread(self.put_sync, record.image, record)

    async def put_annotation(self, record: AnnotationRecord) -> str:
        return await asyncio.to_thread(self.put_sync, record.image, record)

    def put_sync(self, image: str, record: Union[AnnotationRecord, DetectionRecord]) -> str:
        return atomic_write(self.root / f"{image}.json", dump_record(record))
