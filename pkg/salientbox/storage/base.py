from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Dict, List

from salientbox.formats import AnnotationRecord, DetectionRecord
from salientbox.models import SaliencyMap, SubitizingOutput


class MapStore(ABC):
    """Saliency maps keyed by image id."""

    @abstractmethod
    async def put(self, image: str, saliency: SaliencyMap) -> str:
        raise NotImplementedError

    @abstractmethod
    async def get(self, image: str) -> SaliencyMap:
        raise NotImplementedError

    @abstractmethod
    async def list_images(self) -> List[str]:
        raise NotImplementedError


class RecordStore(ABC):
    """Annotation, detection and subitizing records."""

    @abstractmethod
    async def load_annotations(self) -> List[AnnotationRecord]:
        raise NotImplementedError

    @abstractmethod
    async def load_detections(self) -> List[DetectionRecord]:
        raise NotImplementedError

    @abstractmethod
    async def load_subitizing(self) -> Dict[str, SubitizingOutput]:
        raise NotImplementedError

    @abstractmethod
    async def put_detection(self, record: DetectionRecord) -> str:
        raise NotImplementedError

    @abstractmethod
    async def put_annotation(self, record: AnnotationRecord) -> str:
        raise NotImplementedError
