from salientbox.storage.base import MapStore, RecordStore
from salientbox.storage.local_disk import FileMapStore, JsonRecordStore

__all__ = ["MapStore", "RecordStore", "FileMapStore", "JsonRecordStore"]
