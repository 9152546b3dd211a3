import threading
from datetime import datetime
from typing import Optional, Dict, Any, Tuple

from app.infrastructure.storage.base import StorageBase


class MemoryStorage(StorageBase):
    """进程内存储，用于测试和禁用磁盘缓存的场景"""

    def __init__(self):
        self._items: Dict[str, Tuple[bytes, Dict[str, Any]]] = {}
        self._lock = threading.Lock()

    def put(self, key: str, data: bytes, metadata: Optional[Dict[str, Any]] = None) -> str:
        file_metadata = {"key": key, "size": len(data), "write_time": datetime.now().isoformat()}
        if metadata:
            file_metadata.update(metadata)
        with self._lock:
            self._items[key] = (bytes(data), file_metadata)
        return key

    def get(self, key: str) -> Optional[bytes]:
        with self._lock:
            item = self._items.get(key)
        return item[0] if item else None

    def delete(self, key: str) -> bool:
        with self._lock:
            self._items.pop(key, None)
        return True

    def exists(self, key: str) -> bool:
        with self._lock:
            return key in self._items

    def get_metadata(self, key: str) -> Optional[Dict[str, Any]]:
        with self._lock:
            item = self._items.get(key)
        return dict(item[1]) if item else None

    def health_check(self) -> bool:
        return True

    def close(self):
        with self._lock:
            self._items.clear()
