import json
import logging
import os
import tempfile
from datetime import datetime
from pathlib import Path
from typing import Optional, Dict, Any

from app.infrastructure.storage.base import StorageBase


class LocalStorage(StorageBase):
    """本地文件存储：数据文件 + .meta 元数据文件，写入先写临时文件再原子替换"""

    def __init__(self, cache_dir: str):
        """
        初始化本地存储

        Args:
            cache_dir: 缓存目录路径
        """
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        logging.info(f"本地缓存初始化完成: {self.cache_dir}")

    def _path(self, key: str) -> Path:
        if not key or "/" in key or "\\" in key or key.startswith("."):
            raise ValueError(f"非法的缓存键: {key!r}")
        return self.cache_dir / key

    def _write_atomic(self, target: Path, payload: bytes):
        """同目录临时文件 + os.replace，读者看不到半写入的文件"""
        fd, tmp_name = tempfile.mkstemp(dir=self.cache_dir, prefix=".tmp-", suffix=".part")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp_name, target)
        except Exception:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def put(self, key: str, data: bytes, metadata: Optional[Dict[str, Any]] = None) -> str:
        try:
            path = self._path(key)
            file_metadata = {"key": key, "size": len(data), "write_time": datetime.now().isoformat()}
            if metadata:
                file_metadata.update(metadata)
            # 先写元数据，数据文件存在即代表写入完整
            self._write_atomic(path.with_name(f"{key}.meta"), json.dumps(file_metadata, ensure_ascii=False, indent=2).encode("utf-8"))
            self._write_atomic(path, data)
            logging.debug(f"缓存写入成功: {key}")
            return key
        except Exception as e:
            logging.error(f"缓存写入失败: {e}")
            raise

    def get(self, key: str) -> Optional[bytes]:
        try:
            path = self._path(key)
            if not path.exists():
                return None
            return path.read_bytes()
        except Exception as e:
            logging.error(f"读取缓存失败: {e}")
            return None

    def delete(self, key: str) -> bool:
        try:
            path = self._path(key)
            for target in (path, path.with_name(f"{key}.meta")):
                if target.exists():
                    target.unlink()
            return True
        except Exception as e:
            logging.error(f"删除缓存失败: {e}")
            return False

    def exists(self, key: str) -> bool:
        try:
            return self._path(key).exists()
        except Exception as e:
            logging.error(f"检查缓存存在性失败: {e}")
            return False

    def get_metadata(self, key: str) -> Optional[Dict[str, Any]]:
        try:
            meta_path = self._path(key).with_name(f"{key}.meta")
            if not meta_path.exists():
                return None
            return json.loads(meta_path.read_text(encoding="utf-8"))
        except Exception as e:
            logging.warning(f"读取元数据文件失败: {e}")
            return None

    def health_check(self) -> bool:
        """检查缓存目录是否可写"""
        try:
            marker = self.cache_dir / ".health_check"
            self._write_atomic(marker, b"ok")
            marker.unlink()
            return True
        except Exception as e:
            logging.error(f"本地缓存健康检查失败: {e}")
            return False

    def close(self):
        logging.debug("本地缓存无需关闭连接")
