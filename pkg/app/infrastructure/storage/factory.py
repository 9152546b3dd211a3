import logging
from typing import Optional

from app.config.settings import AuditSettings, settings as default_settings
from app.infrastructure.storage.base import StorageBase
from app.infrastructure.storage.local_file_connect import LocalStorage
from app.infrastructure.storage.memory_connect import MemoryStorage


class StorageFactory:
    """存储工厂类"""

    @staticmethod
    def create_connection(storage_type: Optional[str] = None, config: Optional[AuditSettings] = None) -> Optional[StorageBase]:
        """
        创建缓存存储连接

        Args:
            storage_type: local / memory / none，为 None 时从配置读取
            config: 配置（可选）

        Returns:
            Optional[StorageBase]: 存储实例；none 时返回 None（不缓存）
        """
        config = config or default_settings
        storage_type_lower = (storage_type or config.cache_type).lower()

        try:
            if storage_type_lower == "local":
                connection = LocalStorage(cache_dir=config.cache_dir)
            elif storage_type_lower == "memory":
                connection = MemoryStorage()
            elif storage_type_lower == "none":
                logging.info("VkTable 缓存已禁用")
                return None
            else:
                raise ValueError(f"不支持的存储类型: {storage_type_lower}")

            logging.debug(f"存储连接创建成功: {storage_type_lower}")
            return connection

        except Exception as e:
            logging.error(f"创建存储连接失败: {e}")
            raise
