from typing import Optional, Dict, Any
from abc import ABC, abstractmethod


class StorageBase(ABC):
    """键值存储基类（VkTable 缓存后端）"""

    @abstractmethod
    def health_check(self) -> bool:
        """
        健康检查

        Returns:
            bool: 存储是否可用
        """
        pass

    @abstractmethod
    def close(self):
        """释放资源"""
        pass

    @abstractmethod
    def put(self, key: str, data: bytes, metadata: Optional[Dict[str, Any]] = None) -> str:
        """
        写入数据

        Args:
            key: 内容寻址键
            data: 序列化后的数据
            metadata: 元数据

        Returns:
            str: 写入的键
        """
        pass

    @abstractmethod
    def get(self, key: str) -> Optional[bytes]:
        """
        读取数据

        Returns:
            Optional[bytes]: 不存在时为 None
        """
        pass

    @abstractmethod
    def delete(self, key: str) -> bool:
        pass

    @abstractmethod
    def exists(self, key: str) -> bool:
        pass

    @abstractmethod
    def get_metadata(self, key: str) -> Optional[Dict[str, Any]]:
        pass
