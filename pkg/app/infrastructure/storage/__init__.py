from app.infrastructure.storage.base import StorageBase
from app.infrastructure.storage.factory import StorageFactory

__all__ = ["StorageBase", "StorageFactory"]
