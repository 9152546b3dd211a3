import logging

import pytest

from app.config.settings import AuditSettings
from app.services.audit.auditor_service import AuditorService
from app.services.audit.vk_cache_service import VkCacheService
from app.infrastructure.storage.memory_connect import MemoryStorage


SMALL_GRID = 2 ** 14


@pytest.fixture
def small_settings() -> AuditSettings:
    """小网格、内存缓存、单线程"""
    return AuditSettings(
        grid_size=SMALL_GRID,
        subsampled_grid_size=2 ** 12,
        cache_type="memory",
        workers=1,
        theta_max=20.0,
    )


@pytest.fixture
def cache() -> VkCacheService:
    return VkCacheService(MemoryStorage())


@pytest.fixture
def auditor(small_settings, cache) -> AuditorService:
    return AuditorService(small_settings, cache)


@pytest.fixture
def restore_root_logger():
    """setup_logging 会替换根 Logger 的 Handler，测试结束后还原"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)
