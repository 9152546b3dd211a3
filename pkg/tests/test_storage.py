import pytest

from app.config.settings import AuditSettings
from app.infrastructure.storage.factory import StorageFactory
from app.infrastructure.storage.local_file_connect import LocalStorage
from app.infrastructure.storage.memory_connect import MemoryStorage
from app.services.audit.vk_cache_service import VkCacheService
from app.services.tradeoff.curves import GaussianTradeoff


@pytest.fixture(params=["local", "memory"])
def storage(request, tmp_path):
    if request.param == "local":
        return LocalStorage(cache_dir=str(tmp_path / "cache"))
    return MemoryStorage()


def test_put_get_delete(storage):
    assert storage.health_check()
    assert storage.get("abc") is None
    assert not storage.exists("abc")
    storage.put("abc", b"\x00\x01payload", {"n": 10})
    assert storage.exists("abc")
    assert storage.get("abc") == b"\x00\x01payload"
    metadata = storage.get_metadata("abc")
    assert metadata["n"] == 10 and metadata["size"] == 9
    assert storage.delete("abc")
    assert storage.get("abc") is None
    assert storage.get_metadata("abc") is None


def test_overwrite(storage):
    storage.put("key", b"first")
    storage.put("key", b"second")
    assert storage.get("key") == b"second"


def test_local_storage_leaves_no_temp_files(tmp_path):
    storage = LocalStorage(cache_dir=str(tmp_path))
    storage.put("entry", b"data")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["entry", "entry.meta"]


def test_local_storage_rejects_path_keys(tmp_path):
    storage = LocalStorage(cache_dir=str(tmp_path))
    with pytest.raises(ValueError):
        storage.put("../escape", b"x")
    assert storage.get("../escape") is None


def test_factory(tmp_path):
    config = AuditSettings(cache_type="local", cache_dir=str(tmp_path / "vk"))
    assert isinstance(StorageFactory.create_connection(config=config), LocalStorage)
    assert (tmp_path / "vk").is_dir()
    assert isinstance(StorageFactory.create_connection("memory", config), MemoryStorage)
    assert StorageFactory.create_connection("none", config) is None
    with pytest.raises(ValueError):
        StorageFactory.create_connection("s3", config)


def test_corrupted_cache_entry_is_evicted():
    storage = MemoryStorage()
    storage.put("broken", b"not an npz archive")
    cache = VkCacheService(storage)
    assert cache.get("broken") is None
    assert not storage.exists("broken")


def test_invalidate_removes_stored_table(small_settings):
    storage = MemoryStorage()
    cache = VkCacheService(storage)
    curve = GaussianTradeoff(1.0)
    cache.get_or_compute(curve, 50, 5, small_settings)
    key = cache.key_for(curve, 50, 5, small_settings)
    assert storage.exists(key)

    assert cache.invalidate(curve, 50, 5, small_settings)
    assert not storage.exists(key)
    assert not cache.invalidate(curve, 50, 5, small_settings)
    cache.get_or_compute(curve, 50, 5, small_settings)
    assert (cache.hits, cache.misses) == (0, 2)


def test_unhealthy_storage_falls_back_to_memo(tmp_path, monkeypatch):
    monkeypatch.setattr(LocalStorage, "health_check", lambda self: False)
    cache = VkCacheService.from_settings(AuditSettings(cache_type="local", cache_dir=str(tmp_path / "vk")))
    assert cache.storage is None
    cache.close()


def test_close_releases_memory_storage():
    storage = MemoryStorage()
    storage.put("key", b"data")
    VkCacheService(storage).close()
    assert not storage.exists("key")
