import hashlib
import io
import json
import logging
import threading
from typing import Dict, Optional

import numpy as np

from app.config.settings import AuditSettings, settings as default_settings
from app.infrastructure.storage.base import StorageBase
from app.infrastructure.storage.factory import StorageFactory
from app.schemes.curve import CurveSpec
from app.services.audit.orderstats_service import OrderStatsService, VkTable
from app.services.tradeoff.basepair_service import BasePairService
from app.services.tradeoff.curves import TradeoffCurve
from app.utils.common import round_param

# 族参数在缓存键中的舍入位数（1e−6）
_PARAM_DIGITS = 6


class VkCacheService:
    """VkTable 的内容寻址缓存：进程内字典 + 可选的存储后端"""

    def __init__(self, storage: Optional[StorageBase] = None):
        self.storage = storage
        self._memo: Dict[str, VkTable] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @classmethod
    def from_settings(cls, config: Optional[AuditSettings] = None) -> "VkCacheService":
        config = config or default_settings
        storage = StorageFactory.create_connection(config=config)
        if storage is not None and not storage.health_check():
            logging.warning(f"缓存存储不可用，本次运行只使用进程内缓存: {config.cache_type}")
            storage.close()
            storage = None
        return cls(storage)

    def close(self):
        if self.storage is not None:
            self.storage.close()

    @staticmethod
    def cache_key(spec: CurveSpec, n: int, r: int, grid_size: int, quad_nodes: int, curve_grid: Optional[int] = None) -> str:
        params = {
            name: round_param(value, _PARAM_DIGITS)
            for name, value in spec.model_dump(exclude_none=True, exclude={"family"}).items()
        }
        if curve_grid is not None:
            params["curve_grid"] = curve_grid
        payload = json.dumps(
            {"family": spec.family.value, "params": params, "n": n, "r": r, "grid_size": grid_size, "quad_nodes": quad_nodes},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @staticmethod
    def serialize(table: VkTable) -> bytes:
        header = {
            "n": table.n,
            "r": table.r,
            "family": table.family.to_json_dict(),
            "grid_size": table.grid_size,
            "quad_nodes": table.quad_nodes,
            "disc_error": table.disc_error,
        }
        buffer = io.BytesIO()
        np.savez(buffer, header=np.array(json.dumps(header)), v=table.v, quad_error=table.quad_error)
        return buffer.getvalue()

    @staticmethod
    def deserialize(data: bytes) -> VkTable:
        with np.load(io.BytesIO(data), allow_pickle=False) as archive:
            header = json.loads(str(archive["header"]))
            return VkTable(
                n=header["n"],
                r=header["r"],
                family=CurveSpec.model_validate(header["family"]),
                v=archive["v"].copy(),
                quad_error=archive["quad_error"].copy(),
                grid_size=header["grid_size"],
                quad_nodes=header["quad_nodes"],
                disc_error=header["disc_error"],
            )

    def get(self, key: str) -> Optional[VkTable]:
        with self._lock:
            table = self._memo.get(key)
        if table is not None or self.storage is None:
            return table
        data = self.storage.get(key)
        if data is None:
            return None
        try:
            table = self.deserialize(data)
        except Exception as e:
            logging.warning(f"缓存条目损坏，删除后重新计算: {key}: {e}")
            self.storage.delete(key)
            return None
        with self._lock:
            self._memo[key] = table
        return table

    def put(self, key: str, table: VkTable):
        with self._lock:
            self._memo[key] = table
        if self.storage is not None:
            self.storage.put(key, self.serialize(table), metadata={"family": table.family.to_json_dict(), "n": table.n, "r": table.r})

    def key_for(self, curve: TradeoffCurve, n: int, r: int, config: AuditSettings) -> str:
        return self.cache_key(curve.to_spec(), n, r, config.grid_size, config.quad_nodes, getattr(curve, "grid_size", None))

    def invalidate(self, curve: TradeoffCurve, n: int, r: int, config: Optional[AuditSettings] = None) -> bool:
        """删除一个条目（进程内与存储后端），返回存储后端中是否存在过"""
        key = self.key_for(curve, n, r, config or default_settings)
        with self._lock:
            self._memo.pop(key, None)
        if self.storage is None or not self.storage.exists(key):
            return False
        metadata = self.storage.get_metadata(key)
        removed = self.storage.delete(key)
        logging.info(f"已删除缓存条目 {key[:12]}: {metadata}")
        return removed

    def get_or_compute(self, curve: TradeoffCurve, n: int, r: int, config: Optional[AuditSettings] = None) -> VkTable:
        """命中缓存则直接返回，否则构造基础分布对并计算 v_k 表"""
        config = config or default_settings
        key = self.key_for(curve, n, r, config)
        table = self.get(key)
        if table is not None:
            self.hits += 1
            return table
        self.misses += 1
        pair = BasePairService.build_base_pair(curve, config.grid_size)
        table = OrderStatsService.compute_vk_table(pair, n, r, config)
        self.put(key, table)
        return table
