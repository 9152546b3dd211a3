import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type
from pydantic import Field
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.utils.common import get_project_meta

# 全局配置常量，取自 pyproject.toml
_PROJECT_META = get_project_meta()
APP_NAME = _PROJECT_META["name"]
APP_VERSION = _PROJECT_META["version"]
APP_DESCRIPTION = _PROJECT_META["description"]


class AuditSettings(BaseSettings):
    """审计配置类 - 平铺结构

    只接受构造参数和 JSON 配置文件，不读取环境变量（保证结果可复现）。
    """

    model_config = SettingsConfigDict(extra="forbid", validate_assignment=True)

    # =============================================================================
    # 数值网格配置
    # =============================================================================
    grid_size: int = Field(default=2 ** 20, ge=2 ** 10, description="基础分布对的均匀网格单元数")
    subsampled_grid_size: int = Field(default=2 ** 16, ge=2 ** 8, description="子采样高斯权衡曲线的数值网格点数")
    quad_nodes: int = Field(default=4097, ge=4097, description="每个 k 的 Beta 窗口求积节点数")
    quad_max_error: float = Field(default=1e-6, gt=0, description="v_k 求积误差上限")
    window_sigmas: float = Field(default=12.0, gt=0, description="Beta 求积窗口半宽（标准差倍数）")

    # =============================================================================
    # 审计配置
    # =============================================================================
    significance: float = Field(default=0.05, gt=0, lt=1, description="显著性水平")
    report_delta: float = Field(default=1e-5, ge=0, le=1, description="报告 (ε,δ) 下界时使用的 δ")
    tail_method: str = Field(default="chernoff", pattern="^(chernoff|exact)$", description="尾概率方法: chernoff 或 exact")
    theta_max: float = Field(default=50.0, gt=0, description="族参数二分上界（μ 或 ε）")
    probe_count: int = Field(default=8, ge=2, description="单调性探测点个数")
    bisect_rel_tol: float = Field(default=1e-4, gt=0, description="族参数二分相对精度")
    bisect_sections: int = Field(default=4, ge=1, description="每轮二分并行计算的内点个数")
    monotonic_tol: float = Field(default=1e-12, ge=0, description="单调性违例阈值")
    fallback_scan_steps: int = Field(default=64, ge=2, description="单调性失败时线性扫描步数")
    exact_tail_budget: float = Field(default=2e9, gt=0, description="精确泊松二项尾概率的 r·u 计算预算")

    # =============================================================================
    # 缓存配置
    # =============================================================================
    cache_type: str = Field(default="local", pattern="^(local|memory|none)$", description="VkTable 缓存类型: local, memory, none")
    cache_dir: str = Field(default="./.vk_cache", description="本地缓存目录")

    # =============================================================================
    # 运行配置
    # =============================================================================
    workers: int = Field(default=4, ge=1, description="线程池大小")
    app_log_level: str = Field(default="INFO", description="日志级别")
    log_dir: Optional[str] = Field(default=None, description="JSON 日志目录，为空时只输出到控制台")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # 仅保留构造参数
        return (init_settings,)

    @classmethod
    def load(cls, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> "AuditSettings":
        """
        加载配置

        Args:
            config_path: JSON 配置文件路径（可选）
            overrides: 命令行参数覆盖值，值为 None 的项被忽略

        Returns:
            AuditSettings: 合并后的配置（命令行 > 配置文件 > 默认值）
        """
        values: Dict[str, Any] = {}
        if config_path:
            with open(Path(config_path), "r", encoding="utf-8") as f:
                values.update(json.load(f))
        if overrides:
            values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


# 创建全局设置实例
settings = AuditSettings()
