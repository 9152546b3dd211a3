import csv
import logging
import time
from concurrent import futures
from typing import Dict, List, Optional, TextIO

from app.config.settings import AuditSettings, settings as default_settings
from app.constants.common import SWEEP_CSV_HEADER
from app.schemes.curve import NullHypothesisFamily
from app.schemes.sweep import MechanismGrid, SweepSpec
from app.schemes.transcript import MechanismSpec
from app.services.audit.auditor_service import AuditorService
from app.services.simulation.mechanism_service import MechanismService
from app.services.tradeoff.tradeoff_service import TradeoffService
from app.utils.common import format_float


class SweepService:
    """批量实验：每个单元 模拟 → 审计，按单元顺序输出 CSV 行"""

    @staticmethod
    def null_family(grid: MechanismGrid, spec: MechanismSpec, sweep: SweepSpec) -> NullHypothesisFamily:
        if sweep.family is None:
            return spec.null_family()
        return NullHypothesisFamily(family=sweep.family, delta=grid.delta, q=grid.q)

    @staticmethod
    def run_cell(auditor: AuditorService, sweep: SweepSpec, grid: MechanismGrid, theta: float, spec: MechanismSpec) -> Dict[str, str]:
        """单个单元；失败时记录到 error 列，不中断整个实验"""
        row = {name: "" for name in SWEEP_CSV_HEADER}
        row.update(family=spec.kind.value, param=format_float(theta), n=str(spec.n), r=str(spec.r), seed=str(spec.seed))
        started = time.perf_counter()
        try:
            transcript = MechanismService.simulate(spec, auditor.config)
            family = SweepService.null_family(grid, spec, sweep)
            report = auditor.audit_transcript(transcript, family, sweep.report_delta, sweep.significance, sweep.tail)
            true_curve = TradeoffService.curve_for(spec.null_family(), spec.theta, auditor.config.subsampled_grid_size)
            eps_upper = TradeoffService.fdp_to_eps_delta(true_curve, report.report_delta)
            row.update(
                u=str(report.u),
                accuracy=format_float(report.accuracy),
                p_value=format_float(report.p_value),
                eps_lower=format_float(report.eps_lower),
                eps_upper=format_float(eps_upper),
            )
        except Exception as e:
            logging.error(f"实验单元失败: {spec.describe()}, n={spec.n}, seed={spec.seed}: {e}")
            row["error"] = f"{type(e).__name__}: {e}"
        row["runtime_ms"] = format_float(round((time.perf_counter() - started) * 1000.0, 3))
        return row

    @staticmethod
    def run(sweep: SweepSpec, config: Optional[AuditSettings] = None, auditor: Optional[AuditorService] = None) -> List[Dict[str, str]]:
        """并行运行全部单元；返回的行顺序与单元展开顺序一致"""
        config = config or default_settings
        cells = list(sweep.cells())
        # 单元之间并行时，单元内的模拟与审计都改为单线程
        if config.workers > 1 and len(cells) > 1:
            nested = config.model_copy(update={"workers": 1})
            auditor = AuditorService(nested, auditor.cache if auditor is not None else None)
        else:
            auditor = auditor or AuditorService(config)
        logging.info(f"开始批量实验: {len(cells)} 个单元, 线程数 {config.workers}")
        with futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
            rows = list(executor.map(lambda cell: SweepService.run_cell(auditor, sweep, *cell), cells))
        failed = sum(1 for row in rows if row["error"])
        logging.info(f"批量实验完成: 成功 {len(rows) - failed}, 失败 {failed}, 缓存命中 {auditor.cache.hits}")
        return rows

    @staticmethod
    def write_csv(rows: List[Dict[str, str]], stream: TextIO):
        writer = csv.DictWriter(stream, fieldnames=SWEEP_CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
