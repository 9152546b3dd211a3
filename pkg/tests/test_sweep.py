import threading

from app.constants.common import SWEEP_CSV_HEADER
from app.schemes.sweep import SweepSpec
from app.services.audit.orderstats_service import OrderStatsService
from app.services.simulation.mechanism_service import MechanismService
from app.services.simulation.sweep_service import SweepService

SPEC = {
    "mechanisms": [{"kind": "gaussian", "values": [0.5, 1.0]}, {"kind": "laplace", "values": [1.0]}],
    "n": [300],
    "r_frac": 0.1,
    "seeds": 2,
}


def _record_workers(monkeypatch):
    seen = []
    compute = OrderStatsService.compute_vk_table
    simulate = MechanismService.simulate

    def recording_compute(pair, n, r, config=None):
        seen.append(("vk", threading.current_thread() is threading.main_thread(), config.workers))
        return compute(pair, n, r, config)

    def recording_simulate(spec, config=None):
        seen.append(("simulate", threading.current_thread() is threading.main_thread(), config.workers))
        return simulate(spec, config)

    monkeypatch.setattr(OrderStatsService, "compute_vk_table", staticmethod(recording_compute))
    monkeypatch.setattr(MechanismService, "simulate", staticmethod(recording_simulate))
    return seen


def test_cells_run_single_threaded_inside_pool(small_settings, monkeypatch):
    seen = _record_workers(monkeypatch)
    rows = SweepService.run(SweepSpec.model_validate(SPEC), small_settings.model_copy(update={"workers": 4}))
    assert len(rows) == 6
    assert all(row["error"] == "" for row in rows)
    assert {kind for kind, _, _ in seen} == {"vk", "simulate"}
    assert {workers for _, _, workers in seen} == {1}


def test_single_cell_keeps_configured_workers(small_settings, monkeypatch):
    seen = _record_workers(monkeypatch)
    spec = dict(SPEC, mechanisms=[{"kind": "gaussian", "values": [1.0]}], seeds=1)
    SweepService.run(SweepSpec.model_validate(spec), small_settings.model_copy(update={"workers": 3}))
    assert {workers for kind, _, workers in seen if kind == "simulate"} == {3}


def test_rows_follow_cell_order(small_settings):
    sweep = SweepSpec.model_validate(SPEC)
    parallel = SweepService.run(sweep, small_settings.model_copy(update={"workers": 4}))
    sequential = SweepService.run(sweep, small_settings)
    keys = [name for name in SWEEP_CSV_HEADER if name not in ("runtime_ms",)]
    assert [[row[k] for k in keys] for row in parallel] == [[row[k] for k in keys] for row in sequential]
    assert [row["seed"] for row in parallel[:2]] == ["0", "1"]
