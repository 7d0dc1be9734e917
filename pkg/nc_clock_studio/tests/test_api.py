import logging
from datetime import datetime

import pytz

from app.config import config
from app.db import crud
from app.routes.system import format_timestamp
from app.services.netcalc.clocks import PRESETS, clock_to_json, linear
from app.services.tasks.manager import task_manager
from app.utils import TimezoneFormatter

NETWORK = {
    "envelope": "tsn-nonsync",
    "elements": [{"id": "sw1", "kind": "RateLatencyServer", "rate": "1e7", "latency": "1e-5"},
                 {"id": "sw2", "kind": "FixedDelayBound", "delay": "2e-5"}],
    "regulators": [{"id": "reg1"}],
    "flows": [{"id": "f", "r0": "1e6", "b0": "1e4", "ell": "1e3",
               "path": [{"element": "sw1", "regulator": "reg1"}, {"element": "sw2"}]}],
}


def drain(db):
    while task_manager.run_next(db):
        pass


class TestAnalysis:
    def test_analyze(self, client):
        response = client.post("/api/analyze", json=NETWORK)
        assert response.status_code == 200
        body = response.json()
        assert body["exit_code"] == 0
        assert body["flows"]["f"]["hops"][1]["element_bound"] == "1/50000"

    def test_invalid_description(self, client):
        response = client.post("/api/analyze", json=dict(NETWORK, method="fastest"))
        assert response.status_code == 422

    def test_compare(self, client):
        response = client.post("/api/compare", json={"hops": 2})
        assert response.status_code == 200
        assert len(response.json()["rows"]) == 8

    def test_reclock_delay(self, client):
        response = client.post("/api/reclock/delay", json={"delay": "1e-6", "envelope": "tsn-nonsync"})
        assert response.status_code == 200
        body = response.json()
        assert body["relative_increase"] == "21/5000"
        assert body["relative_increase_percent"] == "0.42"


class TestScenarios:
    def test_list_and_describe(self, client):
        names = client.get("/api/scenarios").json()["scenarios"]
        assert "sync-ir-instability" in names
        described = client.get("/api/scenarios/fig12").json()
        assert described["scenario"] == "fig12"
        assert described["regulator"]["kind"] == "IR"

    def test_simulate(self, client):
        response = client.post("/api/simulate/fig12", json={})
        assert response.status_code == 200
        assert response.json()["predicate_pass"] is True

    def test_simulate_writes_traces(self, client):
        response = client.post("/api/simulate/fig8", json={"write_csv": True})
        assert response.json()["traces_csv"] == "output/fig8_traces.csv"

    def test_unknown_scenario(self, client):
        response = client.post("/api/simulate/nosuch", json={})
        assert response.status_code == 400
        assert response.json()["error"] == "unknown-scenario"


class TestClocks:
    def test_validate(self, client):
        env = PRESETS["tsn-nonsync"]
        ok = client.post("/api/clocks/validate", json={"clock": clock_to_json(linear(env.rho)), "envelope": "tsn-nonsync"})
        assert ok.json()["valid"] is True
        bad = client.post("/api/clocks/validate", json={"clock": clock_to_json(linear(2)), "envelope": "tsn-nonsync"})
        assert bad.json()["violation"]["constraint"] == "upper"

    def test_presets(self, client):
        presets = client.get("/api/clocks/presets").json()
        assert {p["name"] for p in presets} == set(PRESETS)
        assert next(p for p in presets if p["name"] == "tsn-nonsync")["rho"] == "5001/5000"


class TestRuns:
    def test_queued_compare(self, client, db):
        created = client.post("/api/runs", json={"run_type": "COMPARE", "payload": {"hops": 2}})
        assert created.status_code == 202
        run_id = created.json()["id"]
        assert created.json()["status"] == "queued"
        drain(db)
        run = client.get(f"/api/runs/{run_id}").json()
        assert run["status"] == "done"
        assert run["exit_code"] == 0
        assert len(run["result"]["rows"]) == 8
        assert run["artifact_path"] == f"output/run_{run_id}_compare.csv"

    def test_oldest_queued_run_goes_first(self, client, db):
        drain(db)
        first = client.post("/api/runs", json={"run_type": "COMPARE", "payload": {"hops": 2}}).json()["id"]
        client.post("/api/runs", json={"run_type": "COMPARE", "payload": {"hops": 2}})
        assert crud.get_next_queued_run(db).id == first
        drain(db)
        assert crud.get_next_queued_run(db) is None

    def test_failed_run(self, client, db):
        run_id = client.post("/api/runs", json={"run_type": "SIMULATE", "payload": {}}).json()["id"]
        drain(db)
        run = client.get(f"/api/runs/{run_id}").json()
        assert run["status"] == "failed"
        assert run["exit_code"] == 1
        assert "scenario" in run["error"]

    def test_unknown_run_type(self, client):
        assert client.post("/api/runs", json={"run_type": "RENDER"}).status_code == 422

    def test_missing_run(self, client):
        response = client.get("/api/runs/999999")
        assert response.status_code == 404
        assert "error" in response.json()

    def test_list_and_clear(self, client, db):
        client.post("/api/runs", json={"run_type": "ANALYZE", "payload": NETWORK})
        drain(db)
        assert any(r["run_type"] == "ANALYZE" for r in client.get("/api/runs").json())
        assert client.post("/api/runs/clear").json()["deleted"] >= 1
        assert client.get("/api/runs", params={"status": "done"}).json() == []


class TestSystem:
    def test_version(self, client):
        assert client.get("/api/system/version").json()["version"] == "0.1.0"

    def test_root(self, client):
        assert client.get("/").json()["name"] == "NC Clock Studio"

    def test_worker_progress_log(self, client, db):
        run_id = client.post("/api/runs", json={"run_type": "VALIDATE_CLOCK", "payload": {
            "clock": clock_to_json(linear(1)), "envelope": "tsn-nonsync"}}).json()["id"]
        drain(db)
        logs = client.get("/api/system/logs", params={"limit": 1000}).json()
        assert any(log["progress_info"] == f"[run {run_id}]" and log["module"] == "[VALIDATE_CLOCK]" for log in logs)

    def test_log_timestamps_follow_timezone(self, monkeypatch):
        monkeypatch.setattr(config, "APP_TIMEZONE", "Europe/Berlin")
        assert format_timestamp(datetime(2024, 7, 1, 12, 0)) == "2024-07-01 14:00:00"
        assert format_timestamp(datetime(2024, 1, 15, 12, 0)) == "2024-01-15 13:00:00"
        assert format_timestamp(None) == ""

    def test_log_formatter_timezone(self, monkeypatch):
        monkeypatch.setattr(config, "APP_TIMEZONE", "America/New_York")
        record = logging.LogRecord("app", logging.INFO, __file__, 1, "hello", None, None)
        record.created = datetime(2024, 7, 1, 12, 0, tzinfo=pytz.utc).timestamp()
        formatter = TimezoneFormatter(fmt="[%(asctime)s] %(message)s", datefmt="%Y-%m-%d %H:%M")
        assert formatter.format(record) == "[2024-07-01 08:00] hello"
