import json
from pathlib import Path

from app.cli import main
from app.schemas import network_json_schema, report_json_schema
from app.services.netcalc.clocks import PRESETS, clock_to_json, linear

SHIPPED_SCHEMAS = Path(__file__).resolve().parents[1] / "schemas"

NETWORK = {
    "envelope": "tsn-nonsync",
    "method": "cascade",
    "elements": [{"id": "sw1", "kind": "RateLatencyServer", "rate": "1e7", "latency": "1e-5"},
                 {"id": "sw2", "kind": "RateLatencyServer", "rate": "1e7", "latency": "1e-5"}],
    "regulators": [{"id": "reg1", "kind": "PFR"}],
    "flows": [{"id": "f", "r0": "1e6", "b0": "1e4", "ell": "1e3",
               "path": [{"element": "sw1", "regulator": "reg1"}, {"element": "sw2"}]}],
}


def write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestAnalyze:
    def test_report_on_stdout(self, tmp_path, capsys):
        assert main(["analyze", write_json(tmp_path / "net.json", NETWORK)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["exit_code"] == 0
        assert len(report["flows"]["f"]["hops"]) == 2

    def test_preset_override_and_out_file(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["analyze", write_json(tmp_path / "net.json", NETWORK), "--preset", "tsn-tight-sync", "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text(encoding="utf-8"))["envelope"]["delta"] == "1/1000000"

    def test_unbounded_exits_with_two(self, tmp_path, capsys):
        code = main(["analyze", write_json(tmp_path / "net.json", dict(NETWORK, method="none"))])
        assert code == 2
        assert "unbounded" in capsys.readouterr().err

    def test_bad_reference(self, tmp_path, capsys):
        bad = json.loads(json.dumps(NETWORK))
        bad["flows"][0]["path"][0]["element"] = "sw9"
        assert main(["analyze", write_json(tmp_path / "net.json", bad)]) == 1
        assert "/flows/0/path/0/element" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "nope.json")]) == 1
        assert "nope.json" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "net.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["analyze", str(path)]) == 1
        assert "invalid JSON" in capsys.readouterr().err


class TestSimulate:
    def test_named_scenario(self, tmp_path, capsys):
        traces = tmp_path / "traces.csv"
        assert main(["simulate", "fig12", "--out", str(traces)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["predicate_pass"] is True
        assert traces.read_text(encoding="utf-8").startswith("clock_tag,")

    def test_unknown_scenario(self, capsys):
        assert main(["simulate", "nosuch"]) == 1
        assert "unknown-scenario" in capsys.readouterr().err

    def test_failed_predicate(self, capsys):
        assert main(["simulate", "fig6", "--horizon", "2", "--params", '{"e": 1000}']) == 2
        assert "predicate failed" in capsys.readouterr().err

    def test_scenario_file(self, tmp_path, capsys):
        path = write_json(tmp_path / "scenario.json", {"scenario": "fig8", "params": {}})
        assert main(["simulate", path]) == 0
        assert json.loads(capsys.readouterr().out)["scenario"] == "fig8"

    def test_params_must_be_an_object(self, capsys):
        assert main(["simulate", "fig6", "--params", "[1, 2]"]) == 1


class TestCompare:
    def test_csv(self, tmp_path, capsys):
        out = tmp_path / "compare.csv"
        assert main(["compare", "--hops", "3", "--out", str(out)]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 13
        assert lines[0].startswith("n,method")

    def test_json(self, capsys):
        assert main(["compare", "--hops", "2", "--methods", "ideal,cascade", "--format", "json"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert len(data["rows"]) == 4


class TestValidateClock:
    def test_valid_and_invalid(self, tmp_path, capsys):
        rho = PRESETS["tsn-nonsync"].rho
        ok = write_json(tmp_path / "ok.json", clock_to_json(linear(rho)))
        fast = write_json(tmp_path / "fast.json", clock_to_json(linear(rho * rho)))
        assert main(["validate-clock", ok, "--preset", "tsn-nonsync"]) == 0
        assert json.loads(capsys.readouterr().out)["valid"] is True
        assert main(["validate-clock", fast, "--preset", "tsn-nonsync"]) == 2
        assert json.loads(capsys.readouterr().out)["violation"]["constraint"] == "upper"

    def test_explicit_envelope_and_domain(self, tmp_path, capsys):
        path = write_json(tmp_path / "clock.json", clock_to_json(linear(2)))
        code = main(["validate-clock", path, "--envelope", '{"rho": "2", "eta": "0"}', "--domain", "0", "10"])
        assert code == 0


class TestSchema:
    def test_written_schemas(self, tmp_path, capsys):
        assert main(["schema", "--out", str(tmp_path)]) == 0
        for name in ("network.schema.json", "report.schema.json"):
            schema = json.loads((tmp_path / name).read_text(encoding="utf-8"))
            assert schema["$id"].startswith(name)

    def test_shipped_schemas_are_current(self):
        for name, schema in (("network.schema.json", network_json_schema()), ("report.schema.json", report_json_schema())):
            shipped = json.loads((SHIPPED_SCHEMAS / name).read_text(encoding="utf-8"))
            assert set(shipped["properties"]) == set(schema["properties"])
