from fractions import Fraction

import pytest
from pydantic import ValidationError

from app.schemas import NetworkDescription, network_json_schema, report_json_schema
from app.services import runs
from app.services.netcalc.network import EXIT_OK, EXIT_WARNING, analyze_network


def line_network(hops=5, method="cascade", envelope="tsn-nonsync", kind="PFR", **extra):
    """One flow over ``hops`` rate-latency elements, a regulator after all but the last."""
    data = {
        "envelope": envelope,
        "method": method,
        "elements": [
            {"id": f"e{k}", "kind": "RateLatencyServer", "rate": "1e7", "latency": "1e-5"} for k in range(1, hops + 1)
        ],
        "regulators": [{"id": f"r{k}", "kind": kind} for k in range(1, hops)],
        "flows": [
            {
                "id": "f",
                "r0": "1e6",
                "b0": "1e4",
                "ell": "1e3",
                "path": [{"element": f"e{k}", "regulator": f"r{k}" if k < hops else None} for k in range(1, hops + 1)],
            }
        ],
    }
    data.update(extra)
    return data


class TestDescription:
    def test_unknown_element(self):
        data = line_network(2)
        data["flows"][0]["path"][0]["element"] = "nowhere"
        with pytest.raises(ValidationError) as exc:
            NetworkDescription.model_validate(data)
        assert "/flows/0/path/0/element" in str(exc.value)

    def test_duplicate_ids(self):
        data = line_network(2)
        data["elements"][1]["id"] = "e1"
        with pytest.raises(ValidationError):
            NetworkDescription.model_validate(data)

    def test_adam_rejects_interleaved_regulators(self):
        with pytest.raises(ValidationError):
            NetworkDescription.model_validate(line_network(3, method="adam", kind="IR"))

    def test_sync_method_needs_delta(self):
        with pytest.raises(ValidationError):
            NetworkDescription.model_validate(line_network(3, method="sync-nonadapted"))

    def test_element_fields(self):
        data = line_network(1)
        del data["elements"][0]["latency"]
        with pytest.raises(ValidationError):
            NetworkDescription.model_validate(data)

    def test_rationals_are_normalized(self):
        description = NetworkDescription.model_validate(line_network(1, envelope={"rho": 1.0002, "eta": "4e-9"}))
        assert description.envelope.rho == "5001/5000"
        assert description.flows[0].r0 == "1000000"

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            NetworkDescription.model_validate(line_network(1, colour="blue"))

    def test_published_schemas(self):
        assert "flows" in network_json_schema()["properties"]
        assert "exit_code" in report_json_schema()["properties"]


class TestAnalyze:
    def test_cascade_line(self):
        data, code = runs.analyze(line_network(5))
        assert code == EXIT_OK
        assert data["schema_version"] == "1.0"
        flow = data["flows"]["f"]
        assert len(flow["hops"]) == 5
        assert flow["hops"][-1]["regulator"] is None
        assert data["warnings"] == []

    def test_adam_line(self):
        data, code = runs.analyze(line_network(4, method="adam", W="1.1"))
        assert code == EXIT_OK
        assert data["flows"]["f"]["W"] == "11/10"

    def test_sync_line(self):
        data, code = runs.analyze(line_network(3, method="sync-nonadapted", envelope="tsn-tight-sync"))
        assert code == EXIT_OK
        hop = data["flows"]["f"]["hops"][0]
        assert Fraction(hop["hop_bound"]) == Fraction(hop["element_bound"]) + Fraction("4e-6")

    def test_nonadapted_without_sync_is_unbounded(self):
        data, code = runs.analyze(line_network(3, method="none"))
        assert code == EXIT_WARNING
        assert data["flows"]["f"]["ete"] == "inf"
        assert any("unbounded" in w for w in data["warnings"])

    def test_nonadapted_with_ideal_clocks(self):
        data, code = runs.analyze(line_network(3, method="none", envelope={"rho": "1", "eta": "0"}))
        assert code == EXIT_OK
        assert data["flows"]["f"]["ete"] != "inf"

    def test_empty_network(self):
        data, code = runs.analyze({"envelope": "tsn-nonsync"})
        assert code == EXIT_OK
        assert data["flows"] == {}

    def test_regulator_grid(self):
        data = line_network(2)
        data["regulators"][0]["grid"] = {"rate_step": "1000"}
        report, _ = runs.analyze(data)
        assert report["flows"]["f"]["hops"][0]["regulator"]["r"] == "1001000"

    def test_stamp(self):
        data, _ = runs.analyze(line_network(1), stamp=True)
        assert "generated_at" in data


class TestSharedElements:
    def _two_flows(self):
        data = line_network(2)
        data["flows"].append(dict(data["flows"][0], id="g"))
        return data

    def test_cross_traffic_raises_the_bound(self):
        alone = analyze_network(NetworkDescription.model_validate(line_network(2)).to_network())
        shared = analyze_network(NetworkDescription.model_validate(self._two_flows()).to_network())
        assert shared.flows["f"].hops[0].element_bound > alone.flows["f"].hops[0].element_bound
        assert shared.flows["f"].ete == shared.flows["g"].ete

    def test_overloaded_element_is_a_warning(self):
        data = line_network(2)
        data["flows"][0]["r0"] = "6e6"
        data["flows"].append(dict(data["flows"][0], id="g"))
        data, code = runs.analyze(data)
        assert code == EXIT_WARNING
        assert data["flows"] == {}
        assert any("unbounded" in w for w in data["warnings"])
