from fractions import Fraction

import pytest

from app.services import runs
from app.services.netcalc.errors import InvalidParameter, UnknownScenario
from app.services.simulation.scenarios import (
    SCENARIOS,
    build_fig6_example,
    build_fig8_example,
    build_fig12_example,
    build_scenario,
    scenario_from_json,
)
from app.services.simulation.traces import CSV_COLUMNS


class TestRegistry:
    def test_names(self):
        for name in ("nonsync-instability", "sync-pfr-penalty", "sync-ir-instability", "fig12", "fig6", "fig8"):
            assert name in SCENARIOS

    def test_unknown_scenario(self):
        with pytest.raises(UnknownScenario):
            build_scenario("nope")

    def test_unknown_parameter(self):
        with pytest.raises(InvalidParameter):
            build_scenario("nonsync-instability", {"speed": 3})

    def test_invalid_parameter(self):
        with pytest.raises(InvalidParameter):
            build_scenario("sync-ir-instability", {"n": 2})
        with pytest.raises(InvalidParameter):
            build_scenario("sync-pfr-penalty", {"rho": 1})

    def test_descriptor_round_trip(self):
        descriptor = build_fig8_example().describe()
        rebuilt = scenario_from_json(descriptor)
        assert rebuilt.describe() == descriptor
        assert rebuilt.run().predicate_pass

    def test_descriptor_needs_a_name(self):
        with pytest.raises(InvalidParameter):
            scenario_from_json({"params": {}})


class TestNonSyncInstability:
    def test_slope_six_sevenths_toy(self):
        result = build_fig6_example().run()
        local = result.details["local_delays"]
        assert len(local) == 141
        assert local == [Fraction(j, 7) for j in range(141)]
        assert result.details["backlog_by_period"] == [k + 1 for k in range(1, 21)]
        assert result.max_delay_by_period == [Fraction(7 * k + 6, 6) for k in range(20)]
        assert result.fitted_divergence_rate == Fraction(1, 6)
        assert result.details["e"] == Fraction(35, 6)
        assert result.details["threshold"] == 41
        assert result.predicate_pass

    def test_period_count_override(self):
        result = build_scenario("fig6", periods=5).run()
        assert len(result.max_delay_by_period) == 5
        assert result.details["backlog_by_period"] == [2, 3, 4, 5, 6]

    def test_divergence_rate_is_rho_minus_one(self):
        result = build_scenario("nonsync-instability", {"period": "1/100"}).run()
        assert result.fitted_divergence_rate == Fraction("0.0002")
        assert result.fitted_divergence_rate == result.details["closed_form_rate"]
        assert result.predicate_pass

    def test_backlog_grows_every_period(self):
        result = build_scenario("nonsync-instability", {"rho": "1.1", "period": "1/100"}).run()
        backlog = result.details["backlog_by_period"]
        assert all(b1 <= b2 for b1, b2 in zip(backlog, backlog[1:]))
        assert backlog[-1] > backlog[0]
        delays = result.max_delay_by_period
        assert all(d1 < d2 for d1, d2 in zip(delays, delays[1:]))

    def test_backlog_never_shrinks_at_default_rho(self):
        backlog = build_scenario("nonsync-instability", {"period": "1/100"}).run().details["backlog_by_period"]
        assert all(b1 <= b2 for b1, b2 in zip(backlog, backlog[1:]))

    def test_ideal_clock_is_stable(self):
        result = build_scenario("nonsync-instability", {"rho": 1, "period": "1/100"}).run()
        assert result.fitted_divergence_rate == 0
        assert max(result.details["local_delays"]) == 0
        assert result.predicate_pass


class TestSyncPfrPenalty:
    def test_toy_penalty_is_delta(self):
        result = build_fig8_example().run()
        delays = result.details["tai_delays"]
        assert delays[:7] == [Fraction(j, 6) for j in range(7)]
        assert all(d == 1 for d in delays[6:])
        assert result.details["penalty"] == 1
        assert result.details["clock_valid"]
        assert result.predicate_pass

    def test_tsn_parameters(self):
        result = build_scenario("sync-pfr-penalty").run()
        assert result.details["penalty"] == Fraction("1e-6")
        assert result.details["penalty"] <= result.details["upper_bound"]
        assert result.details["clock_valid"]
        assert result.predicate_pass


class TestSyncIrInstability:
    def test_defaults(self):
        result = build_scenario("sync-ir-instability").run()
        details = result.details
        assert result.predicate_pass
        assert details["d2_vs_d1_holds"]
        assert details["alignment_holds"]
        assert details["clocks_valid"]
        first = details["first_packet_delays"]
        assert all(d >= bound for d, bound in zip(first, details["lower_bounds"]))
        assert first[-1] > first[0]
        assert result.fitted_divergence_rate == details["closed_form_rate"]
        assert 0 < details["closed_form_rate"] < details["asymptotic_rate"]

    def test_more_sources(self):
        result = build_scenario("sync-ir-instability", {"n": 4, "s1": "1.01", "rho": "1.03"}, periods=5).run()
        assert result.predicate_pass
        assert result.details["clocks_valid"]
        assert len(result.details["first_packet_delays"]) == 5
        assert result.fitted_divergence_rate == result.details["closed_form_rate"]


class TestMissedDeadline:
    def test_nonideal_clock(self):
        result = build_fig12_example().run()
        assert result.details["fifo_input"] == {"1a": 0, "2a": 1, "2b": Fraction(3, 2), "1b": 2}
        assert result.details["ir_output"] == {"1a": 5, "2a": 6, "2b": 8, "1b": 8}
        assert result.details["fifo_delay_1a"] == 5
        assert result.details["deadlines"]["1b"] == 7
        assert result.details["missed"] == ["1b", "2b"]
        assert result.predicate_pass

    def test_ideal_clock_meets_every_deadline(self):
        result = build_fig12_example(ideal=True).run()
        assert result.details["ir_output"] == {"1a": 5, "2a": 6, "1b": 7, "2b": 8}
        assert result.details["missed"] == []
        assert result.predicate_pass

    def test_ideal_flag_through_registry(self):
        result = build_scenario("fig12", {"ideal": 1}).run()
        assert result.details["missed"] == []


class TestSimulateService:
    def test_summary_and_traces(self):
        summary, output = runs.simulate("fig12")
        assert summary["scenario"] == "fig12"
        assert summary["predicate_pass"] is True
        assert summary["details"]["ir_output"]["1b"] == "8"
        assert summary["schema_version"] == "1.0"
        assert output.exit_code == 0
        assert output.csv_text.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert len(output.csv_text.splitlines()) == 1 + 8

    def test_failed_predicate_gives_exit_code_two(self):
        # an unreachable threshold: e above anything the horizon can produce
        summary, output = runs.simulate("fig6", {"e": 1000}, periods=2)
        assert summary["predicate_pass"] is False
        assert output.exit_code == 2
