"""Operations shared by the CLI, the HTTP routes and the background worker.

Each function takes plain JSON-like input, returns JSON-ready output and raises
``NetCalcError`` or ``pydantic.ValidationError`` on bad input.
"""
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple, Union

from app.schemas import (
    SCHEMA_VERSION,
    ClockValidationRequest,
    CompareRequest,
    NetworkDescription,
    ReclockDelayRequest,
    RunReport,
)
from app.services.netcalc.clocks import clock_from_json, envelope_to_json, validate_envelope
from app.services.netcalc.methods import (
    CompareRow,
    SourceSpec,
    compare_to_csv,
    default_compare_element,
    default_compare_source,
    ete_compare,
)
from app.services.netcalc.network import EXIT_OK, EXIT_WARNING, analyze_network
from app.services.netcalc.numbers import fmt, percent, q
from app.services.netcalc.reclock import reclock_delay, relative_increase
from app.services.simulation.regulators import ElementModel
from app.services.simulation.scenarios import ScenarioResult, build_scenario, scenario_from_json
from app.services.simulation.traces import traces_to_csv

logger = logging.getLogger(__name__)


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def analyze(payload: Union[Dict[str, Any], NetworkDescription], stamp: bool = False) -> Tuple[Dict[str, Any], int]:
    """Network description -> (report JSON, exit code 0 or 2)."""
    if isinstance(payload, NetworkDescription):
        description = payload
    else:
        description = NetworkDescription.model_validate(payload)
    report = analyze_network(description.to_network())
    data = report.to_json()
    data["schema_version"] = SCHEMA_VERSION
    if stamp:
        data["generated_at"] = _stamp()
    # Published schema check on the way out
    RunReport.model_validate(data)
    for warning in report.warnings:
        logger.warning(warning)
    return data, report.exit_code


@dataclass
class SimulationOutput:
    result: ScenarioResult
    csv_text: str

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.result.predicate_pass else EXIT_WARNING


def simulate(
    scenario: Any, params: Optional[Dict[str, Any]] = None, periods: Optional[int] = None, stamp: bool = False
) -> Tuple[Dict[str, Any], SimulationOutput]:
    """Scenario name (or descriptor JSON) -> (summary JSON, traces)."""
    if isinstance(scenario, dict):
        built = scenario_from_json(scenario, periods)
    else:
        built = build_scenario(str(scenario), params, periods)
    result = built.run()
    summary = result.summary()
    summary["schema_version"] = SCHEMA_VERSION
    if stamp:
        summary["generated_at"] = _stamp()
    logger.info("scenario %s: predicate_pass=%s", result.name, result.predicate_pass)
    return summary, SimulationOutput(result, traces_to_csv(result.traces))


def compare(request: CompareRequest) -> List[CompareRow]:
    base_source = default_compare_source()
    source = SourceSpec(
        q(request.r0) if request.r0 is not None else base_source.r0,
        q(request.b0) if request.b0 is not None else base_source.b0,
        q(request.ell) if request.ell is not None else base_source.ell,
    )
    element = default_compare_element()
    if request.rate is not None or request.latency is not None:
        element = ElementModel.rate_latency(
            q(request.rate) if request.rate is not None else element.rate,
            q(request.latency) if request.latency is not None else element.latency,
        )
    return ete_compare(
        range(1, request.hops + 1),
        request.envelope.to_envelope(),
        element=element,
        source=source,
        methods=request.methods,
        W=q(request.W),
        delta=None if request.delta is None else q(request.delta),
    )


def compare_json(rows: List[CompareRow]) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "rows": [r.to_json() for r in rows]}


def validate_clock(request: ClockValidationRequest) -> Dict[str, Any]:
    d = clock_from_json(request.clock)
    env = request.envelope.to_envelope()
    domain = None if request.domain is None else (q(request.domain[0]), q(request.domain[1]))
    report = validate_envelope(d, env, domain)
    out = report.to_json()
    out["envelope"] = envelope_to_json(env)
    return out


def reclock(request: ReclockDelayRequest) -> Dict[str, Any]:
    env = request.envelope.to_envelope()
    D = q(request.delay)
    bound = reclock_delay(D, env)
    out = {"delay": fmt(D), "reclocked": fmt(bound), "envelope": envelope_to_json(env)}
    if D > 0:
        out["relative_increase"] = fmt(relative_increase(D, env))
        out["relative_increase_percent"] = percent(relative_increase(D, env))
    return out


def execute(run_type: str, payload: Dict[str, Any]) -> Tuple[Dict[str, Any], int, Optional[str]]:
    """(result JSON, exit code, CSV artifact or None) for a queued run."""
    if run_type == "ANALYZE":
        data, code = analyze(payload)
        return data, code, None
    if run_type == "SIMULATE":
        scenario = payload.get("scenario")
        if scenario is None:
            raise ValueError("SIMULATE payload needs a 'scenario'")
        summary, output = simulate(scenario, payload.get("params"), payload.get("periods"))
        return summary, output.exit_code, output.csv_text
    if run_type == "COMPARE":
        rows = compare(CompareRequest.model_validate(payload))
        return compare_json(rows), EXIT_OK, compare_to_csv(rows)
    if run_type == "VALIDATE_CLOCK":
        out = validate_clock(ClockValidationRequest.model_validate(payload))
        return out, EXIT_OK if out["valid"] else EXIT_WARNING, None
    raise ValueError(f"Unknown run type: {run_type}")

