"""Request and report models shared by the API, the CLI and the worker.

Rationals travel as strings ("7/6", "1e-4", "0.0002", "12"); numbers are accepted on
input and normalized to the lossless ``p/q`` text form.
"""
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from app.services.netcalc.clocks import ClockEnvelope, envelope_from_json
from app.services.netcalc.methods import RoundingGrid, SourceSpec
from app.services.netcalc.network import Network, NetworkFlow, NetworkRegulator
from app.services.netcalc.numbers import fmt, q
from app.services.simulation.regulators import ElementModel, RegulatorKind

SCHEMA_VERSION = "1.0"


def _rational_text(value: Any) -> str:
    if isinstance(value, bool):
        raise ValueError("expected a rational number, got a boolean")
    return fmt(q(value))


Rational = Annotated[str, BeforeValidator(_rational_text)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvelopeModel(_Strict):
    preset: Optional[str] = None
    rho: Optional[Rational] = None
    eta: Optional[Rational] = None
    delta: Optional[Rational] = None

    @model_validator(mode="before")
    @classmethod
    def _preset_name(cls, data):
        if isinstance(data, str):
            return {"preset": data}
        return data

    @model_validator(mode="after")
    def _complete(self):
        if self.preset is None and (self.rho is None or self.eta is None):
            raise ValueError("envelope needs a preset name or both rho and eta")
        self.to_envelope()
        return self

    def to_envelope(self) -> ClockEnvelope:
        if self.preset is not None:
            env = envelope_from_json(self.preset)
            return env.with_delta(q(self.delta)) if self.delta is not None else env
        return envelope_from_json({"rho": self.rho, "eta": self.eta, "delta": self.delta})


class GridModel(_Strict):
    rate_step: Optional[Rational] = None
    burst_step: Optional[Rational] = None

    def to_grid(self) -> RoundingGrid:
        return RoundingGrid(
            None if self.rate_step is None else q(self.rate_step),
            None if self.burst_step is None else q(self.burst_step),
        )


class ElementModelSpec(_Strict):
    id: str
    kind: Literal["ZeroDelay", "FixedDelayBound", "RateLatencyServer"]
    delay: Optional[Rational] = None
    rate: Optional[Rational] = None
    latency: Optional[Rational] = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        if self.kind == "FixedDelayBound" and self.delay is None:
            raise ValueError(f"element '{self.id}': FixedDelayBound needs 'delay'")
        if self.kind == "RateLatencyServer" and (self.rate is None or self.latency is None):
            raise ValueError(f"element '{self.id}': RateLatencyServer needs 'rate' and 'latency'")
        return self

    def to_model(self) -> ElementModel:
        if self.kind == "ZeroDelay":
            return ElementModel.zero_delay()
        if self.kind == "FixedDelayBound":
            return ElementModel.fixed_delay(q(self.delay))
        return ElementModel.rate_latency(q(self.rate), q(self.latency))


class RegulatorSpec(_Strict):
    id: str
    kind: Literal["PFR", "IR"] = "PFR"
    grid: Optional[GridModel] = None


class HopRef(_Strict):
    element: str
    regulator: Optional[str] = None


class FlowSpec(_Strict):
    id: str
    r0: Rational
    b0: Rational
    ell: Rational = "1"
    path: List[HopRef] = Field(min_length=1)


class NetworkDescription(_Strict):
    schema_version: str = SCHEMA_VERSION
    envelope: EnvelopeModel
    method: Literal["cascade", "adam", "sync-nonadapted", "none"] = "cascade"
    W: Optional[Rational] = None
    elements: List[ElementModelSpec] = []
    regulators: List[RegulatorSpec] = []
    flows: List[FlowSpec] = []

    @model_validator(mode="after")
    def _references(self):
        for kind, items in (("elements", self.elements), ("regulators", self.regulators), ("flows", self.flows)):
            seen = set()
            for i, item in enumerate(items):
                if item.id in seen:
                    raise ValueError(f"/{kind}/{i}/id: duplicate id '{item.id}'")
                seen.add(item.id)
        elements = {e.id for e in self.elements}
        regulators = {r.id: r for r in self.regulators}
        for i, flow in enumerate(self.flows):
            for j, hop in enumerate(flow.path):
                pointer = f"/flows/{i}/path/{j}"
                if hop.element not in elements:
                    raise ValueError(f"{pointer}/element: unknown element '{hop.element}'")
                if hop.regulator is not None and hop.regulator not in regulators:
                    raise ValueError(f"{pointer}/regulator: unknown regulator '{hop.regulator}'")
                if hop.regulator is None and j < len(flow.path) - 1:
                    raise ValueError(f"{pointer}/regulator: only the last hop of a flow may be unregulated")
                if self.method == "adam" and hop.regulator is not None and regulators[hop.regulator].kind != "PFR":
                    raise ValueError(f"{pointer}/regulator: method 'adam' needs per-flow regulators (PFR)")
        if self.method == "sync-nonadapted" and not self.envelope.to_envelope().synchronized:
            raise ValueError("/envelope: method 'sync-nonadapted' needs a synchronized envelope (delta)")
        return self

    def to_network(self) -> Network:
        regulators = {
            r.id: NetworkRegulator(r.id, RegulatorKind(r.kind), r.grid.to_grid() if r.grid else RoundingGrid())
            for r in self.regulators
        }
        flows = tuple(
            NetworkFlow(
                f.id,
                SourceSpec(q(f.r0), q(f.b0), q(f.ell)),
                tuple((h.element, h.regulator) for h in f.path),
            )
            for f in self.flows
        )
        return Network(
            env=self.envelope.to_envelope(),
            elements={e.id: e.to_model() for e in self.elements},
            regulators=regulators,
            flows=flows,
            method=self.method,
            margin=None if self.W is None else q(self.W),
        )


# ---------------------------------------------------------------- reports


class CurveSegmentModel(BaseModel):
    t: str
    v: str
    rv: str
    slope: str


class CurveModel(BaseModel):
    segments: List[CurveSegmentModel]
    jump0: str


class RegulatorConfigModel(BaseModel):
    kind: Optional[Literal["PFR", "IR"]] = None
    r: str
    b: str


class HopReportModel(BaseModel):
    hop: int
    element_bound: str
    hop_bound: str
    regulator: Optional[RegulatorConfigModel] = None
    arrival_curve: CurveModel


class EnvelopeReportModel(BaseModel):
    rho: str
    eta: str
    delta: Optional[str] = None


class FlowReportModel(BaseModel):
    method: str
    envelope: EnvelopeReportModel
    W: Optional[str] = None
    hops: List[HopReportModel]
    ete: str
    warnings: List[str] = []


class RunReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    method: str
    envelope: EnvelopeReportModel
    flows: Dict[str, FlowReportModel] = {}
    warnings: List[str] = []
    exit_code: int = 0
    generated_at: Optional[str] = None


# ---------------------------------------------------------------- request bodies


class SimulateRequest(_Strict):
    params: Dict[str, Union[str, int, float, None]] = {}
    periods: Optional[int] = Field(default=None, ge=1)
    write_csv: bool = False


class CompareRequest(_Strict):
    hops: int = Field(default=10, ge=1, le=64)
    envelope: EnvelopeModel = EnvelopeModel(preset="tsn-nonsync")
    methods: List[Literal["ideal", "cascade", "adam", "sync-nonadapted"]] = [
        "ideal", "cascade", "adam", "sync-nonadapted"
    ]
    W: Rational = "11/10"
    delta: Optional[Rational] = None
    r0: Optional[Rational] = None
    b0: Optional[Rational] = None
    ell: Optional[Rational] = None
    rate: Optional[Rational] = None
    latency: Optional[Rational] = None


class ClockValidationRequest(_Strict):
    clock: Dict[str, Any]
    envelope: EnvelopeModel
    domain: Optional[List[Rational]] = Field(default=None, min_length=2, max_length=2)


class ReclockDelayRequest(_Strict):
    delay: Rational
    envelope: EnvelopeModel


class RunRequest(_Strict):
    run_type: Literal["ANALYZE", "SIMULATE", "COMPARE", "VALIDATE_CLOCK"]
    payload: Dict[str, Any] = {}


def report_json_schema() -> dict:
    return RunReport.model_json_schema()


def network_json_schema() -> dict:
    return NetworkDescription.model_json_schema()
