"""Multi-flow networks: resolve flow paths, aggregate FIFO cross traffic and run one analysis method."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from app.services.netcalc.clocks import ClockEnvelope, envelope_to_json
from app.services.netcalc.curves import PwlCurve
from app.services.netcalc.errors import ConfigurationInfeasible, InvalidParameter, UnstableElement
from app.services.netcalc.methods import (
    METHOD_ADAM,
    METHOD_CASCADE,
    METHOD_SYNC,
    FlowPath,
    Hop,
    HopBound,
    HopBoundReport,
    RoundingGrid,
    SourceSpec,
    adam_analysis,
    adam_configure,
    cascade_analysis,
    cascade_configure,
    element_arrival_curve_tai,
    element_delay_bound,
    ideal_analysis,
    sync_nonadapted_analysis,
    sync_pfr_arrival_curve,
)
from app.services.netcalc.numbers import INF, fmt
from app.services.simulation.regulators import ElementModel, RegulatorKind

logger = logging.getLogger(__name__)

METHOD_NONE = "none"
NETWORK_METHODS = (METHOD_CASCADE, METHOD_ADAM, METHOD_SYNC, METHOD_NONE)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_WARNING = 2


@dataclass(frozen=True)
class NetworkRegulator:
    id: str
    kind: RegulatorKind = RegulatorKind.PFR
    grid: RoundingGrid = RoundingGrid()


@dataclass(frozen=True)
class NetworkFlow:
    """A flow and its path: (element id, regulator id or None) per hop."""

    id: str
    source: SourceSpec
    path: Tuple[Tuple[str, Optional[str]], ...]


@dataclass(frozen=True)
class Network:
    env: ClockEnvelope
    elements: Mapping[str, ElementModel]
    regulators: Mapping[str, NetworkRegulator]
    flows: Tuple[NetworkFlow, ...]
    method: str = METHOD_CASCADE
    margin: Optional[object] = None

    def __post_init__(self):
        if self.method not in NETWORK_METHODS:
            raise InvalidParameter(f"unknown method '{self.method}' (known: {', '.join(NETWORK_METHODS)})")
        for flow in self.flows:
            if not flow.path:
                raise InvalidParameter(f"flow '{flow.id}' has an empty path")
            for k, (element, regulator) in enumerate(flow.path):
                if element not in self.elements:
                    raise InvalidParameter(f"flow '{flow.id}' hop {k + 1}: unknown element '{element}'")
                if regulator is not None and regulator not in self.regulators:
                    raise InvalidParameter(f"flow '{flow.id}' hop {k + 1}: unknown regulator '{regulator}'")
                if regulator is None and k < len(flow.path) - 1:
                    raise InvalidParameter(f"flow '{flow.id}' hop {k + 1}: only the last hop may be unregulated")

    def kinds(self, flow: NetworkFlow) -> List[Optional[RegulatorKind]]:
        return [None if reg is None else self.regulators[reg].kind for _, reg in flow.path]

    def flow_path(self, flow: NetworkFlow, cross: Sequence[Tuple[PwlCurve, ...]] = ()) -> FlowPath:
        kinds = self.kinds(flow)
        hops = []
        for k, (element, _) in enumerate(flow.path):
            hops.append(Hop(self.elements[element], kinds[k], cross[k] if cross else ()))
        return FlowPath(flow.source, tuple(hops))

    def grids(self, flow: NetworkFlow) -> List[RoundingGrid]:
        return [RoundingGrid() if reg is None else self.regulators[reg].grid for _, reg in flow.path]


@dataclass
class NetworkReport:
    method: str
    env: ClockEnvelope
    flows: Dict[str, HopBoundReport] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        unbounded = any(r.unbounded for r in self.flows.values())
        return EXIT_WARNING if unbounded or self.warnings else EXIT_OK

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "envelope": envelope_to_json(self.env),
            "flows": {fid: r.to_json() for fid, r in self.flows.items()},
            "warnings": list(self.warnings),
            "exit_code": self.exit_code,
        }


def _hop_arrivals(net: Network, flow: NetworkFlow) -> List[PwlCurve]:
    """TAI arrival curve of ``flow`` at the input of each of its elements, as the method assumes it."""
    env, source, n = net.env, flow.source, len(flow.path)
    if net.method == METHOD_CASCADE:
        configs = cascade_configure(net.flow_path(flow), env, net.grids(flow))
        out = [element_arrival_curve_tai(source.bucket, env)]
        out.extend(element_arrival_curve_tai(c, env) for c in configs[: n - 1])
        return out
    if net.method == METHOD_ADAM:
        _, config = adam_configure(net.flow_path(flow), env, net.grids(flow)[0], net.margin)
        return [element_arrival_curve_tai(config, env)] * n
    if env.synchronized:
        return [sync_pfr_arrival_curve(source.r0, source.b0, env)] * n
    return [element_arrival_curve_tai(source.bucket, env)] * n


def _unbounded_report(method: str, env: ClockEnvelope, path: FlowPath, arrivals: List[PwlCurve]) -> HopBoundReport:
    report = HopBoundReport(method, env)
    for k, hop in enumerate(path.hops):
        D = element_delay_bound(hop.element, [arrivals[k], *hop.cross])
        bound = INF if hop.regulator is not None else D
        config = path.source.bucket if hop.regulator is not None else None
        report.hops.append(HopBound(k + 1, D, bound, config, arrivals[k], hop.regulator))
    return report


def _analyze_flow(net: Network, flow: NetworkFlow, path: FlowPath, arrivals: List[PwlCurve]) -> HopBoundReport:
    env = net.env
    if net.method == METHOD_CASCADE:
        return cascade_analysis(path, env, net.grids(flow))
    if net.method == METHOD_ADAM:
        return adam_analysis(path, env, net.grids(flow)[0], net.margin)
    if net.method == METHOD_SYNC or (net.method == METHOD_NONE and env.synchronized):
        report = sync_nonadapted_analysis(path, env)
        report.method = net.method
        return report
    if env.ideal:
        report = ideal_analysis(path)
        report.method = net.method
        return report
    report = _unbounded_report(net.method, env, path, arrivals)
    report.warnings.append(
        "non-adapted regulators with non-synchronized clocks: the delay through the regulators is unbounded"
    )
    return report


def analyze_network(net: Network) -> NetworkReport:
    """Bounds for every flow; elements serve the FIFO aggregate of every flow visiting them.

    Per-flow infeasibility or instability is reported as a warning, not raised.
    """
    report = NetworkReport(net.method, net.env)
    if net.method == METHOD_SYNC and not net.env.synchronized:
        raise InvalidParameter("method 'sync-nonadapted' needs a synchronized envelope (set delta)")

    arrivals: Dict[str, List[PwlCurve]] = {}
    for flow in net.flows:
        try:
            arrivals[flow.id] = _hop_arrivals(net, flow)
        except ConfigurationInfeasible as exc:
            report.warnings.append(f"flow '{flow.id}': configuration infeasible: {exc}")

    visits: Dict[str, List[Tuple[str, int]]] = {}
    for flow in net.flows:
        for k, (element, _) in enumerate(flow.path):
            visits.setdefault(element, []).append((flow.id, k))

    for flow in net.flows:
        if flow.id not in arrivals:
            continue
        cross = []
        for k, (element, _) in enumerate(flow.path):
            others = [arrivals[fid][j] for fid, j in visits[element] if (fid, j) != (flow.id, k) and fid in arrivals]
            cross.append(tuple(others))
        path = net.flow_path(flow, cross)
        try:
            flow_report = _analyze_flow(net, flow, path, arrivals[flow.id])
        except (UnstableElement, ConfigurationInfeasible) as exc:
            report.warnings.append(f"flow '{flow.id}': {exc}")
            continue
        report.flows[flow.id] = flow_report
        for warning in flow_report.warnings:
            report.warnings.append(f"flow '{flow.id}': {warning}")
        if flow_report.unbounded and not flow_report.warnings:
            report.warnings.append(f"flow '{flow.id}': delay bound unbounded")
        logger.info("flow %s: ete %s", flow.id, fmt(flow_report.ete))
    return report
