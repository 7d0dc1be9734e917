"""Packet-level simulation of sources, FIFO elements and regulators.

Every device works with its own clock. A regulator maps arrival stamps into its
local clock once (through ``d_to_local``) and then runs entirely in local time;
its output trace is tagged with the local clock.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple, Union

from app.services.netcalc.clocks import ClockFunction
from app.services.netcalc.curves import PwlCurve, make_delta, make_leaky_bucket, make_rate_latency
from app.services.netcalc.errors import ClockMismatch, InvalidParameter, InvalidScript, UnsupportedOperand
from app.services.netcalc.numbers import INF, Quantity, fmt, is_inf, q, q_finite
from app.services.simulation.traces import Packet, PacketTrace, TraceEvent

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class TokenBucket:
    rate: Fraction
    burst: Fraction

    def __post_init__(self):
        rate, burst = q_finite(self.rate, "rate"), q_finite(self.burst, "burst")
        if rate <= 0:
            raise InvalidParameter(f"shaping rate must be > 0, got {rate}")
        if burst < 0:
            raise InvalidParameter(f"shaping burst must be >= 0, got {burst}")
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "burst", burst)

    @property
    def curve(self) -> PwlCurve:
        return make_leaky_bucket(self.rate, self.burst)


class RegulatorKind(str, Enum):
    PFR = "PFR"
    IR = "IR"


ANY_FLOW = "*"


@dataclass(frozen=True)
class RegulatorConfig:
    """Shaping curve per flow; the ``*`` entry applies to flows not listed."""

    kind: RegulatorKind
    shaping: Mapping[str, TokenBucket] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", RegulatorKind(self.kind))
        if not self.shaping:
            raise InvalidParameter("a regulator needs at least one shaping curve")

    @classmethod
    def uniform(cls, kind, rate, burst) -> "RegulatorConfig":
        return cls(RegulatorKind(kind), {ANY_FLOW: TokenBucket(rate, burst)})

    def bucket_for(self, flow: str) -> TokenBucket:
        spec = self.shaping.get(flow) or self.shaping.get(ANY_FLOW)
        if spec is None:
            raise InvalidParameter(f"regulator has no shaping curve for flow '{flow}'")
        return spec


SigmaLike = Union[TokenBucket, RegulatorConfig, Tuple[object, object]]


def _as_config(sigma: SigmaLike, kind: RegulatorKind) -> RegulatorConfig:
    if isinstance(sigma, RegulatorConfig):
        return sigma
    if isinstance(sigma, TokenBucket):
        return RegulatorConfig(kind, {ANY_FLOW: sigma})
    rate, burst = sigma
    return RegulatorConfig.uniform(kind, rate, burst)


class _BucketState:
    def __init__(self, spec: TokenBucket):
        self.spec = spec
        self.level = spec.burst
        self.stamp: Optional[Fraction] = None

    def level_at(self, t: Fraction) -> Fraction:
        if self.stamp is None:
            return self.spec.burst
        return min(self.spec.burst, self.level + self.spec.rate * (t - self.stamp))

    def earliest(self, t: Fraction, length: Fraction) -> Fraction:
        level = self.level_at(t)
        if level >= length:
            return t
        return t + (length - level) / self.spec.rate

    def take(self, t: Fraction, length: Fraction) -> None:
        self.level = self.level_at(t) - length
        self.stamp = t


def _check_bursts(trace: PacketTrace, config: RegulatorConfig) -> None:
    longest: Dict[str, Fraction] = {}
    for p in trace.packets:
        longest[p.flow] = max(longest.get(p.flow, Fraction(0)), p.length)
    for flow, length in longest.items():
        bucket = config.bucket_for(flow)
        if bucket.burst < length:
            raise InvalidParameter(
                f"burst {fmt(bucket.burst)} of flow '{flow}' is below its packet length {fmt(length)}"
            )


def _to_local(trace: PacketTrace, d_to_local: Optional[ClockFunction]) -> PacketTrace:
    if d_to_local is None:
        return trace
    if d_to_local.source is not None and trace.clock is not None and trace.clock != d_to_local.source:
        raise ClockMismatch(f"input observed with {trace.clock}, local clock function starts from {d_to_local.source}")
    return trace.retimed(d_to_local, d_to_local.target if d_to_local.target is not None else trace.clock)


# ---------------------------------------------------------------- sources


def simulate_greedy_source(sigma: SigmaLike, ell, t_start, horizon, flow: str = "f", clock: Optional[str] = None) -> PacketTrace:
    """Greedy source: R(t) = floor(sigma(|t - t_start|+) / ell) * ell, packets up to ``horizon``."""
    bucket = _as_config(sigma, RegulatorKind.PFR).bucket_for(flow)
    ell, t_start, horizon = q_finite(ell, "ell"), q_finite(t_start, "t_start"), q_finite(horizon, "horizon")
    if ell <= 0:
        raise InvalidParameter("packet length must be > 0")
    if bucket.burst < ell:
        raise InvalidParameter(f"burst {fmt(bucket.burst)} is below the packet length {fmt(ell)}")
    events: List[TraceEvent] = []
    n = 1
    while True:
        t = t_start + max(Fraction(0), (n * ell - bucket.burst) / bucket.rate)
        if t > horizon:
            break
        events.append(TraceEvent(t, Packet(flow, n - 1, ell)))
        n += 1
    return PacketTrace(tuple(events), clock)


def simulate_periodic_source(
    first, pattern, period, count: int, ell, flow: str, clock: Optional[str] = None, labels=None
) -> PacketTrace:
    """Packets at ``first + k*period + offset`` for every offset of ``pattern`` and k < count."""
    first, period, ell = q_finite(first), q_finite(period, "period"), q_finite(ell, "ell")
    offsets = [q_finite(x) for x in pattern]
    if period <= 0:
        raise InvalidParameter("period must be > 0")
    if offsets != sorted(offsets) or (offsets and offsets[-1] >= period):
        raise InvalidParameter("pattern offsets must be sorted and shorter than the period")
    events = []
    seq = 0
    for k in range(count):
        for i, off in enumerate(offsets):
            label = labels(k, i) if labels else None
            events.append(TraceEvent(first + k * period + off, Packet(flow, seq, ell, label)))
            seq += 1
    return PacketTrace(tuple(events), clock)


# ---------------------------------------------------------------- FIFO elements


class ElementKind(str, Enum):
    ZERO_DELAY = "ZeroDelay"
    FIXED_DELAY = "FixedDelayBound"
    RATE_LATENCY = "RateLatencyServer"
    SCRIPTED = "ScriptedOutput"


@dataclass(frozen=True)
class ElementModel:
    kind: ElementKind
    delay: Fraction = Fraction(0)
    rate: Quantity = INF
    latency: Fraction = Fraction(0)
    script: Optional[PacketTrace] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ElementKind(self.kind))
        delay, latency, rate = q_finite(self.delay, "delay"), q_finite(self.latency, "latency"), q(self.rate)
        if delay < 0 or latency < 0:
            raise InvalidParameter("element delay and latency must be >= 0")
        if not is_inf(rate) and rate <= 0:
            raise InvalidParameter("server rate must be > 0")
        if self.kind == ElementKind.SCRIPTED and self.script is None:
            raise InvalidScript("a scripted element needs an output script")
        object.__setattr__(self, "delay", delay)
        object.__setattr__(self, "latency", latency)
        object.__setattr__(self, "rate", rate)

    @classmethod
    def zero_delay(cls) -> "ElementModel":
        return cls(ElementKind.ZERO_DELAY)

    @classmethod
    def fixed_delay(cls, D) -> "ElementModel":
        return cls(ElementKind.FIXED_DELAY, delay=D)

    @classmethod
    def rate_latency(cls, R, T) -> "ElementModel":
        return cls(ElementKind.RATE_LATENCY, rate=R, latency=T)

    @classmethod
    def scripted(cls, script: PacketTrace) -> "ElementModel":
        return cls(ElementKind.SCRIPTED, script=script)

    def service_curve(self) -> PwlCurve:
        """Service curve in the element's own clock, for the aggregate of its flows."""
        if self.kind == ElementKind.ZERO_DELAY:
            return make_delta(0)
        if self.kind == ElementKind.FIXED_DELAY:
            return make_delta(self.delay)
        if self.kind == ElementKind.RATE_LATENCY:
            if is_inf(self.rate):
                return make_delta(self.latency)
            return make_rate_latency(self.rate, self.latency)
        raise UnsupportedOperand("a scripted element has no service curve")


def _check_script(inp: PacketTrace, script: PacketTrace) -> PacketTrace:
    t_out = script.time_of()
    if set(t_out) != set(inp.time_of()):
        raise InvalidScript("script does not carry exactly the input packets")
    last = None
    events = []
    for e in inp.events:
        out = t_out[e.packet.key]
        if out < e.time:
            raise InvalidScript(f"packet {e.packet.name} leaves at {fmt(out)} before arriving at {fmt(e.time)}")
        if last is not None and out < last:
            raise InvalidScript(f"packet {e.packet.name} overtakes an earlier packet")
        last = out
        events.append(TraceEvent(out, e.packet))
    return PacketTrace(tuple(events), inp.clock)


def simulate_element(inp: PacketTrace, model: ElementModel) -> PacketTrace:
    """FIFO element; the output is observed with the same clock as the input."""
    if model.kind == ElementKind.ZERO_DELAY:
        return inp
    if model.kind == ElementKind.FIXED_DELAY:
        return inp.retimed(lambda t: t + model.delay, inp.clock)
    if model.kind == ElementKind.SCRIPTED:
        return _check_script(inp, model.script)

    events = []
    finish: Optional[Fraction] = None
    for e in inp.events:
        service = Fraction(0) if is_inf(model.rate) else e.packet.length / model.rate
        start = e.time if finish is None else max(e.time, finish)
        finish = start + service
        events.append(TraceEvent(finish + model.latency, e.packet))
    return PacketTrace(tuple(events), inp.clock)


# ---------------------------------------------------------------- regulators


def simulate_pfr(inp: PacketTrace, sigma: SigmaLike, d_to_local: Optional[ClockFunction] = None) -> PacketTrace:
    """Per-flow regulator: one token bucket and one FIFO queue per flow, all in local time."""
    config = _as_config(sigma, RegulatorKind.PFR)
    _check_bursts(inp, config)
    local = _to_local(inp, d_to_local)
    buckets: Dict[str, _BucketState] = {}
    last_release: Dict[str, Fraction] = {}
    released = []
    for index, e in enumerate(local.events):
        flow = e.packet.flow
        bucket = buckets.setdefault(flow, _BucketState(config.bucket_for(flow)))
        ready = e.time if flow not in last_release else max(e.time, last_release[flow])
        t = bucket.earliest(ready, e.packet.length)
        bucket.take(t, e.packet.length)
        last_release[flow] = t
        released.append((t, index, e.packet))
        logger.debug("PFR release %s arrival=%s release=%s", e.packet.name, fmt(e.time), fmt(t))
    released.sort(key=lambda item: (item[0], item[1]))
    return PacketTrace(tuple(TraceEvent(t, p) for t, _, p in released), local.clock)


def simulate_ir(inp: PacketTrace, config: SigmaLike, d_to_local: Optional[ClockFunction] = None) -> PacketTrace:
    """Interleaved regulator: one FIFO queue; only the head packet is examined, by its own flow's bucket."""
    config = _as_config(config, RegulatorKind.IR)
    _check_bursts(inp, config)
    local = _to_local(inp, d_to_local)
    buckets: Dict[str, _BucketState] = {}
    events = []
    previous: Optional[Fraction] = None
    for e in local.events:
        flow = e.packet.flow
        bucket = buckets.setdefault(flow, _BucketState(config.bucket_for(flow)))
        head_since = e.time if previous is None else max(e.time, previous)
        t = bucket.earliest(head_since, e.packet.length)
        bucket.take(t, e.packet.length)
        previous = t
        events.append(TraceEvent(t, e.packet))
        logger.debug("IR release %s head_since=%s release=%s", e.packet.name, fmt(head_since), fmt(t))
    return PacketTrace(tuple(events), local.clock)


def simulate_regulator(inp: PacketTrace, config: RegulatorConfig, d_to_local: Optional[ClockFunction] = None) -> PacketTrace:
    if config.kind == RegulatorKind.IR:
        return simulate_ir(inp, config, d_to_local)
    return simulate_pfr(inp, config, d_to_local)
