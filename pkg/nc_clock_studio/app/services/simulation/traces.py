"""Packet traces: timestamped packet events observed with one clock."""
import csv
import heapq
import io
import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

from app.services.netcalc.clocks import ClockFunction
from app.services.netcalc.curves import PwlCurve
from app.services.netcalc.errors import ClockMismatch, InvalidParameter, TraceMismatch
from app.services.netcalc.numbers import fmt, q, q_finite, to_float

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["clock_tag", "time_rational", "time_float", "flow", "packet", "length_bits", "event"]

PacketKey = Tuple[str, int]


@dataclass(frozen=True)
class Packet:
    flow: str
    seq: int
    length: Fraction = Fraction(1)
    label: Optional[str] = None

    def __post_init__(self):
        length = q_finite(self.length, "length")
        if length <= 0:
            raise InvalidParameter(f"packet length must be positive, got {length}")
        object.__setattr__(self, "length", length)

    @property
    def key(self) -> PacketKey:
        return (self.flow, self.seq)

    @property
    def name(self) -> str:
        return self.label or f"{self.flow}#{self.seq}"


@dataclass(frozen=True)
class TraceEvent:
    time: Fraction
    packet: Packet


@dataclass(frozen=True)
class PacketTrace:
    """Events in emission order; times never decrease."""

    events: Tuple[TraceEvent, ...]
    clock: Optional[str] = None

    def __post_init__(self):
        events = tuple(TraceEvent(q_finite(e.time, "time"), e.packet) for e in self.events)
        seen = set()
        for prev, nxt in zip(events, events[1:]):
            if nxt.time < prev.time:
                raise InvalidParameter(f"trace times must not decrease ({fmt(prev.time)} then {fmt(nxt.time)})")
        for e in events:
            if e.packet.key in seen:
                raise InvalidParameter(f"packet {e.packet.name} appears twice in a trace")
            seen.add(e.packet.key)
        object.__setattr__(self, "events", events)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[object, Packet]], clock: Optional[str] = None) -> "PacketTrace":
        return cls(tuple(TraceEvent(q(t), p) for t, p in pairs), clock)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def times(self) -> List[Fraction]:
        return [e.time for e in self.events]

    @property
    def packets(self) -> List[Packet]:
        return [e.packet for e in self.events]

    @property
    def flows(self) -> List[str]:
        return sorted({e.packet.flow for e in self.events})

    def time_of(self) -> Dict[PacketKey, Fraction]:
        return {e.packet.key: e.time for e in self.events}

    def by_label(self) -> Dict[str, Fraction]:
        return {e.packet.name: e.time for e in self.events}

    def for_flow(self, flow: str) -> "PacketTrace":
        return PacketTrace(tuple(e for e in self.events if e.packet.flow == flow), self.clock)

    def retimed(self, fn: Callable[[Fraction], Fraction], clock: Optional[str]) -> "PacketTrace":
        """Same events with every time mapped through the increasing function ``fn``."""
        return PacketTrace(tuple(TraceEvent(fn(e.time), e.packet) for e in self.events), clock)


def merge(traces: Sequence[PacketTrace]) -> PacketTrace:
    """Interleave traces of one clock by time; ties keep the order of ``traces``."""
    clocks = {t.clock for t in traces}
    if len(clocks) > 1:
        raise ClockMismatch(f"cannot merge traces observed with different clocks: {sorted(map(str, clocks))}")
    clock = clocks.pop() if clocks else None
    merged = heapq.merge(*(t.events for t in traces), key=lambda e: e.time)
    return PacketTrace(tuple(merged), clock)


# ---------------------------------------------------------------- checks


@dataclass
class ConformanceReport:
    conformant: bool
    flow: Optional[str] = None
    packet: Optional[str] = None
    time: Optional[Fraction] = None
    deficit: Optional[Fraction] = None

    def to_json(self) -> dict:
        return {
            "conformant": self.conformant,
            "flow": self.flow,
            "packet": self.packet,
            "time": None if self.time is None else fmt(self.time),
            "deficit": None if self.deficit is None else fmt(self.deficit),
        }


def check_conformance(trace: PacketTrace, sigma, b=None, flow: Optional[str] = None) -> ConformanceReport:
    """Does every window of ``trace`` respect the arrival curve?

    ``sigma`` is either a PwlCurve, checked exhaustively over all event pairs
    (packets i..j must fit in alpha((t_j - t_i)+)), or a rate used with burst ``b``,
    checked by a token bucket that starts full.
    """
    events = trace.events if flow is None else trace.for_flow(flow).events
    if isinstance(sigma, PwlCurve):
        return _check_windows(events, sigma)
    r, b = q_finite(sigma, "r"), q_finite(b, "b")
    tokens, last = b, None
    for e in events:
        if last is not None:
            tokens = min(b, tokens + r * (e.time - last))
        tokens -= e.packet.length
        last = e.time
        if tokens < 0:
            return ConformanceReport(False, e.packet.flow, e.packet.name, e.time, -tokens)
    return ConformanceReport(True)


def _check_windows(events: Sequence[TraceEvent], alpha: PwlCurve) -> ConformanceReport:
    for i, first in enumerate(events):
        bits = Fraction(0)
        for e in events[i:]:
            bits += e.packet.length
            bound = alpha.right_limit(e.time - first.time)
            if bits > bound:
                return ConformanceReport(False, e.packet.flow, e.packet.name, e.time, bits - bound)
    return ConformanceReport(True)


def fit_slope(xs: Sequence, ys: Sequence) -> Fraction:
    """Exact least-squares slope of ys against xs."""
    if len(xs) != len(ys):
        raise InvalidParameter("fit_slope needs sequences of equal length")
    xs = [q_finite(x) for x in xs]
    ys = [q_finite(y) for y in ys]
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    denom = n * sxx - sx * sx
    if n < 2 or denom == 0:
        raise InvalidParameter("fit_slope needs at least two distinct abscissae")
    return Fraction(n * sxy - sx * sy) / denom


# ---------------------------------------------------------------- measurement


@dataclass
class Measurement:
    clock: Optional[str]
    delays: Dict[PacketKey, Fraction]
    labels: Dict[PacketKey, str]
    arrival_times: List[Fraction]
    max_delay: Fraction
    max_backlog_bits: Fraction
    max_backlog_packets: int
    _arrivals: List[Fraction] = field(default_factory=list, repr=False)
    _arrived_bits: List[Fraction] = field(default_factory=list, repr=False)
    _departures: List[Fraction] = field(default_factory=list, repr=False)
    _departed_bits: List[Fraction] = field(default_factory=list, repr=False)

    def backlog_at(self, t) -> Tuple[Fraction, int]:
        """(bits, packets) arrived at or before ``t`` and not departed strictly before ``t``."""
        t = q_finite(t, "t")
        n_in = bisect_right(self._arrivals, t)
        n_out = bisect_left(self._departures, t)
        bits_in = self._arrived_bits[n_in - 1] if n_in else Fraction(0)
        bits_out = self._departed_bits[n_out - 1] if n_out else Fraction(0)
        return bits_in - bits_out, n_in - n_out

    def delay_of(self, label: str) -> Fraction:
        for key, name in self.labels.items():
            if name == label:
                return self.delays[key]
        raise KeyError(label)

    def to_json(self) -> dict:
        return {
            "clock": self.clock,
            "max_delay": fmt(self.max_delay),
            "max_backlog_bits": fmt(self.max_backlog_bits),
            "max_backlog_packets": self.max_backlog_packets,
            "delays": {self.labels[k]: fmt(v) for k, v in self.delays.items()},
        }


ObserveSpec = Union[None, ClockFunction, Mapping[str, ClockFunction]]


def _observe(trace: PacketTrace, observe: ObserveSpec) -> PacketTrace:
    if observe is None:
        return trace
    if isinstance(observe, ClockFunction):
        d = observe
    else:
        d = observe.get(trace.clock)
        if d is None:
            return trace
    if d.target is not None and trace.clock == d.target:
        return trace
    if d.source is not None and trace.clock is not None and trace.clock != d.source:
        raise ClockMismatch(f"trace observed with {trace.clock} cannot be mapped by {d.source}->{d.target}")
    return trace.retimed(d, d.target)


def _cumulative(values: Iterable[Fraction]) -> List[Fraction]:
    out, total = [], Fraction(0)
    for v in values:
        total += v
        out.append(total)
    return out


def measure(inp: PacketTrace, out: PacketTrace, observe: ObserveSpec = None) -> Measurement:
    """Per-packet delays and backlog of the element between ``inp`` and ``out``.

    ``observe`` maps traces into the observer's clock: one relative time function
    (applied to the traces observed with its source clock) or one per clock tag.
    Without it both traces must already share a clock.
    """
    inp, out = _observe(inp, observe), _observe(out, observe)
    if inp.clock != out.clock:
        raise ClockMismatch(f"input observed with {inp.clock}, output with {out.clock}")
    t_in, t_out = inp.time_of(), out.time_of()
    if set(t_in) != set(t_out):
        missing = sorted(set(t_in) ^ set(t_out))
        raise TraceMismatch(f"input and output carry different packets: {missing[:5]}")
    delays = {key: t_out[key] - t_in[key] for key in t_in}
    negative = [k for k, v in delays.items() if v < 0]
    if negative:
        raise TraceMismatch(f"packet {negative[0]} leaves before it arrives")
    labels = {e.packet.key: e.packet.name for e in inp.events}

    arrivals = inp.times
    arrived_bits = _cumulative(e.packet.length for e in inp.events)
    departing = sorted(out.events, key=lambda e: e.time)
    departures = [e.time for e in departing]
    departed_bits = _cumulative(e.packet.length for e in departing)

    result = Measurement(
        clock=inp.clock,
        delays=delays,
        labels=labels,
        arrival_times=arrivals,
        max_delay=max(delays.values(), default=Fraction(0)),
        max_backlog_bits=Fraction(0),
        max_backlog_packets=0,
        _arrivals=arrivals,
        _arrived_bits=arrived_bits,
        _departures=departures,
        _departed_bits=departed_bits,
    )
    for t in sorted(set(arrivals)):
        bits, count = result.backlog_at(t)
        result.max_backlog_bits = max(result.max_backlog_bits, bits)
        result.max_backlog_packets = max(result.max_backlog_packets, count)
    return result


# ---------------------------------------------------------------- csv


def write_traces_csv(traces: Iterable[Tuple[str, PacketTrace]], fh: TextIO) -> int:
    """Write (event, trace) pairs as one CSV table; returns the number of rows."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    rows = 0
    for event, trace in traces:
        for e in trace.events:
            writer.writerow(
                [
                    trace.clock or "",
                    fmt(e.time),
                    repr(to_float(e.time)),
                    e.packet.flow,
                    e.packet.name,
                    fmt(e.packet.length),
                    event,
                ]
            )
            rows += 1
    return rows


def traces_to_csv(traces: Iterable[Tuple[str, PacketTrace]]) -> str:
    buf = io.StringIO()
    write_traces_csv(traces, buf)
    return buf.getvalue()


def read_traces_csv(fh: TextIO) -> Dict[str, PacketTrace]:
    """Inverse of ``write_traces_csv``; packets are numbered per flow by first appearance of their name."""
    reader = csv.DictReader(fh)
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
    if missing:
        raise InvalidParameter(f"trace CSV misses columns: {sorted(missing)}")
    grouped: Dict[str, List[Tuple[Fraction, Packet]]] = {}
    clocks: Dict[str, Optional[str]] = {}
    seqs: Dict[str, Dict[str, int]] = {}
    for row in reader:
        event = row["event"]
        flow = row["flow"]
        numbering = seqs.setdefault(flow, {})
        seq = numbering.setdefault(row["packet"], len(numbering))
        packet = Packet(flow, seq, q(row["length_bits"]), row["packet"])
        grouped.setdefault(event, []).append((q(row["time_rational"]), packet))
        clocks[event] = row["clock_tag"] or None
    return {event: PacketTrace.from_pairs(pairs, clocks[event]) for event, pairs in grouped.items()}


def traces_from_csv(text: str) -> Dict[str, PacketTrace]:
    return read_traces_csv(io.StringIO(text))
