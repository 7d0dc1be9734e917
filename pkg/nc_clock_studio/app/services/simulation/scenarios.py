"""Ready-to-run adversarial clock scenarios.

Each scenario builds its sources, clocks, FIFO element and regulator, runs the
packet simulation and checks the delay (or backlog) prediction that comes with
the construction. Builders are pure; ``run()`` is deterministic.
"""
import dataclasses
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.services.netcalc.clocks import (
    TAI,
    ClockEnvelope,
    ClockFunction,
    clock_to_json,
    compose,
    envelope_to_json,
    identity,
    linear,
    validate_envelope,
)
from app.services.netcalc.errors import InvalidParameter, UnknownScenario
from app.services.netcalc.numbers import fmt, q, q_finite, sqrt_floor
from app.services.netcalc.reclock import reclock_trace
from app.services.simulation.regulators import (
    ElementModel,
    RegulatorConfig,
    RegulatorKind,
    simulate_element,
    simulate_greedy_source,
    simulate_ir,
    simulate_periodic_source,
    simulate_pfr,
)
from app.services.simulation.traces import Packet, PacketTrace, fit_slope, measure, merge

logger = logging.getLogger(__name__)

FIT_WINDOW = 10


@dataclass
class ScenarioResult:
    name: str
    descriptor: Dict[str, Any]
    max_delay_by_period: List[Optional[Fraction]]
    fitted_divergence_rate: Optional[Fraction]
    predicate: str
    predicate_pass: bool
    details: Dict[str, Any] = field(default_factory=dict)
    traces: List[Tuple[str, PacketTrace]] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "scenario": self.name,
            "params": self.descriptor.get("params", {}),
            "max_delay_by_period": [None if d is None else fmt(d) for d in self.max_delay_by_period],
            "fitted_divergence_rate": None if self.fitted_divergence_rate is None else fmt(self.fitted_divergence_rate),
            "predicate": self.predicate,
            "predicate_pass": self.predicate_pass,
            "details": _jsonable(self.details),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    return fmt(value)


class Scenario(ABC):
    name: str = ""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        ...

    @abstractmethod
    def run(self) -> ScenarioResult:
        ...


# ---------------------------------------------------------------- params


class _Params:
    """Frozen-dataclass mixin: overrides from JSON and rational-string export."""

    def validate(self) -> None:
        pass

    @classmethod
    def from_overrides(cls, overrides: Optional[Dict[str, Any]] = None):
        names = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in (overrides or {}).items():
            if key not in names:
                raise InvalidParameter(f"unknown scenario parameter '{key}' (known: {', '.join(names)})")
            if raw is None:
                values[key] = None
            elif names[key].type in (int, "int"):
                values[key] = int(raw)
            else:
                values[key] = q_finite(raw, key)
        params = cls(**values)
        params.validate()
        return params

    def to_json(self) -> Dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value if value is None or isinstance(value, int) and not isinstance(value, Fraction) else fmt(value)
        return out


def _per_period(
    arrivals: Sequence[Tuple[Fraction, Fraction]], start: Fraction, period: Fraction, count: int
) -> List[Optional[Tuple[Fraction, Fraction]]]:
    """(arrival, delay) of the largest delay among arrivals in each period."""
    out: List[Optional[Tuple[Fraction, Fraction]]] = [None] * count
    for t, delay in arrivals:
        k = int((t - start) // period)
        if 0 <= k < count and (out[k] is None or delay > out[k][1]):
            out[k] = (t, delay)
    return out


def _fit_last(points: Sequence[Optional[Tuple[Fraction, Fraction]]]) -> Optional[Fraction]:
    kept = [p for p in points if p is not None][-FIT_WINDOW:]
    if len({t for t, _ in kept}) < 2:
        return None
    return fit_slope([t for t, _ in kept], [d for _, d in kept])


# ---------------------------------------------------------------- non-synchronized instability


@dataclass(frozen=True)
class NonSyncInstabilityParams(_Params):
    rho: Fraction = Fraction("1.0002")
    eta: Fraction = Fraction("4e-9")
    r: Fraction = Fraction(10 ** 6)
    b: Fraction = Fraction(1000)
    ell: Fraction = Fraction(1000)
    t_start: Fraction = Fraction(0)
    element_delay: Fraction = Fraction(0)
    period: Optional[Fraction] = None
    periods: int = 20
    e: Optional[Fraction] = None

    def validate(self) -> None:
        if self.rho < 1:
            raise InvalidParameter(f"rho must be >= 1, got {self.rho}")
        if self.r <= 0 or self.ell <= 0:
            raise InvalidParameter("rate and packet length must be > 0")
        if self.b < self.ell:
            raise InvalidParameter(f"burst {self.b} is below the packet length {self.ell}")
        if self.periods < 1:
            raise InvalidParameter("at least one period is needed")

    @property
    def period_length(self) -> Fraction:
        return self.period if self.period is not None else 500 * self.ell / self.r

    @property
    def horizon(self) -> Fraction:
        return self.t_start + self.periods * self.period_length


class NonSyncInstabilityScenario(Scenario):
    """Greedy source, zero-delay element, non-adapted regulator whose clock runs 1/rho as fast."""

    name = "nonsync-instability"

    def __init__(self, params: NonSyncInstabilityParams, name: Optional[str] = None):
        self.params = params
        if name:
            self.name = name
        self.source_clock = "SRC"
        self.regulator_clock = "REG"
        self.d_to_local = linear(1 / params.rho, 0, self.source_clock, self.regulator_clock)

    @property
    def envelope(self) -> ClockEnvelope:
        return ClockEnvelope(self.params.rho, self.params.eta)

    @property
    def e(self) -> Fraction:
        p = self.params
        return p.e if p.e is not None else (p.rho - 1) * p.periods * p.period_length / 4

    @property
    def threshold(self) -> Optional[Fraction]:
        p = self.params
        if p.rho == 1:
            return None
        d1 = p.rho * p.element_delay + p.eta
        return self.d_to_local(p.t_start) + (p.r * self.e + p.r * d1 + p.ell) / ((p.rho - 1) * p.r)

    def describe(self) -> Dict[str, Any]:
        p = self.params
        return {
            "scenario": self.name,
            "params": p.to_json(),
            "envelope": envelope_to_json(self.envelope),
            "clocks": {self.regulator_clock: clock_to_json(self.d_to_local)},
            "source": {"clock": self.source_clock, "r": fmt(p.r), "b": fmt(p.b), "ell": fmt(p.ell)},
            "element": {"kind": "FixedDelayBound", "delay": fmt(p.element_delay)},
            "regulator": {"kind": "PFR", "r": fmt(p.r), "b": fmt(p.b), "clock": self.regulator_clock},
            "predicate": self.predicate,
        }

    @property
    def predicate(self) -> str:
        if self.params.rho == 1:
            return f"no packet is delayed more than e={fmt(self.e)} by the regulator"
        return f"first local regulator delay above e={fmt(self.e)} hits a packet arriving no later than local time {fmt(self.threshold)}"

    def run(self) -> ScenarioResult:
        p = self.params
        sigma = (p.r, p.b)
        src = simulate_greedy_source(sigma, p.ell, p.t_start, p.horizon, flow="f", clock=self.source_clock)
        at_regulator = simulate_element(src, ElementModel.fixed_delay(p.element_delay))
        out = simulate_pfr(at_regulator, sigma, self.d_to_local)

        local = measure(at_regulator, out, observe=self.d_to_local)
        source_view = measure(at_regulator, out, observe=self.d_to_local.inverse())
        order = [e.packet.key for e in at_regulator.events]
        arrivals = [(t, source_view.delays[k]) for t, k in zip(at_regulator.times, order)]
        by_period = _per_period(arrivals, p.t_start, p.period_length, p.periods)

        first_exceed = None
        for t, k in zip(at_regulator.times, order):
            if local.delays[k] > self.e:
                first_exceed = self.d_to_local(t)
                break
        if p.rho == 1:
            passed = first_exceed is None
        else:
            passed = first_exceed is not None and first_exceed <= self.threshold

        backlog = [
            local.backlog_at(self.d_to_local(p.t_start + k * p.period_length))[1] for k in range(1, p.periods + 1)
        ]
        logger.info("%s: %d packets, max regulator delay %s", self.name, len(src), fmt(source_view.max_delay))
        return ScenarioResult(
            name=self.name,
            descriptor=self.describe(),
            max_delay_by_period=[None if x is None else x[1] for x in by_period],
            fitted_divergence_rate=_fit_last(by_period),
            predicate=self.predicate,
            predicate_pass=passed,
            details={
                "diverges": p.rho > 1,
                "closed_form_rate": p.rho - 1,
                "e": self.e,
                "threshold": self.threshold,
                "first_exceed": first_exceed,
                "local_delays": [local.delays[k] for k in order],
                "backlog_by_period": backlog,
                "max_backlog_packets": local.max_backlog_packets,
            },
            traces=[
                ("arrival", at_regulator.retimed(self.d_to_local, self.regulator_clock)),
                ("departure", out),
            ],
        )


def build_nonsync_instability(p: NonSyncInstabilityParams) -> NonSyncInstabilityScenario:
    p.validate()
    return NonSyncInstabilityScenario(p)


def build_fig6_example() -> NonSyncInstabilityScenario:
    """Unit packets, one per time unit, regulator clock d(t) = 6t/7."""
    p = NonSyncInstabilityParams(
        rho=Fraction(7, 6), eta=Fraction(0), r=Fraction(1), b=Fraction(1), ell=Fraction(1), period=Fraction(7)
    )
    return NonSyncInstabilityScenario(p, name="fig6")


# ---------------------------------------------------------------- synchronized PFR penalty


@dataclass(frozen=True)
class SyncPfrPenaltyParams(_Params):
    rho: Fraction = Fraction("1.0002")
    delta: Fraction = Fraction("1e-6")
    r: Fraction = Fraction(10 ** 6)
    b: Fraction = Fraction(1000)
    ell: Fraction = Fraction(1000)
    t_start: Fraction = Fraction(0)
    periods: int = 20

    def validate(self) -> None:
        if self.rho <= 1:
            raise InvalidParameter(f"rho must be > 1, got {self.rho}")
        if self.delta <= 0:
            raise InvalidParameter(f"delta must be > 0, got {self.delta}")
        if self.r <= 0 or self.ell <= 0:
            raise InvalidParameter("rate and packet length must be > 0")
        if self.b < self.ell:
            raise InvalidParameter(f"burst {self.b} is below the packet length {self.ell}")
        if self.periods < 1:
            raise InvalidParameter("at least one period is needed")

    @property
    def x1(self) -> Fraction:
        return self.t_start + self.rho * self.delta / (self.rho - 1)

    @property
    def horizon(self) -> Fraction:
        return self.t_start + 2 * (self.x1 - self.t_start) + self.ell / self.r


def sync_penalty_clock(p: SyncPfrPenaltyParams, target: str = "PFR") -> ClockFunction:
    """d_{TAI->PFR}: t until t_start, slope 1/rho until x1, then t - delta."""
    return ClockFunction(((p.t_start, p.t_start), (p.x1, p.x1 - p.delta)), Fraction(1), Fraction(1), TAI, target)


class SyncPfrPenaltyScenario(Scenario):
    """Greedy TAI source into a PFR whose synchronized clock falls delta behind."""

    name = "sync-pfr-penalty"

    def __init__(self, params: SyncPfrPenaltyParams, name: Optional[str] = None):
        self.params = params
        if name:
            self.name = name
        self.d_to_local = sync_penalty_clock(params)

    @property
    def envelope(self) -> ClockEnvelope:
        return ClockEnvelope(self.params.rho, Fraction(0), self.params.delta)

    @property
    def predicate(self) -> str:
        return f"max TAI regulator delay equals delta={fmt(self.params.delta)} and stays below 4*delta"

    def describe(self) -> Dict[str, Any]:
        p = self.params
        return {
            "scenario": self.name,
            "params": p.to_json(),
            "envelope": envelope_to_json(self.envelope),
            "clocks": {"PFR": clock_to_json(self.d_to_local)},
            "source": {"clock": TAI, "r": fmt(p.r), "b": fmt(p.b), "ell": fmt(p.ell)},
            "element": {"kind": "ZeroDelay"},
            "regulator": {"kind": "PFR", "r": fmt(p.r), "b": fmt(p.b), "clock": "PFR"},
            "predicate": self.predicate,
        }

    def run(self) -> ScenarioResult:
        p = self.params
        sigma = (p.r, p.b)
        src = simulate_greedy_source(sigma, p.ell, p.t_start, p.horizon, flow="f", clock=TAI)
        at_regulator = simulate_element(src, ElementModel.zero_delay())
        out = simulate_pfr(at_regulator, sigma, self.d_to_local)
        tai = measure(at_regulator, out, observe=self.d_to_local.inverse())

        order = [e.packet.key for e in at_regulator.events]
        arrivals = [(t, tai.delays[k]) for t, k in zip(at_regulator.times, order)]
        period = (p.horizon - p.t_start) / p.periods
        by_period = _per_period(arrivals, p.t_start, period, p.periods)
        upper = 4 * p.delta
        report = validate_envelope(self.d_to_local, self.envelope)
        passed = tai.max_delay == p.delta and tai.max_delay <= upper
        return ScenarioResult(
            name=self.name,
            descriptor=self.describe(),
            max_delay_by_period=[None if x is None else x[1] for x in by_period],
            fitted_divergence_rate=_fit_last(by_period),
            predicate=self.predicate,
            predicate_pass=passed,
            details={
                "penalty": tai.max_delay,
                "upper_bound": upper,
                "x1": p.x1,
                "clock_valid": report.valid,
                "tai_delays": [tai.delays[k] for k in order],
            },
            traces=[("arrival", at_regulator), ("departure", reclock_trace(out, self.d_to_local))],
        )


def build_sync_pfr_penalty(p: SyncPfrPenaltyParams) -> SyncPfrPenaltyScenario:
    p.validate()
    return SyncPfrPenaltyScenario(p)


def build_fig8_example() -> SyncPfrPenaltyScenario:
    """Unit packets, regulator clock slope 6/7 up to TAI 7 then t - 1."""
    p = SyncPfrPenaltyParams(rho=Fraction(7, 6), delta=Fraction(1), r=Fraction(1), b=Fraction(1), ell=Fraction(1))
    return SyncPfrPenaltyScenario(p, name="fig8")


# ---------------------------------------------------------------- synchronized IR instability


@dataclass(frozen=True)
class SyncIrInstabilityParams(_Params):
    n: int = 3
    rho: Fraction = Fraction("1.0002")
    eta: Fraction = Fraction("4e-9")
    delta: Fraction = Fraction("1e-6")
    s1: Optional[Fraction] = None
    eps: Optional[Fraction] = None
    ell: Fraction = Fraction(1000)
    periods: int = 20
    x1: Optional[Fraction] = None

    @property
    def slope(self) -> Fraction:
        return self.s1 if self.s1 is not None else min(Fraction(3, 2), sqrt_floor(self.rho))

    @property
    def interval(self) -> Fraction:
        """I = delta * s1 / (s1 - 1)."""
        s1 = self.slope
        return self.delta * s1 / (s1 - 1)

    @property
    def epsilon(self) -> Fraction:
        if self.eps is not None:
            return self.eps
        return self.interval * (1 - 1 / self.slope) / 2

    @property
    def tau(self) -> Fraction:
        return self.n * self.interval / self.slope + self.n * self.epsilon

    @property
    def start(self) -> Fraction:
        return self.x1 if self.x1 is not None else self.delta

    def x(self, j: int) -> Fraction:
        return self.start + (j - 1) * (self.interval / self.slope + self.epsilon)

    @property
    def growth_per_period(self) -> Fraction:
        return self.n * (self.interval * (1 - 1 / self.slope) - self.epsilon)

    def validate(self) -> None:
        if self.n < 3:
            raise InvalidParameter(f"at least 3 sources are needed, got {self.n}")
        if self.rho <= 1:
            raise InvalidParameter(f"rho must be > 1, got {self.rho}")
        if self.delta <= 0:
            raise InvalidParameter(f"delta must be > 0, got {self.delta}")
        s1 = self.slope
        if not (1 < s1 <= Fraction(3, 2)) or s1 * s1 > self.rho:
            raise InvalidParameter(f"s1 must lie in (1, min(3/2, sqrt(rho))], got {s1}")
        bound = self.interval * (1 - 1 / s1)
        if not (0 < self.epsilon < bound):
            raise InvalidParameter(f"eps must lie in (0, {fmt(bound)}), got {fmt(self.epsilon)}")
        if self.ell <= 0 or self.periods < 1:
            raise InvalidParameter("packet length and period count must be positive")


def ir_source_clock(p: SyncIrInstabilityParams, j: int) -> ClockFunction:
    """d_{IR->j}: periodic with period tau; speeds up by s1 at x_j, slows by 1/s1, then t - delta/2."""
    s1, interval, half = p.slope, p.interval, p.delta / 2
    points = []
    for k in range(p.periods + 1):
        base = p.x(j) + k * p.tau
        points.append((base, base - half))
        points.append((base + interval / s1, base + interval - half))
        points.append((base + interval / s1 + interval, base + interval / s1 + interval - half))
    return ClockFunction(tuple(points), Fraction(1), Fraction(1), "IR", f"S{j}")


def simulate_periodic_ir_source(j: int, p: SyncIrInstabilityParams) -> PacketTrace:
    """Two packets per period, I apart, starting when H_j reads d_j(x_j) + k*tau."""
    first = ir_source_clock(p, j)(p.x(j))
    return simulate_periodic_source(
        first,
        [Fraction(0), p.interval],
        p.tau,
        p.periods,
        p.ell,
        flow=f"f{j}",
        clock=f"S{j}",
        labels=lambda k, i: f"{j}.{k}.{i + 1}",
    )


class SyncIrInstabilityScenario(Scenario):
    """n periodic sources with adversarial synchronized clocks sharing one IR."""

    name = "sync-ir-instability"

    def __init__(self, params: SyncIrInstabilityParams):
        self.params = params
        self.clocks = {j: ir_source_clock(params, j) for j in range(1, params.n + 1)}

    @property
    def envelope(self) -> ClockEnvelope:
        return ClockEnvelope(self.params.rho, self.params.eta, self.params.delta)

    @property
    def regulator(self) -> RegulatorConfig:
        p = self.params
        return RegulatorConfig.uniform(RegulatorKind.IR, p.ell / p.interval, p.ell)

    @property
    def predicate(self) -> str:
        return (
            "delay of the first packet of period k is at least "
            f"k * {fmt(self.params.growth_per_period)} (k counted from 0)"
        )

    def describe(self) -> Dict[str, Any]:
        p = self.params
        return {
            "scenario": self.name,
            "params": p.to_json(),
            "derived": {
                "s1": fmt(p.slope),
                "I": fmt(p.interval),
                "eps": fmt(p.epsilon),
                "tau": fmt(p.tau),
                "x": [fmt(p.x(j)) for j in range(1, p.n + 1)],
            },
            "envelope": envelope_to_json(self.envelope),
            "clocks": {f"S{j}": clock_to_json(d) for j, d in self.clocks.items()},
            "element": {"kind": "ZeroDelay", "clock": "IR"},
            "regulator": {"kind": "IR", "r": fmt(p.ell / p.interval), "b": fmt(p.ell), "clock": "IR"},
            "predicate": self.predicate,
        }

    def clocks_valid(self) -> bool:
        env = self.envelope
        for j, d in self.clocks.items():
            if not validate_envelope(d, env).valid:
                return False
            for j2, d2 in self.clocks.items():
                if j2 != j and not validate_envelope(compose(d2, d.inverse()), env).valid:
                    return False
        return True

    def run(self) -> ScenarioResult:
        p = self.params
        in_ir = [reclock_trace(simulate_periodic_ir_source(j, p), self.clocks[j]) for j in range(1, p.n + 1)]
        fifo_in = merge(in_ir)
        at_regulator = simulate_element(fifo_in, ElementModel.zero_delay())
        out = simulate_ir(at_regulator, self.regulator, identity("IR"))
        ir = measure(at_regulator, out)

        arrival = at_regulator.time_of()
        release = out.time_of()
        first_delays = [ir.delays[("f1", 2 * k)] for k in range(p.periods)]
        bounds = [k * p.growth_per_period for k in range(p.periods)]
        d2_vs_d1 = all(
            release[(f"f{j}", 2 * k + 1)] >= release[(f"f{j}", 2 * k)] + p.interval
            for j in range(1, p.n + 1)
            for k in range(p.periods)
        )
        aligned = all(
            arrival[("f1", 2 * (k + 1))] == arrival[(f"f{p.n}", 2 * k + 1)] + p.epsilon for k in range(p.periods - 1)
        )
        order = [e.packet.key for e in at_regulator.events]
        points = [(t, ir.delays[k]) for t, k in zip(at_regulator.times, order)]
        by_period = _per_period(points, p.start, p.tau, p.periods)
        passed = all(d >= bound for d, bound in zip(first_delays, bounds))
        logger.info("%s: %d packets, max IR delay %s", self.name, len(fifo_in), fmt(ir.max_delay))
        return ScenarioResult(
            name=self.name,
            descriptor=self.describe(),
            max_delay_by_period=[None if x is None else x[1] for x in by_period],
            fitted_divergence_rate=_fit_last(by_period),
            predicate=self.predicate,
            predicate_pass=passed,
            details={
                "first_packet_delays": first_delays,
                "lower_bounds": bounds,
                "closed_form_rate": p.growth_per_period / p.tau,
                "asymptotic_rate": p.slope - 1,
                "d2_vs_d1_holds": d2_vs_d1,
                "alignment_holds": aligned,
                "clocks_valid": self.clocks_valid(),
            },
            traces=[("arrival", at_regulator), ("departure", out)],
        )


def build_sync_ir_instability(p: SyncIrInstabilityParams) -> SyncIrInstabilityScenario:
    p.validate()
    return SyncIrInstabilityScenario(p)


# ---------------------------------------------------------------- missed deadline example


@dataclass(frozen=True)
class Fig12Params(_Params):
    ideal: int = 0


class Fig12Scenario(Scenario):
    """Two flows, a FIFO that may hold packets up to 5 units, an IR shaping both to (1/2, 1)."""

    name = "fig12"
    fifo_bound = Fraction(5)

    def __init__(self, params: Optional[Fig12Params] = None):
        self.params = params or Fig12Params()
        self.ideal = bool(self.params.ideal)
        if self.ideal:
            self.source2_clock = identity().tagged("IR", "S2")
        else:
            self.source2_clock = ClockFunction(
                ((Fraction(0), Fraction(0)), (Fraction(1), Fraction(1)), (Fraction(3, 2), Fraction(3))),
                Fraction(1),
                Fraction(1),
                "IR",
                "S2",
            )

    @property
    def envelope(self) -> ClockEnvelope:
        return ClockEnvelope(Fraction(4), Fraction(0), Fraction(3, 2))

    @property
    def regulator(self) -> RegulatorConfig:
        return RegulatorConfig.uniform(RegulatorKind.IR, Fraction(1, 2), Fraction(1))

    @property
    def script(self) -> Dict[str, Fraction]:
        if self.ideal:
            return {"1a": Fraction(5), "2a": Fraction(6), "1b": Fraction(6), "2b": Fraction(7)}
        return {"1a": Fraction(5), "2a": Fraction(6), "2b": Fraction(6), "1b": Fraction(6)}

    @property
    def predicate(self) -> str:
        if self.ideal:
            return "every packet leaves the IR within 5 units of its emission"
        return "packet 1b leaves the IR no earlier than 8, after its deadline 7"

    def describe(self) -> Dict[str, Any]:
        return {
            "scenario": self.name,
            "params": self.params.to_json(),
            "envelope": envelope_to_json(self.envelope),
            "clocks": {"S2": clock_to_json(self.source2_clock)},
            "sources": {"1": {"clock": "IR", "packets": {"1a": "0", "1b": "2"}},
                        "2": {"clock": "S2", "packets": {"2a": "1", "2b": "3"}}},
            "element": {"kind": "ScriptedOutput", "script": {k: fmt(v) for k, v in self.script.items()}},
            "regulator": {"kind": "IR", "r": "1/2", "b": "1", "clock": "IR"},
            "predicate": self.predicate,
        }

    def run(self) -> ScenarioResult:
        src1 = PacketTrace.from_pairs([(0, Packet("1", 0, 1, "1a")), (2, Packet("1", 1, 1, "1b"))], "IR")
        src2 = PacketTrace.from_pairs([(1, Packet("2", 0, 1, "2a")), (3, Packet("2", 1, 1, "2b"))], "S2")
        fifo_in = merge([src1, reclock_trace(src2, self.source2_clock)])
        script = self.script
        scripted = PacketTrace.from_pairs([(script[e.packet.name], e.packet) for e in fifo_in.events], "IR")
        fifo_out = simulate_element(fifo_in, ElementModel.scripted(scripted))
        out = simulate_ir(fifo_out, self.regulator, identity("IR"))

        emitted = fifo_in.by_label()
        released = out.by_label()
        fifo = measure(fifo_in, fifo_out)
        deadlines = {name: t + self.fifo_bound for name, t in emitted.items()}
        misses = sorted(name for name in released if released[name] > deadlines[name])
        if self.ideal:
            passed = not misses
        else:
            passed = released["1b"] >= 8 and released["1b"] > deadlines["1b"] and fifo.delay_of("1a") == 5
        total = measure(fifo_in, out)
        return ScenarioResult(
            name=self.name,
            descriptor=self.describe(),
            max_delay_by_period=[total.max_delay],
            fitted_divergence_rate=None,
            predicate=self.predicate,
            predicate_pass=passed,
            details={
                "fifo_input": emitted,
                "fifo_output": fifo_out.by_label(),
                "ir_output": released,
                "deadlines": deadlines,
                "missed": misses,
                "fifo_delay_1a": fifo.delay_of("1a"),
            },
            traces=[("arrival", fifo_in), ("departure", out)],
        )


def build_fig12_example(ideal: bool = False) -> Fig12Scenario:
    return Fig12Scenario(Fig12Params(ideal=int(ideal)))


# ---------------------------------------------------------------- registry


def _nonsync(overrides):
    return build_nonsync_instability(NonSyncInstabilityParams.from_overrides(overrides))


def _sync_pfr(overrides):
    return build_sync_pfr_penalty(SyncPfrPenaltyParams.from_overrides(overrides))


def _sync_ir(overrides):
    return build_sync_ir_instability(SyncIrInstabilityParams.from_overrides(overrides))


def _fig6(overrides):
    base = build_fig6_example().params
    merged = {**base.to_json(), **(overrides or {})}
    return NonSyncInstabilityScenario(NonSyncInstabilityParams.from_overrides(merged), name="fig6")


def _fig8(overrides):
    base = build_fig8_example().params
    merged = {**base.to_json(), **(overrides or {})}
    return SyncPfrPenaltyScenario(SyncPfrPenaltyParams.from_overrides(merged), name="fig8")


def _fig12(overrides):
    return Fig12Scenario(Fig12Params.from_overrides(overrides))


SCENARIOS: Dict[str, Callable[[Optional[Dict[str, Any]]], Scenario]] = {
    "nonsync-instability": _nonsync,
    "sync-pfr-penalty": _sync_pfr,
    "sync-ir-instability": _sync_ir,
    "fig12": _fig12,
    "fig6": _fig6,
    "fig8": _fig8,
}


def build_scenario(name: str, overrides: Optional[Dict[str, Any]] = None, periods: Optional[int] = None) -> Scenario:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario '{name}' (known: {', '.join(SCENARIOS)})") from None
    overrides = dict(overrides or {})
    if periods is not None and name != "fig12":
        overrides["periods"] = periods
    return factory(overrides)


def scenario_from_json(data: Dict[str, Any], periods: Optional[int] = None) -> Scenario:
    """Inverse of ``Scenario.describe()``; only the name and the params are read."""
    if not isinstance(data, dict) or "scenario" not in data:
        raise InvalidParameter("scenario JSON needs a 'scenario' name")
    return build_scenario(data["scenario"], data.get("params"), periods)
