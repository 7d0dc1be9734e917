"""Per-hop and end-to-end TAI delay bounds for regulated flows under nonideal clocks.

Three ways of living with clock nonidealities are covered:

* rate-and-burst cascade: every regulator inflates the configuration of the previous
  one by (rho, eta) so that shaping-for-free holds again in its own clock;
* ADAM: every regulator on the path gets the same (W*r0, b0) and the per-hop bound
  follows a dual arrival-curve recursion;
* synchronized non-adapted PFRs: regulators keep (r0, b0), each hop pays at most 4*Delta.

The ``*_analysis`` functions walk a single flow path; ``ete_compare`` builds the
comparison table of the three methods against ideal clocks.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from app.services.netcalc.clocks import IDEAL, ClockEnvelope, envelope_to_json
from app.services.netcalc.curves import (
    PwlCurve,
    convolve,
    curve_to_json,
    deconvolve,
    horizontal_deviation,
    make_delta,
    make_leaky_bucket,
    min_curve,
    sum_curves,
)
from app.services.netcalc.errors import (
    ConfigurationInfeasible,
    InvalidParameter,
    UnstableElement,
    UnsupportedOperand,
)
from app.services.netcalc.numbers import INF, Quantity, ceil_to_step, fmt, is_inf, percent, q, q_finite, to_float
from app.services.netcalc.reclock import reclock_arrival_curve, reclock_shaping_curve
from app.services.simulation.regulators import ElementKind, ElementModel, RegulatorKind, TokenBucket

logger = logging.getLogger(__name__)

METHOD_IDEAL = "ideal"
METHOD_CASCADE = "cascade"
METHOD_ADAM = "adam"
METHOD_SYNC = "sync-nonadapted"
COMPARE_METHODS = (METHOD_IDEAL, METHOD_CASCADE, METHOD_ADAM, METHOD_SYNC)

DEFAULT_ADAM_MARGIN = Fraction(11, 10)
DEFAULT_SYNC_DELTA = Fraction("1e-6")
COMPARE_CSV_COLUMNS = ["n", "method", "ete_bound_s", "rel_increase", "ete_bound_float", "rel_increase_percent"]


# ---------------------------------------------------------------- path model


@dataclass(frozen=True)
class SourceSpec:
    r0: Fraction
    b0: Fraction
    ell: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("r0", "b0", "ell"):
            value = q_finite(getattr(self, name), name)
            if value <= 0:
                raise InvalidParameter(f"{name} must be > 0, got {fmt(value)}")
            object.__setattr__(self, name, value)

    @property
    def bucket(self) -> TokenBucket:
        return TokenBucket(self.r0, self.b0)


@dataclass(frozen=True)
class Hop:
    """A FIFO element followed by a regulator (``None`` for an unregulated hop).

    ``cross`` holds TAI arrival curves of the other flows sharing the element.
    """

    element: ElementModel
    regulator: Optional[RegulatorKind] = RegulatorKind.PFR
    cross: Tuple[PwlCurve, ...] = ()

    def __post_init__(self):
        if self.regulator is not None:
            object.__setattr__(self, "regulator", RegulatorKind(self.regulator))
        object.__setattr__(self, "cross", tuple(self.cross))


@dataclass(frozen=True)
class FlowPath:
    source: SourceSpec
    hops: Tuple[Hop, ...]

    def __post_init__(self):
        hops = tuple(self.hops)
        if not hops:
            raise InvalidParameter("a flow path needs at least one hop")
        object.__setattr__(self, "hops", hops)

    @property
    def n(self) -> int:
        return len(self.hops)

    @classmethod
    def uniform(
        cls, source: SourceSpec, element: ElementModel, n: int, kind: RegulatorKind = RegulatorKind.PFR
    ) -> "FlowPath":
        """``n`` identical hops; every element except the last is followed by a regulator."""
        if n < 1:
            raise InvalidParameter("a flow path needs at least one hop")
        hops = [Hop(element, kind if k < n - 1 else None) for k in range(n)]
        return cls(source, tuple(hops))


@dataclass(frozen=True)
class RoundingGrid:
    """Smallest configurable rate/burst at or above a requested value; ``None`` step means exact."""

    rate_step: Optional[Fraction] = None
    burst_step: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("rate_step", "burst_step"):
            step = getattr(self, name)
            if step is not None:
                step = q_finite(step, name)
                if step <= 0:
                    raise InvalidParameter(f"{name} must be > 0")
                object.__setattr__(self, name, step)

    @classmethod
    def identity(cls) -> "RoundingGrid":
        return cls()

    @classmethod
    def decimal(cls, rate_exponent: Optional[int] = None, burst_exponent: Optional[int] = None) -> "RoundingGrid":
        """Multiples of 10**k units."""
        rate = Fraction(10) ** rate_exponent if rate_exponent is not None else None
        burst = Fraction(10) ** burst_exponent if burst_exponent is not None else None
        return cls(rate, burst)

    def rate(self, r: Fraction) -> Fraction:
        return r if self.rate_step is None else ceil_to_step(r, self.rate_step)

    def burst(self, b: Fraction) -> Fraction:
        return b if self.burst_step is None else ceil_to_step(b, self.burst_step)

    def to_json(self) -> dict:
        return {
            "rate_step": None if self.rate_step is None else fmt(self.rate_step),
            "burst_step": None if self.burst_step is None else fmt(self.burst_step),
        }


GridSpec = Union[None, RoundingGrid, Sequence[RoundingGrid]]


def _grid_for(grids: GridSpec, k: int) -> RoundingGrid:
    if grids is None:
        return RoundingGrid()
    if isinstance(grids, RoundingGrid):
        return grids
    return grids[k]


# ---------------------------------------------------------------- reports


@dataclass
class HopBound:
    index: int
    element_bound: Quantity
    hop_bound: Quantity
    regulator: Optional[TokenBucket]
    arrival: PwlCurve
    regulator_kind: Optional[RegulatorKind] = None

    def to_json(self) -> dict:
        return {
            "hop": self.index,
            "element_bound": fmt(self.element_bound),
            "hop_bound": fmt(self.hop_bound),
            "regulator": None
            if self.regulator is None
            else {
                "kind": self.regulator_kind.value if self.regulator_kind else None,
                "r": fmt(self.regulator.rate),
                "b": fmt(self.regulator.burst),
            },
            "arrival_curve": curve_to_json(self.arrival),
        }


@dataclass
class HopBoundReport:
    method: str
    env: ClockEnvelope
    hops: List[HopBound] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    margin: Optional[Fraction] = None

    @property
    def ete(self) -> Quantity:
        total: Quantity = Fraction(0)
        for hop in self.hops:
            if is_inf(hop.hop_bound):
                return INF
            total += hop.hop_bound
        return total

    @property
    def unbounded(self) -> bool:
        return is_inf(self.ete)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "envelope": envelope_to_json(self.env),
            "W": None if self.margin is None else fmt(self.margin),
            "hops": [h.to_json() for h in self.hops],
            "ete": fmt(self.ete),
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------- building blocks


def element_arrival_curve_tai(prev: TokenBucket, env: ClockEnvelope) -> PwlCurve:
    """TAI arrival curve of a flow leaving a regulator (or source) shaped by ``prev`` in its own clock."""
    return reclock_arrival_curve(prev.curve, env)


def element_delay_bound(element: ElementModel, arrivals: Sequence[PwlCurve]) -> Fraction:
    """TAI delay bound of a FIFO element fed by the aggregate of ``arrivals``."""
    if element.kind == ElementKind.ZERO_DELAY:
        return Fraction(0)
    if element.kind == ElementKind.FIXED_DELAY:
        return element.delay
    if element.kind == ElementKind.SCRIPTED:
        raise UnsupportedOperand("a scripted element has no delay bound")
    if not arrivals:
        return element.latency
    bound = horizontal_deviation(sum_curves(arrivals), element.service_curve())
    if is_inf(bound):
        raise UnstableElement(f"{element.kind.value} is overloaded: its delay bound is unbounded")
    return bound


def cascade_configure(path: FlowPath, env: ClockEnvelope, grids: GridSpec = None) -> List[Optional[TokenBucket]]:
    """Regulator configurations along ``path``: r_k = R_k(rho r_{k-1}), b_k = Q_k(b_{k-1} + eta r_{k-1}).

    Entry k is ``None`` for a hop without a regulator; the chain goes on from the last
    configured regulator.
    """
    prev = path.source.bucket
    configs: List[Optional[TokenBucket]] = []
    for k, hop in enumerate(path.hops):
        if hop.regulator is None:
            configs.append(None)
            continue
        grid = _grid_for(grids, k)
        prev = TokenBucket(grid.rate(env.rho * prev.rate), grid.burst(prev.burst + env.eta * prev.rate))
        configs.append(prev)
    return configs


def cascade_hop_delay(D, env: ClockEnvelope) -> Quantity:
    """rho^2 D + eta (1 + rho): element and cascade-configured regulator together."""
    D = q(D)
    if is_inf(D):
        return D
    if D < 0:
        raise InvalidParameter(f"delay bound must be >= 0, got {D}")
    return env.rho * env.rho * D + env.eta * (1 + env.rho)


def adam_configure(
    path: FlowPath, env: ClockEnvelope, grid: Optional[RoundingGrid] = None, W=None
) -> Tuple[Fraction, TokenBucket]:
    """Rate margin W >= rho^2 with W*r0 on the rate grid; every regulator gets (W r0, b0)."""
    grid = grid or RoundingGrid()
    r0, b0 = path.source.r0, path.source.b0
    floor = env.rho * env.rho
    if W is None:
        rate = grid.rate(floor * r0)
    else:
        W = q_finite(W, "W")
        if W < floor:
            raise ConfigurationInfeasible(f"rate margin {fmt(W)} is below rho^2 = {fmt(floor)}")
        rate = W * r0
    if grid.rate(rate) != rate:
        raise ConfigurationInfeasible(f"rate {fmt(rate)} cannot be configured exactly on the rate grid")
    burst = grid.burst(b0)
    if burst != b0:
        raise ConfigurationInfeasible(f"burst {fmt(b0)} cannot be configured exactly on the burst grid")
    return rate / r0, TokenBucket(rate, b0)


def _adam_alpha1(r0: Fraction, b0: Fraction, W: Fraction, env: ClockEnvelope) -> PwlCurve:
    return make_leaky_bucket(env.rho * W * r0, b0 + env.eta * W * r0)


def adam_hop_delays(
    path: FlowPath, env: ClockEnvelope, W, element_bounds: Sequence[Quantity]
) -> Tuple[List[Quantity], List[Quantity]]:
    """(D'_k for k = 1..m, b_{2,k} for k = 0..m) for the ``m`` given element bounds."""
    W = q_finite(W, "W")
    r0, b0 = path.source.r0, path.source.b0
    rho, eta = env.rho, env.eta
    if W < 1 or (W == 1 and rho > 1):
        raise InvalidParameter(f"rate margin must be > 1, got {fmt(W)}")
    r2 = rho * r0
    spread = Fraction(0) if rho == 1 else (rho * rho - 1) / (W - 1)
    bursts: List[Quantity] = [b0 + eta * r0]
    delays: List[Quantity] = []
    for D in element_bounds:
        D = q(D)
        prev = bursts[-1]
        if is_inf(D) or is_inf(prev):
            delays.append(INF)
            bursts.append(INF)
            continue
        correction = (prev - b0 - eta * W * r0) / (rho * r0) * spread
        hop = D + eta * (1 + rho) + correction
        delays.append(hop)
        bursts.append(prev + r2 * hop)
    return delays, bursts


def adam_hop_delay_geometric(D, b2_prev, r0, b0, W, env: ClockEnvelope) -> Quantity:
    """D + h(alpha_1 ^ alpha_{2,k-1}, delta_eta (x) gamma_{W r0 / rho, b0}) from the curve engine."""
    r0, b0, W, b2_prev = q_finite(r0, "r0"), q_finite(b0, "b0"), q_finite(W, "W"), q_finite(b2_prev, "b2")
    alpha = min_curve(_adam_alpha1(r0, b0, W, env), make_leaky_bucket(env.rho * r0, b2_prev))
    beta = convolve(make_delta(env.eta), make_leaky_bucket(W * r0 / env.rho, b0))
    return q(D) + horizontal_deviation(alpha, beta)


def sync_pfr_arrival_curve(r0, b0, env: ClockEnvelope) -> PwlCurve:
    """gamma_{rho r0, b0 + r0 eta} ^ gamma_{r0, b0 + 2 r0 Delta}: TAI input curve at every hop."""
    if not env.synchronized:
        raise InvalidParameter("the synchronized PFR bound needs a synchronized envelope")
    return reclock_arrival_curve(make_leaky_bucket(r0, b0), env)


def sync_pfr_hop_delay(D, delta) -> Quantity:
    """D + 4 Delta for an element followed by a non-adapted PFR in a synchronized network."""
    D, delta = q(D), q_finite(delta, "delta")
    if delta < 0:
        raise InvalidParameter("delta must be >= 0")
    if is_inf(D):
        return D
    return D + 4 * delta


def sync_pfr_hop_delay_geometric(D, r0, b0, env: ClockEnvelope) -> Quantity:
    alpha = sync_pfr_arrival_curve(r0, b0, env)
    beta = reclock_shaping_curve(make_leaky_bucket(r0, b0), env)
    return q(D) + horizontal_deviation(alpha, beta)


def sync_regime_degenerate(env: ClockEnvelope) -> bool:
    """True when eta >= 2 Delta rho, where the two sync arrival-curve pieces do not cross at t > 0."""
    return env.synchronized and env.eta >= 2 * env.delta * env.rho


# ---------------------------------------------------------------- analyses


def _arrivals(arrival: PwlCurve, hop: Hop) -> List[PwlCurve]:
    return [arrival, *hop.cross]


def _after_unregulated(arrival: PwlCurve, D: Quantity) -> PwlCurve:
    if is_inf(D):
        raise UnstableElement("unbounded element upstream of an unregulated hop")
    return deconvolve(arrival, make_delta(D))


def ideal_analysis(path: FlowPath) -> HopBoundReport:
    """Ideal clocks: every regulator keeps (r0, b0) and shaping is for free."""
    report = HopBoundReport(METHOD_IDEAL, IDEAL)
    arrival = path.source.bucket.curve
    for k, hop in enumerate(path.hops):
        D = element_delay_bound(hop.element, _arrivals(arrival, hop))
        config = path.source.bucket if hop.regulator is not None else None
        report.hops.append(HopBound(k + 1, D, D, config, arrival, hop.regulator))
        arrival = config.curve if config is not None else _after_unregulated(arrival, D)
    return report


def cascade_analysis(path: FlowPath, env: ClockEnvelope, grids: GridSpec = None) -> HopBoundReport:
    report = HopBoundReport(METHOD_CASCADE, env)
    configs = cascade_configure(path, env, grids)
    arrival = element_arrival_curve_tai(path.source.bucket, env)
    for k, (hop, config) in enumerate(zip(path.hops, configs)):
        D = element_delay_bound(hop.element, _arrivals(arrival, hop))
        if config is not None:
            hop_bound = cascade_hop_delay(D, env)
            report.hops.append(HopBound(k + 1, D, hop_bound, config, arrival, hop.regulator))
            arrival = element_arrival_curve_tai(config, env)
        else:
            report.hops.append(HopBound(k + 1, D, D, None, arrival))
            arrival = _after_unregulated(arrival, D)
    logger.info("cascade: %d hops, ete %s", path.n, fmt(report.ete))
    return report


def adam_analysis(path: FlowPath, env: ClockEnvelope, grid: Optional[RoundingGrid] = None, W=None) -> HopBoundReport:
    """ADAM bounds; all regulators must be PFRs, only the last hop may be unregulated."""
    for k, hop in enumerate(path.hops):
        if hop.regulator == RegulatorKind.IR:
            raise ConfigurationInfeasible("ADAM needs per-flow regulators, hop %d has an IR" % (k + 1))
        if hop.regulator is None and k < path.n - 1:
            raise ConfigurationInfeasible(f"ADAM needs a regulator after every element but the last (hop {k + 1})")
    W, config = adam_configure(path, env, grid, W)
    report = HopBoundReport(METHOD_ADAM, env, margin=W)
    alpha1 = element_arrival_curve_tai(config, env)
    bounds = [element_delay_bound(hop.element, _arrivals(alpha1, hop)) for hop in path.hops]
    regulated = [D for D, hop in zip(bounds, path.hops) if hop.regulator is not None]
    delays, _ = adam_hop_delays(path, env, W, regulated)
    for k, hop in enumerate(path.hops):
        if hop.regulator is not None:
            report.hops.append(HopBound(k + 1, bounds[k], delays[k], config, alpha1, hop.regulator))
        else:
            report.hops.append(HopBound(k + 1, bounds[k], bounds[k], None, alpha1))
    logger.info("adam: W=%s, %d hops, ete %s", fmt(W), path.n, fmt(report.ete))
    return report


def sync_nonadapted_analysis(path: FlowPath, env: ClockEnvelope) -> HopBoundReport:
    """Regulators keep (r0, b0) in a synchronized network; PFR hops cost D + 4 Delta, IR hops are unbounded."""
    if not env.synchronized:
        raise InvalidParameter("the synchronized non-adapted analysis needs a synchronized envelope")
    report = HopBoundReport(METHOD_SYNC, env)
    if sync_regime_degenerate(env):
        report.warnings.append(
            f"eta >= 2*delta*rho ({fmt(env.eta)} >= {fmt(2 * env.delta * env.rho)}): outside the regime of the 4*delta construction"
        )
    config = path.source.bucket
    sync_arrival = sync_pfr_arrival_curve(config.rate, config.burst, env)
    arrival = sync_arrival
    for k, hop in enumerate(path.hops):
        D = element_delay_bound(hop.element, _arrivals(arrival, hop))
        if hop.regulator == RegulatorKind.IR:
            report.hops.append(HopBound(k + 1, D, INF, config, arrival, hop.regulator))
            report.warnings.append(f"hop {k + 1}: non-adapted interleaved regulator, delay unbounded")
            arrival = sync_arrival
        elif hop.regulator == RegulatorKind.PFR:
            report.hops.append(HopBound(k + 1, D, sync_pfr_hop_delay(D, env.delta), config, arrival, hop.regulator))
            arrival = sync_arrival
        else:
            report.hops.append(HopBound(k + 1, D, D, None, arrival))
            arrival = _after_unregulated(arrival, D)
    return report


# ---------------------------------------------------------------- comparison table


@dataclass(frozen=True)
class CompareRow:
    n: int
    method: str
    ete: Quantity
    rel_increase: Quantity

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "method": self.method,
            "ete_bound_s": fmt(self.ete),
            "rel_increase": fmt(self.rel_increase),
            "rel_increase_percent": percent(self.rel_increase),
        }


def default_compare_source() -> SourceSpec:
    return SourceSpec(Fraction(10 ** 6), Fraction(10 ** 4), Fraction(10 ** 3))


def default_compare_element() -> ElementModel:
    return ElementModel.rate_latency(Fraction(10 ** 7), Fraction(1, 10 ** 5))


def ete_compare(
    hops: Iterable[int],
    env: ClockEnvelope,
    element: Optional[ElementModel] = None,
    source: Optional[SourceSpec] = None,
    methods: Sequence[str] = COMPARE_METHODS,
    W=DEFAULT_ADAM_MARGIN,
    delta=None,
    grid: Optional[RoundingGrid] = None,
) -> List[CompareRow]:
    """ETE bound and relative increase over ideal clocks, per path length and method.

    The synchronized method uses ``delta`` (or the envelope's own Delta, or 1 us).
    """
    element = element or default_compare_element()
    source = source or default_compare_source()
    unknown = [m for m in methods if m not in COMPARE_METHODS]
    if unknown:
        raise InvalidParameter(f"unknown comparison method(s) {unknown} (known: {', '.join(COMPARE_METHODS)})")
    if delta is not None:
        sync_env = env.with_delta(delta)
    elif env.synchronized:
        sync_env = env
    else:
        sync_env = env.with_delta(DEFAULT_SYNC_DELTA)

    rows: List[CompareRow] = []
    for n in hops:
        path = FlowPath.uniform(source, element, n)
        ideal = ideal_analysis(path).ete
        for method in methods:
            if method == METHOD_IDEAL:
                ete = ideal
            elif method == METHOD_CASCADE:
                ete = cascade_analysis(path, env, grid).ete
            elif method == METHOD_ADAM:
                ete = adam_analysis(path, env, grid, W).ete
            else:
                ete = sync_nonadapted_analysis(path, sync_env).ete
            rel = INF if is_inf(ete) else (ete - ideal) / ideal
            rows.append(CompareRow(n, method, ete, rel))
        logger.debug("compare: n=%d done", n)
    return rows


def write_compare_csv(rows: Iterable[CompareRow], fh: TextIO) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COMPARE_CSV_COLUMNS)
    count = 0
    for row in rows:
        writer.writerow(
            [row.n, row.method, fmt(row.ete), fmt(row.rel_increase), repr(to_float(row.ete)), percent(row.rel_increase)]
        )
        count += 1
    return count


def compare_to_csv(rows: Iterable[CompareRow]) -> str:
    buf = io.StringIO()
    write_compare_csv(rows, buf)
    return buf.getvalue()
