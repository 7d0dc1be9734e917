"""Time model: per-clock specs, network-wide envelopes and relative time functions.

A relative time function d_{g->i} maps a reading of clock H_g to the reading of
H_i at the same instant. It is continuous, strictly increasing and piecewise
linear, so it is stored as breakpoints plus a head and a tail slope and is
defined on the whole real line.
"""
import bisect
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from app.services.netcalc.curves import PwlCurve, make_affine, make_rate_latency, max_curve, min_curve
from app.services.netcalc.errors import ClockMismatch, DomainError, InvalidClock, InvalidParameter
from app.services.netcalc.numbers import Quantity, fmt, q, q_finite, sqrt_floor

logger = logging.getLogger(__name__)

TAI = "TAI"


@dataclass(frozen=True)
class ClockSpec:
    rho1: Fraction
    rho2: Fraction
    eta: Fraction
    rho3: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("rho1", "rho2", "rho3", "eta"):
            value = q_finite(getattr(self, name), name)
            if value < 0:
                raise InvalidParameter(f"{name} must be >= 0")
            object.__setattr__(self, name, value)

    @property
    def stability(self) -> Fraction:
        return 1 + self.rho1 + self.rho2 + self.rho3


@dataclass(frozen=True)
class ClockEnvelope:
    rho: Fraction
    eta: Fraction
    delta: Optional[Fraction] = None

    def __post_init__(self):
        rho = q_finite(self.rho, "rho")
        eta = q_finite(self.eta, "eta")
        if rho < 1:
            raise InvalidParameter(f"rho must be >= 1, got {rho}")
        if eta < 0:
            raise InvalidParameter(f"eta must be >= 0, got {eta}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "eta", eta)
        if self.delta is not None:
            delta = q_finite(self.delta, "delta")
            if delta < 0:
                raise InvalidParameter(f"delta must be >= 0, got {delta}")
            object.__setattr__(self, "delta", delta)

    @property
    def synchronized(self) -> bool:
        return self.delta is not None

    @property
    def ideal(self) -> bool:
        return self.rho == 1 and self.eta == 0 and (self.delta is None or self.delta == 0)

    def with_delta(self, delta) -> "ClockEnvelope":
        return ClockEnvelope(self.rho, self.eta, delta)


IDEAL = ClockEnvelope(Fraction(1), Fraction(0))

PRESETS: Dict[str, ClockEnvelope] = {
    "tsn-nonsync": ClockEnvelope(Fraction("1.0002"), Fraction("4e-9")),
    "tsn-tight-sync": ClockEnvelope(Fraction("1.0002"), Fraction("4e-9"), Fraction("1e-6")),
    "ntp-loose-sync": ClockEnvelope(Fraction("1.0002"), Fraction("4e-9"), Fraction("0.125")),
}

PRESET_DESCRIPTIONS = {
    "tsn-nonsync": "Free-running TSN clocks (100 ppm each, 2 ns jitter)",
    "tsn-tight-sync": "TSN clocks under gPTP, 1 us time-error bound",
    "ntp-loose-sync": "NTP-synchronized clocks, 125 ms step threshold",
}


def from_preset(name: str) -> ClockEnvelope:
    try:
        return PRESETS[name]
    except KeyError as exc:
        raise InvalidParameter(f"unknown envelope preset '{name}' (known: {', '.join(PRESETS)})") from exc


def derive_envelope(specs: Sequence[ClockSpec], delta=None) -> ClockEnvelope:
    """Network bounds rho = max rho_i*rho_g and eta = max eta_g*rho_i + eta_i over ordered pairs (i = g included)."""
    if not specs:
        raise InvalidParameter("derive_envelope needs at least one clock")
    rho = max(i.stability * g.stability for i in specs for g in specs)
    eta = max(g.eta * i.stability + i.eta for i in specs for g in specs)
    return ClockEnvelope(rho, eta, delta)


def envelope_upper(env: ClockEnvelope, tau) -> Fraction:
    """Largest elapsed time on another clock for ``tau`` elapsed on this one."""
    tau = q_finite(tau, "tau")
    if tau < 0:
        raise DomainError("tau must be >= 0")
    bound = env.rho * tau + env.eta
    if env.synchronized:
        bound = min(bound, tau + 2 * env.delta)
    return bound


def envelope_lower(env: ClockEnvelope, tau) -> Fraction:
    tau = q_finite(tau, "tau")
    if tau < 0:
        raise DomainError("tau must be >= 0")
    bound = max(tau - env.eta, Fraction(0)) / env.rho
    if env.synchronized:
        bound = max(bound, tau - 2 * env.delta)
    return bound


def upper_envelope_curve(env: ClockEnvelope) -> PwlCurve:
    curve = make_affine(env.rho, env.eta)
    if env.synchronized:
        curve = min_curve(curve, make_affine(1, 2 * env.delta))
    return curve


def lower_envelope_curve(env: ClockEnvelope) -> PwlCurve:
    curve = make_rate_latency(1 / env.rho, env.eta)
    if env.synchronized:
        curve = max_curve(curve, make_rate_latency(1, 2 * env.delta))
    return curve


# ---------------------------------------------------------------- clock functions


@dataclass(frozen=True)
class ClockFunction:
    points: Tuple[Tuple[Fraction, Fraction], ...]
    head_slope: Fraction = Fraction(1)
    tail_slope: Fraction = Fraction(1)
    source: Optional[str] = None
    target: Optional[str] = None

    def __post_init__(self):
        pts = tuple((q_finite(t, "t"), q_finite(d, "d")) for t, d in self.points)
        if not pts:
            raise InvalidClock("a clock function needs at least one breakpoint")
        head, tail = q_finite(self.head_slope, "head_slope"), q_finite(self.tail_slope, "tail_slope")
        if head <= 0 or tail <= 0:
            raise InvalidClock("clock functions must be strictly increasing")
        for (t0, d0), (t1, d1) in zip(pts, pts[1:]):
            if t1 <= t0 or d1 <= d0:
                raise InvalidClock(f"clock function is not strictly increasing between t={t0} and t={t1}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "head_slope", head)
        object.__setattr__(self, "tail_slope", tail)

    @property
    def times(self) -> List[Fraction]:
        return [t for t, _ in self.points]

    @property
    def slopes(self) -> List[Fraction]:
        inner = [(d1 - d0) / (t1 - t0) for (t0, d0), (t1, d1) in zip(self.points, self.points[1:])]
        return [self.head_slope] + inner + [self.tail_slope]

    def __call__(self, t) -> Fraction:
        t = q_finite(t, "t")
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1] + self.head_slope * (t - pts[0][0])
        if t >= pts[-1][0]:
            return pts[-1][1] + self.tail_slope * (t - pts[-1][0])
        i = bisect.bisect_right(self.times, t) - 1
        (t0, d0), (t1, d1) = pts[i], pts[i + 1]
        return d0 + (d1 - d0) * (t - t0) / (t1 - t0)

    def inverse(self) -> "ClockFunction":
        return ClockFunction(
            tuple((d, t) for t, d in self.points),
            1 / self.head_slope,
            1 / self.tail_slope,
            source=self.target,
            target=self.source,
        )

    def tagged(self, source: Optional[str], target: Optional[str]) -> "ClockFunction":
        return ClockFunction(self.points, self.head_slope, self.tail_slope, source, target)


def identity(tag: Optional[str] = None) -> ClockFunction:
    return ClockFunction(((Fraction(0), Fraction(0)),), Fraction(1), Fraction(1), tag, tag)


def linear(slope, offset=0, source: Optional[str] = None, target: Optional[str] = None) -> ClockFunction:
    """t -> slope*t + offset."""
    slope = q_finite(slope, "slope")
    return ClockFunction(((Fraction(0), q_finite(offset, "offset")),), slope, slope, source, target)


def invert(d: ClockFunction) -> ClockFunction:
    return d.inverse()


def compose(outer: ClockFunction, inner: ClockFunction) -> ClockFunction:
    """outer o inner, i.e. t -> outer(inner(t))."""
    if outer.source and inner.target and outer.source != inner.target:
        raise ClockMismatch(f"cannot compose {inner.source}->{inner.target} with {outer.source}->{outer.target}")
    back = inner.inverse()
    times = set(inner.times)
    times.update(back(t) for t in outer.times)
    ordered = sorted(times)
    return ClockFunction(
        tuple((t, outer(inner(t))) for t in ordered),
        outer.head_slope * inner.head_slope,
        outer.tail_slope * inner.tail_slope,
        source=inner.source,
        target=outer.target,
    )


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class EnvelopeViolation:
    constraint: str
    s: Fraction
    t: Fraction
    observed: Fraction
    bound: Fraction


@dataclass(frozen=True)
class EnvelopeReport:
    valid: bool
    violation: Optional[EnvelopeViolation] = None
    checked_points: int = 0

    def to_json(self) -> dict:
        out = {"valid": self.valid, "checked_points": self.checked_points, "violation": None}
        if self.violation is not None:
            v = self.violation
            out["violation"] = {
                "constraint": v.constraint,
                "s": fmt(v.s),
                "t": fmt(v.t),
                "observed": fmt(v.observed),
                "bound": fmt(v.bound),
            }
        return out


def _outer_slope_violation(d: ClockFunction, env: ClockEnvelope) -> Optional[EnvelopeViolation]:
    """Witness on the unbounded head or tail of d, whose slopes hold on the whole line."""
    rho, eta = env.rho, env.eta
    (t0, d0), (t1, d1) = d.points[0], d.points[-1]
    for slope, tail in ((d.head_slope, False), (d.tail_slope, True)):
        if slope > rho:
            span = eta / (slope - rho) + 1
            s, t = (t1, t1 + span) if tail else (t0 - span, t0)
            return EnvelopeViolation("upper", s, t, d(t) - d(s), rho * span + eta)
        if slope < 1 / rho:
            span = (eta / rho) / (1 / rho - slope) + 1
            s, t = (t1, t1 + span) if tail else (t0 - span, t0)
            return EnvelopeViolation("lower", s, t, d(t) - d(s), (span - eta) / rho)
        if env.synchronized and slope != 1:
            step = (env.delta + abs((d1 - t1) if tail else (d0 - t0))) / abs(slope - 1) + 1
            t = t1 + step if tail else t0 - step
            return EnvelopeViolation("sync", t, t, abs(d(t) - t), env.delta)
    return None


def validate_envelope(
    d: ClockFunction, env: ClockEnvelope, domain: Optional[Tuple[Quantity, Quantity]] = None
) -> EnvelopeReport:
    """Exact check of the stability envelope (and the time-error bound if synchronized).

    The worst pair (s, t) of a piecewise-linear d is reached at breakpoints, so a
    single scan keeping the running extremum of d(s) - rho*s and d(s) - s/rho is exact.
    Without a domain the head and tail slopes are checked too, since they extend
    to the whole real line.
    """
    if domain is None:
        lo, hi = d.points[0][0] - 1, d.points[-1][0] + 1
    else:
        lo, hi = q_finite(domain[0], "domain start"), q_finite(domain[1], "domain end")
        if hi < lo:
            raise DomainError("empty validation domain")
    grid = [lo] + [t for t in d.times if lo < t < hi] + ([hi] if hi > lo else [])
    rho, eta = env.rho, env.eta

    min_upper = None
    max_lower = None
    for t in grid:
        dt = d(t)
        if env.synchronized and abs(dt - t) > env.delta:
            return EnvelopeReport(False, EnvelopeViolation("sync", t, t, abs(dt - t), env.delta), len(grid))
        e = dt - rho * t
        f = dt - t / rho
        if min_upper is None or e < min_upper[0]:
            min_upper = (e, t)
        if max_lower is None or f > max_lower[0]:
            max_lower = (f, t)
        s = min_upper[1]
        if e - min_upper[0] > eta:
            return EnvelopeReport(
                False, EnvelopeViolation("upper", s, t, dt - d(s), rho * (t - s) + eta), len(grid)
            )
        s = max_lower[1]
        if max_lower[0] - f > eta / rho:
            return EnvelopeReport(
                False, EnvelopeViolation("lower", s, t, dt - d(s), (t - s - eta) / rho), len(grid)
            )
    if domain is None:
        outer = _outer_slope_violation(d, env)
        if outer is not None:
            return EnvelopeReport(False, outer, len(grid))
    return EnvelopeReport(True, None, len(grid))


# ---------------------------------------------------------------- clock sets


@dataclass
class ClockSet:
    """Device clocks given as d_{TAI->device}; TAI itself is the identity."""

    clocks: Dict[str, ClockFunction] = field(default_factory=dict)

    def add(self, tag: str, d_from_tai: ClockFunction) -> None:
        self.clocks[tag] = d_from_tai.tagged(TAI, tag)

    def from_tai(self, tag: str) -> ClockFunction:
        if tag == TAI:
            return identity(TAI)
        try:
            return self.clocks[tag]
        except KeyError as exc:
            raise ClockMismatch(f"unknown clock '{tag}'") from exc

    def relative(self, g: str, i: str) -> ClockFunction:
        """d_{g->i}."""
        return compose(self.from_tai(i), self.from_tai(g).inverse())


def random_clock_function(
    rng: random.Random,
    env: ClockEnvelope,
    horizon,
    synchronized: bool = False,
    segments: int = 6,
    tag: Optional[str] = None,
) -> ClockFunction:
    """A random d_{TAI->device} such that any two such clocks satisfy ``env``.

    Slopes stay in [1/s, s] with s*s <= rho, so every relative function has slopes in
    [1/rho, rho]. Synchronized clocks also keep |d(t) - t| <= delta/2.
    """
    horizon = q_finite(horizon, "horizon")
    s = max(sqrt_floor(env.rho), Fraction(1))

    def draw_slope(low: Fraction, high: Fraction) -> Fraction:
        return low + (high - low) * Fraction(rng.randint(0, 1000), 1000)

    if not synchronized:
        cuts = sorted({horizon * Fraction(rng.randint(1, 999), 1000) for _ in range(segments)})
        t_prev, d_prev = Fraction(0), horizon * Fraction(rng.randint(-100, 100), 1000)
        points = [(t_prev, d_prev)]
        for t in cuts:
            d_prev = d_prev + draw_slope(1 / s, s) * (t - t_prev)
            t_prev = t
            points.append((t, d_prev))
        return ClockFunction(tuple(points), draw_slope(1 / s, s), draw_slope(1 / s, s), TAI, tag)

    if env.delta is None:
        raise InvalidParameter("a synchronized clock needs an envelope with delta")
    half = env.delta / 2
    t, offset = Fraction(0), Fraction(0)
    points = [(t, t + offset)]
    for _ in range(segments):
        if t >= horizon or s == 1 or half == 0:
            break
        goal = -half + 2 * half * Fraction(rng.randint(0, 1000), 1000)
        if goal == offset:
            continue
        if goal > offset:
            slope = 1 + (s - 1) * Fraction(rng.randint(1, 1000), 1000)
        else:
            slope = 1 - (1 - 1 / s) * Fraction(rng.randint(1, 1000), 1000)
        t = t + (goal - offset) / (slope - 1)
        offset = goal
        points.append((t, t + offset))
    return ClockFunction(tuple(points), Fraction(1), Fraction(1), TAI, tag)


# ---------------------------------------------------------------- json


def clock_to_json(d: ClockFunction) -> dict:
    return {
        "source": d.source,
        "target": d.target,
        "points": [[fmt(t), fmt(v)] for t, v in d.points],
        "head_slope": fmt(d.head_slope),
        "tail_slope": fmt(d.tail_slope),
    }


def clock_from_json(data: dict) -> ClockFunction:
    try:
        points = tuple((q(t), q(v)) for t, v in data["points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidClock("clock JSON needs a 'points' list of [t, d] pairs") from exc
    return ClockFunction(
        points,
        q(data.get("head_slope", 1)),
        q(data.get("tail_slope", 1)),
        source=data.get("source"),
        target=data.get("target"),
    )


def envelope_to_json(env: ClockEnvelope) -> dict:
    return {"rho": fmt(env.rho), "eta": fmt(env.eta), "delta": None if env.delta is None else fmt(env.delta)}


def envelope_from_json(data) -> ClockEnvelope:
    if isinstance(data, str):
        return from_preset(data)
    if data.get("preset"):
        return from_preset(data["preset"])
    delta = data.get("delta")
    return ClockEnvelope(q(data["rho"]), q(data["eta"]), None if delta is None else q(delta))
