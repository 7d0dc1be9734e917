"""Reclocking toolbox: carry delays, curves and traces from one clock to another.

A quantity measured with a clock H_g is valid with any other clock H_i once it has
been passed through the network envelope (rho, eta, Delta). Arrival curves pass
through the upper time envelope, service and shaping curves through the lower one.
Leaky buckets and rate-latency curves have closed forms; anything else goes
through exact composition with the envelope curve.
"""
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Tuple, Union

from app.services.netcalc.clocks import ClockEnvelope, ClockFunction, lower_envelope_curve, upper_envelope_curve
from app.services.netcalc.curves import (
    ZERO,
    CurveRole,
    PwlCurve,
    compose,
    convolve,
    make_delta,
    make_leaky_bucket,
    make_rate_latency,
    max_curve,
    min_curve,
    validate_role,
    zero_at_origin,
)
from app.services.netcalc.errors import ClockMismatch, InvalidParameter, UnsupportedOperand
from app.services.netcalc.numbers import Quantity, fmt, is_inf, q
from app.services.simulation.traces import PacketTrace

logger = logging.getLogger(__name__)

METHODS = ("auto", "generic")


def reclock_delay(D, env: ClockEnvelope) -> Quantity:
    """Bound valid with any clock for a delay bounded by ``D`` with one clock."""
    D = q(D)
    if is_inf(D):
        return D
    if D < 0:
        raise InvalidParameter(f"delay bound must be >= 0, got {D}")
    bound = env.rho * D + env.eta
    if env.synchronized:
        bound = min(bound, D + 2 * env.delta)
    return bound


def relative_increase(D, env: ClockEnvelope) -> Quantity:
    """(reclocked - D) / D."""
    D = q(D)
    if is_inf(D):
        return D
    if D <= 0:
        raise InvalidParameter("relative increase needs a positive delay")
    return (reclock_delay(D, env) - D) / D


# ---------------------------------------------------------------- shape recognition


def leaky_bucket_params(c: PwlCurve) -> Optional[Tuple[Fraction, Fraction]]:
    """(r, b) when ``c`` is exactly gamma_{r,b}."""
    if len(c.segments) != 1:
        return None
    seg = c.segments[0]
    if seg.value != 0 or is_inf(seg.right):
        return None
    return seg.slope, seg.right


def rate_latency_params(c: PwlCurve) -> Optional[Tuple[Fraction, Fraction]]:
    """(R, T) when ``c`` is exactly lambda_{R,T}."""
    segs = c.segments
    if len(segs) == 1 and segs[0].value == 0 and segs[0].right == 0:
        return segs[0].slope, ZERO
    if (
        len(segs) == 2
        and segs[0].value == segs[0].right == 0
        and segs[0].slope == 0
        and segs[1].value == segs[1].right == 0
        and segs[1].slope > 0
    ):
        return segs[1].slope, segs[1].start
    return None


def _check_method(method: str) -> str:
    if method not in METHODS:
        raise InvalidParameter(f"unknown reclocking method '{method}' (expected one of {METHODS})")
    return method


# ---------------------------------------------------------------- curves


def reclock_arrival_curve(alpha: PwlCurve, env: ClockEnvelope, method: str = "auto") -> PwlCurve:
    """Arrival curve valid with any clock for a flow constrained by ``alpha`` with one clock."""
    validate_role(alpha, CurveRole.ARRIVAL)
    params = leaky_bucket_params(alpha) if _check_method(method) == "auto" else None
    if params is not None:
        r, b = params
        result = make_leaky_bucket(env.rho * r, b + r * env.eta)
        if env.synchronized:
            result = min_curve(result, make_leaky_bucket(r, b + 2 * r * env.delta))
        return result
    if any(is_inf(s.right) for s in alpha.segments):
        raise UnsupportedOperand("arrival curves reaching +inf cannot be reclocked")
    return zero_at_origin(compose(alpha, upper_envelope_curve(env)))


def _lower_closed_form(c: PwlCurve, env: ClockEnvelope) -> Optional[PwlCurve]:
    params = rate_latency_params(c)
    if params is not None:
        R, T = params
        result = make_rate_latency(R / env.rho, env.rho * T + env.eta)
        if env.synchronized:
            result = max_curve(result, make_rate_latency(R, T + 2 * env.delta))
        return result
    params = leaky_bucket_params(c)
    if params is not None:
        r, b = params
        result = convolve(make_delta(env.eta), make_leaky_bucket(r / env.rho, b))
        if env.synchronized:
            result = max_curve(result, convolve(make_delta(2 * env.delta), make_leaky_bucket(r, b)))
        return result
    return None


def reclock_service_curve(beta: PwlCurve, env: ClockEnvelope, method: str = "auto") -> PwlCurve:
    """Service curve valid with any clock for a system offering ``beta`` with its own clock.

    Rate-latency servers and token-bucket regulators (a leaky bucket used as a
    service curve) take the closed forms.
    """
    validate_role(beta, CurveRole.SERVICE)
    if _check_method(method) == "auto":
        result = _lower_closed_form(beta, env)
        if result is not None:
            return result
    return compose(beta, lower_envelope_curve(env))


def reclock_shaping_curve(sigma: PwlCurve, env: ClockEnvelope, method: str = "auto") -> PwlCurve:
    """Service curve, valid with any clock, of a regulator enforcing ``sigma`` with its own clock."""
    validate_role(sigma, CurveRole.SHAPING)
    if _check_method(method) == "auto":
        result = _lower_closed_form(sigma, env)
        if result is not None:
            return result
    return compose(sigma, lower_envelope_curve(env))


# ---------------------------------------------------------------- traces


def reclock_trace(trace: PacketTrace, d: ClockFunction) -> PacketTrace:
    """Re-express ``trace`` (observed with d.target) with clock d.source.

    A packet stamped t by H_i was stamped d^{-1}(t) by H_g when d = d_{g->i}.
    """
    if d.target is not None and trace.clock is not None and trace.clock != d.target:
        raise ClockMismatch(f"trace observed with {trace.clock}, function maps into {d.target}")
    back = d.inverse()
    return trace.retimed(back, d.source if d.source is not None else trace.clock)


def forward_trace(trace: PacketTrace, d: ClockFunction) -> PacketTrace:
    """Re-express ``trace`` (observed with d.source) with clock d.target."""
    if d.source is not None and trace.clock is not None and trace.clock != d.source:
        raise ClockMismatch(f"trace observed with {trace.clock}, function maps from {d.source}")
    return trace.retimed(d, d.target if d.target is not None else trace.clock)


# ---------------------------------------------------------------- tagged quantities


Payload = Union[Fraction, PwlCurve, PacketTrace]


@dataclass(frozen=True)
class ObservedQuantity:
    """A delay bound, curve or trace together with the clock it was measured with."""

    payload: Payload
    role: str
    clock: str
    reclocked_from: Optional[str] = None

    def describe(self) -> str:
        origin = f" (reclocked from {self.reclocked_from})" if self.reclocked_from else ""
        if isinstance(self.payload, PacketTrace):
            value = f"{len(self.payload)} events"
        elif isinstance(self.payload, PwlCurve):
            value = str(self.payload)
        else:
            value = fmt(self.payload)
        return f"{self.role} @ {self.clock}{origin}: {value}"


def reclock_observed(
    obs: ObservedQuantity,
    env: Optional[ClockEnvelope],
    clock: str,
    method: str = "auto",
    d: Optional[ClockFunction] = None,
) -> ObservedQuantity:
    """Move ``obs`` to ``clock``; a quantity already on ``clock`` is returned as is.

    Bounds and curves only need the envelope. Traces need the actual relative time
    function ``d`` from ``obs.clock`` to ``clock``.
    """
    if obs.clock == clock:
        return obs
    if obs.role == "trace":
        if d is None:
            raise InvalidParameter("reclocking a trace needs a relative time function")
        payload = forward_trace(obs.payload, d.tagged(obs.clock, clock))
    elif env is None:
        raise InvalidParameter(f"reclocking a {obs.role} needs a clock envelope")
    elif obs.role == "delay":
        payload = reclock_delay(obs.payload, env)
    elif obs.role == CurveRole.ARRIVAL.value:
        payload = reclock_arrival_curve(obs.payload, env, method)
    elif obs.role == CurveRole.SERVICE.value:
        payload = reclock_service_curve(obs.payload, env, method)
    elif obs.role == CurveRole.SHAPING.value:
        payload = reclock_shaping_curve(obs.payload, env, method)
    else:
        raise InvalidParameter(f"cannot reclock a quantity of role '{obs.role}'")
    logger.debug("reclocked %s from %s to %s", obs.role, obs.clock, clock)
    return replace(obs, payload=payload, clock=clock, reclocked_from=obs.clock)
