"""Exact min-plus algebra over piecewise-linear curves on t >= 0.

A curve is an ordered tuple of segments. Segment k starts at ``start`` and carries

* ``value``: the point value f(start),
* ``right``: the right limit f(start+),
* ``slope``: the slope on the open interval up to the next start (or forever).

Keeping the point value apart from the right limit lets a single class hold
gamma_{r,b} (0 at t=0, b just after), delta_D (0 up to D inclusive, +inf after) and
every finite min, max, convolution and deconvolution of such curves. Evaluation
returns the stored point value; ``right_limit`` gives f(t+). All numbers are
Fractions except INF.

The operations share one mechanism: each operand is split into *parts*, spots (a
single point) and open linear pieces; an operation produces new parts and the
result is the lower (inf) or upper (sup) envelope of those parts.
"""
import bisect
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

from app.services.netcalc.errors import (
    DomainError,
    InvalidParameter,
    UnboundedResult,
    UnsupportedOperand,
)
from app.services.netcalc.numbers import INF, Quantity, fmt, is_inf, q

logger = logging.getLogger(__name__)

ZERO = Fraction(0)


class CurveRole(str, Enum):
    ARRIVAL = "arrival"
    SERVICE = "service"
    SHAPING = "shaping"


@dataclass(frozen=True)
class Segment:
    start: Fraction
    value: Quantity
    right: Quantity
    slope: Fraction

    def __post_init__(self):
        object.__setattr__(self, "start", q(self.start))
        object.__setattr__(self, "value", q(self.value))
        object.__setattr__(self, "right", q(self.right))
        slope = q(self.slope)
        if is_inf(slope):
            raise InvalidParameter("segment slopes must be finite")
        if is_inf(self.right):
            slope = ZERO
        object.__setattr__(self, "slope", slope)

    def at(self, t: Fraction) -> Quantity:
        """Value of the open piece at ``t`` (extended linearly)."""
        if is_inf(self.right):
            return INF
        return self.right + self.slope * (t - self.start)


@dataclass(frozen=True)
class PwlCurve:
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise InvalidParameter("a curve needs at least one segment")
        if segs[0].start != 0:
            raise InvalidParameter("the first segment must start at 0")
        for prev, nxt in zip(segs, segs[1:]):
            if nxt.start <= prev.start:
                raise InvalidParameter("segment starts must be strictly increasing")
        object.__setattr__(self, "segments", segs)

    @cached_property
    def starts(self) -> List[Fraction]:
        return [s.start for s in self.segments]

    def index(self, t: Fraction) -> int:
        """Index of the last segment starting at or before ``t``."""
        return bisect.bisect_right(self.starts, t) - 1

    def __call__(self, t) -> Quantity:
        return evaluate(self, t)

    def right_limit(self, t) -> Quantity:
        t = q(t)
        if t < 0:
            raise DomainError(f"curve evaluated at negative time {t}")
        seg = self.segments[self.index(t)]
        return seg.right if seg.start == t else seg.at(t)

    def left_limit(self, t) -> Quantity:
        t = q(t)
        if t <= 0:
            raise DomainError("left limit needs t > 0")
        i = bisect.bisect_left(self.starts, t) - 1
        return self.segments[i].at(t)

    def slope_after(self, t: Fraction) -> Fraction:
        return self.segments[self.index(t)].slope

    def end_of(self, i: int) -> Quantity:
        return self.segments[i + 1].start if i + 1 < len(self.segments) else INF

    @property
    def breakpoints(self) -> List[Fraction]:
        return list(self.starts)

    @property
    def tail_slope(self) -> Fraction:
        return self.segments[-1].slope

    @property
    def jump_at_zero(self) -> Quantity:
        first = self.segments[0]
        if is_inf(first.right):
            return INF
        return first.right - first.value

    def __str__(self):
        parts = ", ".join(
            f"[{fmt(s.start)}: {fmt(s.value)}|{fmt(s.right)} +{fmt(s.slope)}t]" for s in self.segments
        )
        return f"PwlCurve({parts})"


def evaluate(c: PwlCurve, t) -> Quantity:
    t = q(t)
    if is_inf(t):
        raise DomainError("curves are evaluated at finite times")
    if t < 0:
        raise DomainError(f"curve evaluated at negative time {t}")
    seg = c.segments[c.index(t)]
    return seg.value if seg.start == t else seg.at(t)


def _normalize(segments: Iterable[Segment]) -> PwlCurve:
    out: List[Segment] = []
    for seg in segments:
        if out:
            prev = out[-1]
            left = prev.at(seg.start)
            if seg.value == left and seg.right == seg.value and seg.slope == prev.slope:
                continue
        out.append(seg)
    return PwlCurve(tuple(out))


# ---------------------------------------------------------------- constructors


def make_leaky_bucket(r, b) -> PwlCurve:
    """gamma_{r,b}: 0 at t=0, r*t + b for t > 0."""
    r, b = q(r), q(b)
    if is_inf(r) or is_inf(b) or r < 0 or b < 0:
        raise InvalidParameter(f"leaky bucket needs finite r >= 0 and b >= 0, got r={r}, b={b}")
    return _normalize([Segment(ZERO, ZERO, b, r)])


def make_rate_latency(R, T) -> PwlCurve:
    """lambda_{R,T}: |R(t - T)|+."""
    R, T = q(R), q(T)
    if is_inf(R) or is_inf(T) or R < 0 or T < 0:
        raise InvalidParameter(f"rate-latency needs finite R >= 0 and T >= 0, got R={R}, T={T}")
    if T == 0:
        return _normalize([Segment(ZERO, ZERO, ZERO, R)])
    return _normalize([Segment(ZERO, ZERO, ZERO, ZERO), Segment(T, ZERO, ZERO, R)])


def make_delta(D) -> PwlCurve:
    """delta_D: 0 on [0, D], +inf after."""
    D = q(D)
    if is_inf(D) or D < 0:
        raise InvalidParameter(f"delay must be finite and >= 0, got {D}")
    if D == 0:
        return PwlCurve((Segment(ZERO, ZERO, INF, ZERO),))
    return PwlCurve((Segment(ZERO, ZERO, ZERO, ZERO), Segment(D, ZERO, INF, ZERO)))


def make_affine(rate, offset, value_at_zero=None) -> PwlCurve:
    """t -> rate*t + offset for t > 0 (point value at 0 defaults to ``offset``)."""
    rate, offset = q(rate), q(offset)
    v0 = offset if value_at_zero is None else q(value_at_zero)
    return _normalize([Segment(ZERO, v0, offset, rate)])


def zero_curve() -> PwlCurve:
    return PwlCurve((Segment(ZERO, ZERO, ZERO, ZERO),))


# ---------------------------------------------------------------- predicates


def is_nondecreasing(c: PwlCurve) -> bool:
    segs = c.segments
    for i, seg in enumerate(segs):
        if seg.right < seg.value or seg.slope < 0:
            return False
        if i + 1 < len(segs) and segs[i + 1].value < seg.at(segs[i + 1].start):
            return False
    return True


def validate_role(c: PwlCurve, role: CurveRole) -> PwlCurve:
    role = CurveRole(role)
    if c(0) != 0:
        raise InvalidParameter(f"{role.value} curves must be 0 at t=0")
    if role in (CurveRole.ARRIVAL, CurveRole.SHAPING) and not is_nondecreasing(c):
        raise InvalidParameter(f"{role.value} curves must be wide-sense increasing")
    return c


# ---------------------------------------------------------------- parts


@dataclass(frozen=True)
class _Spot:
    t: Fraction
    v: Quantity


@dataclass(frozen=True)
class _Piece:
    lo: Quantity
    hi: Quantity
    anchor: Fraction
    v: Quantity
    slope: Fraction

    def value(self, t: Fraction) -> Quantity:
        if is_inf(self.v):
            return INF
        return self.v + self.slope * (t - self.anchor)

    @property
    def intercept(self) -> Fraction:
        return self.v - self.slope * self.anchor


def _parts(c: PwlCurve) -> Tuple[List[_Spot], List[_Piece]]:
    spots, pieces = [], []
    for i, seg in enumerate(c.segments):
        spots.append(_Spot(seg.start, seg.value))
        pieces.append(_Piece(seg.start, c.end_of(i), seg.start, seg.right, seg.slope))
    return spots, pieces


def _crossing(a: _Piece, b: _Piece) -> Optional[Fraction]:
    if is_inf(a.v) or is_inf(b.v) or a.slope == b.slope:
        return None
    x = (a.intercept - b.intercept) / (b.slope - a.slope)
    if max(a.lo, b.lo) < x < min(a.hi, b.hi):
        return x
    return None


def _envelope(spots: Sequence[_Spot], pieces: Sequence[_Piece], lower: bool) -> PwlCurve:
    def better(x, y):
        return x < y if lower else x > y

    points = {ZERO}
    points.update(s.t for s in spots if s.t >= 0)
    for p in pieces:
        for end in (p.lo, p.hi):
            if not is_inf(end) and end != -INF and end > 0:
                points.add(end)
    finite = [p for p in pieces if not is_inf(p.v)]
    for i, a in enumerate(finite):
        for b in finite[i + 1:]:
            x = _crossing(a, b)
            if x is not None and x > 0:
                points.add(x)
    ordered = sorted(points)

    segments = []
    for i, t0 in enumerate(ordered):
        mid = (t0 + ordered[i + 1]) / 2 if i + 1 < len(ordered) else t0 + 1
        best = None
        best_v = None
        for p in pieces:
            if p.lo < mid < p.hi:
                v = p.value(mid)
                if best is None or better(v, best_v):
                    best, best_v = p, v
        point_v = None
        for s in spots:
            if s.t == t0 and (point_v is None or better(s.v, point_v)):
                point_v = s.v
        for p in pieces:
            if p.lo < t0 < p.hi:
                v = p.value(t0)
                if point_v is None or better(v, point_v):
                    point_v = v
        if (best is None or point_v is None) and not lower:
            raise UnsupportedOperand(f"result undefined near t={t0}")
        if point_v is None:
            point_v = INF
        if best is None:
            right, slope = INF, ZERO
        else:
            right, slope = best.value(t0), best.slope
        segments.append(Segment(t0, point_v, right, slope))
    return _normalize(segments)


# ---------------------------------------------------------------- pointwise


def min_curve(a: PwlCurve, b: PwlCurve) -> PwlCurve:
    sa, pa = _parts(a)
    sb, pb = _parts(b)
    return _envelope(sa + sb, pa + pb, lower=True)


def max_curve(a: PwlCurve, b: PwlCurve) -> PwlCurve:
    sa, pa = _parts(a)
    sb, pb = _parts(b)
    return _envelope(sa + sb, pa + pb, lower=False)


def add_curve(a: PwlCurve, b: PwlCurve) -> PwlCurve:
    points = sorted(set(a.starts) | set(b.starts))
    segments = []
    for t0 in points:
        segments.append(
            Segment(t0, a(t0) + b(t0), a.right_limit(t0) + b.right_limit(t0), a.slope_after(t0) + b.slope_after(t0))
        )
    return _normalize(segments)


def sum_curves(curves: Iterable[PwlCurve]) -> PwlCurve:
    total = zero_curve()
    for c in curves:
        total = add_curve(total, c)
    return total


# ---------------------------------------------------------------- min-plus


def _shift(p: _Piece, dt: Fraction, dv: Quantity) -> _Piece:
    return _Piece(p.lo + dt, p.hi + dt, p.anchor + dt, p.v + dv, p.slope)


def _convex_join(p: _Piece, r: _Piece) -> Tuple[List[_Spot], List[_Piece]]:
    """inf over s in p, t-s in r of p(s) + r(t-s): smaller slope first."""
    if r.slope < p.slope:
        p, r = r, p
    start = p.lo + r.lo
    base = p.value(p.lo) + r.value(r.lo)
    first = _Piece(start, p.hi + r.lo, start, base, p.slope)
    if is_inf(p.hi):
        return [], [first]
    knee = p.hi + r.lo
    knee_v = base + p.slope * (p.hi - p.lo)
    return [_Spot(knee, knee_v)], [first, _Piece(knee, p.hi + r.hi, knee, knee_v, r.slope)]


def convolve(a: PwlCurve, b: PwlCurve) -> PwlCurve:
    """(a (x) b)(t) = inf_{0 <= s <= t} a(s) + b(t - s)."""
    for c in (a, b):
        if not is_nondecreasing(c):
            raise UnsupportedOperand("convolution needs wide-sense increasing operands")
    sa, pa = _parts(a)
    sb, pb = _parts(b)
    sa = [s for s in sa if not is_inf(s.v)]
    sb = [s for s in sb if not is_inf(s.v)]
    pa = [p for p in pa if not is_inf(p.v)]
    pb = [p for p in pb if not is_inf(p.v)]

    spots: List[_Spot] = []
    pieces: List[_Piece] = []
    for x in sa:
        spots.extend(_Spot(x.t + y.t, x.v + y.v) for y in sb)
        pieces.extend(_shift(r, x.t, x.v) for r in pb)
    for p in pa:
        pieces.extend(_shift(p, y.t, y.v) for y in sb)
        for r in pb:
            knee, joined = _convex_join(p, r)
            spots.extend(knee)
            pieces.extend(joined)
    return _envelope(spots, pieces, lower=True)


def _concave_join(p: _Piece, r: _Piece) -> Tuple[List[_Spot], List[_Piece]]:
    """sup over s in p, u in r with s - u = t of p(s) - r(u)."""
    p0, r0 = p.value(p.lo), r.value(r.lo)
    if p.slope > r.slope:
        if is_inf(p.hi) and is_inf(r.hi):
            raise UnboundedResult("deconvolution diverges: numerator grows faster than denominator")
        pieces, spots = [], []
        if not is_inf(r.hi):
            anchor = p.lo - r.hi
            v = p0 - r.value(r.hi)
            pieces.append(_Piece(p.lo - r.hi, p.hi - r.hi, anchor, v, p.slope))
        if not is_inf(p.hi):
            anchor = p.hi - r.lo
            v = p.value(p.hi) - r0
            pieces.append(_Piece(p.hi - r.hi, p.hi - r.lo, anchor, v, r.slope))
            if not is_inf(r.hi):
                spots.append(_Spot(p.hi - r.hi, p.value(p.hi) - r.value(r.hi)))
        return spots, pieces
    knee = p.lo - r.lo
    return [_Spot(knee, p0 - r0)], [
        _Piece(p.lo - r.hi, knee, knee, p0 - r0, r.slope),
        _Piece(knee, p.hi - r.lo, knee, p0 - r0, p.slope),
    ]


def _clip(spots: List[_Spot], pieces: List[_Piece]) -> Tuple[List[_Spot], List[_Piece]]:
    kept_spots = [s for s in spots if s.t >= 0]
    kept = []
    for p in pieces:
        if not (p.hi > 0):
            continue
        if p.lo < 0:
            kept_spots.append(_Spot(ZERO, p.value(ZERO)))
            p = _Piece(ZERO, p.hi, p.anchor, p.v, p.slope)
        kept.append(p)
    return kept_spots, kept


def deconvolve(a: PwlCurve, b: PwlCurve) -> PwlCurve:
    """(a (/) b)(t) = sup_{u >= 0} a(t + u) - b(u)."""
    sa, pa = _parts(a)
    sb, pb = _parts(b)
    if any(is_inf(s.v) for s in sa) or any(is_inf(p.v) for p in pa):
        raise UnboundedResult("deconvolution of a curve reaching +inf")
    sb = [s for s in sb if not is_inf(s.v)]
    pb = [p for p in pb if not is_inf(p.v)]

    spots: List[_Spot] = []
    pieces: List[_Piece] = []
    for x in sa:
        spots.extend(_Spot(x.t - y.t, x.v - y.v) for y in sb)
        pieces.extend(_Piece(x.t - r.hi, x.t - r.lo, x.t - r.anchor, x.v - r.v, r.slope) for r in pb)
    for p in pa:
        pieces.extend(_Piece(p.lo - y.t, p.hi - y.t, p.anchor - y.t, p.v - y.v, p.slope) for y in sb)
        for r in pb:
            knee, joined = _concave_join(p, r)
            spots.extend(knee)
            pieces.extend(joined)
    spots, pieces = _clip(spots, pieces)
    return _envelope(spots, pieces, lower=False)


def zero_at_origin(c: PwlCurve) -> PwlCurve:
    """Same curve with value 0 at t=0, the usual arrival-curve normalization."""
    first = c.segments[0]
    return _normalize((Segment(ZERO, ZERO, first.right, first.slope),) + c.segments[1:])


def shift_right(c: PwlCurve, D) -> PwlCurve:
    """delta_D (x) c."""
    return convolve(make_delta(D), c)


def compose(outer: PwlCurve, inner: PwlCurve) -> PwlCurve:
    """t -> outer(inner(t)) for a finite, wide-sense increasing ``inner``."""
    if not is_nondecreasing(inner):
        raise UnsupportedOperand("composition needs a wide-sense increasing inner curve")
    if any(is_inf(s.value) or is_inf(s.right) for s in inner.segments):
        raise UnsupportedOperand("composition needs a finite inner curve")
    points = set(inner.starts)
    for i, seg in enumerate(inner.segments):
        if seg.slope <= 0:
            continue
        end = inner.end_of(i)
        for level in outer.starts:
            if level > seg.right:
                t = seg.start + (level - seg.right) / seg.slope
                if t < end:
                    points.add(t)
    segments = []
    for t0 in sorted(points):
        i = inner.index(t0)
        level = inner.right_limit(t0)
        slope = inner.segments[i].slope
        if slope > 0:
            right = outer.right_limit(level)
            out_slope = outer.slope_after(level) * slope
        else:
            right = outer(level)
            out_slope = ZERO
        segments.append(Segment(t0, outer(inner(t0)), right, out_slope))
    return _normalize(segments)


# ---------------------------------------------------------------- deviation


def _pseudo_inverse(beta: PwlCurve, y: Quantity) -> Quantity:
    """inf{s >= 0 : beta(s) >= y}."""
    for i, seg in enumerate(beta.segments):
        if seg.value >= y or seg.right >= y:
            return seg.start
        if seg.slope > 0:
            x = seg.start + (y - seg.right) / seg.slope
            if x < beta.end_of(i):
                return x
    return INF


def _critical_levels(beta: PwlCurve) -> List[Fraction]:
    levels = set()
    for i, seg in enumerate(beta.segments):
        levels.add(seg.value)
        levels.add(seg.right)
        end = beta.end_of(i)
        if not is_inf(end):
            levels.add(seg.at(end))
    return sorted(v for v in levels if not is_inf(v))


def horizontal_deviation(alpha: PwlCurve, beta: PwlCurve) -> Quantity:
    """sup_t inf{d >= 0 : alpha(t) <= beta(t + d)}; INF when unbounded."""
    if not is_nondecreasing(alpha):
        raise UnsupportedOperand("horizontal deviation needs a wide-sense increasing alpha")

    def gap(t: Fraction) -> Quantity:
        reach = _pseudo_inverse(beta, alpha(t))
        return INF if is_inf(reach) else reach - t

    levels = _critical_levels(beta)
    points = set(alpha.starts)
    for i, seg in enumerate(alpha.segments):
        if seg.slope <= 0 or is_inf(seg.right):
            continue
        end = alpha.end_of(i)
        for level in levels:
            if level > seg.right:
                t = seg.start + (level - seg.right) / seg.slope
                if t < end:
                    points.add(t)
    ordered = sorted(points)

    best: Quantity = ZERO
    for i, t0 in enumerate(ordered):
        g0 = gap(t0)
        if is_inf(g0):
            return INF
        best = max(best, g0)
        if i + 1 < len(ordered):
            t1 = ordered[i + 1]
            m1, m2 = t0 + (t1 - t0) / 3, t0 + 2 * (t1 - t0) / 3
        else:
            t1 = None
            m1, m2 = t0 + 1, t0 + 2
        g1, g2 = gap(m1), gap(m2)
        if is_inf(g1) or is_inf(g2):
            return INF
        rate = (g2 - g1) / (m2 - m1)
        best = max(best, g1 - rate * (m1 - t0))
        if t1 is None:
            if rate > 0:
                return INF
        else:
            best = max(best, g2 + rate * (t1 - m2))
    return best


# ---------------------------------------------------------------- json


def curve_to_json(c: PwlCurve) -> dict:
    return {
        "segments": [
            {"t": fmt(s.start), "v": fmt(s.value), "rv": fmt(s.right), "slope": fmt(s.slope)} for s in c.segments
        ],
        "jump0": fmt(c.jump_at_zero),
    }


def curve_from_json(data: dict) -> PwlCurve:
    try:
        raw = data["segments"]
    except (KeyError, TypeError) as exc:
        raise InvalidParameter("curve JSON needs a 'segments' list") from exc
    segments = []
    for i, item in enumerate(raw):
        value = q(item["v"])
        if "rv" in item:
            right = q(item["rv"])
        elif i == 0 and "jump0" in data:
            right = value + q(data["jump0"])
        else:
            right = value
        segments.append(Segment(q(item["t"]), value, right, q(item.get("slope", 0))))
    return PwlCurve(tuple(segments))
