"""Exact rational helpers shared by the curve engine, the simulators and the exporters.

Every quantity inside the engine is a ``Fraction``; ``INF`` (a float) is the only
non-rational value and stands for +infinity. Floats never enter a computation, they
are produced by ``to_float`` for CSV convenience columns only.
"""
import math
from decimal import Context, Decimal, ROUND_HALF_EVEN
from fractions import Fraction
from typing import Union

from app.services.netcalc.errors import InvalidParameter

INF = math.inf

Quantity = Union[Fraction, float]
RationalLike = Union[Fraction, int, float, str]


def is_inf(x) -> bool:
    return isinstance(x, float) and x == INF


def q(x: RationalLike) -> Quantity:
    """Coerce ``x`` to an exact rational (or INF).

    Accepts Fractions, ints, decimal floats (read through their repr so that
    ``1e-4`` becomes exactly 1/10000) and strings such as ``"7/6"``, ``"1e-4"``,
    ``"0.0002"`` or ``"inf"``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InvalidParameter(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if x == INF:
            return INF
        if math.isnan(x) or math.isinf(x):
            raise InvalidParameter(f"not a rational: {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        text = x.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return INF
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"not a rational: {x!r}") from exc
    raise InvalidParameter(f"not a rational: {x!r}")


def q_finite(x: RationalLike, name: str = "value") -> Fraction:
    value = q(x)
    if is_inf(value):
        raise InvalidParameter(f"{name} must be finite")
    return value


def fmt(x: Quantity) -> str:
    """Lossless text form: ``"p/q"``, ``"p"`` or ``"inf"``."""
    if is_inf(x):
        return "inf"
    return str(q(x))


def to_float(x: Quantity) -> float:
    return INF if is_inf(x) else float(x)


def sqrt_floor(x: Fraction, denominator: int = 10 ** 12) -> Fraction:
    """Largest multiple of 1/denominator whose square does not exceed ``x``."""
    if x < 0:
        raise InvalidParameter("square root of a negative number")
    return Fraction(math.isqrt(math.floor(x * denominator * denominator)), denominator)


def ceil_to_step(x: Fraction, step: Fraction) -> Fraction:
    """Smallest multiple of ``step`` that is >= ``x``."""
    if step <= 0:
        raise InvalidParameter("grid step must be positive")
    return math.ceil(x / step) * step


def percent(x: Quantity, digits: int = 4) -> str:
    """``x`` as a percentage rounded half-even to ``digits`` significant digits."""
    if is_inf(x):
        return "inf"
    value = q(x) * 100
    exact = Decimal(value.numerator) / Decimal(value.denominator) if value else Decimal(0)
    return str(Context(prec=digits, rounding=ROUND_HALF_EVEN).create_decimal(exact))
