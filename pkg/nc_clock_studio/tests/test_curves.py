"""Min-plus curve engine: constructors, combinators and horizontal deviation."""
import random
from fractions import Fraction

import pytest

from app.services.netcalc.curves import (
    CurveRole,
    add_curve,
    compose,
    convolve,
    curve_from_json,
    curve_to_json,
    deconvolve,
    horizontal_deviation,
    make_affine,
    make_delta,
    make_leaky_bucket,
    make_rate_latency,
    max_curve,
    min_curve,
    shift_right,
    sum_curves,
    validate_role,
    zero_at_origin,
)
from app.services.netcalc.errors import DomainError, InvalidParameter, UnboundedResult, UnsupportedOperand
from app.services.netcalc.numbers import INF, fmt, percent, q


class TestNumbers:
    def test_decimal_float_is_read_exactly(self):
        assert q(1e-4) == Fraction(1, 10000)
        assert q("0.0002") == Fraction(1, 5000)
        assert q("7/6") == Fraction(7, 6)

    def test_inf_round_trip(self):
        assert q("inf") == INF
        assert fmt(INF) == "inf"

    def test_rejects_garbage(self):
        with pytest.raises(InvalidParameter):
            q("seven")
        with pytest.raises(InvalidParameter):
            q(True)

    def test_percent_significant_digits(self):
        assert percent(Fraction(42, 10000)) == "0.42"
        assert percent(INF) == "inf"


class TestConstructors:
    def test_leaky_bucket_is_zero_at_origin(self):
        g = make_leaky_bucket(2, 3)
        assert g(0) == 0
        assert g.right_limit(0) == 3
        assert g(5) == 13
        assert g.jump_at_zero == 3

    def test_rate_latency(self):
        lam = make_rate_latency(2, 3)
        assert lam(3) == 0
        assert lam(Fraction(7, 2)) == 1
        assert lam(10) == 14

    def test_delta(self):
        d = make_delta(5)
        assert d(5) == 0
        assert d.right_limit(5) == INF
        assert d(6) == INF

    def test_negative_parameters_rejected(self):
        with pytest.raises(InvalidParameter):
            make_leaky_bucket(-1, 0)
        with pytest.raises(InvalidParameter):
            make_rate_latency(1, -2)
        with pytest.raises(InvalidParameter):
            make_delta(-1)

    def test_negative_time_is_a_domain_error(self):
        with pytest.raises(DomainError):
            make_leaky_bucket(1, 1)(-1)

    def test_role_validation(self):
        validate_role(make_leaky_bucket(1, 1), CurveRole.ARRIVAL)
        with pytest.raises(InvalidParameter):
            validate_role(make_affine(1, 1), CurveRole.ARRIVAL)
        with pytest.raises(InvalidParameter):
            validate_role(make_affine(-1, 0), CurveRole.SHAPING)


class TestCombinators:
    def test_min_of_leaky_buckets(self):
        c = min_curve(make_leaky_bucket(1, 4), make_leaky_bucket(2, 1))
        assert c(0) == 0
        assert c(1) == 3
        assert c(3) == 7
        assert c(5) == 9

    def test_max_of_rate_latency(self):
        c = max_curve(make_rate_latency(1, 0), make_rate_latency(3, 2))
        assert c(1) == 1
        assert c(3) == 3
        assert c(4) == 6

    def test_add_and_sum(self):
        a, b = make_leaky_bucket(1, 2), make_leaky_bucket(3, 4)
        s = add_curve(a, b)
        assert s(0) == 0
        assert s.right_limit(0) == 6
        assert s(2) == 14
        assert sum_curves([a, b, a])(1) == 3 + 7 + 3

    def test_convolution_of_rate_latency_curves(self):
        c = convolve(make_rate_latency(2, 1), make_rate_latency(3, 2))
        for t, v in [(0, 0), (2, 0), (3, 0), (4, 2), (5, 4), (Fraction(13, 2), 7)]:
            assert c(t) == v

    def test_convolution_with_delta_shifts(self):
        c = shift_right(make_leaky_bucket(1, 2), 3)
        assert c(3) == 0
        assert c.right_limit(3) == 2
        assert c(5) == 4

    def test_deconvolution_of_leaky_bucket_by_rate_latency(self):
        # gamma_{1,2} deconvolved by lambda_{3,1} is gamma_{1,3} with value 3 at the origin
        c = deconvolve(make_leaky_bucket(1, 2), make_rate_latency(3, 1))
        assert c(0) == 3
        assert c(1) == 4
        assert c(10) == 13
        assert zero_at_origin(c)(0) == 0

    def test_deconvolution_unbounded(self):
        with pytest.raises(UnboundedResult):
            deconvolve(make_leaky_bucket(3, 1), make_rate_latency(1, 0))

    def test_compose_with_linear_inner(self):
        c = compose(make_leaky_bucket(2, 1), make_affine(3, 0))
        assert c(0) == 0
        assert c.right_limit(0) == 1
        assert c(1) == 7

    def test_compose_needs_increasing_inner(self):
        with pytest.raises(UnsupportedOperand):
            compose(make_leaky_bucket(1, 1), make_affine(-1, 5))


class TestHorizontalDeviation:
    def test_leaky_bucket_through_rate_latency(self):
        assert horizontal_deviation(make_leaky_bucket(1, 4), make_rate_latency(2, 3)) == 5

    def test_overloaded_server_is_unbounded(self):
        assert horizontal_deviation(make_leaky_bucket(3, 1), make_rate_latency(2, 0)) == INF

    def test_pure_delay(self):
        assert horizontal_deviation(make_leaky_bucket(1, 2), make_delta(5)) == 5

    def test_equal_curves(self):
        g = make_leaky_bucket(1, 2)
        assert horizontal_deviation(g, g) == 0

    def test_aggregate_of_two_flows(self):
        alpha = add_curve(make_leaky_bucket(1, 2), make_leaky_bucket(1, 3))
        assert horizontal_deviation(alpha, make_rate_latency(4, 1)) == 1 + Fraction(5, 4)


class TestJson:
    def test_discontinuity_survives(self):
        c = min_curve(make_leaky_bucket(1, 4), make_leaky_bucket(2, 1))
        back = curve_from_json(curve_to_json(c))
        assert back == c
        assert curve_to_json(make_leaky_bucket(1, 2))["jump0"] == "2"

    def test_missing_segments(self):
        with pytest.raises(InvalidParameter):
            curve_from_json({})


def random_rational(rng: random.Random, high: int = 20) -> Fraction:
    return Fraction(rng.randint(1, high * 4), 4)


def random_curve(rng: random.Random):
    kind = rng.randrange(3)
    if kind == 0:
        return make_leaky_bucket(random_rational(rng), random_rational(rng))
    if kind == 1:
        return make_rate_latency(random_rational(rng), random_rational(rng, 5))
    return min_curve(
        make_leaky_bucket(random_rational(rng), random_rational(rng)),
        make_leaky_bucket(random_rational(rng), random_rational(rng)),
    )


def sample_times(rng: random.Random, count: int = 20):
    return [Fraction(0)] + [Fraction(rng.randint(1, 2000), 100) for _ in range(count)]


class TestEngineProperties:
    @pytest.mark.parametrize("seed", range(200))
    def test_min_and_max_are_pointwise(self, seed):
        rng = random.Random(seed)
        a, b = random_curve(rng), random_curve(rng)
        low, high = min_curve(a, b), max_curve(a, b)
        for t in sample_times(rng):
            assert low(t) == min(a(t), b(t))
            assert high(t) == max(a(t), b(t))

    @pytest.mark.parametrize("seed", range(200))
    def test_convolution_commutes_and_associates(self, seed):
        rng = random.Random(seed)
        a, b, c = random_curve(rng), random_curve(rng), random_curve(rng)
        ab, ba = convolve(a, b), convolve(b, a)
        left, right = convolve(ab, c), convolve(a, convolve(b, c))
        for t in sample_times(rng):
            assert ab(t) == ba(t)
            assert left(t) == right(t)
            assert ab(t) <= a(t) + b(0)

    @pytest.mark.parametrize("seed", range(200))
    def test_pure_delay_adds_to_the_deviation(self, seed):
        rng = random.Random(seed)
        r, b = random_rational(rng), random_rational(rng)
        R, T = r + random_rational(rng), random_rational(rng, 5)
        D = random_rational(rng, 5)
        alpha, beta = make_leaky_bucket(r, b), make_rate_latency(R, T)
        base = horizontal_deviation(alpha, beta)
        assert base == T + b / R
        assert horizontal_deviation(alpha, convolve(make_delta(D), beta)) == D + base
