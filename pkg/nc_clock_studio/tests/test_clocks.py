import random
from fractions import Fraction

import pytest

from app.services.netcalc.clocks import (
    IDEAL,
    PRESETS,
    TAI,
    ClockEnvelope,
    ClockFunction,
    ClockSet,
    ClockSpec,
    clock_from_json,
    clock_to_json,
    compose,
    derive_envelope,
    envelope_from_json,
    envelope_lower,
    envelope_upper,
    identity,
    invert,
    linear,
    lower_envelope_curve,
    random_clock_function,
    upper_envelope_curve,
    validate_envelope,
)
from app.services.netcalc.errors import ClockMismatch, InvalidClock, InvalidParameter


class TestEnvelope:
    def test_presets(self):
        env = PRESETS["tsn-nonsync"]
        assert env.rho == Fraction("1.0002")
        assert env.eta == Fraction("4e-9")
        assert not env.synchronized
        assert PRESETS["tsn-tight-sync"].delta == Fraction("1e-6")
        assert PRESETS["ntp-loose-sync"].delta == Fraction("0.125")

    def test_rejects_rho_below_one(self):
        with pytest.raises(InvalidParameter):
            ClockEnvelope(Fraction(9, 10), 0)
        with pytest.raises(InvalidParameter):
            ClockEnvelope(1, -1)

    def test_derived_from_clock_specs(self):
        spec = ClockSpec(Fraction("1e-4"), Fraction(0), Fraction("2e-9"))
        env = derive_envelope([spec])
        assert env.rho == Fraction("1.0001") ** 2
        assert env.eta == Fraction("2e-9") * Fraction("1.0001") + Fraction("2e-9")

    def test_upper_and_lower_bounds(self):
        env = ClockEnvelope(2, 1)
        assert envelope_upper(env, 3) == 7
        assert envelope_lower(env, 3) == 1
        assert envelope_lower(env, Fraction(1, 2)) == 0
        sync = env.with_delta(Fraction(1, 2))
        assert envelope_upper(sync, 3) == 4
        assert envelope_lower(sync, 3) == 2

    def test_envelope_curves_match_scalar_bounds(self):
        env = ClockEnvelope(Fraction(3, 2), Fraction(1, 4), Fraction(1, 2))
        up, low = upper_envelope_curve(env), lower_envelope_curve(env)
        for tau in [Fraction(1, 3), 1, 2, Fraction(17, 4), 10]:
            assert up(tau) == envelope_upper(env, tau)
            assert low(tau) == envelope_lower(env, tau)

    def test_from_json(self):
        assert envelope_from_json("tsn-nonsync") == PRESETS["tsn-nonsync"]
        env = envelope_from_json({"rho": "7/6", "eta": "0", "delta": "1"})
        assert env == ClockEnvelope(Fraction(7, 6), 0, 1)
        with pytest.raises(InvalidParameter):
            envelope_from_json("no-such-preset")


class TestClockFunction:
    def test_evaluate_and_invert(self):
        d = linear(2, 1)
        assert d(3) == 7
        assert d.inverse()(7) == 3

    def test_piecewise(self):
        d = ClockFunction(((0, 0), (7, 6)), Fraction(1), Fraction(1))
        assert d(Fraction(7, 2)) == 3
        assert d(10) == 9
        assert d(-1) == -1
        assert d.slopes == [1, Fraction(6, 7), 1]

    def test_must_increase(self):
        with pytest.raises(InvalidClock):
            ClockFunction(((0, 0), (1, 0)))
        with pytest.raises(InvalidClock):
            linear(0)

    def test_compose(self):
        d = compose(linear(2, 0), linear(3, 1))
        assert d(1) == 8
        assert d.inverse()(8) == 1

    def test_compose_checks_tags(self):
        with pytest.raises(ClockMismatch):
            compose(linear(2, 0, "A", "B"), linear(3, 0, "C", "D"))

    def test_clock_set_relative(self):
        clocks = ClockSet()
        clocks.add("A", linear(2, 0))
        clocks.add("B", linear(3, 1))
        d = clocks.relative("A", "B")
        assert (d.source, d.target) == ("A", "B")
        assert d(4) == 7
        assert clocks.relative(TAI, "A")(5) == 10
        with pytest.raises(ClockMismatch):
            clocks.from_tai("C")

    def test_json_round_trip(self):
        d = ClockFunction(((0, 0), (7, 6)), Fraction(1), Fraction(1), TAI, "R")
        assert clock_from_json(clock_to_json(d)) == d

    def test_bad_json(self):
        with pytest.raises(InvalidClock):
            clock_from_json({"head_slope": "1"})


class TestValidateEnvelope:
    def test_drifting_clock_within_rho(self, tsn):
        assert validate_envelope(linear(tsn.rho), tsn).valid
        assert validate_envelope(identity(), tsn).valid

    def test_too_fast(self, tsn):
        report = validate_envelope(linear(tsn.rho ** 2), tsn)
        assert not report.valid
        assert report.violation.constraint == "upper"
        assert report.violation.observed > report.violation.bound

    def test_too_slow(self, tsn):
        report = validate_envelope(linear(1 / tsn.rho ** 2), tsn)
        assert not report.valid
        assert report.violation.constraint == "lower"

    def test_jump_within_eta(self):
        env = ClockEnvelope(1, Fraction(1, 10))
        small = ClockFunction(((0, 0), (Fraction(1, 100), Fraction(11, 100))), 1, 1)
        big = ClockFunction(((0, 0), (Fraction(1, 100), Fraction(21, 100))), 1, 1)
        assert validate_envelope(small, env).valid
        assert validate_envelope(big, env).violation.constraint == "upper"

    def test_time_error(self):
        env = PRESETS["tsn-tight-sync"]
        assert validate_envelope(linear(1, env.delta), env).valid
        report = validate_envelope(linear(1, 2 * env.delta), env)
        assert report.violation.constraint == "sync"

    def test_outer_slopes_hold_on_the_whole_line(self):
        report = validate_envelope(linear(4), ClockEnvelope(2, 10))
        assert not report.valid
        v = report.violation
        assert v.constraint == "upper"
        assert (v.s, v.t) == (-6, 0)
        assert v.observed == 24 and v.bound == 22
        assert validate_envelope(linear(4), ClockEnvelope(2, 10), (0, 5)).valid

    def test_fast_tail(self):
        report = validate_envelope(ClockFunction(((0, 0), (1, 1)), 1, 4), ClockEnvelope(2, 10))
        assert report.violation.constraint == "upper"
        assert (report.violation.s, report.violation.t) == (1, 7)

    def test_slow_head(self):
        report = validate_envelope(ClockFunction(((0, 0), (1, 1)), Fraction(1, 4), 1), ClockEnvelope(2, 10))
        v = report.violation
        assert v.constraint == "lower"
        assert (v.s, v.t) == (-21, 0)
        assert v.observed < v.bound

    def test_synchronized_tail_must_have_unit_slope(self):
        env = ClockEnvelope(Fraction(11, 10), Fraction(0), Fraction(1, 10))
        report = validate_envelope(ClockFunction(((0, 0),), 1, Fraction(11, 10)), env)
        assert report.violation.constraint == "sync"
        assert report.violation.t == 2
        assert report.violation.observed > env.delta

    def test_ideal(self):
        assert IDEAL.ideal
        assert not validate_envelope(linear(Fraction(10001, 10000)), IDEAL).valid

    def test_report_json(self, tsn):
        out = validate_envelope(linear(tsn.rho ** 2), tsn).to_json()
        assert out["valid"] is False
        assert out["violation"]["constraint"] == "upper"


class TestRandomClocks:
    @pytest.mark.parametrize("seed", range(10))
    def test_pairs_respect_envelope(self, seed):
        rng = random.Random(seed)
        env = ClockEnvelope(Fraction(11, 10), Fraction(1, 100))
        a = random_clock_function(rng, env, 20, tag="A")
        b = random_clock_function(rng, env, 20, tag="B")
        assert validate_envelope(a, env).valid
        assert validate_envelope(compose(b, a.inverse()), env).valid
        assert validate_envelope(invert(a), env).valid
        assert validate_envelope(invert(compose(b, a.inverse())), env).valid

    @pytest.mark.parametrize("seed", range(10))
    def test_synchronized_pairs_respect_envelope(self, seed):
        rng = random.Random(seed)
        env = ClockEnvelope(Fraction(11, 10), Fraction(0), Fraction(1, 10))
        a = random_clock_function(rng, env, 20, synchronized=True, tag="A")
        b = random_clock_function(rng, env, 20, synchronized=True, tag="B")
        rel = compose(b, a.inverse())
        assert validate_envelope(rel, env, (-5, 40)).valid
        assert validate_envelope(invert(rel), env, (-5, 40)).valid
        assert validate_envelope(invert(rel), env).valid

    def test_synchronized_needs_delta(self, tsn):
        with pytest.raises(InvalidParameter):
            random_clock_function(random.Random(0), tsn, 10, synchronized=True)
