import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_KINDS, BOUNDED
from nlconsensus.transmit import (
    TransmitFunction,
    db_to_linear,
    derivative,
    derivative_check,
    evaluate,
    linear_to_db,
    parse_designator,
    transmit_power,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
kinds = st.sampled_from(["tanh", "arctan", "gudermannian", "algebraic_sigmoid"])
omegas = st.floats(1e-3, 10.0)
rhos = st.floats(0.1, 100.0)


def test_db_conversion():
    assert db_to_linear(10.0) == 10.0
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(7.5) == pytest.approx(5.623413251903491, rel=1e-15)
    assert linear_to_db(db_to_linear(2.5)) == pytest.approx(2.5, rel=1e-14)


class TestEvaluate:
    def test_zero(self):
        for f in BOUNDED:
            assert evaluate(f, 0.0) == 0.0

    def test_tanh_asymptote(self):
        f = parse_designator("tanh:0.05:10")
        assert f.evaluate(1e4) == pytest.approx(math.sqrt(10), rel=1e-15)
        assert f.transmit_power(1e4) == pytest.approx(10.0, rel=1e-14)

    def test_linear_identity(self):
        assert evaluate(TransmitFunction("linear"), 7.3) == 7.3

    def test_gudermannian_matches_sinh_form(self):
        f = TransmitFunction("gudermannian", 0.3, 2.0)
        x = np.linspace(-20, 20, 401)
        ref = math.sqrt(2.0) * (2 / math.pi) * np.arctan(np.sinh(math.pi / 2 * 0.3 * x))
        np.testing.assert_allclose(f.evaluate(x), ref, rtol=1e-13, atol=1e-15)

    def test_gudermannian_no_overflow(self):
        f = TransmitFunction("gudermannian", 1.0, 1.0)
        assert f.evaluate(1e6) == pytest.approx(1.0)

    def test_arctan_literal_amplitude(self):
        f = TransmitFunction("arctan", 1.0, 4.0)
        assert f.amplitude == pytest.approx(math.pi)
        assert f.evaluate(1e12) == pytest.approx(math.pi, rel=1e-9)
        g = TransmitFunction("arctan", 1.0, 4.0, normalized=True)
        assert g.evaluate(1e12) == pytest.approx(2.0, rel=1e-9)
        assert f.power_cap == pytest.approx(4.0 * math.pi**2 / 4)
        assert g.power_cap == 4.0

    def test_algebraic_sigmoid_power_below_one(self):
        f = TransmitFunction("algebraic_sigmoid", 1.0, 1.0)
        p = f.transmit_power(np.linspace(-1e3, 1e3, 2001))
        assert np.all((p >= 0) & (p < 1))

    def test_vectorized(self):
        f = BOUNDED[0]
        x = np.arange(6.0).reshape(2, 3)
        assert f.evaluate(x).shape == (2, 3)
        assert transmit_power(f, x).shape == (2, 3)


class TestDerivative:
    def test_origin_slopes(self):
        assert derivative(parse_designator("tanh:0.05:10"), 0.0) == pytest.approx(math.sqrt(10) * 0.05)
        assert parse_designator("gudermannian:0.05:10").c == pytest.approx(math.sqrt(10) * 0.05)
        assert parse_designator("algebraic_sigmoid:0.006:0").c == pytest.approx(0.006, rel=1e-15)
        assert TransmitFunction("linear").c == 1.0

    def test_derivative_check_tanh(self):
        grid = np.linspace(-100, 100, 2001)
        assert derivative_check(TransmitFunction("tanh", 1.0, 1.0), grid, 1e-5) <= 1e-6

    def test_derivative_check_linear(self):
        assert derivative_check(TransmitFunction("linear"), np.linspace(-50, 50, 101)) <= 1e-12

    def test_derivative_check_arctan_near_zero(self):
        grid = np.linspace(-1e-3, 1e-3, 2001)
        assert derivative_check(TransmitFunction("arctan", 1.0, 1.0), grid) <= 1e-6

    @pytest.mark.parametrize("f", ALL_KINDS, ids=lambda f: f.designator())
    def test_derivative_check_catalog(self, f):
        assert derivative_check(f, np.linspace(-200, 200, 4001)) <= 1e-6

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            derivative_check(BOUNDED[0], [0.0], h_step=0.0)


@given(kinds, omegas, rhos, st.data())
@settings(max_examples=200, deadline=None)
def test_strictly_increasing(kind, omega, rho, data):
    f = TransmitFunction(kind, omega, rho)
    u = data.draw(st.floats(-5.0, 5.0))
    du = data.draw(st.floats(1e-6, 10.0))
    x = u / omega
    assert f.evaluate(x) < f.evaluate(x + du / omega)
    assert f.derivative(x) > 0


@given(kinds, omegas, rhos, finite, finite)
@settings(max_examples=200, deadline=None)
def test_never_decreasing(kind, omega, rho, x, y):
    f = TransmitFunction(kind, omega, rho)
    lo, hi = min(x, y), max(x, y)
    assert f.evaluate(lo) <= f.evaluate(hi)


def test_monotone_random_pairs(rng):
    for f in ALL_KINDS:
        x = rng.uniform(-40, 40, 10_000)
        y = x + rng.uniform(1e-3, 10, 10_000)
        assert np.all(f.evaluate(x) < f.evaluate(y))


@given(kinds, omegas, rhos, finite)
@settings(max_examples=300, deadline=None)
def test_odd(kind, omega, rho, x):
    f = TransmitFunction(kind, omega, rho)
    assert abs(f.evaluate(-x) + f.evaluate(x)) <= 1e-12


@given(kinds, omegas, rhos, finite)
@settings(max_examples=300, deadline=None)
def test_bounded_by_amplitude(kind, omega, rho, x):
    f = TransmitFunction(kind, omega, rho)
    assert abs(f.evaluate(x)) <= f.amplitude * (1 + 1e-15)
    assert f.transmit_power(x) <= f.power_cap * (1 + 1e-15)


@given(kinds, omegas, rhos, finite)
@settings(max_examples=300, deadline=None)
def test_slope_peaks_at_origin(kind, omega, rho, x):
    f = TransmitFunction(kind, omega, rho)
    d = f.derivative(x)
    assert 0 <= d <= f.c + 1e-12


class TestDesignator:
    def test_parse(self):
        f = parse_designator("tanh:0.05:10")
        assert (f.kind, f.omega, f.rho) == ("tanh", 0.05, 10.0)

    def test_normalized_flag(self):
        assert parse_designator("arctan:0.04:5:normalized").normalized

    @pytest.mark.parametrize("f", ALL_KINDS, ids=lambda f: f.designator())
    def test_round_trip(self, f):
        g = parse_designator(f.designator())
        assert g.kind == f.kind and g.normalized == f.normalized
        assert g.omega == f.omega and g.rho == pytest.approx(f.rho, rel=1e-14)

    @pytest.mark.parametrize("text", [
        "tanh", "tanh:1", "sine:1:0", "tanh:x:0", "linear:1:0", "tanh:1:0:normalized",
        "arctan:1:0:scaled", "tanh:-1:0",
    ])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            parse_designator(text)
