import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sondesim.atmosphere import (
    AltitudeRangeError,
    WindField,
    isa_altitude_for_density,
    isa_sample,
    wind_at,
)

R_SPECIFIC = 287.053


def barometric_oracle(h):
    """Independent evaluation of the constant-lapse barometric law."""
    t = 288.15 - 0.0065 * h
    p = 101325.0 * (t / 288.15) ** (9.80665 / (287.053 * 0.0065))
    return p, t, p / (287.053 * t)


def test_sea_level_density():
    assert isa_sample(0.0).density == pytest.approx(1.225, abs=5e-4)


def test_tropopause_temperature():
    assert isa_sample(11000.0).temperature == pytest.approx(216.65, abs=1e-9)


def test_density_at_1682m_matches_hand_evaluation():
    # frozen from the independent oracle above
    assert barometric_oracle(1682.0)[2] == pytest.approx(1.0390642802495802, rel=1e-12)
    assert isa_sample(1682.0).density == pytest.approx(1.0391, abs=1e-4)


@pytest.mark.parametrize("altitude", [0.0, 137.0, 1682.0, 5000.0, 10999.0])
def test_profile_matches_oracle(altitude):
    sample = isa_sample(altitude)
    p, t, rho = barometric_oracle(altitude)
    assert sample.pressure == pytest.approx(p, rel=1e-12)
    assert sample.temperature == pytest.approx(t, rel=1e-12)
    assert sample.density == pytest.approx(rho, rel=1e-12)


@pytest.mark.parametrize("altitude", [-1.0, 11000.1, 2e4])
def test_out_of_range_altitude_rejected(altitude):
    with pytest.raises(AltitudeRangeError):
        isa_sample(altitude)


def test_ideal_gas_consistency_and_monotonicity():
    altitudes = np.linspace(0.0, 11000.0, 200)
    densities = []
    for h in altitudes:
        s = isa_sample(h)
        assert s.pressure > 0 and s.temperature > 0 and s.density > 0
        residual = abs(s.pressure - s.density * R_SPECIFIC * s.temperature) / s.pressure
        assert residual < 1e-6
        densities.append(s.density)
    assert np.all(np.diff(densities) < 0)


def test_inverse_at_sea_level():
    assert isa_altitude_for_density(1.225) == pytest.approx(0.0, abs=0.05)


def test_inverse_of_1682m_density():
    assert isa_altitude_for_density(1.0391) == pytest.approx(1682.0, abs=1.0)


@pytest.mark.parametrize("altitude", [500.0, 2500.0, 8000.0])
def test_density_round_trip(altitude):
    assert isa_altitude_for_density(isa_sample(altitude).density) == pytest.approx(
        altitude, abs=0.01
    )


@given(st.floats(min_value=0.0, max_value=11000.0))
@settings(max_examples=200)
def test_round_trip_anywhere(altitude):
    recovered = isa_altitude_for_density(isa_sample(altitude).density)
    assert math.isclose(recovered, altitude, abs_tol=0.01)


def test_inverse_rejects_out_of_range_density():
    with pytest.raises(AltitudeRangeError):
        isa_altitude_for_density(1.3)
    with pytest.raises(AltitudeRangeError):
        isa_altitude_for_density(0.30)


def test_inverse_consistency_tolerance():
    # forward density of the returned altitude matches the input to 1e-9 relative
    for rho in (1.22, 1.0391, 0.62, 0.37):
        h = isa_altitude_for_density(rho)
        assert isa_sample(h).density == pytest.approx(rho, rel=1e-9)


def test_zero_sigma_wind_is_mean_everywhere():
    field = WindField(seed=1, mean_wind=(5.0, 0.0, 0.0))
    for t, pos in [(0.0, (0, 0, 0)), (10.0, (100, -50, 2000)), (3600.0, (0, 0, 500))]:
        assert np.allclose(wind_at(field, pos, t), [5.0, 0.0, 0.0])


def test_wind_determinism():
    field = WindField(seed=7, mean_wind=(1.0, 2.0, 0.0), fluctuation_sigma=(1.0, 1.0, 0.5))
    queries = [(float(t), (t * 3.0, 0.0, 1500.0)) for t in range(50)]

    def realize():
        sampler = field.sampler(sonde_id=3)
        return np.array([sampler.wind_at(pos, t) for t, pos in queries])

    first, second = realize(), realize()
    assert np.array_equal(first, second)


def test_wind_sonde_streams_differ():
    field = WindField(seed=7, fluctuation_sigma=(1.0, 1.0, 1.0))
    a = field.sampler(0).wind_at((0, 0, 0), 10.0)
    b = field.sampler(1).wind_at((0, 0, 0), 10.0)
    assert not np.allclose(a, b)


def test_ou_autocorrelation_at_one_correlation_time():
    # lag-tau autocorrelation of an OU process is e^-1
    tau = 60.0
    dt = 6.0
    n = 100_000
    field = WindField(seed=11, fluctuation_sigma=(1.0, 0.0, 0.0), correlation_time=tau)
    sampler = field.sampler(0)
    xs = np.array([sampler.wind_at((0, 0, 0), i * dt)[0] for i in range(n)])
    lag = int(tau / dt)
    x0, x1 = xs[:-lag], xs[lag:]
    corr = np.mean((x0 - x0.mean()) * (x1 - x1.mean())) / (x0.std() * x1.std())
    assert corr == pytest.approx(math.exp(-1.0), abs=0.1)


def test_ou_stationary_variance():
    field = WindField(seed=23, fluctuation_sigma=(0.0, 1.5, 0.0), correlation_time=2.0)
    sampler = field.sampler(0)
    xs = np.array([sampler.wind_at((0, 0, 0), float(t)) for t in range(200_000)])
    assert xs[:, 1].var() == pytest.approx(1.5**2, rel=0.1)


def test_updraft_profile_interpolates():
    field = WindField(seed=1, updraft_profile=((1000.0, 0.0), (2000.0, 1.0)))
    assert wind_at(field, (0, 0, 1500.0), 0.0)[2] == pytest.approx(0.5)
    # clamps outside the table
    assert wind_at(field, (0, 0, 0.0), 0.0)[2] == pytest.approx(0.0)
    assert wind_at(field, (0, 0, 5000.0), 0.0)[2] == pytest.approx(1.0)
