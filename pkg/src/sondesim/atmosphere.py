"""Standard-atmosphere vertical profile and a seeded synthetic wind field.

The troposphere model (0-11 km) supplies the ambient air density that the
isopycnic balloons equilibrate against.  Wind is mean flow plus per-axis
Ornstein-Uhlenbeck fluctuations, with an optional piecewise-linear updraft
profile for mountain-slope scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# ISA troposphere constants (ISO 2533)
SEA_LEVEL_TEMPERATURE_K = 288.15
SEA_LEVEL_PRESSURE_PA = 101325.0
LAPSE_RATE_K_PER_M = 0.0065
GRAVITY_ISA = 9.80665
R_SPECIFIC_AIR = 287.053  # J/kg/K

TROPOSPHERE_TOP_M = 11000.0

# p/p0 = (T/T0)^BAROMETRIC_EXPONENT in the constant-lapse layer
BAROMETRIC_EXPONENT = GRAVITY_ISA / (R_SPECIFIC_AIR * LAPSE_RATE_K_PER_M)

SEA_LEVEL_DENSITY = SEA_LEVEL_PRESSURE_PA / (R_SPECIFIC_AIR * SEA_LEVEL_TEMPERATURE_K)


class AltitudeRangeError(ValueError):
    """Query outside the modeled 0-11 km troposphere."""


@dataclass(frozen=True)
class AtmosphereSample:
    """Ambient state at one altitude."""

    altitude: float  # m above sea level
    pressure: float  # Pa
    temperature: float  # K
    density: float  # kg/m^3


def isa_sample(altitude: float) -> AtmosphereSample:
    """Standard-atmosphere pressure/temperature/density at `altitude` meters.

    Valid on [0, 11000] m; the stratosphere is deliberately not modeled and
    queries outside the range raise AltitudeRangeError.
    """
    if not 0.0 <= altitude <= TROPOSPHERE_TOP_M:
        raise AltitudeRangeError(
            f"altitude {altitude} m outside modeled troposphere [0, {TROPOSPHERE_TOP_M:.0f}] m"
        )
    temperature = SEA_LEVEL_TEMPERATURE_K - LAPSE_RATE_K_PER_M * altitude
    pressure = SEA_LEVEL_PRESSURE_PA * (temperature / SEA_LEVEL_TEMPERATURE_K) ** BAROMETRIC_EXPONENT
    density = pressure / (R_SPECIFIC_AIR * temperature)
    return AtmosphereSample(altitude, pressure, temperature, density)


def isa_altitude_for_density(density: float) -> float:
    """Altitude (m) whose standard-atmosphere density equals `density`.

    Closed-form inverse of the constant-lapse barometric law:
    rho/rho0 = (T/T0)^(exponent-1).
    """
    rho_top = isa_sample(TROPOSPHERE_TOP_M).density
    # the conventional sea-level figure 1.225 rounds up from the exact value;
    # accept it as the boundary and clamp the result at the surface
    if not rho_top <= density <= max(SEA_LEVEL_DENSITY, 1.225):
        raise AltitudeRangeError(
            f"density {density} kg/m^3 outside troposphere range "
            f"[{rho_top:.4f}, {SEA_LEVEL_DENSITY:.4f}]"
        )
    temperature = SEA_LEVEL_TEMPERATURE_K * (density / SEA_LEVEL_DENSITY) ** (
        1.0 / (BAROMETRIC_EXPONENT - 1.0)
    )
    return max(0.0, (SEA_LEVEL_TEMPERATURE_K - temperature) / LAPSE_RATE_K_PER_M)


@dataclass(frozen=True)
class WindField:
    """Mean wind plus seeded OU fluctuations, optionally with an updraft table.

    `updraft_profile` maps altitude (m) to vertical wind (m/s) and is
    interpolated piecewise-linearly; outside the table it clamps to the edge
    values.  Each sonde gets an independent fluctuation realization keyed by
    (seed, sonde_id), so parallel sonde simulation shares no mutable state.
    """

    seed: int
    mean_wind: tuple[float, float, float] = (0.0, 0.0, 0.0)
    fluctuation_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    correlation_time: float = 60.0
    updraft_profile: tuple[tuple[float, float], ...] = field(default=())

    def sampler(self, sonde_id: int = 0) -> "WindSampler":
        return WindSampler(self, sonde_id)

    def updraft_at(self, altitude: float) -> float:
        if not self.updraft_profile:
            return 0.0
        alts = np.asarray([p[0] for p in self.updraft_profile])
        vals = np.asarray([p[1] for p in self.updraft_profile])
        return float(np.interp(altitude, alts, vals))


class WindSampler:
    """Stateful per-sonde wind realization.

    Queries must advance in time; each call propagates the three OU components
    with the exact discrete transition, so the realization is bit-reproducible
    for the same (seed, sonde_id) and query sequence.
    """

    def __init__(self, wind: WindField, sonde_id: int):
        self.wind = wind
        self._rng = np.random.default_rng([wind.seed, 0x57494E44, sonde_id])
        sigma = np.asarray(wind.fluctuation_sigma, dtype=float)
        # stationary start
        self._state = sigma * self._rng.standard_normal(3)
        self._time = 0.0

    def wind_at(self, position, time: float) -> np.ndarray:
        """Wind vector (m/s, ENU) at `position` and `time` (s, non-decreasing).

        position[2] must be altitude above sea level; it feeds the updraft table.
        """
        if time < 0:
            raise ValueError("time must be >= 0")
        if time < self._time:
            raise ValueError("wind queries must not go backwards in time")
        dt = time - self._time
        if dt > 0.0:
            a = math.exp(-dt / self.wind.correlation_time)
            sigma = np.asarray(self.wind.fluctuation_sigma, dtype=float)
            innovation_sigma = sigma * math.sqrt(max(0.0, 1.0 - a * a))
            self._state = a * self._state + innovation_sigma * self._rng.standard_normal(3)
            self._time = time
        out = np.asarray(self.wind.mean_wind, dtype=float) + self._state
        out[2] += self.wind.updraft_at(float(position[2]))
        return out


def wind_at(field: WindField, position, time: float, sonde_id: int = 0) -> np.ndarray:
    """One-shot wind query; for time series, hold a `WindSampler` instead."""
    return field.sampler(sonde_id).wind_at(position, time)
