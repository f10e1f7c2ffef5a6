"""Cluster flight simulation: buoyant truth dynamics and noisy sensor readings.

Each sonde is a near-passive tracer: horizontal velocity relaxes to the wind
with a short time constant, vertical motion follows buoyancy against the
standard-atmosphere density profile with quadratic drag, so the balloon rises
to its neutral-buoyancy altitude and floats there.  `observe` turns the truth
state plus synthetic ambient fields into instrument readings with bias,
warm-up transient, solar-radiation offset, altitude-dependent drift, humidity
compression, and GNSS noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geo
from .atmosphere import (
    TROPOSPHERE_TOP_M,
    WindField,
    WindSampler,
    isa_sample,
)
from .balloon import BalloonSpec, balloon_mass
from .fusion import IDENTITY_QUATERNION, quat_conjugate, quat_rotate

GRAVITY = 9.81  # m/s^2

# Earth magnetic field in the local frame (gauss); x is magnetic north by the
# AHRS convention, z up.  Mid-latitude magnitude/inclination.
EARTH_MAG_LOCAL = np.array([0.22, 0.0, -0.40])

DRAG_COEFFICIENT_SPHERE = 0.47


@dataclass
class SondeTruthState:
    """Ground-truth kinematic state of one sonde."""

    sonde_id: int
    time: float  # s since launch
    position: np.ndarray  # ENU meters from launch origin
    anchor: tuple[float, float, float]  # launch (lon deg, lat deg, alt m)
    velocity: np.ndarray  # ENU m/s
    orientation: np.ndarray = field(default_factory=lambda: IDENTITY_QUATERNION.copy())

    @property
    def altitude(self) -> float:
        return self.anchor[2] + float(self.position[2])

    @property
    def geodetic(self) -> tuple[float, float, float]:
        return geo.enu_to_geodetic(
            self.anchor, float(self.position[0]), float(self.position[1]), float(self.position[2])
        )


@dataclass(frozen=True)
class SensorErrorModel:
    """Per-sonde instrument error characteristics."""

    temp_bias: float = 0.0  # K, steady bias vs an unshielded reference
    temp_noise_sigma: float = 0.1  # K
    radiation_offset: float = 1.28  # K added while sun-exposed
    drift_threshold_altitude: float = 3000.0  # m
    drift_rate: float = 0.0  # K per m above the threshold
    rh_gain: float = 1.0  # <1 compresses readings toward rh_pivot
    rh_pivot: float = 50.0  # %RH
    pressure_noise_sigma: float = 10.0  # Pa
    gnss_horizontal_sigma: float = 3.5  # m per horizontal axis
    gnss_vertical_sigma: float = 7.0  # m
    gnss_speed_sigma: float = 0.4  # m/s per axis
    accel_bias: float = 0.0  # mg, applied to each body axis
    warmup_tau: float = 120.0  # s

    def __post_init__(self):
        if min(
            self.temp_noise_sigma,
            self.pressure_noise_sigma,
            self.gnss_horizontal_sigma,
            self.gnss_vertical_sigma,
            self.gnss_speed_sigma,
        ) < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0 < self.rh_gain <= 1:
            raise ValueError("rh_gain must be in (0, 1]")

    @classmethod
    def exact(cls) -> "SensorErrorModel":
        """All error sources zeroed: observe() reproduces truth."""
        return cls(
            temp_noise_sigma=0.0,
            radiation_offset=0.0,
            pressure_noise_sigma=0.0,
            gnss_horizontal_sigma=0.0,
            gnss_vertical_sigma=0.0,
            gnss_speed_sigma=0.0,
        )


@dataclass(frozen=True)
class SensorSample:
    """One instrument reading set, as it will go over the air."""

    sonde_id: int
    time: float  # s
    pressure: float  # Pa
    temperature: float  # K
    humidity: float  # %RH in [0, 100]
    lon: float  # degrees
    lat: float  # degrees
    altitude: float  # m
    vel_north: float  # m/s
    vel_east: float  # m/s
    vel_down: float  # m/s
    accel_body: tuple[float, float, float]  # g units
    mag_body: tuple[float, float, float]  # gauss
    orientation: tuple[float, float, float, float]  # quaternion w,x,y,z


def step_truth(
    state: SondeTruthState,
    wind: WindSampler,
    balloon: BalloonSpec,
    dt: float,
    drag_coefficient: float = DRAG_COEFFICIENT_SPHERE,
    horizontal_tau: float = 2.0,
) -> SondeTruthState:
    """Advance the truth state by dt seconds (semi-implicit Euler).

    Horizontal velocity relaxes exponentially to the wind; vertical velocity
    integrates buoyancy minus quadratic drag on the air-relative speed.
    """
    if not 0 < dt <= 5.0:
        raise ValueError("dt must be in (0, 5] s")
    w = wind.wind_at(
        (state.position[0], state.position[1], state.altitude), state.time + dt
    )

    decay = math.exp(-dt / horizontal_tau)
    velocity = state.velocity.copy()
    velocity[0] = w[0] + (velocity[0] - w[0]) * decay
    velocity[1] = w[1] + (velocity[1] - w[1]) * decay

    total_mass = balloon.payload_mass + balloon_mass(balloon)
    altitude = min(max(state.altitude, 0.0), TROPOSPHERE_TOP_M)
    rho = isa_sample(altitude).density
    lift_mass = rho * balloon.volume * balloon.buoyancy_factor
    buoyancy_accel = GRAVITY * (lift_mass - total_mass) / total_mass
    cross_section = math.pi * balloon.radius**2
    drag_rate = 0.5 * rho * drag_coefficient * cross_section / total_mass
    # quadratic drag handled implicitly (linearized around the current
    # air-relative speed): unconditionally stable for any tick and exact at
    # the terminal-velocity balance
    relative_w = velocity[2] - w[2]
    relative_w = (relative_w + buoyancy_accel * dt) / (
        1.0 + drag_rate * abs(relative_w) * dt
    )
    velocity[2] = w[2] + relative_w

    position = state.position + velocity * dt
    return replace(state, time=state.time + dt, position=position, velocity=velocity)


@dataclass(frozen=True)
class AmbientFields:
    """Synthetic environment the sensors sample: ISA pressure/temperature plus
    seeded OU fluctuations, and a user-specified humidity profile."""

    seed: int
    rh_profile: tuple[tuple[float, float], ...] = ((0.0, 60.0), (11000.0, 60.0))
    rh_sigma: float = 0.0  # %RH fluctuation scale
    temp_sigma: float = 0.0  # K fluctuation scale
    correlation_time: float = 120.0  # s

    def sampler(self, sonde_id: int) -> "AmbientSampler":
        return AmbientSampler(self, sonde_id)

    def rh_at(self, altitude: float) -> float:
        alts = np.asarray([p[0] for p in self.rh_profile])
        vals = np.asarray([p[1] for p in self.rh_profile])
        return float(np.interp(altitude, alts, vals))


class AmbientSampler:
    """Per-sonde ambient realization; queries must advance in time."""

    def __init__(self, fields: AmbientFields, sonde_id: int):
        self.fields = fields
        self._rng = np.random.default_rng([fields.seed, 0x414D4249, sonde_id])
        self._state = np.array([fields.temp_sigma, fields.rh_sigma]) * self._rng.standard_normal(2)
        self._time = 0.0

    def at(self, altitude: float, time: float) -> tuple[float, float, float]:
        """(pressure Pa, temperature K, humidity %RH) at altitude and time."""
        if time < self._time:
            raise ValueError("ambient queries must not go backwards in time")
        dt = time - self._time
        if dt > 0.0:
            a = math.exp(-dt / self.fields.correlation_time)
            sigma = np.array([self.fields.temp_sigma, self.fields.rh_sigma])
            innovation = sigma * math.sqrt(max(0.0, 1.0 - a * a))
            self._state = a * self._state + innovation * self._rng.standard_normal(2)
            self._time = time
        clamped = min(max(altitude, 0.0), TROPOSPHERE_TOP_M)
        base = isa_sample(clamped)
        humidity = min(max(self.fields.rh_at(clamped) + self._state[1], 0.0), 100.0)
        return base.pressure, base.temperature + self._state[0], humidity


def observe(
    state: SondeTruthState,
    ambient: tuple[float, float, float],
    err: SensorErrorModel,
    elapsed_since_poweron: float,
    rng: np.random.Generator,
    sun_exposed: bool = True,
    accel_local=None,
) -> SensorSample:
    """Instrument readings for one truth state against ambient (p, T, rh).

    The warm-up transient doubles the steady temperature bias at power-on and
    decays toward it with time constant warmup_tau.
    """
    if elapsed_since_poweron < 0:
        raise ValueError("elapsed_since_poweron must be >= 0")
    pressure_true, temp_true, rh_true = ambient

    bias = err.temp_bias
    if err.warmup_tau > 0:
        bias = err.temp_bias * (1.0 + math.exp(-elapsed_since_poweron / err.warmup_tau))
    temperature = temp_true + bias
    if sun_exposed:
        temperature += err.radiation_offset
    if state.altitude > err.drift_threshold_altitude:
        temperature += err.drift_rate * (state.altitude - err.drift_threshold_altitude)
    if err.temp_noise_sigma > 0:
        temperature += rng.normal(0.0, err.temp_noise_sigma)

    humidity = err.rh_pivot + err.rh_gain * (rh_true - err.rh_pivot)
    humidity = min(max(humidity, 0.0), 100.0)

    pressure = pressure_true
    if err.pressure_noise_sigma > 0:
        pressure += rng.normal(0.0, err.pressure_noise_sigma)

    east = float(state.position[0])
    north = float(state.position[1])
    up = float(state.position[2])
    if err.gnss_horizontal_sigma > 0:
        east += rng.normal(0.0, err.gnss_horizontal_sigma)
        north += rng.normal(0.0, err.gnss_horizontal_sigma)
    if err.gnss_vertical_sigma > 0:
        up += rng.normal(0.0, err.gnss_vertical_sigma)
    lon, lat, alt = geo.enu_to_geodetic(state.anchor, east, north, up)

    vel = state.velocity.copy()
    if err.gnss_speed_sigma > 0:
        vel = vel + rng.normal(0.0, err.gnss_speed_sigma, size=3)

    if accel_local is None:
        accel_local = np.zeros(3)
    specific_force_local = np.asarray(accel_local, dtype=float) + np.array([0.0, 0.0, GRAVITY])
    body = quat_rotate(quat_conjugate(np.asarray(state.orientation)), specific_force_local)
    accel_body = body / GRAVITY + err.accel_bias * 1e-3
    mag_body = quat_rotate(quat_conjugate(np.asarray(state.orientation)), EARTH_MAG_LOCAL)

    return SensorSample(
        sonde_id=state.sonde_id,
        time=state.time,
        pressure=float(pressure),
        temperature=float(temperature),
        humidity=float(humidity),
        lon=lon,
        lat=lat,
        altitude=alt,
        vel_north=float(vel[1]),
        vel_east=float(vel[0]),
        vel_down=float(-vel[2]),
        accel_body=tuple(float(c) for c in accel_body),
        mag_body=tuple(float(c) for c in mag_body),
        orientation=tuple(float(c) for c in state.orientation),
    )


@dataclass
class SondeTrack:
    """Truth history and the sensor samples taken along it."""

    sonde_id: int
    times: np.ndarray
    position: np.ndarray  # (n, 3) ENU
    velocity: np.ndarray  # (n, 3) ENU
    ambient_pressure: np.ndarray
    ambient_temperature: np.ndarray
    ambient_humidity: np.ndarray
    samples: list[SensorSample]
    anchor: tuple[float, float, float]

    @property
    def altitude(self) -> np.ndarray:
        return self.anchor[2] + self.position[:, 2]


def simulate_cluster(
    n_sondes: int,
    duration: float,
    tick: float,
    launch: tuple[float, float, float],
    balloon: BalloonSpec,
    wind_field: WindField,
    ambient_fields: AmbientFields,
    error_models: list[SensorErrorModel],
    seed: int,
    hold_duration: float = 0.0,
    poweron_lead: float = 600.0,
    sun_exposed: bool = True,
) -> list[SondeTrack]:
    """Run the full cluster for `duration` seconds at `tick` resolution.

    During the first `hold_duration` seconds the sondes are tethered at the
    launch point (pre-launch check phase); afterwards they fly freely.
    Sensors are sampled every tick.  Everything is reproducible from `seed`.
    """
    if len(error_models) != n_sondes:
        raise ValueError("need one SensorErrorModel per sonde")
    n_steps = int(round(duration / tick))
    tracks = []
    for sonde_id in range(n_sondes):
        wind = wind_field.sampler(sonde_id)
        ambient = ambient_fields.sampler(sonde_id)
        sensor_rng = np.random.default_rng([seed, 0x4F425345, sonde_id])
        err = error_models[sonde_id]

        state = SondeTruthState(
            sonde_id=sonde_id,
            time=0.0,
            position=np.zeros(3),
            anchor=launch,
            velocity=np.zeros(3),
        )
        times = np.empty(n_steps + 1)
        positions = np.empty((n_steps + 1, 3))
        velocities = np.empty((n_steps + 1, 3))
        amb_p = np.empty(n_steps + 1)
        amb_t = np.empty(n_steps + 1)
        amb_rh = np.empty(n_steps + 1)
        samples = []

        prev_velocity = state.velocity.copy()
        for step in range(n_steps + 1):
            if step > 0:
                if state.time < hold_duration:
                    # tethered: clock advances, kinematics pinned
                    state = replace(state, time=state.time + tick)
                else:
                    state = step_truth(state, wind, balloon, tick)
            ambient_now = ambient.at(state.altitude, state.time)
            times[step] = state.time
            positions[step] = state.position
            velocities[step] = state.velocity
            amb_p[step], amb_t[step], amb_rh[step] = ambient_now
            accel_local = (state.velocity - prev_velocity) / tick if step > 0 else np.zeros(3)
            prev_velocity = state.velocity.copy()
            samples.append(
                observe(
                    state,
                    ambient_now,
                    err,
                    elapsed_since_poweron=poweron_lead + state.time,
                    rng=sensor_rng,
                    sun_exposed=sun_exposed,
                    accel_local=accel_local,
                )
            )
        tracks.append(
            SondeTrack(
                sonde_id=sonde_id,
                times=times,
                position=positions,
                velocity=velocities,
                ambient_pressure=amb_p,
                ambient_temperature=amb_t,
                ambient_humidity=amb_rh,
                samples=samples,
                anchor=launch,
            )
        )
    return tracks
