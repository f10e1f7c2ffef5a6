"""Wire codec and star-network channel simulation.

Frame layout (64 bytes, little-endian, CRC-16/CCITT-FALSE over bytes 0..61):

    offset  field            type  scale / unit
    0       version          u8
    1       sonde_id         u8
    2       seq              u16
    4       tow_ms           u32   ms of GPS week
    8       lon              i32   1e-7 degree
    12      lat              i32   1e-7 degree
    16      alt              i32   mm
    20      vel_north        i32   mm/s
    24      vel_east         i32   mm/s
    28      vel_down         i32   mm/s
    32      pressure         u32   Pa
    36      temperature      i16   0.01 K, offset 223.15 K
    38      humidity         u16   0.01 %RH
    40      accel x,y,z      i16   mg
    46      mag x,y,z        i16   milligauss
    52      quat w,x,y,z     i16   2^-14
    60      reserved         u16   zero
    62      crc              u16

Reception is a log-distance probability model with a hard range cutoff plus
pure-ALOHA collisions: any temporal overlap of two in-range transmissions at a
station destroys both packets.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .flight import SensorSample

FRAME_FORMAT = "<BBHIiiiiiiIhHhhhhhhhhhhHH"
FRAME_SIZE = struct.calcsize(FRAME_FORMAT)
CRC_SPAN = FRAME_SIZE - 2
PROTOCOL_VERSION = 1

TEMPERATURE_OFFSET_K = 223.15
QUAT_SCALE = 2**14

MS_PER_WEEK = 7 * 24 * 3600 * 1000


class CodecError(ValueError):
    pass


class CrcError(CodecError):
    pass


def crc16_ccitt_false(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


_INT_RANGES = {
    "u8": (0, 0xFF),
    "u16": (0, 0xFFFF),
    "u32": (0, 0xFFFFFFFF),
    "i16": (-0x8000, 0x7FFF),
    "i32": (-0x80000000, 0x7FFFFFFF),
}


def _quantize(name: str, value: float, scale: float, kind: str, offset: float = 0.0) -> int:
    raw = round((value - offset) * scale)
    lo, hi = _INT_RANGES[kind]
    if not lo <= raw <= hi:
        raise CodecError(f"field {name!r} out of range: {value}")
    return raw


def encode(sample: SensorSample, seq: int) -> bytes:
    """Encode a sensor sample into one 64-byte frame."""
    if not 0 <= seq <= 0xFFFF:
        raise CodecError(f"field 'seq' out of range: {seq}")
    if not 0 <= sample.sonde_id <= 0xFF:
        raise CodecError(f"field 'sonde_id' out of range: {sample.sonde_id}")
    for name, component in zip("wxyz", sample.orientation):
        if not -1.0001 <= component <= 1.0001:
            raise CodecError(f"field 'quat_{name}' out of range: {component}")

    fields = (
        PROTOCOL_VERSION,
        sample.sonde_id,
        seq,
        _quantize("tow_ms", (sample.time * 1000.0) % MS_PER_WEEK, 1.0, "u32"),
        _quantize("lon", sample.lon, 1e7, "i32"),
        _quantize("lat", sample.lat, 1e7, "i32"),
        _quantize("altitude", sample.altitude, 1000.0, "i32"),
        _quantize("vel_north", sample.vel_north, 1000.0, "i32"),
        _quantize("vel_east", sample.vel_east, 1000.0, "i32"),
        _quantize("vel_down", sample.vel_down, 1000.0, "i32"),
        _quantize("pressure", sample.pressure, 1.0, "u32"),
        _quantize("temperature", sample.temperature, 100.0, "i16", offset=TEMPERATURE_OFFSET_K),
        _quantize("humidity", sample.humidity, 100.0, "u16"),
        *(_quantize(f"accel_{axis}", g, 1000.0, "i16") for axis, g in zip("xyz", sample.accel_body)),
        *(_quantize(f"mag_{axis}", g, 1000.0, "i16") for axis, g in zip("xyz", sample.mag_body)),
        *(
            _quantize(f"quat_{axis}", c, QUAT_SCALE, "i16")
            for axis, c in zip("wxyz", sample.orientation)
        ),
        0,  # reserved
        0,  # crc placeholder
    )
    frame = bytearray(struct.pack(FRAME_FORMAT, *fields))
    crc = crc16_ccitt_false(bytes(frame[:CRC_SPAN]))
    struct.pack_into("<H", frame, CRC_SPAN, crc)
    return bytes(frame)


def decode(frame: bytes) -> tuple[SensorSample, int, int]:
    """Decode one frame; returns (sample, sonde_id, seq).

    Raises CodecError on wrong length or unknown version, CrcError on a
    checksum mismatch.
    """
    if len(frame) != FRAME_SIZE:
        raise CodecError(f"frame must be {FRAME_SIZE} bytes, got {len(frame)}")
    fields = struct.unpack(FRAME_FORMAT, frame)
    (
        version,
        sonde_id,
        seq,
        tow_ms,
        lon,
        lat,
        alt,
        vel_n,
        vel_e,
        vel_d,
        pressure,
        temperature,
        humidity,
        ax,
        ay,
        az,
        mx,
        my,
        mz,
        qw,
        qx,
        qy,
        qz,
        _reserved,
        crc,
    ) = fields
    expected = crc16_ccitt_false(frame[:CRC_SPAN])
    if crc != expected:
        raise CrcError(f"CRC mismatch: frame has 0x{crc:04X}, computed 0x{expected:04X}")
    if version != PROTOCOL_VERSION:
        raise CodecError(f"unknown protocol version {version}")

    sample = SensorSample(
        sonde_id=sonde_id,
        time=tow_ms / 1000.0,
        pressure=float(pressure),
        temperature=temperature / 100.0 + TEMPERATURE_OFFSET_K,
        humidity=humidity / 100.0,
        lon=lon / 1e7,
        lat=lat / 1e7,
        altitude=alt / 1000.0,
        vel_north=vel_n / 1000.0,
        vel_east=vel_e / 1000.0,
        vel_down=vel_d / 1000.0,
        accel_body=(ax / 1000.0, ay / 1000.0, az / 1000.0),
        mag_body=(mx / 1000.0, my / 1000.0, mz / 1000.0),
        orientation=(qw / QUAT_SCALE, qx / QUAT_SCALE, qy / QUAT_SCALE, qz / QUAT_SCALE),
    )
    return sample, sonde_id, seq


def transmit_schedule(
    sonde_id: int,
    t0: float,
    horizon: float,
    rng: np.random.Generator,
    period_range: tuple[float, float] = (3.0, 4.0),
) -> np.ndarray:
    """Transmission times in [t0, t0 + horizon): first at t0, then gaps drawn
    uniformly from period_range."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    lo, hi = period_range
    if not 0 < lo <= hi:
        raise ValueError("period_range must satisfy 0 < lo <= hi")
    times = [t0]
    t = t0
    while True:
        t += rng.uniform(lo, hi) if hi > lo else lo
        if t >= t0 + horizon:
            break
        times.append(t)
    return np.asarray(times)


@dataclass(frozen=True)
class ChannelModel:
    """Log-distance reception probability with hard cutoff and ALOHA collisions."""

    seed: int = 0
    airtime_ms: float = 370.0
    period_range: tuple[float, float] = (3.0, 4.0)
    p0: float = 0.95  # reception probability at d0
    d0: float = 1000.0  # m
    path_exponent: float = 2.7
    max_range: float = 15000.0  # m

    def __post_init__(self):
        if not 0 <= self.p0 <= 1:
            raise ValueError("p0 must be in [0, 1]")
        if self.d0 <= 0 or self.max_range <= 0 or self.airtime_ms <= 0:
            raise ValueError("d0, max_range, airtime_ms must be > 0")

    @property
    def airtime(self) -> float:
        return self.airtime_ms / 1000.0

    def reception_probability(self, distance: float) -> float:
        """Non-increasing in distance; zero beyond max_range."""
        if distance < 0:
            raise ValueError("distance must be >= 0")
        if distance > self.max_range:
            return 0.0
        if distance == 0.0:
            return 1.0
        exponent = -self.path_exponent * math.log(10.0) / 10.0
        return min(max(self.p0 * (distance / self.d0) ** exponent, 0.0), 1.0)


@dataclass(frozen=True)
class TxEvent:
    """One scheduled transmission with the sonde position at transmit time."""

    sonde_id: int
    seq: int
    time: float  # s
    position: np.ndarray  # ENU m
    frame: bytes


OUTCOME_RECEIVED = "received"
OUTCOME_LOST_RANGE = "lost_range"
OUTCOME_LOST_COLLISION = "lost_collision"


@dataclass(frozen=True)
class ReceptionRecord:
    station_id: str
    rx_time: float
    outcome: str
    frame: bytes
    sonde_id: int
    seq: int


def propagate(
    event: TxEvent,
    station_id: str,
    station_position: np.ndarray,
    model: ChannelModel,
    concurrent: list[TxEvent],
    rng: np.random.Generator,
) -> ReceptionRecord:
    """Outcome of one transmission at one station.

    Precedence: beyond max_range the packet never arrives (lost_range); any
    temporal overlap with another in-range transmission destroys both
    (lost_collision, no capture); otherwise a Bernoulli draw against the
    log-distance probability decides reception.
    """
    distance = float(np.linalg.norm(np.asarray(event.position) - np.asarray(station_position)))
    rx_time = event.time + model.airtime
    draw = rng.random()  # always consume one draw per (event, station)

    if distance > model.max_range:
        outcome = OUTCOME_LOST_RANGE
    else:
        collision = any(
            other is not event
            and abs(other.time - event.time) < model.airtime
            and np.linalg.norm(np.asarray(other.position) - np.asarray(station_position))
            <= model.max_range
            for other in concurrent
        )
        if collision:
            outcome = OUTCOME_LOST_COLLISION
        elif draw < model.reception_probability(distance):
            outcome = OUTCOME_RECEIVED
        else:
            outcome = OUTCOME_LOST_RANGE
    return ReceptionRecord(
        station_id=station_id,
        rx_time=rx_time,
        outcome=outcome,
        frame=event.frame,
        sonde_id=event.sonde_id,
        seq=event.seq,
    )


def simulate_network(
    events: list[TxEvent],
    stations: list[tuple[str, np.ndarray]],
    model: ChannelModel,
    seed: int,
) -> dict[str, list[ReceptionRecord]]:
    """Evaluate every transmission at every station, deterministically.

    Stations share no state; each gets its own random stream keyed by
    (seed, station index).
    """
    ordered = sorted(events, key=lambda e: (e.time, e.sonde_id, e.seq))
    times = np.asarray([e.time for e in ordered])
    logs: dict[str, list[ReceptionRecord]] = {}
    for station_index, (station_id, station_position) in enumerate(stations):
        rng = np.random.default_rng([seed, 0x4C4F5241, station_index])
        records = []
        for i, event in enumerate(ordered):
            lo = int(np.searchsorted(times, event.time - model.airtime, side="left"))
            hi = int(np.searchsorted(times, event.time + model.airtime, side="right"))
            concurrent = ordered[lo:hi]
            records.append(
                propagate(event, station_id, station_position, model, concurrent, rng)
            )
        logs[station_id] = records
    return logs
