"""Ground segment: merge station logs, calibrate, resample, persist series.

Packets arriving via several stations are deduplicated by (sonde_id, seq).
Pre-launch calibration derives per-sonde additive temperature offsets from a
window of side-by-side readings against a reference sensor.  Irregular packet
times are linearly interpolated onto a fixed grid, leaving holes where the
data gap is too wide to interpolate honestly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .flight import SensorSample
from .telemetry import OUTCOME_RECEIVED, ReceptionRecord, decode


class CalibrationError(ValueError):
    pass


class ResampleError(ValueError):
    pass


class SeriesParseError(ValueError):
    def __init__(self, path, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


@dataclass(frozen=True)
class DecodedPacket:
    sonde_id: int
    seq: int
    rx_time: float
    sample: SensorSample
    frame: bytes


@dataclass
class DedupeResult:
    packets: list[DecodedPacket]
    anomalies: list[tuple[int, int]]  # (sonde_id, seq) with conflicting payloads


def dedupe(records: list[ReceptionRecord]) -> DedupeResult:
    """Unique packets by (sonde_id, seq), earliest reception wins.

    Records that did not decode as received are ignored.  Keys seen with two
    different CRC-valid payloads are kept (first wins) and flagged.
    """
    best: dict[tuple[int, int], ReceptionRecord] = {}
    conflicting: set[tuple[int, int]] = set()
    for record in records:
        if record.outcome != OUTCOME_RECEIVED:
            continue
        key = (record.sonde_id, record.seq)
        held = best.get(key)
        if held is None:
            best[key] = record
        else:
            if record.frame != held.frame:
                conflicting.add(key)
            if record.rx_time < held.rx_time:
                best[key] = record
    packets = []
    for key in sorted(best):
        record = best[key]
        sample, sonde_id, seq = decode(record.frame)
        packets.append(
            DecodedPacket(
                sonde_id=sonde_id,
                seq=seq,
                rx_time=record.rx_time,
                sample=sample,
                frame=record.frame,
            )
        )
    return DedupeResult(packets=packets, anomalies=sorted(conflicting))


@dataclass(frozen=True)
class CalibrationRecord:
    """Additive corrections to subtract from raw readings."""

    sonde_id: int
    temp_offset: float  # K
    rh_offset: float = 0.0  # %RH
    pressure_offset: float = 0.0  # Pa
    window: tuple[float, float] = (0.0, 0.0)


@dataclass
class PreLaunchComparison:
    records: dict[int, CalibrationRecord]
    dt_rel: dict[int, float]  # cluster mean minus sonde mean
    dt_abs: dict[int, float]  # sonde mean minus reference mean


MIN_CALIBRATION_OVERLAP = 60.0  # s


def pre_launch_offsets(
    cluster: dict[int, tuple[np.ndarray, np.ndarray]],
    reference: tuple[np.ndarray, np.ndarray],
    window: tuple[float, float],
) -> PreLaunchComparison:
    """Per-sonde calibration from a pre-launch comparison window.

    `cluster` maps sonde_id to (times, temperatures); `reference` is the
    unshielded reference sensor series.  Every sonde and the reference must
    cover at least 60 s inside the window.
    """
    t0, t1 = window
    if t1 <= t0:
        raise CalibrationError("calibration window is empty")

    def window_mean(times, values, label):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        mask = (times >= t0) & (times <= t1)
        if not mask.any():
            raise CalibrationError(f"{label}: no data inside calibration window")
        span = times[mask].max() - times[mask].min()
        if span < MIN_CALIBRATION_OVERLAP:
            raise CalibrationError(
                f"{label}: only {span:.1f} s of data in window, need >= {MIN_CALIBRATION_OVERLAP:.0f} s"
            )
        return float(values[mask].mean())

    ref_mean = window_mean(*reference, label="reference")
    sonde_means = {
        sonde_id: window_mean(times, temps, label=f"sonde {sonde_id}")
        for sonde_id, (times, temps) in cluster.items()
    }
    cluster_mean = float(np.mean(list(sonde_means.values())))

    records = {}
    dt_rel = {}
    dt_abs = {}
    for sonde_id, mean_i in sonde_means.items():
        dt_rel[sonde_id] = cluster_mean - mean_i
        dt_abs[sonde_id] = mean_i - ref_mean
        records[sonde_id] = CalibrationRecord(
            sonde_id=sonde_id, temp_offset=dt_abs[sonde_id], window=(t0, t1)
        )
    return PreLaunchComparison(records=records, dt_rel=dt_rel, dt_abs=dt_abs)


@dataclass
class ChannelSeries:
    """One quantity for one sonde on a strictly regular time grid.

    Missing grid points are NaN; they are never interpolated past the gap
    limit used at resampling time.
    """

    sonde_id: int
    quantity: str
    step: float
    start: float
    values: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values))

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)


def resample(
    times,
    values,
    step: float,
    max_gap: float = 3.0,
    sonde_id: int = 0,
    quantity: str = "value",
) -> ChannelSeries:
    """Linear interpolation onto a regular grid of spacing `step`.

    Grid points farther than max_gap * step from every source point become
    NaN.  Timestamps must be strictly increasing with at least two points.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise ResampleError("need at least 2 source points")
    if not np.all(np.diff(times) > 0):
        raise ResampleError("timestamps must be strictly increasing")
    if step <= 0:
        raise ResampleError("step must be > 0")

    start = math.ceil(times[0] / step) * step
    stop = math.floor(times[-1] / step) * step
    if stop < start:
        raise ResampleError("grid is empty: source span shorter than one step")
    n = int(round((stop - start) / step)) + 1
    grid = start + step * np.arange(n)

    resampled = np.interp(grid, times, values)
    # distance from each grid point to its nearest source sample
    idx = np.searchsorted(times, grid)
    left = times[np.clip(idx - 1, 0, times.size - 1)]
    right = times[np.clip(idx, 0, times.size - 1)]
    nearest = np.minimum(np.abs(grid - left), np.abs(right - grid))
    resampled[nearest > max_gap * step] = np.nan
    return ChannelSeries(sonde_id=sonde_id, quantity=quantity, step=step, start=start, values=resampled)


def quantize_offset(offset: float, scale: float = 100.0) -> float:
    """Snap a correction to the wire resolution (1/scale units)."""
    return round(offset * scale) / scale


def apply_calibration(values, offset: float, scale: float = 100.0, origin: float = 0.0):
    """Subtract an additive offset from raw decoded readings.

    Decoded wire values are exact grid points n/scale + origin; the
    subtraction runs on the integer grid so `remove_calibration` restores the
    raw floats bit-exactly (plain float subtract/add loses the last bit when
    readings cross a power-of-two boundary).
    """
    raw = np.asarray(values, dtype=float)
    ticks = np.round((raw - origin) * scale)
    m = round(offset * scale)
    out = np.full(raw.shape, np.nan)
    ok = np.isfinite(raw)
    out[ok] = (ticks[ok] - m) / scale + origin
    return out


def remove_calibration(values, offset: float, scale: float = 100.0, origin: float = 0.0):
    """Exact inverse of `apply_calibration` for the same offset/grid."""
    calibrated = np.asarray(values, dtype=float)
    ticks = np.round((calibrated - origin) * scale)
    m = round(offset * scale)
    out = np.full(calibrated.shape, np.nan)
    ok = np.isfinite(calibrated)
    out[ok] = (ticks[ok] + m) / scale + origin
    return out


def persist(series: ChannelSeries, path) -> None:
    """Write `time_s,<quantity>` CSV with empty cells for missing values."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time_s", series.quantity])
        for t, v in zip(series.times, series.values):
            writer.writerow([repr(float(t)), "" if math.isnan(v) else repr(float(v))])


def load(path, sonde_id: int = 0) -> ChannelSeries:
    """Read a series CSV back; exact inverse of `persist`."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesParseError(path, 1, "missing header") from None
        if len(header) != 2 or header[0] != "time_s":
            raise SeriesParseError(path, 1, f"unexpected header {header!r}")
        quantity = header[1]
        times = []
        values = []
        for line_number, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SeriesParseError(path, line_number, f"expected 2 columns, got {len(row)}")
            try:
                times.append(float(row[0]))
            except ValueError:
                raise SeriesParseError(path, line_number, f"bad time {row[0]!r}") from None
            if row[1] == "":
                values.append(math.nan)
            else:
                try:
                    values.append(float(row[1]))
                except ValueError:
                    raise SeriesParseError(path, line_number, f"bad value {row[1]!r}") from None

    if not times:
        return ChannelSeries(sonde_id=sonde_id, quantity=quantity, step=1.0, start=0.0, values=np.empty(0))
    if len(times) == 1:
        return ChannelSeries(
            sonde_id=sonde_id, quantity=quantity, step=1.0, start=times[0], values=np.asarray(values)
        )
    step = times[1] - times[0]
    if step <= 0:
        raise SeriesParseError(path, 3, "time grid must be increasing")
    for line_number, t in enumerate(times, start=2):
        expected = times[0] + step * (line_number - 2)
        if abs(t - expected) > 1e-9 * max(1.0, abs(step)):
            raise SeriesParseError(path, line_number, f"irregular grid: {t} != {expected}")
    return ChannelSeries(
        sonde_id=sonde_id,
        quantity=quantity,
        step=step,
        start=times[0],
        values=np.asarray(values, dtype=float),
    )
