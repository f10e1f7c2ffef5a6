"""Statistics over ingested series: comparison metrics, drift fits, spectra,
stability profiles, stereo cross-checks, and neighbor-count dispersion graphs.

The neighbor graph generalizes pair-separation statistics to any relative
quantity: for each sonde, histogram its N-1 separations (or absolute reading
differences) into bins of width h, then average the histograms over sondes.
Summed over bins this always equals N-1, which the integer-count
representation preserves exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geo

GRAVITY = 9.81  # m/s^2
BV_REFERENCE_TEMPERATURE = 281.0  # K
BV_BIN_WIDTH = 25.0  # m

# bin widths for the relative-measurement neighbor graphs
DEFAULT_NEIGHBOR_BIN_WIDTHS = {
    "distance": 100.0,  # m
    "temperature": 1.0,  # K
    "humidity": 2.0,  # %RH
    "wind_speed": 0.75,  # m/s
}

QGRAPH_CADENCE = 10.0  # s between snapshots
QGRAPH_AVERAGE_WINDOW = 60.0  # s of snapshots averaged per output graph


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# comparison metrics


@dataclass(frozen=True)
class AltitudeBinRow:
    bin_lo: float
    bin_hi: float
    mean_diff: float
    norm_mean_diff: float  # relative to the reference reading
    ref_min: float
    ref_max: float
    count: int


@dataclass
class ComparisonStats:
    rmse: float
    mbe: float
    n: int
    bins: list[AltitudeBinRow] = field(default_factory=list)


def rmse_mbe(a, b) -> ComparisonStats:
    """Root-mean-square and mean-bias error of aligned series a vs b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise AnalysisError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 1:
        raise AnalysisError("need at least one sample")
    diff = a - b
    return ComparisonStats(
        rmse=float(np.sqrt(np.mean(diff**2))), mbe=float(np.mean(diff)), n=int(a.size)
    )


def binned_temp_comparison(
    altitude, temperature, reference, bin_width: float = 400.0
) -> ComparisonStats:
    """Per-altitude-bin mean and normalized mean differences vs a reference.

    Inputs are aligned samples; reference temperatures are kelvin.  Empty bins
    are simply absent from the table.
    """
    altitude = np.asarray(altitude, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if not altitude.shape == temperature.shape == reference.shape:
        raise AnalysisError("altitude, temperature, reference must be aligned")
    overall = rmse_mbe(temperature, reference)

    indices = np.floor(altitude / bin_width).astype(int)
    rows = []
    for index in sorted(set(indices.tolist())):
        mask = indices == index
        diff = temperature[mask] - reference[mask]
        ref = reference[mask]
        rows.append(
            AltitudeBinRow(
                bin_lo=index * bin_width,
                bin_hi=(index + 1) * bin_width,
                mean_diff=float(diff.mean()),
                norm_mean_diff=float((diff / ref).mean()),
                ref_min=float(ref.min()),
                ref_max=float(ref.max()),
                count=int(mask.sum()),
            )
        )
    overall.bins = rows
    return overall


@dataclass(frozen=True)
class DriftFit:
    slope: float  # K per m above the threshold
    intercept: float  # K at the threshold
    threshold: float
    n_points: int


def fit_linear_drift(altitude, diff, threshold: float, min_points: int = 10) -> DriftFit:
    """Least-squares line through (altitude, diff) points above `threshold`."""
    altitude = np.asarray(altitude, dtype=float)
    diff = np.asarray(diff, dtype=float)
    mask = altitude > threshold
    if mask.sum() < min_points:
        raise AnalysisError(
            f"only {int(mask.sum())} points above {threshold} m, need >= {min_points}"
        )
    slope, intercept = np.polyfit(altitude[mask] - threshold, diff[mask], 1)
    return DriftFit(
        slope=float(slope), intercept=float(intercept), threshold=threshold, n_points=int(mask.sum())
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided periodogram normalized so the powers sum to the (windowed,
    detrended) signal variance."""

    frequencies: np.ndarray
    power: np.ndarray
    step: float
    window: str

    @property
    def f_max(self) -> float:
        return float(self.frequencies[-1])


def power_spectrum(
    values, step: float, detrend: bool = False, window: str = "rect"
) -> PowerSpectrum:
    """Periodogram of a regular series; frequencies run 1/(L*step) .. 1/(2*step).

    The series must be gap-free; resample or split around missing values
    first.  The mean is always removed, `detrend` removes a linear trend as
    well.  Odd-length input drops its last sample so the Nyquist bin lands
    exactly at 1/(2*step).
    """
    x = np.asarray(values, dtype=float)
    if np.isnan(x).any():
        raise AnalysisError(
            "series contains missing values; resample or split into contiguous segments first"
        )
    if x.size < 16:
        raise AnalysisError(f"need at least 16 samples, got {x.size}")
    if step <= 0:
        raise AnalysisError("step must be > 0")
    if x.size % 2 == 1:
        x = x[:-1]
    length = x.size

    if detrend:
        t = np.arange(length)
        slope, intercept = np.polyfit(t, x, 1)
        x = x - (slope * t + intercept)
    x = x - x.mean()

    if window == "rect":
        w = np.ones(length)
    elif window == "hann":
        w = np.hanning(length)
    else:
        raise AnalysisError(f"unknown window {window!r}")
    norm = np.mean(w**2)

    spectrum = np.fft.rfft(x * w)
    # variance contribution per bin; one-sided doubling except at Nyquist
    power = np.abs(spectrum) ** 2 / (length**2 * norm)
    power[1:-1] *= 2.0
    frequencies = np.arange(1, length // 2 + 1) / (length * step)
    return PowerSpectrum(frequencies=frequencies, power=power[1:], step=step, window=window)


def synthesize_power_law(
    n: int, step: float, slope: float, rng: np.random.Generator
) -> np.ndarray:
    """Random-phase signal whose periodogram follows f**slope; spectrum oracle."""
    if n % 2 == 1:
        raise AnalysisError("n must be even")
    freqs = np.arange(1, n // 2 + 1) / (n * step)
    amplitude = freqs ** (slope / 2.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=freqs.size)
    coeffs = np.zeros(n // 2 + 1, dtype=complex)
    coeffs[1:] = amplitude * np.exp(1j * phases)
    coeffs[-1] = amplitude[-1]  # Nyquist coefficient must be real
    return np.fft.irfft(coeffs, n=n)


def fit_loglog_slope(spectrum: PowerSpectrum, f_lo: float, f_hi: float) -> float:
    """Least-squares slope of log power vs log frequency on [f_lo, f_hi]."""
    mask = (spectrum.frequencies >= f_lo) & (spectrum.frequencies <= f_hi) & (spectrum.power > 0)
    if mask.sum() < 4:
        raise AnalysisError("too few bins in the fit band")
    return float(
        np.polyfit(np.log(spectrum.frequencies[mask]), np.log(spectrum.power[mask]), 1)[0]
    )


def contiguous_segments(values) -> list[slice]:
    """Maximal gap-free runs of a series with NaN holes, longest first."""
    finite = np.isfinite(np.asarray(values, dtype=float))
    segments = []
    start = None
    for i, ok in enumerate(finite):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            segments.append(slice(start, i))
            start = None
    if start is not None:
        segments.append(slice(start, len(finite)))
    return sorted(segments, key=lambda s: s.stop - s.start, reverse=True)


# ---------------------------------------------------------------------------
# stability profile

STABLE = "stable"
UNSTABLE = "unstable"
MIXED = "mixed"


@dataclass
class BvProfile:
    """Squared buoyancy frequency between adjacent altitude-bin temperatures.

    n_squared[i] sits on the boundary between bins i and i+1 and uses the
    printed field formula g * dT / (T0 * dz) on absolute temperature.
    """

    bin_width: float
    bin_lo: np.ndarray  # lower edges, contiguous ascending
    mean_temperature: np.ndarray  # K, NaN where the bin is empty
    n_squared: np.ndarray  # s^-2, between adjacent bins
    labels: list[str]
    reference_temperature: float = BV_REFERENCE_TEMPERATURE


def _stability_label(value: float) -> str:
    if math.isnan(value) or value == 0.0:
        return MIXED
    return STABLE if value > 0.0 else UNSTABLE


def bv_profile(
    altitude,
    temperature,
    bin_width: float = BV_BIN_WIDTH,
    reference_temperature: float = BV_REFERENCE_TEMPERATURE,
) -> BvProfile:
    """Bin temperatures by altitude and difference adjacent bins."""
    altitude = np.asarray(altitude, dtype=float)
    temperature = np.asarray(temperature, dtype=float)
    if altitude.shape != temperature.shape or altitude.size == 0:
        raise AnalysisError("altitude and temperature must be aligned and non-empty")

    indices = np.floor(altitude / bin_width).astype(int)
    lo, hi = int(indices.min()), int(indices.max())
    if hi == lo:
        raise AnalysisError("altitude coverage spans a single bin; need >= 2")
    n_bins = hi - lo + 1
    means = np.full(n_bins, np.nan)
    for index in range(lo, hi + 1):
        mask = indices == index
        if mask.any():
            means[index - lo] = temperature[mask].mean()

    delta_t = means[1:] - means[:-1]
    n_squared = GRAVITY * delta_t / (reference_temperature * bin_width)
    labels = [_stability_label(v) for v in n_squared]
    return BvProfile(
        bin_width=bin_width,
        bin_lo=(lo + np.arange(n_bins)) * bin_width,
        mean_temperature=means,
        n_squared=n_squared,
        labels=labels,
        reference_temperature=reference_temperature,
    )


def bv_ensemble(profiles: list[BvProfile]) -> BvProfile:
    """Average aligned profiles; a boundary keeps a stability label only when
    every input profile agrees on the sign."""
    if not profiles:
        raise AnalysisError("need at least one profile")
    first = profiles[0]
    for p in profiles[1:]:
        if p.bin_width != first.bin_width or not np.array_equal(p.bin_lo, first.bin_lo):
            raise AnalysisError("profiles have misaligned bins")
    stacked_n2 = np.vstack([p.n_squared for p in profiles])
    stacked_t = np.vstack([p.mean_temperature for p in profiles])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns stay NaN
        mean_n2 = np.nanmean(stacked_n2, axis=0)
        mean_t = np.nanmean(stacked_t, axis=0)
    labels = []
    for column in stacked_n2.T:
        if np.all(np.isfinite(column)) and np.all(column > 0):
            labels.append(STABLE)
        elif np.all(np.isfinite(column)) and np.all(column < 0):
            labels.append(UNSTABLE)
        else:
            labels.append(MIXED)
    return BvProfile(
        bin_width=first.bin_width,
        bin_lo=first.bin_lo.copy(),
        mean_temperature=mean_t,
        n_squared=mean_n2,
        labels=labels,
        reference_temperature=first.reference_temperature,
    )


# ---------------------------------------------------------------------------
# stereo cross-check


def triangulate(pixels_a, pixels_b, focal_px: float, baseline_m: float) -> np.ndarray:
    """Rectified-pair triangulation: Z = f*b/disparity, X,Y by similar triangles.

    pixels_* are (n, 2) image coordinates relative to the principal point;
    camera B sits `baseline_m` along +x from camera A.  Rows with disparity
    <= 0 come back as NaN (invalid, e.g. point at infinity).
    """
    a = np.asarray(pixels_a, dtype=float)
    b = np.asarray(pixels_b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
        raise AnalysisError("pixel tracks must be matching (n, 2) arrays")
    disparity = a[:, 0] - b[:, 0]
    points = np.full((a.shape[0], 3), np.nan)
    valid = disparity > 0
    z = focal_px * baseline_m / disparity[valid]
    points[valid, 0] = a[valid, 0] * z / focal_px
    points[valid, 1] = a[valid, 1] * z / focal_px
    points[valid, 2] = z
    return points


def project_stereo(points, focal_px: float, baseline_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward pinhole projection of (n, 3) points into both cameras."""
    p = np.asarray(points, dtype=float)
    pixels_a = np.column_stack([focal_px * p[:, 0] / p[:, 2], focal_px * p[:, 1] / p[:, 2]])
    pixels_b = np.column_stack(
        [focal_px * (p[:, 0] - baseline_m) / p[:, 2], focal_px * p[:, 1] / p[:, 2]]
    )
    return pixels_a, pixels_b


def stereo_distance(
    tracks_a: list[np.ndarray],
    tracks_b: list[np.ndarray],
    focal_px: float,
    baseline_m: float,
) -> tuple[list[np.ndarray], dict[tuple[int, int], np.ndarray]]:
    """Reconstruct per-object 3D tracks and all pairwise distance series."""
    if len(tracks_a) != len(tracks_b) or not tracks_a:
        raise AnalysisError("need matching, non-empty pixel tracks per camera")
    positions = [
        triangulate(a, b, focal_px, baseline_m) for a, b in zip(tracks_a, tracks_b)
    ]
    distances = {}
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            distances[(i, j)] = np.linalg.norm(positions[i] - positions[j], axis=1)
    return positions, distances


def gnss_relative_distance(
    lon_a, lat_a, alt_a, lon_b, lat_b, alt_b
) -> tuple[np.ndarray, np.ndarray]:
    """(2D, 3D) separation between two sondes on a shared time grid.

    Geodetic fixes convert to a local tangent plane anchored at the first
    epoch where both tracks are finite.  Epochs with a missing fix are NaN.
    """
    arrays = [np.asarray(x, dtype=float) for x in (lon_a, lat_a, alt_a, lon_b, lat_b, alt_b)]
    if len({a.shape for a in arrays}) != 1:
        raise AnalysisError("tracks must share one time grid")
    finite = np.all(np.isfinite(np.vstack(arrays)), axis=0)
    if not finite.any():
        raise AnalysisError("tracks have no common epoch")
    first = int(np.argmax(finite))
    anchor = (arrays[0][first], arrays[1][first], arrays[2][first])

    def to_enu(lon, lat, alt):
        out = np.full((lon.size, 3), np.nan)
        for i in range(lon.size):
            if np.isfinite(lon[i]) and np.isfinite(lat[i]) and np.isfinite(alt[i]):
                out[i] = geo.geodetic_to_enu(anchor, lon[i], lat[i], alt[i])
        return out

    enu_a = to_enu(arrays[0], arrays[1], arrays[2])
    enu_b = to_enu(arrays[3], arrays[4], arrays[5])
    delta = enu_a - enu_b
    d2 = np.linalg.norm(delta[:, :2], axis=1)
    d3 = np.linalg.norm(delta, axis=1)
    return d2, d3


# ---------------------------------------------------------------------------
# neighbor-count dispersion graphs


@dataclass(frozen=True)
class DistanceNeighborGraph:
    """Average number of neighbors per separation bin at one instant.

    Counts are kept as integers (pair tallies over all sondes); q divides by
    the sonde count, so sum(counts) == n_sondes * (n_sondes - 1) is the exact
    conservation identity behind sum(q) == n_sondes - 1.
    """

    kind: str
    h: float
    counts: np.ndarray  # int pair tallies per bin
    n_sondes: int
    n_excluded: int = 0
    timestamp: float | None = None

    @property
    def q(self) -> np.ndarray:
        return self.counts / self.n_sondes

    def neighbor_total(self) -> float:
        # exact: the true quotient n_sondes - 1 is representable
        return float(int(self.counts.sum()) / self.n_sondes)

    def second_moment(self) -> float:
        """Mean squared bin-midpoint separation per neighbor."""
        mids = (np.arange(self.counts.size) + 0.5) * self.h
        total = self.counts.sum()
        if total == 0:
            return 0.0
        return float(np.sum(self.counts * mids**2) / total)


def distance_neighbor_graph(
    values, kind: str, h: float | None = None, timestamp: float | None = None
) -> DistanceNeighborGraph:
    """Neighbor-count histogram averaged over sondes.

    kind 'distance' takes (n, 3) positions and bins Euclidean separations;
    the other kinds take (n,) readings and bin absolute differences.  Sondes
    with non-finite values are excluded and counted in n_excluded.
    """
    if kind not in DEFAULT_NEIGHBOR_BIN_WIDTHS:
        raise AnalysisError(f"unknown kind {kind!r}")
    if h is None:
        h = DEFAULT_NEIGHBOR_BIN_WIDTHS[kind]
    if h <= 0:
        raise AnalysisError("h must be > 0")
    array = np.asarray(values, dtype=float)
    if kind == "distance":
        if array.ndim != 2 or array.shape[1] != 3:
            raise AnalysisError("kind 'distance' needs (n, 3) positions")
        finite = np.all(np.isfinite(array), axis=1)
    else:
        if array.ndim != 1:
            raise AnalysisError(f"kind {kind!r} needs (n,) readings")
        finite = np.isfinite(array)
    kept = array[finite]
    n = kept.shape[0]
    n_excluded = int(array.shape[0] - n)
    if n < 2:
        raise AnalysisError(f"need >= 2 sondes with finite readings, got {n}")

    if kind == "distance":
        deltas = kept[:, None, :] - kept[None, :, :]
        separations = np.linalg.norm(deltas, axis=2)
    else:
        separations = np.abs(kept[:, None] - kept[None, :])
    off_diagonal = ~np.eye(n, dtype=bool)
    bins = np.floor(separations[off_diagonal] / h).astype(int)
    counts = np.bincount(bins)  # summed over all sondes' histograms
    return DistanceNeighborGraph(
        kind=kind,
        h=float(h),
        counts=counts,
        n_sondes=n,
        n_excluded=n_excluded,
        timestamp=timestamp,
    )


@dataclass(frozen=True)
class AveragedNeighborGraph:
    """Per-minute average of snapshot graphs."""

    kind: str
    h: float
    minute: int
    t_start: float
    q: np.ndarray
    n_snapshots: int
    mean_sondes: float

    def second_moment(self) -> float:
        mids = (np.arange(self.q.size) + 0.5) * self.h
        total = self.q.sum()
        if total == 0:
            return 0.0
        return float(np.sum(self.q * mids**2) / total)


def q_graph_timeseries(
    times,
    per_sonde_values,
    kind: str,
    h: float | None = None,
    cadence: float = QGRAPH_CADENCE,
    average_window: float = QGRAPH_AVERAGE_WINDOW,
) -> list[AveragedNeighborGraph]:
    """Snapshot graphs every `cadence` seconds, averaged per minute.

    `per_sonde_values` is (n_sondes, n_times) for scalar kinds or
    (n_sondes, n_times, 3) for positions, NaN where a sonde has no data.
    Snapshots with fewer than two reporting sondes are skipped.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(per_sonde_values, dtype=float)
    if values.shape[1] != times.size:
        raise AnalysisError("per_sonde_values second axis must match times")
    if h is None:
        h = DEFAULT_NEIGHBOR_BIN_WIDTHS.get(kind)
        if h is None:
            raise AnalysisError(f"unknown kind {kind!r}")

    t0 = times[0]
    snapshots: dict[int, list[DistanceNeighborGraph]] = {}
    next_snapshot = t0
    for i, t in enumerate(times):
        if t + 1e-9 < next_snapshot:
            continue
        next_snapshot += cadence
        try:
            graph = distance_neighbor_graph(values[:, i], kind, h=h, timestamp=float(t))
        except AnalysisError:
            continue  # fewer than 2 sondes reporting
        snapshots.setdefault(int((t - t0) // average_window), []).append(graph)

    averaged = []
    for minute in sorted(snapshots):
        graphs = snapshots[minute]
        width = max(g.counts.size for g in graphs)
        stacked = np.zeros((len(graphs), width))
        for row, g in enumerate(graphs):
            stacked[row, : g.counts.size] = g.q
        averaged.append(
            AveragedNeighborGraph(
                kind=kind,
                h=float(h),
                minute=minute,
                t_start=t0 + minute * average_window,
                q=stacked.mean(axis=0),
                n_snapshots=len(graphs),
                mean_sondes=float(np.mean([g.n_sondes for g in graphs])),
            )
        )
    return averaged
