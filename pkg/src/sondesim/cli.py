"""Command-line entry point: design, simulate, ingest, analyze.

Stages hand off through files in the output directory, so each one can be
re-run independently:

    simulate -> truth.jsonl, reception_<station>.jsonl, reference_*.csv
    ingest   -> sonde<NN>_<quantity>.csv, manifest.json
    analyze  -> stats CSVs per requested analysis

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analysis, geo, ingest
from .balloon import altitude_curve
from .config import ConfigError, SimulationConfig, config_from_dict
from .flight import simulate_cluster
from .ingest import ChannelSeries
from .telemetry import (
    OUTCOME_LOST_COLLISION,
    OUTCOME_LOST_RANGE,
    OUTCOME_RECEIVED,
    TEMPERATURE_OFFSET_K,
    ReceptionRecord,
    TxEvent,
    encode,
    simulate_network,
    transmit_schedule,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

INGEST_QUANTITIES = (
    "temperature",
    "humidity",
    "pressure",
    "lon",
    "lat",
    "altitude",
    "vel_north",
    "vel_east",
    "vel_down",
    "wind_speed",
)

KNOWN_ANALYSES = (
    "rmse-mbe",
    "binned-comparison",
    "drift-fit",
    "spectrum",
    "bv",
    "qgraph",
    "stereo-check",
)

REFERENCE_SENSOR_ID = 9999  # ambient-sampler stream id for the ground reference


def _load_config(args) -> SimulationConfig:
    if args.config:
        data = yaml.safe_load(Path(args.config).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError([f"{args.config}: top level must be a mapping"])
    else:
        data = {}
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        data["output_dir"] = args.out
    return config_from_dict(data)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


# ---------------------------------------------------------------------------
# design


def cmd_design(config: SimulationConfig, out_dir: Path) -> int:
    payloads = [p * 1e-3 for p in config.design.payloads_g]
    radii = [r * 1e-2 for r in config.design.radii_cm]
    if not payloads or not radii:
        print("design: payloads_g and radii_cm must be non-empty", file=sys.stderr)
        return EXIT_VALIDATION
    rows = altitude_curve(payloads, radii, base=config.balloon)
    if not any(row["feasible"] for row in rows):
        print("design: no feasible cell in the requested grid", file=sys.stderr)
        return EXIT_RUNTIME
    path = out_dir / "design_grid.csv"
    _write_csv(
        path,
        ["payload_kg", "radius_m", "altitude_m", "feasible"],
        [
            (r["payload_kg"], r["radius_m"], r["altitude_m"], int(r["feasible"]))
            for r in rows
        ],
    )
    print(f"design grid: {len(rows)} cells -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def run_simulation(config: SimulationConfig, out_dir: Path) -> dict[str, dict[str, int]]:
    """Flight + telemetry; returns per-station outcome counts."""
    error_models = [config.error_model_for(i) for i in range(config.n_sondes)]
    tracks = simulate_cluster(
        n_sondes=config.n_sondes,
        duration=config.duration_s,
        tick=config.tick_s,
        launch=config.launch,
        balloon=config.balloon,
        wind_field=config.wind,
        ambient_fields=config.ambient,
        error_models=error_models,
        seed=config.seed,
        hold_duration=config.hold_duration_s,
        poweron_lead=config.poweron_lead_s,
        sun_exposed=config.sun_exposed,
    )

    with open(out_dir / "truth.jsonl", "w") as handle:
        for track in tracks:
            for i, t in enumerate(track.times):
                lon, lat, alt = geo.enu_to_geodetic(
                    track.anchor,
                    float(track.position[i, 0]),
                    float(track.position[i, 1]),
                    float(track.position[i, 2]),
                )
                record = {
                    "sonde_id": track.sonde_id,
                    "time": float(t),
                    "east": float(track.position[i, 0]),
                    "north": float(track.position[i, 1]),
                    "up": float(track.position[i, 2]),
                    "lon": lon,
                    "lat": lat,
                    "alt": alt,
                    "vel_east": float(track.velocity[i, 0]),
                    "vel_north": float(track.velocity[i, 1]),
                    "vel_up": float(track.velocity[i, 2]),
                    "ambient_pressure": float(track.ambient_pressure[i]),
                    "ambient_temperature": float(track.ambient_temperature[i]),
                    "ambient_humidity": float(track.ambient_humidity[i]),
                }
                handle.write(json.dumps(record, sort_keys=True) + "\n")

    if config.hold_duration_s > 0:
        _write_reference_series(config, out_dir)

    # schedule and encode transmissions
    events = []
    for track in tracks:
        rng = np.random.default_rng([config.seed, 0x53434845, track.sonde_id])
        times = transmit_schedule(
            track.sonde_id, 0.0, config.duration_s, rng, config.channel.period_range
        )
        for seq, tx_time in enumerate(times):
            index = min(int(tx_time // config.tick_s), len(track.samples) - 1)
            frame = encode(track.samples[index], seq & 0xFFFF)
            events.append(
                TxEvent(
                    sonde_id=track.sonde_id,
                    seq=seq & 0xFFFF,
                    time=float(tx_time),
                    position=track.position[index].copy(),
                    frame=frame,
                )
            )

    stations = []
    for station in config.stations:
        east, north, up = geo.geodetic_to_enu(
            config.launch, station.lon, station.lat, station.alt
        )
        stations.append((station.station_id, np.array([east, north, up])))

    logs = simulate_network(events, stations, config.channel, config.seed)

    summary = {}
    for station_id, records in logs.items():
        path = out_dir / f"reception_{station_id}.jsonl"
        with open(path, "w") as handle:
            for record in records:
                handle.write(
                    json.dumps(
                        {
                            "station_id": record.station_id,
                            "rx_time": record.rx_time,
                            "outcome": record.outcome,
                            "sonde_id": record.sonde_id,
                            "seq": record.seq,
                            "frame": record.frame.hex(),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        counts = {
            "sent": len(records),
            OUTCOME_RECEIVED: sum(r.outcome == OUTCOME_RECEIVED for r in records),
            OUTCOME_LOST_RANGE: sum(r.outcome == OUTCOME_LOST_RANGE for r in records),
            OUTCOME_LOST_COLLISION: sum(r.outcome == OUTCOME_LOST_COLLISION for r in records),
        }
        summary[station_id] = counts
    return summary


def _write_reference_series(config: SimulationConfig, out_dir: Path) -> None:
    """Ground reference sensors (shielded and unshielded) during the hold phase."""
    sampler = config.ambient.sampler(REFERENCE_SENSOR_ID)
    n = int(round(config.hold_duration_s / config.tick_s))
    times = np.arange(n + 1) * config.tick_s
    shielded = np.empty(n + 1)
    for i, t in enumerate(times):
        _, temp, _ = sampler.at(config.launch[2], float(t))
        shielded[i] = temp
    unshielded = shielded + (
        config.default_errors.radiation_offset if config.sun_exposed else 0.0
    )
    for name, values in (("shielded", shielded), ("unshielded", unshielded)):
        series = ChannelSeries(
            sonde_id=-1,
            quantity=f"temperature_{name}",
            step=config.tick_s,
            start=0.0,
            values=values,
        )
        ingest.persist(series, out_dir / f"reference_{name}.csv")


def cmd_simulate(config: SimulationConfig, out_dir: Path) -> int:
    summary = run_simulation(config, out_dir)
    for station_id in sorted(summary):
        counts = summary[station_id]
        print(
            f"{station_id}: sent={counts['sent']} received={counts[OUTCOME_RECEIVED]} "
            f"lost_range={counts[OUTCOME_LOST_RANGE]} "
            f"lost_collision={counts[OUTCOME_LOST_COLLISION]}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# ingest


def _read_reception_logs(out_dir: Path) -> list[ReceptionRecord]:
    records = []
    paths = sorted(out_dir.glob("reception_*.jsonl"))
    if not paths:
        raise FileNotFoundError(f"no reception_*.jsonl logs in {out_dir}")
    for path in paths:
        with open(path) as handle:
            for line in handle:
                raw = json.loads(line)
                records.append(
                    ReceptionRecord(
                        station_id=raw["station_id"],
                        rx_time=float(raw["rx_time"]),
                        outcome=raw["outcome"],
                        frame=bytes.fromhex(raw["frame"]),
                        sonde_id=int(raw["sonde_id"]),
                        seq=int(raw["seq"]),
                    )
                )
    return records


def sample_quantity(sample, quantity: str) -> float:
    if quantity == "wind_speed":
        return math.hypot(sample.vel_north, sample.vel_east)
    return getattr(sample, quantity)


def run_ingest(config: SimulationConfig, out_dir: Path) -> dict:
    records = _read_reception_logs(out_dir)
    result = ingest.dedupe(records)

    by_sonde: dict[int, list] = {}
    for packet in result.packets:
        by_sonde.setdefault(packet.sonde_id, []).append(packet)

    calibration = {}
    if config.ingest.calibration_window is not None:
        ref_path = out_dir / "reference_unshielded.csv"
        if not ref_path.exists():
            raise FileNotFoundError(
                "calibration window configured but reference_unshielded.csv is missing"
            )
        reference = ingest.load(ref_path)
        cluster = {}
        for sonde_id, packets in by_sonde.items():
            times = np.asarray([p.sample.time for p in packets])
            temps = np.asarray([p.sample.temperature for p in packets])
            cluster[sonde_id] = (times, temps)
        comparison = ingest.pre_launch_offsets(
            cluster,
            (reference.times, reference.values),
            config.ingest.calibration_window,
        )
        calibration = comparison.records

    step = config.ingest.grid_step_s
    max_gap = config.ingest.max_gap_intervals
    manifest = {
        "launch": {"lon": config.launch[0], "lat": config.launch[1], "alt": config.launch[2]},
        "grid_step_s": step,
        "sondes": sorted(by_sonde),
        "channels": {},
        "calibration": {
            str(sonde_id): {
                # the offset actually subtracted: snapped to sensor resolution
                "temp_offset": ingest.quantize_offset(record.temp_offset),
                "rh_offset": record.rh_offset,
                "pressure_offset": record.pressure_offset,
                "window": list(record.window),
            }
            for sonde_id, record in sorted(calibration.items())
        },
        "anomalies": [list(key) for key in result.anomalies],
        "skipped": [],
    }

    for sonde_id in sorted(by_sonde):
        packets = by_sonde[sonde_id]
        times = np.asarray([p.sample.time for p in packets])
        channels = {}
        try:
            for quantity in INGEST_QUANTITIES:
                values = np.asarray([sample_quantity(p.sample, quantity) for p in packets])
                if quantity == "temperature" and sonde_id in calibration:
                    values = ingest.apply_calibration(
                        values,
                        calibration[sonde_id].temp_offset,
                        scale=100.0,
                        origin=TEMPERATURE_OFFSET_K,
                    )
                series = ingest.resample(
                    times, values, step, max_gap, sonde_id=sonde_id, quantity=quantity
                )
                filename = f"sonde{sonde_id:02d}_{quantity}.csv"
                ingest.persist(series, out_dir / filename)
                channels[quantity] = filename
        except ingest.ResampleError as exc:
            manifest["skipped"].append({"sonde_id": sonde_id, "reason": str(exc)})
            continue
        manifest["channels"][str(sonde_id)] = channels
    manifest["sondes"] = [s for s in manifest["sondes"] if str(s) in manifest["channels"]]

    with open(out_dir / "manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest


def cmd_ingest(config: SimulationConfig, out_dir: Path) -> int:
    manifest = run_ingest(config, out_dir)
    print(
        f"ingested {len(manifest['sondes'])} sondes, "
        f"{len(manifest['anomalies'])} payload anomalies, "
        f"{len(manifest['skipped'])} sondes skipped -> {out_dir / 'manifest.json'}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _load_channel(out_dir: Path, manifest: dict, sonde_id: int, quantity: str) -> ChannelSeries:
    filename = manifest["channels"][str(sonde_id)][quantity]
    return ingest.load(out_dir / filename, sonde_id=sonde_id)


def _union_grid(series_list: list[ChannelSeries]) -> np.ndarray:
    step = series_list[0].step
    start = min(s.start for s in series_list)
    stop = max(s.times[-1] for s in series_list if len(s.values))
    n = int(round((stop - start) / step)) + 1
    return start + step * np.arange(n)


def _place_on_grid(series: ChannelSeries, grid: np.ndarray) -> np.ndarray:
    out = np.full(grid.size, np.nan)
    offset = int(round((series.start - grid[0]) / series.step))
    out[offset : offset + len(series.values)] = series.values
    return out


def _analyze_spectrum(manifest: dict, out_dir: Path) -> list[str]:
    written = []
    for sonde_id in manifest["sondes"]:
        for quantity in ("temperature", "humidity", "wind_speed"):
            series = _load_channel(out_dir, manifest, sonde_id, quantity)
            segments = analysis.contiguous_segments(series.values)
            if not segments:
                continue
            longest = series.values[segments[0]]
            if longest.size < 16:
                continue
            spectrum = analysis.power_spectrum(longest, series.step, detrend=True)
            path = out_dir / f"spectrum_sonde{sonde_id:02d}_{quantity}.csv"
            _write_csv(
                path,
                ["frequency_hz", "power"],
                zip(
                    (float(f) for f in spectrum.frequencies),
                    (float(p) for p in spectrum.power),
                ),
            )
            written.append(path.name)
    return written


def _aligned_profiles(manifest: dict, out_dir: Path) -> dict[int, analysis.BvProfile]:
    """Per-sonde stability profiles on one shared bin range."""
    inputs = {}
    lo = math.inf
    hi = -math.inf
    for sonde_id in manifest["sondes"]:
        alt = _load_channel(out_dir, manifest, sonde_id, "altitude").values
        temp = _load_channel(out_dir, manifest, sonde_id, "temperature").values
        both = np.isfinite(alt) & np.isfinite(temp)
        if both.sum() < 2:
            continue
        inputs[sonde_id] = (alt[both], temp[both])
        lo = min(lo, alt[both].min())
        hi = max(hi, alt[both].max())
    profiles = {}
    for sonde_id, (alt, temp) in inputs.items():
        # pad the data range with sentinel bins so every profile shares bins
        try:
            profile = analysis.bv_profile(
                np.concatenate([[lo], alt, [hi]]),
                np.concatenate([[np.nan], temp, [np.nan]]),
            )
        except analysis.AnalysisError:
            continue
        profiles[sonde_id] = profile
    return profiles


def _analyze_bv(manifest: dict, out_dir: Path) -> list[str]:
    profiles = _aligned_profiles(manifest, out_dir)
    written = []
    for sonde_id, profile in sorted(profiles.items()):
        path = out_dir / f"bv_sonde{sonde_id:02d}.csv"
        _write_bv_csv(path, profile)
        written.append(path.name)
    if len(profiles) >= 2:
        consensus = analysis.bv_ensemble(list(profiles.values()))
        path = out_dir / "bv_ensemble.csv"
        _write_bv_csv(path, consensus)
        written.append(path.name)
    return written


def _write_bv_csv(path: Path, profile: analysis.BvProfile) -> None:
    rows = []
    for i in range(len(profile.n_squared)):
        rows.append(
            (
                float(profile.bin_lo[i]),
                float(profile.bin_lo[i] + profile.bin_width),
                None if math.isnan(profile.mean_temperature[i]) else float(profile.mean_temperature[i]),
                None if math.isnan(profile.n_squared[i]) else float(profile.n_squared[i]),
                profile.labels[i],
            )
        )
    _write_csv(path, ["bin_lo_m", "bin_hi_m", "mean_temperature_k", "n_squared", "stability"], rows)


def _analyze_qgraph(manifest: dict, out_dir: Path) -> list[str]:
    sondes = manifest["sondes"]
    if len(sondes) < 2:
        return []
    anchor = (
        manifest["launch"]["lon"],
        manifest["launch"]["lat"],
        manifest["launch"]["alt"],
    )
    series = {
        sonde_id: {
            q: _load_channel(out_dir, manifest, sonde_id, q)
            for q in ("lon", "lat", "altitude", "temperature", "humidity", "wind_speed")
        }
        for sonde_id in sondes
    }
    grid = _union_grid([series[s]["temperature"] for s in sondes])

    positions = np.full((len(sondes), grid.size, 3), np.nan)
    scalars = {
        "temperature": np.full((len(sondes), grid.size), np.nan),
        "humidity": np.full((len(sondes), grid.size), np.nan),
        "wind_speed": np.full((len(sondes), grid.size), np.nan),
    }
    for row, sonde_id in enumerate(sondes):
        lon = _place_on_grid(series[sonde_id]["lon"], grid)
        lat = _place_on_grid(series[sonde_id]["lat"], grid)
        alt = _place_on_grid(series[sonde_id]["altitude"], grid)
        for i in range(grid.size):
            if np.isfinite(lon[i]) and np.isfinite(lat[i]) and np.isfinite(alt[i]):
                positions[row, i] = geo.geodetic_to_enu(anchor, lon[i], lat[i], alt[i])
        for quantity in scalars:
            scalars[quantity][row] = _place_on_grid(series[sonde_id][quantity], grid)

    written = []
    jobs = [("distance", positions)] + [(q, v) for q, v in scalars.items()]
    for kind, values in jobs:
        graphs = analysis.q_graph_timeseries(grid, values, kind)
        path = out_dir / f"qgraph_{kind}.csv"
        rows = []
        for graph in graphs:
            for n, q_value in enumerate(graph.q):
                rows.append(
                    (
                        graph.minute,
                        float(graph.t_start),
                        n,
                        float(n * graph.h),
                        float(q_value),
                        graph.n_snapshots,
                        float(graph.mean_sondes),
                    )
                )
        _write_csv(
            path,
            ["minute", "t_start_s", "bin", "bin_lo", "q", "n_snapshots", "mean_sondes"],
            rows,
        )
        written.append(path.name)
    return written


def _truth_ambient(out_dir: Path) -> dict[int, dict[str, np.ndarray]]:
    """Ground-truth ambient series per sonde from the simulator log."""
    tracks: dict[int, dict[str, list]] = {}
    with open(out_dir / "truth.jsonl") as handle:
        for line in handle:
            raw = json.loads(line)
            track = tracks.setdefault(
                int(raw["sonde_id"]), {"time": [], "temperature": [], "alt": []}
            )
            track["time"].append(raw["time"])
            track["temperature"].append(raw["ambient_temperature"])
            track["alt"].append(raw["alt"])
    return {
        sonde_id: {key: np.asarray(vals) for key, vals in track.items()}
        for sonde_id, track in tracks.items()
    }


def _reading_vs_truth(manifest, out_dir, sonde_id, truth):
    """Aligned (altitude, reading, ambient truth) for one sonde."""
    series = _load_channel(out_dir, manifest, sonde_id, "temperature")
    alt = _load_channel(out_dir, manifest, sonde_id, "altitude")
    track = truth[sonde_id]
    ambient = np.interp(series.times, track["time"], track["temperature"])
    ok = np.isfinite(series.values) & np.isfinite(alt.values)
    return alt.values[ok], series.values[ok], ambient[ok]


def _analyze_rmse(manifest: dict, out_dir: Path) -> list[str]:
    truth = _truth_ambient(out_dir)
    rows = []
    for sonde_id in manifest["sondes"]:
        if sonde_id not in truth:
            continue
        _, reading, ambient = _reading_vs_truth(manifest, out_dir, sonde_id, truth)
        if reading.size == 0:
            continue
        stats = analysis.rmse_mbe(reading, ambient)
        rows.append((sonde_id, stats.rmse, stats.mbe, stats.n))
    path = out_dir / "rmse_mbe.csv"
    _write_csv(path, ["sonde_id", "rmse", "mbe", "n"], rows)
    return [path.name]


def _analyze_binned(manifest: dict, out_dir: Path) -> list[str]:
    truth = _truth_ambient(out_dir)
    rows = []
    for sonde_id in manifest["sondes"]:
        if sonde_id not in truth:
            continue
        altitude, reading, ambient = _reading_vs_truth(manifest, out_dir, sonde_id, truth)
        if reading.size == 0:
            continue
        stats = analysis.binned_temp_comparison(altitude, reading, ambient)
        for row in stats.bins:
            rows.append(
                (
                    sonde_id,
                    row.bin_lo,
                    row.bin_hi,
                    row.mean_diff,
                    row.norm_mean_diff,
                    row.ref_min,
                    row.ref_max,
                    row.count,
                )
            )
    path = out_dir / "binned_comparison.csv"
    _write_csv(
        path,
        ["sonde_id", "bin_lo_m", "bin_hi_m", "mean_diff_k", "norm_mean_diff", "ref_min_k", "ref_max_k", "n"],
        rows,
    )
    return [path.name]


def _analyze_drift(manifest: dict, out_dir: Path, threshold: float) -> list[str]:
    truth = _truth_ambient(out_dir)
    rows = []
    for sonde_id in manifest["sondes"]:
        if sonde_id not in truth:
            continue
        altitude, reading, ambient = _reading_vs_truth(manifest, out_dir, sonde_id, truth)
        try:
            fit = analysis.fit_linear_drift(altitude, reading - ambient, threshold)
        except analysis.AnalysisError:
            continue
        rows.append((sonde_id, fit.slope, fit.intercept, fit.threshold, fit.n_points))
    path = out_dir / "drift_fit.csv"
    _write_csv(path, ["sonde_id", "slope_k_per_m", "intercept_k", "threshold_m", "n"], rows)
    return [path.name]


STEREO_FOCAL_PX = 1000.0
STEREO_BASELINE_M = 16.0
STEREO_STANDOFF_M = 500.0  # virtual rig sits this far south of the launch point


def _analyze_stereo_check(manifest: dict, out_dir: Path) -> list[str]:
    """Cross-check GNSS pair separation against a virtual stereo rig.

    The first two sondes' ENU tracks are projected into a rectified camera
    pair looking north from a standoff point, triangulated back, and the two
    separation series compared.
    """
    sondes = manifest["sondes"]
    if len(sondes) < 2:
        return []
    anchor = (
        manifest["launch"]["lon"],
        manifest["launch"]["lat"],
        manifest["launch"]["alt"],
    )
    pair = sondes[:2]
    tracks = []
    grids = []
    for sonde_id in pair:
        lon = _load_channel(out_dir, manifest, sonde_id, "lon")
        lat = _load_channel(out_dir, manifest, sonde_id, "lat")
        alt = _load_channel(out_dir, manifest, sonde_id, "altitude")
        grids.append(lon)
        tracks.append((lon, lat, alt))
    grid = _union_grid(grids)
    enu = np.full((2, grid.size, 3), np.nan)
    for row, (lon, lat, alt) in enumerate(tracks):
        lon_g = _place_on_grid(lon, grid)
        lat_g = _place_on_grid(lat, grid)
        alt_g = _place_on_grid(alt, grid)
        for i in range(grid.size):
            if np.isfinite(lon_g[i]) and np.isfinite(lat_g[i]) and np.isfinite(alt_g[i]):
                enu[row, i] = geo.geodetic_to_enu(anchor, lon_g[i], lat_g[i], alt_g[i])

    # camera frame: x = east, y = up, z = north + standoff
    cam = enu[:, :, [0, 2, 1]].copy()
    cam[:, :, 2] += STEREO_STANDOFF_M
    valid = np.all(np.isfinite(cam), axis=(0, 2)) & np.all(cam[:, :, 2] > 0, axis=0)
    if not valid.any():
        return []
    pixels = [analysis.project_stereo(cam[i, valid], STEREO_FOCAL_PX, STEREO_BASELINE_M) for i in range(2)]
    positions, distances = analysis.stereo_distance(
        [pixels[0][0], pixels[1][0]],
        [pixels[0][1], pixels[1][1]],
        STEREO_FOCAL_PX,
        STEREO_BASELINE_M,
    )
    stereo_d = distances[(0, 1)]
    gnss_d = np.linalg.norm(enu[0, valid] - enu[1, valid], axis=1)
    path = out_dir / "stereo_check.csv"
    _write_csv(
        path,
        ["time_s", "gnss_distance_m", "stereo_distance_m", "abs_diff_m"],
        [
            (float(t), float(g), float(s), float(abs(g - s)))
            for t, g, s in zip(grid[valid], gnss_d, stereo_d)
        ],
    )
    return [path.name]


def run_analyses(config: SimulationConfig, out_dir: Path, analyses) -> list[str]:
    with open(out_dir / "manifest.json") as handle:
        manifest = json.load(handle)
    written = []
    for name in analyses:
        if name == "spectrum":
            written += _analyze_spectrum(manifest, out_dir)
        elif name == "bv":
            written += _analyze_bv(manifest, out_dir)
        elif name == "qgraph":
            written += _analyze_qgraph(manifest, out_dir)
        elif name == "rmse-mbe":
            written += _analyze_rmse(manifest, out_dir)
        elif name == "binned-comparison":
            written += _analyze_binned(manifest, out_dir)
        elif name == "drift-fit":
            written += _analyze_drift(
                manifest, out_dir, config.default_errors.drift_threshold_altitude
            )
        elif name == "stereo-check":
            written += _analyze_stereo_check(manifest, out_dir)
        else:
            raise ConfigError([f"unknown analysis {name!r}; known: {', '.join(KNOWN_ANALYSES)}"])
    return written


def cmd_analyze(config: SimulationConfig, out_dir: Path, analyses) -> int:
    written = run_analyses(config, out_dir, analyses)
    print(f"analyze: wrote {len(written)} files" + (f" ({', '.join(written)})" if written else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sondesim",
        description="Radiosonde-cluster simulator, telemetry pipeline, and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("design", "emit the attainable-altitude grid as CSV"),
        ("simulate", "run the flight + telemetry simulation"),
        ("ingest", "merge reception logs into calibrated, resampled series"),
        ("analyze", "compute statistics over ingested series"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="YAML configuration file")
        cmd.add_argument("--seed", type=int, help="override the config seed")
        cmd.add_argument("--out", help="override the output directory")
        if name == "analyze":
            cmd.add_argument(
                "--analyses",
                help="comma-separated subset to run (default: from config)",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"config not found: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "design":
            return cmd_design(config, out_dir)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir)
        if args.command == "ingest":
            return cmd_ingest(config, out_dir)
        if args.command == "analyze":
            analyses = config.analyses
            if args.analyses is not None:
                analyses = tuple(a for a in args.analyses.split(",") if a)
            return cmd_analyze(config, out_dir, analyses)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
