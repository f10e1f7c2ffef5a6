"""Simulation configuration: one YAML file drives the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .atmosphere import WindField
from .balloon import BalloonSpec
from .flight import AmbientFields, SensorErrorModel
from .telemetry import ChannelModel


class ConfigError(ValueError):
    """Invalid configuration; message lists every offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class StationConfig:
    station_id: str
    lon: float
    lat: float
    alt: float


@dataclass(frozen=True)
class IngestConfig:
    grid_step_s: float = 5.0
    max_gap_intervals: float = 3.0
    calibration_window: tuple[float, float] | None = None


@dataclass(frozen=True)
class DesignConfig:
    payloads_g: tuple[float, ...] = (5.5, 8.5, 11.5, 14.5, 17.5, 20.5, 23.5, 26.5)
    radii_cm: tuple[float, ...] = tuple(float(r) for r in range(15, 31))


@dataclass
class SimulationConfig:
    seed: int = 42
    n_sondes: int = 10
    launch: tuple[float, float, float] = (7.478, 45.788, 1700.0)
    duration_s: float = 1800.0
    tick_s: float = 1.0
    hold_duration_s: float = 0.0
    poweron_lead_s: float = 600.0
    sun_exposed: bool = True
    balloon: BalloonSpec = field(default_factory=lambda: BalloonSpec(radius=0.20))
    wind: WindField = field(default_factory=lambda: WindField(seed=42))
    ambient: AmbientFields = field(default_factory=lambda: AmbientFields(seed=42))
    default_errors: SensorErrorModel = field(default_factory=SensorErrorModel)
    per_sonde_errors: dict[int, dict] = field(default_factory=dict)
    stations: list[StationConfig] = field(
        default_factory=lambda: [StationConfig("station-0", 7.478, 45.788, 1700.0)]
    )
    channel: ChannelModel = field(default_factory=lambda: ChannelModel(seed=42))
    ingest: IngestConfig = field(default_factory=IngestConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    analyses: tuple[str, ...] = ("spectrum", "bv", "qgraph")
    output_dir: str = "out"

    def error_model_for(self, sonde_id: int) -> SensorErrorModel:
        overrides = self.per_sonde_errors.get(sonde_id)
        if not overrides:
            return self.default_errors
        return replace(self.default_errors, **overrides)


def _get(data: dict, key: str, default):
    value = data.get(key, default)
    return default if value is None else value


def config_from_dict(data: dict) -> SimulationConfig:
    """Build and validate a SimulationConfig from parsed YAML."""
    problems: list[str] = []
    base = SimulationConfig()

    seed = int(_get(data, "seed", base.seed))
    n_sondes = int(_get(data, "n_sondes", base.n_sondes))
    duration = float(_get(data, "duration_s", base.duration_s))
    tick = float(_get(data, "tick_s", base.tick_s))
    hold = float(_get(data, "hold_duration_s", base.hold_duration_s))
    poweron = float(_get(data, "poweron_lead_s", base.poweron_lead_s))
    sun_exposed = bool(_get(data, "sun_exposed", base.sun_exposed))
    output_dir = str(_get(data, "output_dir", base.output_dir))

    if n_sondes < 1:
        problems.append("n_sondes: must be >= 1")
    if duration <= 0:
        problems.append("duration_s: must be > 0")
    if not 0 < tick <= 5:
        problems.append("tick_s: must be in (0, 5]")
    if hold < 0 or hold >= duration:
        problems.append("hold_duration_s: must be in [0, duration_s)")

    launch_raw = _get(data, "launch", {})
    try:
        launch = (
            float(launch_raw.get("lon", base.launch[0])),
            float(launch_raw.get("lat", base.launch[1])),
            float(launch_raw.get("alt", base.launch[2])),
        )
    except (TypeError, ValueError):
        problems.append("launch: needs numeric lon/lat/alt")
        launch = base.launch

    balloon_raw = _get(data, "balloon", {})
    try:
        balloon = BalloonSpec(
            radius=float(balloon_raw.get("radius_m", 0.20)),
            sheet_thickness=float(balloon_raw.get("sheet_thickness_m", 20e-6)),
            material_density=float(balloon_raw.get("material_density", 1240.0)),
            gas_molar_mass=float(balloon_raw.get("gas_molar_mass", 4.0026e-3)),
            payload_mass=float(balloon_raw.get("payload_mass_kg", 17.5e-3)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"balloon: {exc}")
        balloon = base.balloon

    wind_raw = _get(data, "wind", {})
    try:
        wind = WindField(
            seed=seed,
            mean_wind=tuple(float(c) for c in _get(wind_raw, "mean", (0.0, 0.0, 0.0))),
            fluctuation_sigma=tuple(float(c) for c in _get(wind_raw, "sigma", (0.0, 0.0, 0.0))),
            correlation_time=float(_get(wind_raw, "correlation_time_s", 60.0)),
            updraft_profile=tuple(
                (float(a), float(w)) for a, w in _get(wind_raw, "updraft_profile", ())
            ),
        )
        if len(wind.mean_wind) != 3 or len(wind.fluctuation_sigma) != 3:
            problems.append("wind: mean and sigma must be 3-vectors")
        if wind.correlation_time <= 0:
            problems.append("wind: correlation_time_s must be > 0")
    except (TypeError, ValueError) as exc:
        problems.append(f"wind: {exc}")
        wind = base.wind

    ambient_raw = _get(data, "ambient", {})
    try:
        ambient = AmbientFields(
            seed=seed,
            rh_profile=tuple(
                (float(a), float(r))
                for a, r in _get(ambient_raw, "rh_profile", ((0.0, 60.0), (11000.0, 60.0)))
            ),
            rh_sigma=float(_get(ambient_raw, "rh_sigma", 0.0)),
            temp_sigma=float(_get(ambient_raw, "temp_sigma", 0.0)),
            correlation_time=float(_get(ambient_raw, "correlation_time_s", 120.0)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"ambient: {exc}")
        ambient = base.ambient

    errors_raw = _get(data, "sensor_errors", {})
    try:
        default_errors = SensorErrorModel(**_get(errors_raw, "default", {}))
    except (TypeError, ValueError) as exc:
        problems.append(f"sensor_errors.default: {exc}")
        default_errors = base.default_errors
    per_sonde_errors = {}
    for key, overrides in _get(errors_raw, "per_sonde", {}).items():
        try:
            sonde_id = int(key)
            replace(default_errors, **overrides)  # validate field names/values now
            per_sonde_errors[sonde_id] = dict(overrides)
        except (TypeError, ValueError) as exc:
            problems.append(f"sensor_errors.per_sonde[{key}]: {exc}")

    stations = []
    for i, station_raw in enumerate(_get(data, "stations", None) or [{}]):
        try:
            stations.append(
                StationConfig(
                    station_id=str(station_raw.get("id", f"station-{i}")),
                    lon=float(station_raw.get("lon", launch[0])),
                    lat=float(station_raw.get("lat", launch[1])),
                    alt=float(station_raw.get("alt", launch[2])),
                )
            )
        except (TypeError, ValueError):
            problems.append(f"stations[{i}]: needs numeric lon/lat/alt")
    if not stations:
        problems.append("stations: need at least one")

    channel_raw = _get(data, "channel", {})
    try:
        channel = ChannelModel(
            seed=seed,
            airtime_ms=float(_get(channel_raw, "airtime_ms", 370.0)),
            period_range=tuple(float(c) for c in _get(channel_raw, "period_range", (3.0, 4.0))),
            p0=float(_get(channel_raw, "p0", 0.95)),
            d0=float(_get(channel_raw, "d0", 1000.0)),
            path_exponent=float(_get(channel_raw, "path_exponent", 2.7)),
            max_range=float(_get(channel_raw, "max_range_m", 15000.0)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"channel: {exc}")
        channel = base.channel

    ingest_raw = _get(data, "ingest", {})
    window_raw = _get(ingest_raw, "calibration_window", None)
    window = None
    if window_raw is not None:
        try:
            window = (float(window_raw[0]), float(window_raw[1]))
        except (TypeError, ValueError, IndexError):
            problems.append("ingest.calibration_window: needs [t_start, t_end]")
    try:
        ingest = IngestConfig(
            grid_step_s=float(_get(ingest_raw, "grid_step_s", 5.0)),
            max_gap_intervals=float(_get(ingest_raw, "max_gap_intervals", 3.0)),
            calibration_window=window,
        )
        if ingest.grid_step_s <= 0:
            problems.append("ingest.grid_step_s: must be > 0")
    except (TypeError, ValueError) as exc:
        problems.append(f"ingest: {exc}")
        ingest = base.ingest

    design_raw = _get(data, "design", {})
    design = DesignConfig(
        payloads_g=tuple(float(p) for p in _get(design_raw, "payloads_g", base.design.payloads_g)),
        radii_cm=tuple(float(r) for r in _get(design_raw, "radii_cm", base.design.radii_cm)),
    )

    analyses = tuple(str(a) for a in _get(data, "analyses", base.analyses))

    if problems:
        raise ConfigError(problems)

    return SimulationConfig(
        seed=seed,
        n_sondes=n_sondes,
        launch=launch,
        duration_s=duration,
        tick_s=tick,
        hold_duration_s=hold,
        poweron_lead_s=poweron,
        sun_exposed=sun_exposed,
        balloon=balloon,
        wind=wind,
        ambient=ambient,
        default_errors=default_errors,
        per_sonde_errors=per_sonde_errors,
        stations=stations,
        channel=channel,
        ingest=ingest,
        design=design,
        analyses=analyses,
        output_dir=output_dir,
    )


def load_config(path) -> SimulationConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return config_from_dict(data)
