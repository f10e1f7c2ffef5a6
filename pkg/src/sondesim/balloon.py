"""Balloon sizing: sheet mass, neutral-buoyancy air density, floating altitude.

A non-elastic quasi-spherical balloon of radius R floats where the ambient air
density satisfies rho_a = (m_payload + m_balloon) / (V * (1 - M_gas/M_air)),
i.e. where displaced-air lift net of the lifting gas exactly carries the total
mass.  The gas is assumed to be at ambient pressure and temperature, so its
density enters only through the molar-mass ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .atmosphere import AltitudeRangeError, isa_altitude_for_density

MOLAR_MASS_DRY_AIR = 28.9647e-3  # kg/mol
MOLAR_MASS_HELIUM = 4.0026e-3  # kg/mol


class BalloonFloatError(ValueError):
    """The balloon cannot reach neutral buoyancy inside the troposphere."""


@dataclass(frozen=True)
class BalloonSpec:
    """Geometry, film material, lifting gas, and carried payload."""

    radius: float  # m
    sheet_thickness: float = 20e-6  # m
    material_density: float = 1240.0  # kg/m^3
    gas_molar_mass: float = MOLAR_MASS_HELIUM  # kg/mol; raise for helium/air mixes
    air_molar_mass: float = MOLAR_MASS_DRY_AIR  # kg/mol
    payload_mass: float = 17.5e-3  # kg

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if self.sheet_thickness < 0 or self.material_density <= 0:
            raise ValueError("sheet parameters must be non-negative / positive")
        if not 0 < self.gas_molar_mass < self.air_molar_mass:
            raise ValueError("lifting gas must be lighter than air")
        if self.payload_mass < 0:
            raise ValueError("payload_mass must be >= 0")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def buoyancy_factor(self) -> float:
        """1 - M_gas/M_air: fraction of displaced-air mass available as lift."""
        return 1.0 - self.gas_molar_mass / self.air_molar_mass


def balloon_mass(spec: BalloonSpec) -> float:
    """Film mass (kg): sphere surface area times sheet thickness and density."""
    return 4.0 * math.pi * spec.radius**2 * spec.sheet_thickness * spec.material_density


def required_air_density(spec: BalloonSpec) -> float:
    """Ambient density (kg/m^3) at which the balloon is neutrally buoyant."""
    total_mass = spec.payload_mass + balloon_mass(spec)
    return total_mass / (spec.volume * spec.buoyancy_factor)


def attainable_altitude(spec: BalloonSpec) -> float:
    """Equilibrium floating altitude (m) in the standard atmosphere."""
    rho = required_air_density(spec)
    try:
        return isa_altitude_for_density(rho)
    except AltitudeRangeError as exc:
        raise BalloonFloatError(
            f"balloon cannot float in troposphere (requires ambient density {rho:.4f} kg/m^3)"
        ) from exc


def altitude_curve(
    payloads: list[float], radii: list[float], base: BalloonSpec | None = None
) -> list[dict]:
    """Attainable-altitude grid over payload (kg) x radius (m).

    Infeasible cells (balloon too heavy, or floating above the modeled
    atmosphere) are kept in the table with altitude None and feasible False.
    Sheet/gas parameters come from `base` when given.
    """
    if not payloads or not radii:
        raise ValueError("payloads and radii must be non-empty")
    template = base if base is not None else BalloonSpec(radius=radii[0])
    rows = []
    for payload in payloads:
        for radius in radii:
            spec = BalloonSpec(
                radius=radius,
                sheet_thickness=template.sheet_thickness,
                material_density=template.material_density,
                gas_molar_mass=template.gas_molar_mass,
                air_molar_mass=template.air_molar_mass,
                payload_mass=payload,
            )
            try:
                altitude = attainable_altitude(spec)
                feasible = True
            except BalloonFloatError:
                altitude = None
                feasible = False
            rows.append(
                {
                    "payload_kg": payload,
                    "radius_m": radius,
                    "altitude_m": altitude,
                    "feasible": feasible,
                }
            )
    return rows
