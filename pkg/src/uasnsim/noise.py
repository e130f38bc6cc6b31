"""Underwater ambient noise source levels and dB aggregation.

Four closed-form source models (vehicle traffic, receiver thermal noise,
ocean turbulence, surface storm) plus power-domain summation of dB levels.
All levels are sound pressure levels in dB re 1 uPa-equivalent; aggregation
happens in linear power space, never by adding dB directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

BOLTZMANN_J_PER_K = 1.38e-23
# acoustic reference power: 1 picowatt
REFERENCE_POWER_W = 1e-12
# reference vehicle speed for the traffic noise model
REFERENCE_VEHICLE_SPEED = 6.18


def _lg(x: float) -> float:
    return math.log10(x)


def vehicle_noise(frequency_hz: float, vehicle_speed: float,
                  vehicle_density: float) -> float:
    """Traffic noise source level.

    186 - 20*lg(f) + 6*lg(v / 6.18) + 10*lg(rho), with f in Hz, v in the
    same unit as the 6.18 reference speed and rho a vehicle density.
    """
    if frequency_hz <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    if vehicle_speed <= 0.0:
        raise ValueError(f"vehicle speed must be positive, got {vehicle_speed}")
    if vehicle_density <= 0.0:
        raise ValueError(f"vehicle density must be positive, got {vehicle_density}")
    return (186.0 - 20.0 * _lg(frequency_hz)
            + 6.0 * _lg(vehicle_speed / REFERENCE_VEHICLE_SPEED)
            + 10.0 * _lg(vehicle_density))


def thermal_noise(temperature_k: float, resistance_ohm: float,
                  bandwidth_hz: float) -> float:
    """Johnson noise of the receiver electronics referenced to 1 pW.

    10*lg(4 * k_B * T * R * B / P0).
    """
    if temperature_k <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature_k}")
    if resistance_ohm <= 0.0:
        raise ValueError(f"resistance must be positive, got {resistance_ohm}")
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    power_w = 4.0 * BOLTZMANN_J_PER_K * temperature_k * resistance_ohm * bandwidth_hz
    return 10.0 * _lg(power_w / REFERENCE_POWER_W)


def turbulence_noise(base_level_db: float, turbulence_speed: float) -> float:
    """Turbulence source level: base + 20*lg(U_turb)."""
    if turbulence_speed <= 0.0:
        raise ValueError(f"turbulence speed must be positive, got {turbulence_speed}")
    return base_level_db + 20.0 * _lg(turbulence_speed)


def storm_noise(frequency_hz: float, wind_speed: float) -> float:
    """Surface storm source level.

    55 - 6*lg((f/400)^2 + 1) + (18 + u/4)*lg(u/10), with u the wind speed.
    """
    if frequency_hz <= 0.0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")
    if wind_speed <= 0.0:
        raise ValueError(f"wind speed must be positive, got {wind_speed}")
    return (55.0 - 6.0 * _lg((frequency_hz / 400.0) ** 2 + 1.0)
            + (18.0 + wind_speed / 4.0) * _lg(wind_speed / 10.0))


def total_spl(levels: Sequence[float]) -> float:
    """Aggregate dB levels by summing linear powers: 10*lg(sum 10^(L/10))."""
    if len(levels) == 0:
        raise ValueError("need at least one level to aggregate")
    return 10.0 * _lg(sum(10.0 ** (lv / 10.0) for lv in levels))


@dataclass(frozen=True)
class NoiseSourceParams:
    """Parameter set for one node's ambient noise environment.

    freq_scale rescales the frequency inputs when the caller's unit is not
    Hz; every formula sees frequency_hz * freq_scale.
    """
    frequency_hz: float = 20_000.0
    vehicle_speed: float = 8.0
    vehicle_density: float = 0.01
    temperature_k: float = 290.0
    resistance_ohm: float = 100.0
    bandwidth_hz: float = 20_000.0
    base_turbulence_db: float = 17.0
    turbulence_speed: float = 1.5
    wind_speed: float = 12.0
    freq_scale: float = 1.0

    def __post_init__(self):
        for name in ("frequency_hz", "vehicle_speed", "vehicle_density",
                     "temperature_k", "resistance_ohm", "bandwidth_hz",
                     "turbulence_speed", "wind_speed", "freq_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def scaled(self, **factors: float) -> "NoiseSourceParams":
        """Return a copy with selected fields multiplied by factors."""
        updates = {k: getattr(self, k) * v for k, v in factors.items()}
        return replace(self, **updates)


def source_levels(params: NoiseSourceParams) -> list[float]:
    """The four component source levels for one parameter set."""
    f = params.frequency_hz * params.freq_scale
    return [
        vehicle_noise(f, params.vehicle_speed, params.vehicle_density),
        thermal_noise(params.temperature_k, params.resistance_ohm,
                      params.bandwidth_hz),
        turbulence_noise(params.base_turbulence_db, params.turbulence_speed),
        storm_noise(f, params.wind_speed),
    ]


def ambient_spl(params: NoiseSourceParams) -> float:
    """Total ambient SPL at a node: power sum of the four sources."""
    return total_spl(source_levels(params))
