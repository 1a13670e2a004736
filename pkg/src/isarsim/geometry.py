"""Radar pose trigonometry and multi-monostatic azimuth placement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class RadarPose:
    """Radar line-of-sight relative to the target-centered frame."""

    azimuth_deg: float
    elevation_deg: float
    slant_range_m: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.azimuth_deg, self.elevation_deg,
                                       self.slant_range_m))):
            raise ValueError("pose fields must be finite")
        if not 0.0 <= self.elevation_deg < 90.0:
            raise ValueError("elevation must be in [0, 90) degrees")
        if self.slant_range_m <= 0.0:
            raise ValueError("slant range must be positive")
        object.__setattr__(self, "azimuth_deg", self.azimuth_deg % 360.0)


@dataclass(frozen=True)
class ArrayConfig:
    """Multi-monostatic array: R radars spread uniformly in azimuth."""

    num_radars: int
    ground_distance_m: float
    elevations_deg: tuple = (15.0, 30.0)

    def __post_init__(self):
        if int(self.num_radars) != self.num_radars or self.num_radars < 1:
            raise ValueError("num_radars must be a positive integer")
        if self.spacing_deg < 1:
            raise ValueError("num_radars too large: azimuth spacing below 1 degree")
        if self.ground_distance_m <= 0 or not math.isfinite(self.ground_distance_m):
            raise ValueError("ground distance must be positive and finite")
        elevations = tuple(float(e) for e in self.elevations_deg)
        if len(set(elevations)) != len(elevations):
            raise ValueError("elevations must be distinct")
        for e in elevations:
            if not 0.0 <= e < 90.0:
                raise ValueError("elevation must be in [0, 90) degrees")
        object.__setattr__(self, "num_radars", int(self.num_radars))
        object.__setattr__(self, "elevations_deg", elevations)

    @property
    def spacing_deg(self) -> int:
        return 360 // int(self.num_radars)


def slant_geometry(ground_distance_m: float, elevation_deg: float) -> tuple[float, float]:
    """Target height and slant range from ground distance and elevation.

    height = d * tan(elevation); slant = sqrt(d^2 + height^2).
    """
    if ground_distance_m <= 0 or not math.isfinite(ground_distance_m):
        raise ValueError("ground distance must be positive and finite")
    if not 0.0 <= elevation_deg < 90.0:
        raise ValueError("elevation must be in [0, 90) degrees (tangent singularity at 90)")
    height = ground_distance_m * math.tan(math.radians(elevation_deg))
    slant = math.hypot(ground_distance_m, height)
    return height, slant


def pose_for(ground_distance_m: float, elevation_deg: float, azimuth_deg: float) -> RadarPose:
    """RadarPose at the given azimuth with slant range from slant_geometry."""
    _, slant = slant_geometry(ground_distance_m, elevation_deg)
    return RadarPose(azimuth_deg, elevation_deg, slant)


def radar_azimuths(config: ArrayConfig, offset_deg: int) -> list[float]:
    """Azimuths of all R radars for one integer offset, uniformly spaced."""
    spacing = config.spacing_deg
    if int(offset_deg) != offset_deg or not 0 <= offset_deg < spacing:
        raise ValueError(
            f"offset must be an integer in [0, {spacing}) for {config.num_radars} radars")
    return [float((offset_deg + k * spacing) % 360) for k in range(config.num_radars)]


def enumerate_offsets(config: ArrayConfig) -> list[int]:
    """All integer azimuth offsets for the array: 0 .. spacing-1."""
    return list(range(config.spacing_deg))
