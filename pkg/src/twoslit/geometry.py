"""Experimental configuration and position/angle conversions.

Coordinates: the median symmetry axis of the double slit is the origin of
the transverse axis; negative offsets are on the left when looking toward
the crystal.  Distances are measured from the slit plane to the lens plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

TWO_DEGREES = math.radians(2.0)


@dataclass(frozen=True)
class ExperimentGeometry:
    """Slit pair, photon wavelength and the two incidence directions."""

    wavelength: float = 702e-9
    slit_separation: float = 100e-6
    slit_width: float = 10e-6
    incidence_angle_A: float = TWO_DEGREES
    incidence_angle_B: float = -TWO_DEGREES

    def __post_init__(self):
        for name in ("wavelength", "slit_separation", "slit_width"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")
        if self.slit_width >= self.slit_separation:
            raise DomainError("slit_width must be smaller than slit_separation")
        for name in ("incidence_angle_A", "incidence_angle_B"):
            value = getattr(self, name)
            if not (math.isfinite(value) and abs(value) < math.pi / 2):
                raise DomainError(f"{name} must lie in (-pi/2, pi/2), got {value!r}")

    @property
    def k(self) -> float:
        return wavevector(self)

    @property
    def is_mirror_symmetric(self) -> bool:
        return self.incidence_angle_A == -self.incidence_angle_B


@dataclass(frozen=True)
class DetectorPlacement:
    """A detector lens centred at ``lateral_offset`` in the plane ``plane_distance``."""

    lateral_offset: float
    plane_distance: float
    lens_diameter: float = 6e-3

    def __post_init__(self):
        if not math.isfinite(self.lateral_offset):
            raise DomainError("lateral_offset must be finite")
        if not (math.isfinite(self.plane_distance) and self.plane_distance > 0):
            raise DomainError(f"plane_distance must be positive, got {self.plane_distance!r}")
        if not (math.isfinite(self.lens_diameter) and self.lens_diameter >= 0):
            raise DomainError(f"lens_diameter must be non-negative, got {self.lens_diameter!r}")
        if self.lens_diameter >= self.plane_distance:
            raise DomainError("lens_diameter must be much smaller than plane_distance")

    @property
    def center_angle(self) -> float:
        return angle_from_position(self.lateral_offset, self.plane_distance)

    @property
    def edges(self) -> tuple[float, float]:
        """Transverse extent of the lens in its own plane."""
        half = 0.5 * self.lens_diameter
        return self.lateral_offset - half, self.lateral_offset + half

    def mirrored(self) -> DetectorPlacement:
        return DetectorPlacement(-self.lateral_offset, self.plane_distance, self.lens_diameter)


def angle_from_position(offset, distance):
    """Diffraction angle of a point at transverse ``offset`` in a plane ``distance`` away.

    Works elementwise on arrays.  Uses the exact arctangent.
    """
    distance = np.asarray(distance, dtype=float)
    if np.any(~(distance > 0)):
        raise DomainError("distance must be positive")
    result = np.arctan(np.asarray(offset, dtype=float) / distance)
    return float(result) if result.ndim == 0 else result


def position_from_angle(angle, distance):
    """Inverse of :func:`angle_from_position`."""
    distance = np.asarray(distance, dtype=float)
    if np.any(~(distance > 0)):
        raise DomainError("distance must be positive")
    result = distance * np.tan(np.asarray(angle, dtype=float))
    return float(result) if result.ndim == 0 else result


def angular_acceptance(placement: DetectorPlacement) -> tuple[float, float]:
    """Angular interval subtended by the lens of ``placement``."""
    left, right = placement.edges
    z = placement.plane_distance
    return angle_from_position(left, z), angle_from_position(right, z)


def wavevector(geometry: ExperimentGeometry) -> float:
    return 2.0 * math.pi / geometry.wavelength
