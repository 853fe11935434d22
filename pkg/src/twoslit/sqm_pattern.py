"""Standard quantum mechanics coincidence prediction for the two-photon double slit.

The coincidence density for detector angles (theta1, theta2) is

    C = gA(1)^2 gB(2)^2 + gA(2)^2 gB(1)^2
        + 2 gA(1) gB(2) gA(2) gB(1) cos[k s (sin theta1 - sin theta2)]

with gl(j) = sinc of (k w / 2)(sin theta_j - sin theta_i^l), the single-slit
diffraction factor of the photon incident on slit l.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import (
    DetectorPlacement,
    ExperimentGeometry,
    angle_from_position,
    angular_acceptance,
    wavevector,
)

_SERIES_CUTOFF = 1e-4


def _sinc(u):
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, u)
    u2 = u * u
    return np.where(small, 1.0 - u2 / 6.0 + u2 * u2 / 120.0, np.sin(safe) / safe)


def slit_amplitude(theta, theta_incidence, geometry: ExperimentGeometry):
    """Single-slit diffraction factor g(theta, theta_incidence).

    Exactly 1 when ``theta == theta_incidence``; a short Taylor series is used
    near the removable singularity.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= math.pi / 2):
        raise DomainError("|theta| must be below pi/2")
    half_kw = 0.5 * wavevector(geometry) * geometry.slit_width
    u = half_kw * (np.sin(theta) - np.sin(theta_incidence))
    g = _sinc(u)
    return float(g) if g.ndim == 0 else g


def coincidence_density(theta1, theta2, geometry: ExperimentGeometry):
    """Relative coincidence rate density C(theta1, theta2)."""
    thA, thB = geometry.incidence_angle_A, geometry.incidence_angle_B
    g1A = slit_amplitude(theta1, thA, geometry)
    g1B = slit_amplitude(theta1, thB, geometry)
    g2A = slit_amplitude(theta2, thA, geometry)
    g2B = slit_amplitude(theta2, thB, geometry)
    ks = wavevector(geometry) * geometry.slit_separation
    phase = ks * (np.sin(theta1) - np.sin(theta2))
    direct = (g1A * g2B) ** 2
    swapped = (g2A * g1B) ** 2
    cross = 2.0 * (g1A * g2B) * (g2A * g1B) * np.cos(phase)
    result = direct + swapped + cross
    return float(result) if np.ndim(result) == 0 else result


def gauss_legendre(order: int, a: float, b: float):
    """Nodes and weights of the ``order``-point Gauss-Legendre rule on [a, b]."""
    if order < 2:
        raise ConfigurationError(f"quadrature order must be at least 2, got {order}", "quadrature_order")
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def aperture_averaged_rate(
    placement1: DetectorPlacement,
    placement2: DetectorPlacement,
    geometry: ExperimentGeometry,
    order: int = 16,
) -> float:
    """Mean of the coincidence density over both lens acceptance intervals.

    A lens of zero diameter degenerates to a point evaluation on that axis.
    """
    if order < 2:
        raise ConfigurationError(f"quadrature order must be at least 2, got {order}", "quadrature_order")
    axes = []
    for placement in (placement1, placement2):
        lo, hi = angular_acceptance(placement)
        if hi > lo:
            nodes, weights = gauss_legendre(order, lo, hi)
            axes.append((nodes, weights / (hi - lo)))
        else:
            axes.append((np.array([lo]), np.array([1.0])))
    (t1, w1), (t2, w2) = axes
    density = coincidence_density(t1[:, None], t2[None, :], geometry)
    return float(w1 @ density @ w2)


@dataclass
class CoincidencePattern:
    """Coincidence rates along a scan of detector 1 with detector 2 fixed."""

    fixed_placement: DetectorPlacement
    moving_distance: float
    offsets: np.ndarray
    rates: np.ndarray
    rate_errors: np.ndarray = None
    normalization: float = 1.0
    angles: np.ndarray = field(init=False)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rate_errors is None:
            self.rate_errors = np.zeros_like(self.rates)
        self.rate_errors = np.asarray(self.rate_errors, dtype=float)
        if np.any(self.rates < 0) or np.any(self.rate_errors < 0):
            raise DomainError("rates and their uncertainties must be non-negative")
        if len(self.rates) and not self.normalization > 0:
            raise DomainError("normalization must be positive")
        self.angles = np.atleast_1d(angle_from_position(self.offsets, self.moving_distance))

    @property
    def points(self):
        return list(zip(self.offsets.tolist(), self.rates.tolist(), self.rate_errors.tolist()))

    @property
    def peak_offset(self) -> float:
        return float(self.offsets[int(np.argmax(self.rates))])

    def to_csv(self, metadata_lines=()) -> str:
        buf = io.StringIO()
        for line in metadata_lines:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["offset_m", "angle_rad", "rate", "rate_err"])
        for x, a, r, e in zip(self.offsets, self.angles, self.rates, self.rate_errors):
            writer.writerow([repr(float(x)), repr(float(a)), repr(float(r)), repr(float(e))])
        return buf.getvalue()


def pattern_scan(
    fixed: DetectorPlacement,
    scan_offsets,
    moving_distance: float,
    geometry: ExperimentGeometry,
    lens_diameter: float = 6e-3,
    order: int = 16,
) -> CoincidencePattern:
    """Scan detector 1 across ``scan_offsets`` in the plane ``moving_distance``.

    Rates are aperture averaged and scaled so the largest equals 1.
    """
    offsets = np.asarray(list(scan_offsets), dtype=float)
    if offsets.size == 0:
        raise ConfigurationError("scan_offsets must not be empty", "pattern.scan_offsets")
    raw = np.array([
        aperture_averaged_rate(DetectorPlacement(x, moving_distance, lens_diameter), fixed, geometry, order)
        for x in offsets
    ])
    raw = np.clip(raw, 0.0, None)
    norm = float(raw.max())
    if norm <= 0:
        raise DomainError("coincidence rate vanishes over the whole scan")
    return CoincidencePattern(fixed, moving_distance, offsets, raw / norm, None, norm)


def fringe_period_sin(geometry: ExperimentGeometry) -> float:
    """Period of the interference term in sin(theta1) at fixed theta2."""
    return 2.0 * math.pi / (wavevector(geometry) * geometry.slit_separation)


def envelope_zeros(geometry: ExperimentGeometry, theta_min: float, theta_max: float) -> dict:
    """Analytic zeros of the two single-slit factors inside [theta_min, theta_max]."""
    step = geometry.wavelength / geometry.slit_width
    lo, hi = math.sin(theta_min), math.sin(theta_max)
    zeros = {}
    for label, th in (("A", geometry.incidence_angle_A), ("B", geometry.incidence_angle_B)):
        base = math.sin(th)
        orders = range(math.ceil((lo - base) / step), math.floor((hi - base) / step) + 1)
        zeros[label] = [math.asin(base + m * step) for m in orders if m != 0 and abs(base + m * step) < 1]
    return zeros
