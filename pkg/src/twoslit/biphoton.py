"""Symmetrized two-photon wavefunction behind the double slit.

Each photon crosses one slit.  The slit mode l is the transmission profile
T_l(x') carrying the transverse phase of its incidence direction,
exp(i k sin(theta_l) x'), and it is propagated paraxially:

    psi_l(x, z) = sqrt(k / (2 pi i z)) * integral T_l(x') exp(i k sin(theta_l) x')
                                          exp(i k (x - x')^2 / (2 z)) dx'

Pulling exp(i k x^2 / 2z) out of the integral leaves a smooth function of the
reduced coordinates xi = x / z and eta = 1 / z,

    F_l(xi, eta) = integral T_l(x') exp(i k [(sin theta_l - xi) x' + eta x'^2 / 2]) dx',

which is what gets evaluated (Gauss-Legendre for rectangular slits, closed
form for Gaussian ones).  The pair amplitude is

    psi(x1, x2, z) = [psi_A(x1) psi_B(x2) + psi_B(x1) psi_A(x2)] / sqrt(2)

and the guidance slope of photon j is (1/k) Im(d_j psi / psi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .geometry import ExperimentGeometry, wavevector

PROFILES = ("rect", "gaussian")


@dataclass(frozen=True)
class SlitMode:
    """One slit: centre, width, incidence tilt and transmission profile.

    For the Gaussian profile the amplitude is exp(-(x'-c)^2 / (2 sigma^2)) with
    sigma = width / sqrt(pi), which gives the same transmitted power as a
    rectangle of the same width.
    """

    center: float
    width: float
    tilt: float
    profile: str = "rect"

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("slit width must be positive")
        if self.profile not in PROFILES:
            raise DomainError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if not abs(self.tilt) < math.pi / 2:
            raise DomainError("tilt must lie in (-pi/2, pi/2)")

    @property
    def sigma(self) -> float:
        return self.width / math.sqrt(math.pi)

    @property
    def norm(self) -> float:
        """Integral of |T|^2 over the slit plane."""
        return self.width

    def mirrored(self) -> SlitMode:
        return replace(self, center=-self.center, tilt=-self.tilt)


@dataclass(frozen=True)
class TwoPhotonState:
    """Exchange-symmetric state built from two slit modes.

    ``node_floor`` is relative to the largest value |psi|^2 can take at a
    given plane; below it the guidance field is regularized and flagged.
    ``v_max`` is the clamp applied to regularized slopes.
    """

    mode_A: SlitMode
    mode_B: SlitMode
    wavevector: float
    quadrature_order: int = 64
    max_panel_phase: float = 40.0
    node_floor: float = 1e-30
    v_max: float = 10.0
    _nodes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.wavevector) and self.wavevector > 0):
            raise DomainError("wavevector must be positive")
        if self.quadrature_order < 2 or self.quadrature_order % 2:
            raise DomainError("quadrature_order must be an even integer >= 2")
        x, w = np.polynomial.legendre.leggauss(self.quadrature_order)
        # exact mirror symmetry of the node set
        x = 0.5 * (x - x[::-1])
        w = 0.5 * (w + w[::-1])
        object.__setattr__(self, "_nodes", (x, w))

    @classmethod
    def from_geometry(
        cls,
        geometry: ExperimentGeometry,
        profile: str = "rect",
        z_start: float = 1e-4,
        **kwargs,
    ) -> TwoPhotonState:
        """Default layout: slit A left of the axis carrying the photon tilted by
        ``incidence_angle_A``, slit B its mirror image.  With the default
        +/-2 degrees the two beams converge and cross just behind the slits.
        """
        half = 0.5 * geometry.slit_separation
        mode_A = SlitMode(-half, geometry.slit_width, geometry.incidence_angle_A, profile)
        mode_B = SlitMode(+half, geometry.slit_width, geometry.incidence_angle_B, profile)
        kwargs.setdefault("v_max", 10.0 * geometry.slit_separation / z_start)
        return cls(mode_A, mode_B, wavevector(geometry), **kwargs)

    @property
    def is_mirror_symmetric(self) -> bool:
        return self.mode_B == self.mode_A.mirrored()

    @property
    def nodes(self):
        return self._nodes

    @property
    def amplitude_bound(self) -> float:
        """Upper bound of |F_A F_B + F_B F_A| in reduced coordinates."""
        bound = []
        for m in (self.mode_A, self.mode_B):
            bound.append(m.width if m.profile == "rect" else m.sigma * math.sqrt(2 * math.pi))
        return 2.0 * bound[0] * bound[1]


def reduced_mode(mode: SlitMode, xi, eta, k: float, nodes=None, max_panel_phase: float = 40.0, order: int = 64):
    """F_l(xi, eta) and dF_l/dxi for arrays ``xi`` and ``eta`` (broadcast)."""
    xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
    sl = math.sin(mode.tilt)
    c = mode.center
    if mode.profile == "gaussian":
        a = 0.5 / mode.sigma**2 - 0.5j * k * eta
        b = 1j * k * ((sl - xi) + eta * c)
        d = 1j * k * ((sl - xi) * c + 0.5 * eta * c * c)
        F = np.sqrt(np.pi / a) * np.exp(b * b / (4 * a) + d)
        dF = F * (-1j * k * b / (2 * a) - 1j * k * c)
        return F, dF

    if nodes is None:
        x, w = np.polynomial.legendre.leggauss(order)
        nodes = (0.5 * (x - x[::-1]), 0.5 * (w + w[::-1]))
    r, wr = nodes
    half = 0.5 * mode.width
    # panels keep the phase excursion per Gauss-Legendre panel bounded
    span = np.abs(k * ((sl - xi) + eta * c)) * mode.width + 0.5 * k * eta * half * mode.width
    panels = np.maximum(1, np.ceil(span / max_panel_phase)).astype(int)
    F = np.empty(xi.shape, dtype=complex)
    dF = np.empty(xi.shape, dtype=complex)
    for P in np.unique(panels):
        sel = panels == P
        xs, es = xi[sel][:, None], eta[sel][:, None]
        hp = half / P
        xp = (c - half + (2 * np.arange(P)[:, None] + 1) * hp + r[None, :] * hp).ravel()
        wp = np.tile(wr * hp, P)
        phase = k * ((sl - xs) * xp + 0.5 * es * xp * xp)
        terms = wp * np.exp(1j * phase)
        F[sel] = terms.sum(axis=1)
        dF[sel] = (terms * (-1j * k * xp)).sum(axis=1)
    return F, dF


def _check_z(z):
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("propagation distance z must be positive")
    return z


def _state_mode(state: TwoPhotonState, mode: SlitMode, xi, eta):
    return reduced_mode(mode, xi, eta, state.wavevector, state.nodes, state.max_panel_phase)


def propagate_mode(mode: SlitMode, x, z, k: float, order: int = 64, max_panel_phase: float = 40.0):
    """Paraxially propagated field of one slit at transverse position ``x``, distance ``z``."""
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    F, _ = reduced_mode(mode, x / z, 1.0 / z, k, None, max_panel_phase, order)
    out = np.sqrt(k / (2j * np.pi * z)) * np.exp(0.5j * k * x * x / z) * F
    return complex(out) if out.ndim == 0 else out


def mode_gradient(mode: SlitMode, x, z, k: float, order: int = 64, max_panel_phase: float = 40.0):
    """d psi_l / dx, differentiated under the integral sign."""
    z = _check_z(z)
    x = np.asarray(x, dtype=float)
    F, dF = reduced_mode(mode, x / z, 1.0 / z, k, None, max_panel_phase, order)
    pref = np.sqrt(k / (2j * np.pi * z)) * np.exp(0.5j * k * x * x / z)
    out = pref * (1j * k * x / z * F + dF / z)
    return complex(out) if out.ndim == 0 else out


def two_photon_amplitude(state: TwoPhotonState, x1, x2, z):
    """Symmetrized pair amplitude psi(x1, x2, z)."""
    z = _check_z(z)
    x1, x2, z = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), z)
    eta = 1.0 / z
    A1, _ = _state_mode(state, state.mode_A, x1 / z, eta)
    B1, _ = _state_mode(state, state.mode_B, x1 / z, eta)
    A2, _ = _state_mode(state, state.mode_A, x2 / z, eta)
    B2, _ = _state_mode(state, state.mode_B, x2 / z, eta)
    k = state.wavevector
    pref = (k / (2j * np.pi * z)) * np.exp(0.5j * k * (x1 * x1 + x2 * x2) / z) / math.sqrt(2.0)
    out = pref * (A1 * B2 + B1 * A2)
    return complex(out) if out.ndim == 0 else out


def joint_density(state: TwoPhotonState, x1, x2, z):
    """|psi(x1, x2, z)|^2, normalized so that it integrates to one over the plane."""
    norm = state.mode_A.norm * state.mode_B.norm
    return np.abs(two_photon_amplitude(state, x1, x2, z)) ** 2 / norm


def marginal_density(state: TwoPhotonState, x, z):
    """Single-photon marginal of :func:`joint_density`.

    The two slit modes have disjoint support at the slit plane, so their
    overlap vanishes at every z and the marginal is the plain average of the
    two single-mode intensities.
    """
    a = np.abs(propagate_mode(state.mode_A, x, z, state.wavevector, state.quadrature_order, state.max_panel_phase)) ** 2
    b = np.abs(propagate_mode(state.mode_B, x, z, state.wavevector, state.quadrature_order, state.max_panel_phase)) ** 2
    return 0.5 * (a / state.mode_A.norm + b / state.mode_B.norm)


def _guidance(Fa1, dFa1, Fb1, dFb1, Fa2, Fb2):
    # slope correction of photon 1; calling it with the photons swapped gives
    # photon 2, which makes the exchange symmetry exact
    num = dFa1 * Fb2 + dFb1 * Fa2
    den = Fa1 * Fb2 + Fb1 * Fa2
    return (num.imag * den.real - num.real * den.imag) / (den.real * den.real + den.imag * den.imag)


def velocity_field(state: TwoPhotonState, x1, x2, z):
    """Guidance slopes (dx1/dz, dx2/dz) and a per-point regularization flag.

    Where |psi|^2 drops below ``node_floor`` times its upper bound, or a slope
    is not finite, each slope is clamped to [-v_max, v_max] (a non-finite one
    falls back to the free-flight slope x / z) and the flag is set.
    """
    z = _check_z(z)
    x1, x2, z = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float), z)
    eta = 1.0 / z
    k = state.wavevector
    xi1, xi2 = x1 / z, x2 / z
    A1, dA1 = _state_mode(state, state.mode_A, xi1, eta)
    B1, dB1 = _state_mode(state, state.mode_B, xi1, eta)
    A2, dA2 = _state_mode(state, state.mode_A, xi2, eta)
    B2, dB2 = _state_mode(state, state.mode_B, xi2, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = _guidance(A1, dA1, B1, dB1, A2, B2)
        g2 = _guidance(A2, dA2, B2, dB2, A1, B1)
        v1 = xi1 + g1 / (k * z)
        v2 = xi2 + g2 / (k * z)
    phi2 = np.abs(A1 * B2 + B1 * A2) ** 2
    flagged = (phi2 < state.node_floor * state.amplitude_bound**2) | ~np.isfinite(v1) | ~np.isfinite(v2)
    if np.any(flagged):
        v1 = np.where(flagged, np.clip(np.where(np.isfinite(v1), v1, xi1), -state.v_max, state.v_max), v1)
        v2 = np.where(flagged, np.clip(np.where(np.isfinite(v2), v2, xi2), -state.v_max, state.v_max), v2)
    if v1.ndim == 0:
        return float(v1), float(v2), bool(flagged)
    return v1, v2, flagged


def lens_pair_probability(state: TwoPhotonState, lens1, lens2, order: int = 24):
    """Probability that one photon crosses ``lens1`` and the other ``lens2``.

    ``lens1`` and ``lens2`` are (lo, hi, z) triples.  The two label
    assignments are added, which is exact when no single photon can cross
    both lenses (e.g. lenses on opposite sides of the axis, or far apart in
    angle).  Each lens is split into panels shorter than a quarter of the
    two-slit fringe period before Gauss-Legendre integration.
    """
    k = state.wavevector
    sep = abs(state.mode_B.center - state.mode_A.center)
    axes = []
    for lo, hi, z in (lens1, lens2):
        if not hi > lo:
            raise DomainError("lens interval must have positive length")
        fringe = 2 * math.pi * z / (k * sep)
        panels = max(1, math.ceil(4 * (hi - lo) / fringe))
        x, w = np.polynomial.legendre.leggauss(order)
        e = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(e)[:, None]
        xs = (0.5 * (e[:-1] + e[1:])[:, None] + half * x[None, :]).ravel()
        ws = (half * w[None, :]).ravel()
        A = propagate_mode(state.mode_A, xs, z, k, state.quadrature_order, state.max_panel_phase)
        B = propagate_mode(state.mode_B, xs, z, k, state.quadrature_order, state.max_panel_phase)
        axes.append((A, B, ws))
    (A1, B1, w1), (A2, B2, w2) = axes
    dens = 0.5 * np.abs(A1[:, None] * B2[None, :] + B1[:, None] * A2[None, :]) ** 2
    norm = state.mode_A.norm * state.mode_B.norm
    return float(2.0 * (w1 @ dens @ w2) / norm)
