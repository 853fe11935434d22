import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twoslit.errors import ConfigurationError, DomainError
from twoslit.geometry import DetectorPlacement, ExperimentGeometry, position_from_angle
from twoslit.sqm_pattern import (
    CoincidencePattern,
    aperture_averaged_rate,
    coincidence_density,
    envelope_zeros,
    fringe_period_sin,
    pattern_scan,
    slit_amplitude,
)

DEG2 = math.radians(2.0)
angles = st.floats(-0.1, 0.1, allow_nan=False)


def mp_amplitude(theta, theta_i, geometry, dps=50):
    """sin(u)/u in extended precision, from the float inputs."""
    with mp.workdps(dps):
        k = 2 * mp.pi / mp.mpf(geometry.wavelength)
        u = k * mp.mpf(geometry.slit_width) / 2 * (mp.sin(mp.mpf(theta)) - mp.sin(mp.mpf(theta_i)))
        return mp.sin(u) / u if u != 0 else mp.mpf(1)


def factored(t1, t2, g):
    # |a(1)b(2) + a(2)b(1) e^{i k s (sin t2 - sin t1)}|^2 with numpy's normalized sinc
    k = 2 * np.pi / g.wavelength
    amp = lambda t, ti: np.sinc(k * g.slit_width / 2 * (np.sin(t) - np.sin(ti)) / np.pi)
    a = amp(t1, g.incidence_angle_A) * amp(t2, g.incidence_angle_B)
    b = amp(t2, g.incidence_angle_A) * amp(t1, g.incidence_angle_B)
    return np.abs(a + b * np.exp(1j * k * g.slit_separation * (np.sin(t2) - np.sin(t1)))) ** 2, a * a + b * b


def test_amplitude_at_incidence_is_one(geometry):
    for th in (DEG2, -DEG2, 0.0, 0.3):
        assert slit_amplitude(th, th, geometry) == 1.0


def test_amplitude_opposite_incidence(geometry):
    value = slit_amplitude(-DEG2, DEG2, geometry)
    ref = mp_amplitude(-DEG2, DEG2, geometry)
    assert abs(value - float(ref)) <= 1e-12 * abs(float(ref))
    half_kw = math.pi * geometry.slit_width / geometry.wavelength
    assert half_kw * (math.sin(-DEG2) - math.sin(DEG2)) == pytest.approx(-3.1239, abs=1e-3)
    assert value > 0


def test_amplitude_series_branch_matches_mpmath(geometry):
    # angles whose u falls below the series cutoff
    for d in (1e-12, 1e-9, 1e-7, -2e-7):
        th = DEG2 + d
        assert slit_amplitude(th, DEG2, geometry) == pytest.approx(float(mp_amplitude(th, DEG2, geometry)), rel=1e-15)


@given(angles, angles)
def test_amplitude_matches_mpmath(t, ti):
    g = ExperimentGeometry()
    ref = float(mp_amplitude(t, ti, g, dps=30))
    assert slit_amplitude(t, ti, g) == pytest.approx(ref, rel=1e-12, abs=1e-15)
    assert abs(slit_amplitude(t, ti, g)) <= 1.0


def test_first_envelope_zero(geometry):
    step = geometry.wavelength / geometry.slit_width
    assert step == pytest.approx(0.0702, rel=1e-12)
    root = math.asin(math.sin(DEG2) + step)
    assert abs(slit_amplitude(root, DEG2, geometry)) < 1e-12
    zeros = envelope_zeros(geometry, -0.2, 0.2)
    assert any(abs(z - math.asin(math.sin(-DEG2) + step)) < 1e-12 for z in zeros["B"])
    assert any(abs(z - math.asin(math.sin(DEG2) - step)) < 1e-12 for z in zeros["A"])


def test_amplitude_rejects_grazing(geometry):
    with pytest.raises(DomainError):
        slit_amplitude(math.pi / 2, 0.0, geometry)


def test_density_peak_terms(geometry):
    c = coincidence_density(DEG2, -DEG2, geometry)
    g = slit_amplitude(-DEG2, DEG2, geometry)
    assert c == pytest.approx(1.0 + g**4 + 2 * g * g * math.cos(geometry.k * geometry.slit_separation * 2 * math.sin(DEG2)), rel=1e-14)
    assert g**4 == pytest.approx(1.08e-9, rel=0.01)
    assert abs(c - 1.0) < 1e-4


@given(angles)
def test_density_diagonal(t):
    g = ExperimentGeometry()
    expected = 4 * slit_amplitude(t, g.incidence_angle_A, g) ** 2 * slit_amplitude(t, g.incidence_angle_B, g) ** 2
    assert coincidence_density(t, t, g) == pytest.approx(expected, rel=1e-13, abs=1e-300)


def test_density_properties_random(geometry):
    rng = np.random.default_rng(1)
    t1, t2 = rng.uniform(-0.1, 0.1, (2, 10_000))
    c = coincidence_density(t1, t2, geometry)
    assert c.min() >= -1e-12
    assert np.all(np.abs(c - coincidence_density(t2, t1, geometry)) <= 1e-14 * np.abs(c))
    assert np.all(np.abs(c - coincidence_density(-t1, -t2, geometry)) <= 1e-12 * np.abs(c))
    ref, scale = factored(t1, t2, geometry)
    assert np.all(np.abs(c - ref) <= 1e-12 * np.maximum(np.abs(ref), 1e-300))


@given(angles, angles)
def test_density_matches_factored_oracle(t1, t2):
    g = ExperimentGeometry()
    ref, scale = factored(t1, t2, g)
    # the cross term can cancel the two direct terms, so compare on their scale
    assert abs(coincidence_density(t1, t2, g) - ref) <= 1e-12 * max(ref, scale * 1e-3, 1e-300)


def test_fringe_period(geometry):
    period = fringe_period_sin(geometry)
    assert abs(period - 7.02e-3) < 1e-9
    # C at fixed theta2 repeats after one period when the envelopes are frozen
    ks = geometry.k * geometry.slit_separation
    s1 = np.linspace(-0.05, 0.05, 11)
    assert np.allclose(np.cos(ks * (s1 + period)), np.cos(ks * s1), atol=1e-9)


def test_aperture_point_detector_limit(geometry):
    p1 = DetectorPlacement(-0.017, 1.21, 0.0)
    p2 = DetectorPlacement(-0.055, 1.5, 0.0)
    assert aperture_averaged_rate(p1, p2, geometry) == coincidence_density(p1.center_angle, p2.center_angle, geometry)
    tiny = aperture_averaged_rate(DetectorPlacement(-0.017, 1.21, 1e-7), DetectorPlacement(-0.055, 1.5, 1e-7), geometry)
    assert tiny == pytest.approx(coincidence_density(p1.center_angle, p2.center_angle, geometry), rel=1e-6)


def test_aperture_order_convergence(geometry):
    fixed = DetectorPlacement(-0.055, 1.5)
    worst = 0.0
    for x in np.arange(-0.12, 0.1201, 0.002):
        p = DetectorPlacement(float(x), 1.21)
        a = aperture_averaged_rate(p, fixed, geometry, 16)
        b = aperture_averaged_rate(p, fixed, geometry, 32)
        worst = max(worst, abs(a - b) / abs(b))
    assert worst < 1e-6


def test_aperture_order_validation(geometry):
    with pytest.raises(ConfigurationError):
        aperture_averaged_rate(DetectorPlacement(0.0, 1.21), DetectorPlacement(0.0, 1.5), geometry, 1)


def test_same_semiplane_rate_positive(geometry):
    r = aperture_averaged_rate(DetectorPlacement(-0.017, 1.21), DetectorPlacement(-0.055, 1.5), geometry)
    assert r > 0 and math.isfinite(r)


def test_scan_peak_at_two_degrees(geometry):
    target = position_from_angle(DEG2, 1.21)
    offsets = np.round(np.arange(-0.12, 0.1201, 0.002), 12)
    pat = pattern_scan(DetectorPlacement(-0.055, 1.5), offsets, 1.21, geometry)
    assert abs(pat.peak_offset - target) <= 0.002
    assert pat.rates.max() == 1.0
    assert np.all(pat.rates >= 0)


def test_scan_fixed_at_minus_two_degrees_peaks_at_plus_two(geometry):
    fixed = DetectorPlacement(position_from_angle(-DEG2, 1.5), 1.5)
    target = position_from_angle(DEG2, 1.21)
    offsets = [target - 0.004, target - 0.002, target, target + 0.002, target + 0.004]
    pat = pattern_scan(fixed, offsets, 1.21, geometry)
    assert pat.peak_offset == target


def test_scan_mirror_symmetry(geometry):
    offsets = np.linspace(-0.1, 0.1, 41)
    a = pattern_scan(DetectorPlacement(-0.055, 1.5), offsets, 1.21, geometry)
    b = pattern_scan(DetectorPlacement(0.055, 1.5), -offsets, 1.21, geometry)
    assert np.allclose(a.rates, b.rates, rtol=1e-12, atol=1e-15)


def test_scan_rejects_empty(geometry):
    with pytest.raises(ConfigurationError, match="scan_offsets"):
        pattern_scan(DetectorPlacement(-0.055, 1.5), [], 1.21, geometry)


def test_pattern_csv(geometry):
    pat = pattern_scan(DetectorPlacement(-0.055, 1.5), [-0.01, 0.0, 0.01], 1.21, geometry)
    text = pat.to_csv(["a = 1"])
    lines = text.splitlines()
    assert lines[0] == "# a = 1"
    assert lines[1] == "offset_m,angle_rad,rate,rate_err"
    assert len(lines) == 5
    assert all(float(x.split(",")[3]) == 0.0 for x in lines[2:])
    assert len(pat.points) == 3


def test_pattern_rejects_negative_rates(geometry):
    with pytest.raises(DomainError):
        CoincidencePattern(DetectorPlacement(0.0, 1.5), 1.21, [0.0], [-1.0])
