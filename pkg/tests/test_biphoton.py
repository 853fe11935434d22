import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twoslit.biphoton import (
    SlitMode,
    TwoPhotonState,
    joint_density,
    lens_pair_probability,
    marginal_density,
    mode_gradient,
    propagate_mode,
    reduced_mode,
    two_photon_amplitude,
    velocity_field,
)
from twoslit.errors import DomainError
from twoslit.geometry import ExperimentGeometry
from twoslit.sqm_pattern import coincidence_density, slit_amplitude
from twoslit.trajectories import kernel_velocity


def mp_reduced(mode, xi, eta, k, dps=25):
    """Direct adaptive quadrature of the reduced slit integral."""
    with mp.workdps(dps):
        sl = mp.sin(mp.mpf(mode.tilt))
        c, w = mp.mpf(mode.center), mp.mpf(mode.width)
        f = lambda x: mp.expj(k * ((sl - xi) * x + eta * x * x / 2))
        if mode.profile == "rect":
            pts = mp.linspace(c - w / 2, c + w / 2, 41)
            return complex(mp.quad(f, pts))
        s = mp.mpf(mode.sigma)
        g = lambda x: mp.exp(-(x - c) ** 2 / (2 * s * s)) * f(x)
        return complex(mp.quad(g, mp.linspace(c - 12 * s, c + 12 * s, 81)))


@pytest.mark.parametrize("profile", ["rect", "gaussian"])
@pytest.mark.parametrize("z", [1e-4, 1e-3, 0.05, 1.5])
def test_reduced_mode_matches_quadrature(geometry, profile, z):
    state = TwoPhotonState.from_geometry(geometry, profile)
    k = state.wavevector
    for mode in (state.mode_A, state.mode_B):
        for x in (-3e-4 * z / 1e-3 if z < 1 else -0.05, mode.center, 1e-5, 0.04 * z):
            F, _ = reduced_mode(mode, x / z, 1 / z, k, state.nodes, 1.5 * state.quadrature_order)
            ref = mp_reduced(mode, x / z, 1 / z, k)
            assert abs(complex(F) - ref) <= 1e-10 * mode.width


@pytest.mark.parametrize("profile", ["rect", "gaussian"])
def test_reduced_derivative_matches_difference(geometry, profile):
    state = TwoPhotonState.from_geometry(geometry, profile)
    k = state.wavevector
    xi = np.array([-0.03, 0.0, 0.02, 0.4])
    h = 1e-7
    for eta in (1.0, 1e3):
        _, dF = reduced_mode(state.mode_A, xi, eta, k)
        Fp, _ = reduced_mode(state.mode_A, xi + h, eta, k)
        Fm, _ = reduced_mode(state.mode_A, xi - h, eta, k)
        fd = (Fp - Fm) / (2 * h)
        assert np.all(np.abs(dF - fd) <= 1e-6 * np.abs(dF).max())


def test_gradient_matches_difference(state):
    k = state.wavevector
    x = np.array([-2e-3, 1e-4, 5e-3])
    z = 0.2
    h = 1e-9
    d = mode_gradient(state.mode_B, x, z, k)
    fd = (propagate_mode(state.mode_B, x + h, z, k) - propagate_mode(state.mode_B, x - h, z, k)) / (2 * h)
    assert np.allclose(d, fd, rtol=1e-5, atol=1e-6 * np.abs(d).max())


def test_fraunhofer_single_slit(geometry, state):
    z = 1.5
    k = state.wavevector
    s = math.sin(geometry.incidence_angle_A)
    step = geometry.wavelength / geometry.slit_width
    # paraxial propagation is a function of x / z, which plays the role of sin(theta)
    sin_t = np.linspace(s - step, s + step, 801)[1:-1]
    intensity = np.abs(propagate_mode(state.mode_A, z * sin_t, z, k)) ** 2 * (2 * math.pi * z / k) / geometry.slit_width**2
    env = slit_amplitude(np.arcsin(sin_t), geometry.incidence_angle_A, geometry) ** 2
    strong = env > 0.1
    assert np.max(np.abs(intensity - env)[strong] / env[strong]) < 0.01
    assert np.max(np.abs(intensity - env)) < 1e-3


def test_mode_norm_conserved(geometry):
    # Parseval: a mode keeps the power transmitted by its slit; the Gaussian
    # profile keeps the tails negligible inside a finite window
    state = TwoPhotonState.from_geometry(geometry, "gaussian")
    k = state.wavevector
    for z in (1e-3, 0.05):
        half = 0.12 * z + 2e-4
        x = np.linspace(-half, half, 200_001)
        p = np.abs(propagate_mode(state.mode_A, x, z, k)) ** 2
        assert np.trapezoid(p, x) == pytest.approx(state.mode_A.width, rel=1e-6)


def test_marginal_is_integral_of_joint(geometry):
    state = TwoPhotonState.from_geometry(geometry, "gaussian")
    z = 5e-3
    x2 = np.linspace(-1e-3, 1e-3, 100_001)
    for x1 in (-4e-4, 0.0, 3e-4):
        integral = np.trapezoid(joint_density(state, x1, x2, z), x2)
        assert integral == pytest.approx(float(marginal_density(state, x1, z)), rel=1e-6)


def test_two_photon_matches_coincidence_density(geometry, state):
    k = state.wavevector
    z1, z2 = 1.21, 1.5
    x1 = np.linspace(-0.12, 0.12, 241)
    x2 = -0.055
    amp = two_photon_amplitude(state, x1, x2 * z1 / z2, z1)  # same angles, common plane
    c = coincidence_density(np.arctan(x1 / z1), math.atan(x2 / z2), geometry)
    scale = 0.5 * (k / (2 * math.pi * z1)) ** 2 * geometry.slit_width**4
    assert np.max(np.abs(np.abs(amp) ** 2 / scale - c)) < 0.01 * c.max()


def test_two_photon_exchange_symmetric(state):
    rng = np.random.default_rng(3)
    x1, x2 = rng.uniform(-1e-3, 1e-3, (2, 50))
    for z in (1e-4, 0.3):
        a = two_photon_amplitude(state, x1, x2, z)
        b = two_photon_amplitude(state, x2, x1, z)
        assert np.allclose(a, b, rtol=1e-14, atol=0)


def velocity_oracle(state, x1, x2, z, h=1e-10):
    # slope from the phase gradient of the full pair amplitude
    k = state.wavevector
    p = two_photon_amplitude(state, x1, x2, z)
    d1 = (two_photon_amplitude(state, x1 + h, x2, z) - two_photon_amplitude(state, x1 - h, x2, z)) / (2 * h)
    d2 = (two_photon_amplitude(state, x1, x2 + h, z) - two_photon_amplitude(state, x1, x2 - h, z)) / (2 * h)
    return (d1 / p).imag / k, (d2 / p).imag / k


@pytest.mark.parametrize("z,spread", [(2e-3, 3e-4), (0.05, 3e-3), (1.2, 0.05)])
def test_velocity_matches_phase_gradient(state, z, spread):
    rng = np.random.default_rng(4)
    x1, x2 = rng.uniform(-spread, spread, (2, 20))
    v1, v2, flag = velocity_field(state, x1, x2, z)
    o1, o2 = velocity_oracle(state, x1, x2, z)
    assert not flag.any()
    assert np.allclose(v1, o1, rtol=1e-5, atol=1e-7)
    assert np.allclose(v2, o2, rtol=1e-5, atol=1e-7)


@given(st.floats(-2e-3, 2e-3), st.floats(-2e-3, 2e-3), st.floats(1e-4, 2.0))
def test_velocity_exchange_exact(x1, x2, z):
    state = TwoPhotonState.from_geometry(ExperimentGeometry())
    a1, a2, _ = velocity_field(state, x1, x2, z)
    b1, b2, _ = velocity_field(state, x2, x1, z)
    assert a1 == b2 and a2 == b1
    k1, k2, _ = kernel_velocity(state, [x1], [x2], z)
    l1, l2, _ = kernel_velocity(state, [x2], [x1], z)
    assert k1[0] == l2[0] and k2[0] == l1[0]


@given(st.floats(-2e-3, 2e-3), st.floats(-2e-3, 2e-3), st.floats(1e-4, 2.0))
def test_velocity_mirror(x1, x2, z):
    state = TwoPhotonState.from_geometry(ExperimentGeometry())
    a1, a2, _ = velocity_field(state, x1, x2, z)
    b1, b2, _ = velocity_field(state, -x1, -x2, z)
    scale = max(abs(a1), abs(a2), 1e-3)
    assert abs(a1 + b1) <= 1e-9 * scale and abs(a2 + b2) <= 1e-9 * scale


@pytest.mark.parametrize("profile", ["rect", "gaussian"])
@pytest.mark.parametrize("z", [1e-4, 1e-3, 0.02, 1.5])
def test_kernel_agrees_with_reference(geometry, profile, z):
    state = TwoPhotonState.from_geometry(geometry, profile)
    rng = np.random.default_rng(5)
    spread = max(3e-4, 0.06 * z)
    x1, x2 = rng.uniform(-spread, spread, (2, 200))
    v1, v2, f = velocity_field(state, x1, x2, z)
    k1, k2, g = kernel_velocity(state, x1, x2, z)
    ok = ~f
    scale = np.maximum(np.abs(v1), 1.0)
    assert np.all(np.abs(k1 - v1)[ok] <= 1e-9 * scale[ok])
    assert np.all(np.abs(k2 - v2)[ok] <= 1e-9 * np.maximum(np.abs(v2), 1.0)[ok])
    assert np.array_equal(f, g)


def test_node_floor_regularizes(geometry):
    state = TwoPhotonState.from_geometry(geometry, node_floor=1.0, v_max=0.01)
    v1, v2, flag = velocity_field(state, np.array([1e-3, -2e-3]), np.array([0.0, 1e-3]), 0.5)
    assert flag.all()
    assert np.all(np.abs(v1) <= 0.01) and np.all(np.abs(v2) <= 0.01)
    k1, k2, g = kernel_velocity(state, [1e-3, -2e-3], [0.0, 1e-3], 0.5)
    assert g.all() and np.all(np.abs(k1) <= 0.01)


def test_lens_pair_probability_near_slits(state):
    # just behind the slits each photon is still on its own side
    z = 1e-4
    p = lens_pair_probability(state, (-9e-5, -1e-5, z), (1e-5, 9e-5, z))
    assert p == pytest.approx(1.0, abs=0.05)
    far = lens_pair_probability(state, (-9e-5, -1e-5, z), (-9e-5, -1e-5, z))
    assert far < 0.05


def test_lens_pair_probability_mirror(state):
    a = lens_pair_probability(state, (-0.02, -0.014, 1.21), (-0.058, -0.052, 1.5))
    b = lens_pair_probability(state, (0.014, 0.02, 1.21), (0.052, 0.058, 1.5))
    assert a == pytest.approx(b, rel=1e-9)
    assert 0 < a < 1


@pytest.mark.parametrize("z", [0.0, -1.0])
def test_nonpositive_z_rejected(state, z):
    with pytest.raises(DomainError):
        two_photon_amplitude(state, 0.0, 0.0, z)
    with pytest.raises(DomainError):
        velocity_field(state, 0.0, 0.0, z)
    with pytest.raises(DomainError):
        propagate_mode(state.mode_A, 0.0, z, state.wavevector)


@pytest.mark.parametrize("kw", [{"width": 0.0}, {"profile": "triangle"}, {"tilt": 2.0}])
def test_slit_mode_validation(kw):
    args = {"center": 0.0, "width": 1e-5, "tilt": 0.0, **kw}
    with pytest.raises(DomainError):
        SlitMode(**args)


def test_state_properties(state):
    assert state.is_mirror_symmetric
    assert state.mode_A.center < 0 < state.mode_B.center
    assert state.mode_A.tilt > 0 > state.mode_B.tilt
    assert state.amplitude_bound == pytest.approx(2 * 1e-5 * 1e-5)
    with pytest.raises(DomainError):
        TwoPhotonState(state.mode_A, state.mode_B, 1.0, quadrature_order=7)
