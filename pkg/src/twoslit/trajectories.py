"""Bohmian trajectory ensembles for the two-photon state.

Pairs are sampled from |psi|^2 just behind the slits, carried along the
guidance field with classical fourth-order Runge-Kutta, and read out at the
detector planes.  The heavy lifting happens in :mod:`twoslit._kernels`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .biphoton import TwoPhotonState, reduced_mode
from .errors import ConfigurationError, IntegrationError, SamplingError
from .geometry import DetectorPlacement

A_LEFT_B_RIGHT = "A_left_B_right"
OTHER = "other"


@dataclass(frozen=True)
class IntegratorSettings:
    """Step control for the trajectory integrator (all lengths in meters).

    The default is adaptive: every step is also done as two half steps, the
    half-step result is kept and the difference bounds its error by
    ``atol + rtol * |x|``.  Setting ``fixed_step`` switches to plain
    constant-step RK4 instead.
    """

    rtol: float = 5e-11
    atol: float = 1e-18
    max_step: float = 0.5
    first_step: float = 1e-7
    min_step: float = 1e-13
    fixed_step: float | None = None
    capacity: int = 400_000

    def __post_init__(self):
        for name in ("rtol", "max_step", "first_step", "min_step"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"must be positive, got {value!r}", f"dbb.{name}")
        if not (math.isfinite(self.atol) and self.atol >= 0):
            raise ConfigurationError("must be non-negative", "dbb.atol")
        if self.fixed_step is not None and not (math.isfinite(self.fixed_step) and self.fixed_step > 0):
            raise ConfigurationError("must be positive", "dbb.fixed_step")
        if self.capacity < 16:
            raise ConfigurationError("must be at least 16", "dbb.capacity")

    def control(self) -> np.ndarray:
        return np.array([self.rtol, self.atol, self.max_step, self.first_step, self.min_step,
                         self.fixed_step or 0.0])


@dataclass(frozen=True)
class SamplingSettings:
    """Where initial pairs are drawn.

    ``halfwidth`` truncates the transverse axis at z_start; ``safety`` scales
    the rejection envelope found on a grid.
    """

    z_start: float = 1e-4
    halfwidth: float = 1e-3
    safety: float = 1.1
    chunk: int = 8192
    min_efficiency: float = 1e-6

    def __post_init__(self):
        if not (math.isfinite(self.z_start) and self.z_start > 0):
            raise ConfigurationError("must be positive", "dbb.z_start")
        if not self.halfwidth > 0:
            raise ConfigurationError("must be positive", "dbb.halfwidth")
        if not self.safety >= 1:
            raise ConfigurationError("must be at least 1", "sampling.safety")
        if self.chunk < 1:
            raise ConfigurationError("must be positive", "sampling.chunk")


@dataclass
class TrajectoryPair:
    """One integrated pair: rows of (z, x1, x2) plus diagnostics."""

    samples: np.ndarray
    node_flag: bool
    initial_slit_assignment: str
    crossed_exchange: bool = False
    crossed_mirror: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)

    @property
    def z(self):
        return self.samples[:, 0]

    @property
    def x1(self):
        return self.samples[:, 1]

    @property
    def x2(self):
        return self.samples[:, 2]

    def final(self) -> tuple[float, float]:
        return float(self.samples[-1, 1]), float(self.samples[-1, 2])

    def sign_conserved(self, mirror: bool = False) -> bool:
        """True when sign(x1 - x2) (or sign(x1 + x2) with ``mirror``) never flips."""
        q = self.x1 + self.x2 if mirror else self.x1 - self.x2
        return not (np.any(q > 0) and np.any(q < 0))


@dataclass
class Ensemble:
    """Positions of integrated pairs at a set of planes."""

    initial: np.ndarray
    planes: np.ndarray
    positions: np.ndarray  # (n, len(planes), 2)
    flagged: np.ndarray
    crossed_exchange: np.ndarray
    crossed_mirror: np.ndarray
    n_steps: np.ndarray
    refined: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.initial)

    def at(self, z: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.planes, z, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"no output plane at z = {z}")
        return self.positions[:, idx[0], :]


@dataclass
class FitReport:
    """Histogram of trajectory positions against the quadrature of |psi|^2."""

    kind: str
    z_probe: float
    chi2: float
    dof: int
    chi2_per_dof: float
    sup_norm: float
    n_in_range: int
    n_bins: int


@dataclass
class EnsembleReport:
    n_pairs: int
    n_flagged: int
    same_semiplane_coincidence_fraction: float
    opposite_semiplane_coincidence_fraction: float
    same_semiplane_fraction_unflagged: float
    opposite_semiplane_fraction_unflagged: float
    crossing_violations: int
    exchange_crossings: int
    mirror_crossings: int
    confinement_breaches: float
    placements: list = field(default_factory=list)
    seed: int | None = None
    mean_steps: float = 0.0

    def __post_init__(self):
        for name in ("same_semiplane_coincidence_fraction", "opposite_semiplane_coincidence_fraction",
                     "same_semiplane_fraction_unflagged", "opposite_semiplane_fraction_unflagged",
                     "confinement_breaches"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        doc = dict(extra)
        doc["report"] = self.to_dict()
        return json.dumps(doc, indent=2, sort_keys=True)


# -- kernel plumbing -------------------------------------------------------

def kernel_params(state: TwoPhotonState, velocity_scale: float = 1.0):
    """Parameter vector and half node set for the compiled kernels."""
    a, b = state.mode_A, state.mode_B
    if a.width != b.width or a.profile != b.profile:
        raise ConfigurationError("the trajectory kernel needs slits of equal width and profile")
    par = np.zeros(K.N_PAR)
    par[K.P_K] = state.wavevector
    par[K.P_WIDTH] = a.width
    par[K.P_CA] = a.center
    par[K.P_CB] = b.center
    par[K.P_SA] = math.sin(a.tilt)
    par[K.P_SB] = math.sin(b.tilt)
    par[K.P_MAXPH] = 1.5 * state.quadrature_order
    par[K.P_FLOOR] = state.node_floor * state.amplitude_bound**2
    par[K.P_VMAX] = state.v_max
    par[K.P_VSCALE] = velocity_scale
    par[K.P_GAUSS] = 1.0 if a.profile == "gaussian" else 0.0
    r, w = state.nodes
    half = state.quadrature_order // 2
    return par, np.ascontiguousarray(r[half:]), np.ascontiguousarray(w[half:])


def kernel_velocity(state: TwoPhotonState, x1, x2, z, velocity_scale: float = 1.0):
    """Compiled counterpart of :func:`twoslit.biphoton.velocity_field`."""
    par, r, w = kernel_params(state, velocity_scale)
    x1, x2 = np.broadcast_arrays(np.atleast_1d(np.asarray(x1, float)), np.atleast_1d(np.asarray(x2, float)))
    return K.slopes_batch(np.ascontiguousarray(x1), np.ascontiguousarray(x2), float(z), par, r, w)


# -- sampling --------------------------------------------------------------

class _SideProposal:
    """Mixture of a uniform over the slit neighbourhood and a truncated Cauchy
    on one semiplane [lo, hi]; heavy enough to cover the 1/d^2 Fresnel tails.
    """

    UNIFORM_WEIGHT = 0.7

    def __init__(self, center, width, lo, hi):
        self.c, self.g = center, width
        self.lo, self.hi = lo, hi
        self.ua, self.ub = max(lo, center - width), min(hi, center + width)
        self.Fa = 0.5 + math.atan((lo - center) / width) / math.pi
        self.Fb = 0.5 + math.atan((hi - center) / width) / math.pi

    def draw(self, u_mix, u):
        uni = self.ua + u * (self.ub - self.ua)
        cau = self.c + self.g * np.tan(math.pi * (self.Fa + u * (self.Fb - self.Fa) - 0.5))
        x = np.where(u_mix < self.UNIFORM_WEIGHT, uni, cau)
        return np.clip(x, self.lo, self.hi)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.ua) & (x <= self.ub)
        uni = np.where(inside, 1.0 / (self.ub - self.ua), 0.0)
        cau = 1.0 / (math.pi * self.g * (1.0 + ((x - self.c) / self.g) ** 2)) / (self.Fb - self.Fa)
        return self.UNIFORM_WEIGHT * uni + (1.0 - self.UNIFORM_WEIGHT) * cau

    def grid(self, n_core=20001, n_tail=4000):
        core = np.linspace(self.c - 4 * self.g, self.c + 4 * self.g, n_core)
        far = max(abs(self.lo - self.c), abs(self.hi - self.c))
        d = np.geomspace(self.g, far + self.g, n_tail)
        # the proposal density drops just outside the uniform part
        edges = [self.ua, self.ub, np.nextafter(self.ua, -np.inf), np.nextafter(self.ub, np.inf), self.lo, self.hi]
        pts = np.concatenate([core, self.c - d, self.c + d, edges])
        return np.unique(pts[(pts >= self.lo) & (pts <= self.hi)])


def _semiplanes(state: TwoPhotonState, halfwidth: float):
    ca, cb = state.mode_A.center, state.mode_B.center
    if not ca * cb < 0:
        raise ConfigurationError("slit centres must lie on opposite sides of the axis")
    if max(abs(ca), abs(cb)) + state.mode_A.width >= halfwidth:
        raise ConfigurationError("sampling window must contain both slits", "dbb.halfwidth")
    side = lambda c: (-halfwidth, 0.0) if c < 0 else (0.0, halfwidth)
    return side(ca), side(cb)


def sample_initial_pairs(state: TwoPhotonState, n: int, seed: int, settings: SamplingSettings | None = None):
    """Draw ``n`` pairs (x1, x2) from |psi(x1, x2, z_start)|^2.

    Photon A is kept on the semiplane of slit A and photon B on that of slit
    B; the labels are then swapped with probability 1/2, which is exact for
    an exchange-symmetric density.  Candidates come in fixed-size chunks, each
    with its own random stream derived from (seed, chunk index), so the output
    does not depend on how the work is split.
    Returns an array of shape (n, 2).
    """
    settings = settings or SamplingSettings()
    if n < 1:
        raise ConfigurationError(f"need at least one pair, got {n}", "dbb.n_pairs")
    z = settings.z_start
    par, r, w = kernel_params(state)
    (la, ha), (lb, hb) = _semiplanes(state, settings.halfwidth)
    qa = _SideProposal(state.mode_A.center, state.mode_A.width, la, ha)
    qb = _SideProposal(state.mode_B.center, state.mode_B.width, lb, hb)

    def sup_ratio(prop, which):
        xs = prop.grid()
        A, B = K.mode_values(xs, z, par, r, w)
        f = np.abs(A if which == "A" else B) ** 2
        return float(np.max(f / prop.pdf(xs)))

    m_a, m_b = sup_ratio(qa, "A"), sup_ratio(qb, "B")
    m_ab, m_ba = sup_ratio(qa, "B"), sup_ratio(qb, "A")
    bound = settings.safety * (math.sqrt(m_a * m_b) + math.sqrt(m_ab * m_ba)) ** 2
    if not (math.isfinite(bound) and bound > 0):
        raise SamplingError("rejection envelope is degenerate")

    out = np.empty((n, 2))
    filled = 0
    drawn = 0
    chunk_id = 0
    while filled < n:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk_id,))))
        u = rng.random((settings.chunk, 6))
        x1 = qa.draw(u[:, 0], u[:, 1])
        x2 = qb.draw(u[:, 2], u[:, 3])
        A1, B1 = K.mode_values(x1, z, par, r, w)
        A2, B2 = K.mode_values(x2, z, par, r, w)
        target = np.abs(A1 * B2 + B1 * A2) ** 2
        ratio = target / (qa.pdf(x1) * qb.pdf(x2))
        if np.any(ratio > bound):
            raise SamplingError("rejection envelope exceeded; raise sampling.safety")
        keep = u[:, 4] * bound <= ratio
        swap = u[:, 5] < 0.5
        pairs = np.where(swap[:, None], np.column_stack([x2, x1]), np.column_stack([x1, x2]))[keep]
        take = min(len(pairs), n - filled)
        out[filled:filled + take] = pairs[:take]
        filled += take
        drawn += settings.chunk
        chunk_id += 1
        if drawn >= 64 * settings.chunk and filled / drawn < settings.min_efficiency:
            raise SamplingError(f"rejection efficiency {filled / drawn:.2e} is below {settings.min_efficiency:g}")
        if filled == 0 and drawn >= int(4 / settings.min_efficiency):
            raise SamplingError("no candidate accepted; check the geometry")
    return out


def slit_assignment(state: TwoPhotonState, x1: float) -> str:
    """Label of the initial configuration: photon 1 on slit A's side or not."""
    return A_LEFT_B_RIGHT if (x1 < 0) == (state.mode_A.center < 0) else OTHER


# -- integration -----------------------------------------------------------

def _raise_on_status(status, t_fail, offset=0):
    bad = np.flatnonzero(status != K.ST_OK)
    if bad.size:
        i = int(bad[0])
        what = "non-finite state" if status[i] == K.ST_NONFINITE else "step budget exhausted"
        raise IntegrationError(f"pair {i + offset}: {what} at z = {t_fail[i]:.6g} m", z=float(t_fail[i]))


def integrate_pair(
    state: TwoPhotonState,
    initial,
    z_final: float,
    step: float | None = None,
    settings: IntegratorSettings | None = None,
    z_start: float = 1e-4,
    velocity_scale: float = 1.0,
    planes=(),
) -> TrajectoryPair:
    """Integrate one pair from ``z_start`` to ``z_final`` and keep every step.

    With ``step`` the integration uses constant RK4 steps of that length (the
    last one shortened to land on ``z_final``); otherwise the adaptive
    controller of ``settings`` is used.  Extra ``planes`` are always hit
    exactly.
    """
    settings = settings or IntegratorSettings()
    if step is not None:
        if not step > 0:
            raise ConfigurationError("step must be positive", "dbb.fixed_step")
    if not z_final > z_start:
        raise ConfigurationError("z_final must exceed z_start", "z_final")
    x1, x2 = (float(v) for v in initial)
    par, r, w = kernel_params(state, velocity_scale)
    zout = np.unique(np.array([p for p in planes if z_start < p < z_final] + [z_final], dtype=float))
    cap = settings.capacity
    grid, rx1, rx2 = np.empty(cap), np.empty(cap), np.empty(cap)
    if step is not None:
        st, ng, fl, cd, cs, zf, _ = K.integrate_fixed(x1, x2, z_start, zout, step, par, r, w, grid, rx1, rx2)
    else:
        st, ng, fl, cd, cs, zf, _ = K.integrate_one(x1, x2, z_start, zout, par, r, w, settings.control(), grid, rx1, rx2)
    _raise_on_status(np.array([st]), np.array([zf]))
    samples = np.column_stack([grid[:ng], rx1[:ng], rx2[:ng]])
    return TrajectoryPair(samples, bool(fl), slit_assignment(state, x1), bool(cd), bool(cs))


def integrate_ensemble(
    state: TwoPhotonState,
    initial,
    planes,
    settings: IntegratorSettings | None = None,
    z_start: float = 1e-4,
    velocity_scale: float = 1.0,
    refine: int = 0,
) -> Ensemble:
    """Integrate many pairs and record their positions at every plane.

    ``refine`` > 0 also replays each accepted step grid with that many
    substeps per step and stores the final positions in ``Ensemble.refined``.
    """
    settings = settings or IntegratorSettings()
    initial = np.ascontiguousarray(np.asarray(initial, dtype=float).reshape(-1, 2))
    zout = np.unique(np.asarray(planes, dtype=float))
    if zout.size == 0 or zout[0] <= z_start:
        raise ConfigurationError("output planes must lie beyond z_start", "dbb.probe_planes")
    par, r, w = kernel_params(state, velocity_scale)
    res = K.integrate_batch(
        np.ascontiguousarray(initial[:, 0]), np.ascontiguousarray(initial[:, 1]),
        z_start, zout, par, r, w, settings.control(), settings.capacity, int(refine),
    )
    pos, status, nsteps, flagged, cross_d, cross_s, t_fail, refined = res
    _raise_on_status(status, t_fail)
    return Ensemble(initial, zout, pos, flagged, cross_d, cross_s, nsteps, refined if refine else None)


def step_halving_check(
    state: TwoPhotonState,
    initial,
    z_final: float,
    settings: IntegratorSettings | None = None,
    z_start: float = 1e-4,
) -> dict:
    """Largest change of the final positions when every accepted step is halved.

    Only non-flagged pairs enter the statistics.
    """
    ens = integrate_ensemble(state, initial, [z_final], settings, z_start, refine=2)
    ok = ~ens.flagged
    diff = np.abs(ens.positions[:, -1, :] - ens.refined).max(axis=1)[ok]
    return {
        "n_pairs": int(ok.sum()),
        "max_change_m": float(diff.max()) if diff.size else 0.0,
        "median_change_m": float(np.median(diff)) if diff.size else 0.0,
        "mean_steps": float(ens.n_steps.mean()),
    }


# -- equivariance ------------------------------------------------------------

def probe_range(state: TwoPhotonState, z: float) -> float:
    """Half-width of the histogram window at distance ``z``: both beams out to
    one and a half diffraction lobes."""
    lam = 2 * math.pi / state.wavevector
    tilt = max(abs(math.sin(state.mode_A.tilt)), abs(math.sin(state.mode_B.tilt)))
    w = max(state.mode_A.width, state.mode_B.width)
    return z * (tilt + 1.5 * lam / w) + max(abs(state.mode_A.center), abs(state.mode_B.center)) + w


def _bin_modes(state: TwoPhotonState, edges, z, order=4):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[None, :]
    wx = 0.5 * (hi - lo) * weights[None, :]
    A, _ = reduced_mode(state.mode_A, x / z, 1.0 / z, state.wavevector, state.nodes, 1.5 * state.quadrature_order)
    B, _ = reduced_mode(state.mode_B, x / z, 1.0 / z, state.wavevector, state.nodes, 1.5 * state.quadrature_order)
    return A, B, wx


def _pool(observed, expected, min_expected=5.0):
    # merge neighbouring cells (in the given order) until each expects >= 5
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp:
            obs[-1] += o_acc
            exp[-1] += e_acc
        else:
            obs.append(o_acc)
            exp.append(e_acc)
    return np.array(obs), np.array(exp)


def equivariance_check(
    state: TwoPhotonState,
    positions,
    z_probe: float,
    bins: int = 50,
    kind: str = "marginal",
    window: float | None = None,
) -> FitReport:
    """Chi-square of the trajectory histogram at ``z_probe`` against |psi|^2.

    ``kind`` is "marginal" (x1 alone, ``bins`` bins) or "joint" ((x1, x2) on a
    ``bins`` x ``bins`` grid).  Expected counts come from 4-point
    Gauss-Legendre integration of |psi|^2 over each bin, renormalized to the
    pairs that land inside the window.  Cells expecting fewer than five counts
    are merged with their neighbours.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pos) == 0:
        raise ConfigurationError("empty ensemble")
    if kind not in ("marginal", "joint"):
        raise ConfigurationError(f"unknown histogram kind {kind!r}")
    R = window if window is not None else probe_range(state, z_probe)
    edges = np.linspace(-R, R, bins + 1)
    A, B, wx = _bin_modes(state, edges, z_probe)
    if kind == "marginal":
        dens = 0.5 * (np.abs(A) ** 2 + np.abs(B) ** 2)
        p = (dens * wx).sum(axis=1)
        counts, _ = np.histogram(pos[:, 0], bins=edges)
    else:
        # |A(x1) B(x2) + B(x1) A(x2)|^2 on the tensor grid of bin nodes
        amp = A[:, None, :, None] * B[None, :, None, :] + B[:, None, :, None] * A[None, :, None, :]
        w2 = wx[:, None, :, None] * wx[None, :, None, :]
        p = (np.abs(amp) ** 2 * w2).sum(axis=(2, 3))
        counts, _, _ = np.histogram2d(pos[:, 0], pos[:, 1], bins=[edges, edges])
    n_in = int(counts.sum())
    if n_in == 0:
        raise ConfigurationError("no trajectory inside the histogram window")
    expected = n_in * p / p.sum()
    obs, exp = _pool(counts.ravel(), expected.ravel())
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = max(len(obs) - 1, 1)
    sup = float(np.max(np.abs(counts - expected)) / n_in)
    return FitReport(kind, float(z_probe), chi2, dof, chi2 / dof, sup, n_in, len(obs))


# -- coincidences ----------------------------------------------------------

def _in_lens(x, placement: DetectorPlacement):
    lo, hi = placement.edges
    return (x >= lo) & (x <= hi)


def coincidence_mask(ensemble: Ensemble, p1: DetectorPlacement, p2: DetectorPlacement):
    """Pairs giving a coincidence between the two lenses, either photon on either lens."""
    a = ensemble.at(p1.plane_distance)
    b = ensemble.at(p2.plane_distance)
    direct = _in_lens(a[:, 0], p1) & _in_lens(b[:, 1], p2)
    swapped = _in_lens(a[:, 1], p1) & _in_lens(b[:, 0], p2)
    return direct | swapped


def semiplane_breaches(ensemble: Ensemble, width: float) -> np.ndarray:
    """Pairs in which a photon ends more than ``width`` beyond the axis from
    the side it started on."""
    start = np.sign(ensemble.initial)
    end = ensemble.positions[:, -1, :]
    return np.any(start * end < -width, axis=1)


def ensemble_report(
    state: TwoPhotonState,
    ensemble: Ensemble,
    placements: tuple[DetectorPlacement, DetectorPlacement],
    seed: int | None = None,
) -> EnsembleReport:
    """Coincidence fractions for ``placements`` and for placement 1 mirrored.

    The placements decide which of the two fractions they measure: lenses on
    the same side of the axis give the same-semiplane fraction, the mirrored
    layout the other one.
    """
    p1, p2 = placements
    same_side = (p1.lateral_offset < 0) == (p2.lateral_offset < 0)
    hit = coincidence_mask(ensemble, p1, p2)
    hit_m = coincidence_mask(ensemble, p1.mirrored(), p2)
    same, opposite = (hit, hit_m) if same_side else (hit_m, hit)
    ok = ~ensemble.flagged
    n_ok = max(int(ok.sum()), 1)
    ex = ensemble.crossed_exchange & ok
    mi = ensemble.crossed_mirror & ok
    violations = ex | mi if state.is_mirror_symmetric else ex
    width = max(state.mode_A.width, state.mode_B.width)
    return EnsembleReport(
        n_pairs=ensemble.n,
        n_flagged=int(ensemble.flagged.sum()),
        same_semiplane_coincidence_fraction=float(same.mean()),
        opposite_semiplane_coincidence_fraction=float(opposite.mean()),
        same_semiplane_fraction_unflagged=float((same & ok).sum() / n_ok),
        opposite_semiplane_fraction_unflagged=float((opposite & ok).sum() / n_ok),
        crossing_violations=int(violations.sum()),
        exchange_crossings=int(ex.sum()),
        mirror_crossings=int(mi.sum()),
        confinement_breaches=float((semiplane_breaches(ensemble, width) & ok).sum() / n_ok),
        placements=[asdict(p) for p in placements],
        seed=seed,
        mean_steps=float(ensemble.n_steps.mean()),
    )


def ensemble_coincidence_rate(
    state: TwoPhotonState,
    placements: tuple[DetectorPlacement, DetectorPlacement],
    n: int,
    seed: int,
    settings: IntegratorSettings | None = None,
    sampling: SamplingSettings | None = None,
    extra_planes=(),
):
    """Sample, integrate to both detector planes and count coincidences.

    Returns the report and the ensemble (for further diagnostics).
    """
    sampling = sampling or SamplingSettings()
    initial = sample_initial_pairs(state, n, seed, sampling)
    planes = [p.plane_distance for p in placements] + list(extra_planes)
    ens = integrate_ensemble(state, initial, planes, settings, sampling.z_start)
    return ensemble_report(state, ens, placements, seed), ens


def trajectories_csv(pairs) -> str:
    """Per-trajectory dump with columns pair, z, x1, x2."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "z", "x1", "x2"])
    for i, tp in enumerate(pairs):
        for z, a, b in tp.samples:
            w.writerow([i, repr(float(z)), repr(float(a)), repr(float(b))])
    return buf.getvalue()
