"""Compiled kernels for the trajectory ensemble.

Mode sums use the reduced coordinates of :mod:`twoslit.biphoton`
(xi = x / z, eta = 1 / z); trajectories are integrated in z itself, so free
flight far from the slits is integrated exactly and the step size grows with
the distance.

Scalar parameters travel in one float64 vector, see ``P_*`` below.  The
Gauss-Legendre rule is passed as its non-negative half (``r``, ``wr``); the
mirror-symmetric node set lets each node pair share one sine/cosine.
"""

import math
import warnings

import numba as nb
import numpy as np

# an outdated system TBB only disables that threading layer; numba falls back to the others
warnings.filterwarnings("ignore", message="The TBB threading layer", category=nb.NumbaWarning)

P_K, P_WIDTH, P_CA, P_CB, P_SA, P_SB, P_MAXPH, P_FLOOR, P_VMAX, P_VSCALE, P_GAUSS = range(11)
N_PAR = 11

ST_OK, ST_NONFINITE, ST_CAPACITY = 0, 1, 2

_jit = nb.njit(cache=True, error_model="numpy", nogil=True)
# fast-math only where reassociation cannot break a symmetry: the mode sums
# are reached through a single call site per evaluation
_fast = nb.njit(cache=True, error_model="numpy", nogil=True, fastmath=True)


# Cody-Waite split of pi/2 for the argument reduction below
_PIO2_1 = 1.5707963267341256e+00
_PIO2_2 = 6.0771005065061922e-11
_PIO2_3 = 2.0222662487959506e-21
_TWO_OVER_PI = 0.6366197723675814


@nb.njit(cache=True, error_model="numpy", nogil=True, fastmath=True, inline="always")
def _sincos(a):
    # branch-free sine and cosine so the node loops vectorize; absolute error
    # below 1e-14 for |a| < 200, far beyond any phase met here
    n = math.floor(a * _TWO_OVER_PI + 0.5)
    r = ((a - n * _PIO2_1) - n * _PIO2_2) - n * _PIO2_3
    r2 = r * r
    sn = r * (1.0 + r2 * (-1.6666666666666666e-01 + r2 * (8.333333333333333e-03 + r2 * (
        -1.984126984126984e-04 + r2 * (2.7557319223985893e-06 + r2 * (-2.505210838544172e-08 + r2 * (
            1.6059043836821613e-10 + r2 * (-7.647163731819816e-13 + r2 * 2.8114572543455206e-15))))))))
    cs = 1.0 + r2 * (-0.5 + r2 * (4.1666666666666664e-02 + r2 * (-1.3888888888888889e-03 + r2 * (
        2.48015873015873e-05 + r2 * (-2.755731922398589e-07 + r2 * (2.08767569878681e-09 + r2 * (
            -1.1470745597729725e-11 + r2 * 4.779477332387385e-14)))))))
    q = n - 4.0 * math.floor(n * 0.25)
    if q == 1.0:
        return cs, -sn
    if q == 2.0:
        return -sn, -cs
    if q == 3.0:
        return -cs, sn
    return sn, cs


@_fast
def _plane_table(eta, k, width, r, wr):
    # rows: Re, Im of w_j h exp(i k eta u_j^2 / 2), the same times u_j, and u_j
    # itself; shared by every mode evaluated at this plane
    h = 0.5 * width
    n = r.shape[0]
    out = np.empty((5, n))
    for j in range(n):
        u = r[j] * h
        sn, cs = _sincos(0.5 * k * eta * u * u)
        wj = wr[j] * h
        out[0, j] = wj * cs
        out[1, j] = wj * sn
        out[2, j] = u * wj * cs
        out[3, j] = u * wj * sn
        out[4, j] = u
    return out


@_fast
def _panel(p, r, eq):
    # sums over the half nodes: F = sum eq cos(p u), G = sum eq u sin(p u)
    fr = 0.0
    fi = 0.0
    gr = 0.0
    gi = 0.0
    for j in range(r.shape[0]):
        sn, cs = _sincos(p * eq[4, j])
        fr += eq[0, j] * cs
        fi += eq[1, j] * cs
        gr += eq[2, j] * sn
        gi += eq[3, j] * sn
    return complex(fr, fi), complex(gr, gi)


@_fast
def _mode_rect(xi, eta, c, sl, k, width, r, wr, eq, maxph):
    h = 0.5 * width
    span = abs(k * ((sl - xi) + eta * c)) * width + 0.5 * k * eta * h * width
    P = 1 if span <= maxph else int(span / maxph) + 1
    hp = h / P
    if P > 1:
        eq = _plane_table(eta, k, 2.0 * hp, r, wr)
    Ft = 0j
    Dt = 0j
    for pn in range(P):
        cp = c - h + (2 * pn + 1) * hp
        pp = k * ((sl - xi) + eta * cp)
        F, G = _panel(pp, r, eq)
        ph0 = k * ((sl - xi) * cp + 0.5 * eta * cp * cp)
        sn, cs = _sincos(ph0)
        e0 = complex(cs, sn)
        F = 2.0 * e0 * F
        G = 2.0j * e0 * G
        Ft += F
        Dt += -1j * k * (cp * F + G)
    return Ft, Dt


@_jit
def _mode_gauss(xi, eta, c, sl, k, width):
    sigma = width / math.sqrt(math.pi)
    a = 0.5 / (sigma * sigma) - 0.5j * k * eta
    b = 1j * k * ((sl - xi) + eta * c)
    d = 1j * k * ((sl - xi) * c + 0.5 * eta * c * c)
    F = np.sqrt(math.pi / a) * np.exp(b * b / (4.0 * a) + d)
    return F, F * (-1j * k * b / (2.0 * a) - 1j * k * c)


@_jit
def _modes(xi, eta, par, r, wr, eq):
    k = par[P_K]
    width = par[P_WIDTH]
    if par[P_GAUSS] > 0.5:
        A, dA = _mode_gauss(xi, eta, par[P_CA], par[P_SA], k, width)
        B, dB = _mode_gauss(xi, eta, par[P_CB], par[P_SB], k, width)
    else:
        A, dA = _mode_rect(xi, eta, par[P_CA], par[P_SA], k, width, r, wr, eq, par[P_MAXPH])
        B, dB = _mode_rect(xi, eta, par[P_CB], par[P_SB], k, width, r, wr, eq, par[P_MAXPH])
    return A, dA, B, dB


@nb.njit(cache=True, error_model="numpy", nogil=True, inline="never")
def _guidance(A1, dA1, B1, dB1, A2, B2):
    # never inlined: photon 2 reuses it with the arguments swapped, so the
    # exchange symmetry of the slopes holds bit for bit
    # Im(num / den) through a real division: numba raises on a complex
    # division by zero, while this yields inf/nan that the caller flags
    num = dA1 * B2 + dB1 * A2
    den = A1 * B2 + B1 * A2
    return (num.imag * den.real - num.real * den.imag) / (den.real * den.real + den.imag * den.imag)


@_jit
def _field(x1, x2, z, par, r, wr):
    # slopes v_j and the guidance corrections c_j = v_j - x_j / z
    eta = 1.0 / z
    eq = _plane_table(eta, par[P_K], par[P_WIDTH], r, wr)
    xi1 = x1 * eta
    xi2 = x2 * eta
    A1 = dA1 = B1 = dB1 = A2 = dA2 = B2 = dB2 = 0j
    for j in range(2):
        A, dA, B, dB = _modes(xi1 if j == 0 else xi2, eta, par, r, wr, eq)
        if j == 0:
            A1, dA1, B1, dB1 = A, dA, B, dB
        else:
            A2, dA2, B2, dB2 = A, dA, B, dB
    kz = par[P_K] * z
    c1 = _guidance(A1, dA1, B1, dB1, A2, B2) / kz
    c2 = _guidance(A2, dA2, B2, dB2, A1, B1) / kz
    phi = A1 * B2 + B1 * A2
    flag = (phi.real * phi.real + phi.imag * phi.imag) < par[P_FLOOR]
    if flag or not (math.isfinite(c1) and math.isfinite(c2)):
        flag = True
        vmax = par[P_VMAX]
        if not math.isfinite(c1):
            c1 = 0.0
        if not math.isfinite(c2):
            c2 = 0.0
        c1 = min(vmax, max(-vmax, xi1 + c1)) - xi1
        c2 = min(vmax, max(-vmax, xi2 + c2)) - xi2
    return xi1 + c1, xi2 + c2, c1, c2, flag


@_jit
def slopes(x1, x2, z, par, r, wr):
    """dx1/dz, dx2/dz and the regularization flag at one configuration."""
    v1, v2, _c1, _c2, flag = _field(x1, x2, z, par, r, wr)
    s = par[P_VSCALE]
    return s * v1, s * v2, flag


@_jit
def _rhs(z, x1, x2, par, r, wr):
    v1, v2, _c1, _c2, flag = _field(x1, x2, z, par, r, wr)
    s = par[P_VSCALE]
    return s * v1, s * v2, flag


@_jit
def _rk4(t, x1, x2, h, par, r, wr):
    a1, a2, f1 = _rhs(t, x1, x2, par, r, wr)
    b1, b2, f2 = _rhs(t + 0.5 * h, x1 + 0.5 * h * a1, x2 + 0.5 * h * a2, par, r, wr)
    c1, c2, f3 = _rhs(t + 0.5 * h, x1 + 0.5 * h * b1, x2 + 0.5 * h * b2, par, r, wr)
    d1, d2, f4 = _rhs(t + h, x1 + h * c1, x2 + h * c2, par, r, wr)
    y1 = x1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    y2 = x2 + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    return y1, y2, f1 or f2 or f3 or f4


@_jit
def integrate_one(x1, x2, z0, zout, par, r, wr, ctl, grid, rx1, rx2):
    """Adaptive classical RK4 for dx_j/dz = v_j from z0 through every plane of ``zout``.

    Each step is taken once and as two half steps; the difference (divided by
    15) estimates the error of the two-half-step value, and the step keeps the
    Richardson-extrapolated value g + (g - f) / 15, which is fifth order.  Local
    position errors made near the slits are magnified by z_final / z in free
    flight, so the extrapolation buys the accuracy the far planes need at no
    extra field evaluations.  The accepted step ends are returned in ``grid``
    with positions ``rx1``/``rx2`` (starting point included) for replay and
    sample output.  The error of a step is |dx| / (atol + rtol |x|) in meters.
    Free flight is linear in z, which RK4 integrates exactly, so steps grow
    quickly once the field has settled into its far-field form.

    ctl = (rtol, atol, max_step, first_step, min_step, fixed_step), steps in
    meters; ``fixed_step`` is only read by the batch driver.
    Returns (status, n_grid, flagged, crossed_diff, crossed_sum, z_end, out).
    """
    rtol, atol, hmax, h, hmin = ctl[0], ctl[1], ctl[2], ctl[3], ctl[4]
    cap = grid.shape[0]
    out = np.empty((zout.shape[0], 2))
    d0 = x1 - x2
    s0 = x1 + x2
    flagged = False
    cross_d = False
    cross_s = False
    t = z0
    grid[0] = t
    rx1[0] = x1
    rx2[0] = x2
    ng = 1
    iout = 0
    while iout < zout.shape[0]:
        target = zout[iout]
        if t >= target:
            out[iout, 0] = x1
            out[iout, 1] = x2
            iout += 1
            continue
        hh = min(h, target - t)
        landing = hh == target - t
        f1, f2, fa = _rk4(t, x1, x2, hh, par, r, wr)
        m1, m2, fb = _rk4(t, x1, x2, 0.5 * hh, par, r, wr)
        g1, g2, fc = _rk4(t + 0.5 * hh, m1, m2, 0.5 * hh, par, r, wr)
        if not (math.isfinite(f1) and math.isfinite(f2) and math.isfinite(g1) and math.isfinite(g2)):
            return ST_NONFINITE, ng, flagged, cross_d, cross_s, t, out
        # Richardson estimate of the error of the two-half-step value
        e1 = abs(g1 - f1) / (atol + rtol * max(abs(g1), abs(x1)))
        e2 = abs(g2 - f2) / (atol + rtol * max(abs(g2), abs(x2)))
        err = max(e1, e2) / 15.0
        if err <= 1.0 or hh <= hmin:
            # a forced step below min_step counts as a regularized trajectory
            flagged = flagged or err > 1.0 or fa or fb or fc
            tn = target if landing else t + hh
            if ng + 1 > cap:
                return ST_CAPACITY, ng, flagged, cross_d, cross_s, t, out
            x1 = g1 + (g1 - f1) / 15.0
            x2 = g2 + (g2 - f2) / 15.0
            grid[ng] = tn
            rx1[ng] = x1
            rx2[ng] = x2
            ng += 1
            t = tn
            if (m1 - m2) * d0 < 0.0 or (x1 - x2) * d0 < 0.0:
                cross_d = True
            if (m1 + m2) * s0 < 0.0 or (x1 + x2) * s0 < 0.0:
                cross_s = True
        fac = 4.0 if err == 0.0 else min(4.0, max(0.2, 0.9 * err ** -0.2))
        if landing and err <= 1.0:
            # a step shortened to hit an output plane does not shrink the next one
            h = max(h, hh * fac)
        else:
            h = hh * fac
        h = min(h, hmax)
    return ST_OK, ng, flagged, cross_d, cross_s, t, out


@_jit
def _extrapolated(t, x1, x2, h, par, r, wr):
    # the accepted-step formula of integrate_one
    f1, f2, _fa = _rk4(t, x1, x2, h, par, r, wr)
    m1, m2, _fb = _rk4(t, x1, x2, 0.5 * h, par, r, wr)
    g1, g2, _fc = _rk4(t + 0.5 * h, m1, m2, 0.5 * h, par, r, wr)
    return g1 + (g1 - f1) / 15.0, g2 + (g2 - f2) / 15.0


@_jit
def replay(x1, x2, grid, ng, split, par, r, wr, extrapolate):
    """Redo the steps on ``grid[:ng]`` with every interval cut into ``split``
    steps, using the same step formula as the original run (the extrapolated
    one for adaptive runs, plain RK4 for constant steps)."""
    for i in range(ng - 1):
        h = (grid[i + 1] - grid[i]) / split
        t = grid[i]
        for _ in range(split):
            if extrapolate:
                x1, x2 = _extrapolated(t, x1, x2, h, par, r, wr)
            else:
                x1, x2, _f = _rk4(t, x1, x2, h, par, r, wr)
            t += h
    return x1, x2


@_jit
def integrate_fixed(x1, x2, z0, zout, step, par, r, wr, grid, rx1, rx2):
    """Classical RK4 with a constant step, shortened only to land on each plane.

    Same outputs as :func:`integrate_one`.
    """
    cap = grid.shape[0]
    out = np.empty((zout.shape[0], 2))
    d0 = x1 - x2
    s0 = x1 + x2
    flagged = False
    cross_d = False
    cross_s = False
    t = z0
    grid[0] = t
    rx1[0] = x1
    rx2[0] = x2
    ng = 1
    iout = 0
    while iout < zout.shape[0]:
        target = zout[iout]
        if t >= target:
            out[iout, 0] = x1
            out[iout, 1] = x2
            iout += 1
            continue
        hh = min(step, target - t)
        y1, y2, fa = _rk4(t, x1, x2, hh, par, r, wr)
        if not (math.isfinite(y1) and math.isfinite(y2)):
            return ST_NONFINITE, ng, flagged, cross_d, cross_s, t, out
        t = target if hh == target - t else t + hh
        x1 = y1
        x2 = y2
        flagged = flagged or fa
        if (x1 - x2) * d0 < 0.0:
            cross_d = True
        if (x1 + x2) * s0 < 0.0:
            cross_s = True
        if ng >= cap:
            return ST_CAPACITY, ng, flagged, cross_d, cross_s, t, out
        grid[ng] = t
        rx1[ng] = x1
        rx2[ng] = x2
        ng += 1
    return ST_OK, ng, flagged, cross_d, cross_s, t, out


@nb.njit(cache=True, error_model="numpy", parallel=True)
def integrate_batch(x1s, x2s, z0, zout, par, r, wr, ctl, cap, split):
    """Integrate every pair; pairs are independent so results do not depend
    on how the loop is scheduled.  A positive ``ctl[5]`` selects constant
    steps.  ``split`` > 0 additionally replays each accepted grid with refined
    steps and returns the refined final positions.
    """
    n = x1s.shape[0]
    nout = zout.shape[0]
    pos = np.empty((n, nout, 2))
    refined = np.full((n, 2), np.nan)
    status = np.zeros(n, np.int64)
    nsteps = np.zeros(n, np.int64)
    flagged = np.zeros(n, np.bool_)
    cross_d = np.zeros(n, np.bool_)
    cross_s = np.zeros(n, np.bool_)
    t_fail = np.zeros(n)
    for i in nb.prange(n):
        grid = np.empty(cap)
        rx1 = np.empty(cap)
        rx2 = np.empty(cap)
        if ctl[5] > 0.0:
            st, ng, fl, cd, cs, tf, out = integrate_fixed(x1s[i], x2s[i], z0, zout, ctl[5], par, r, wr, grid, rx1, rx2)
        else:
            st, ng, fl, cd, cs, tf, out = integrate_one(x1s[i], x2s[i], z0, zout, par, r, wr, ctl, grid, rx1, rx2)
        status[i] = st
        nsteps[i] = ng - 1
        flagged[i] = fl
        cross_d[i] = cd
        cross_s[i] = cs
        t_fail[i] = tf
        for j in range(nout):
            pos[i, j, 0] = out[j, 0]
            pos[i, j, 1] = out[j, 1]
        if split > 0 and st == ST_OK:
            a, b = replay(x1s[i], x2s[i], grid, ng, split, par, r, wr, ctl[5] <= 0.0)
            refined[i, 0] = a
            refined[i, 1] = b
    return pos, status, nsteps, flagged, cross_d, cross_s, t_fail, refined


@nb.njit(cache=True, error_model="numpy", parallel=True)
def mode_values(xs, z, par, r, wr):
    """F_A and F_B at x / z for every entry of ``xs`` (shared plane z)."""
    n = xs.shape[0]
    A = np.empty(n, np.complex128)
    B = np.empty(n, np.complex128)
    eta = 1.0 / z
    eq = _plane_table(eta, par[P_K], par[P_WIDTH], r, wr)
    for i in nb.prange(n):
        a, _da, b, _db = _modes(xs[i] * eta, eta, par, r, wr, eq)
        A[i] = a
        B[i] = b
    return A, B


@nb.njit(cache=True, error_model="numpy", parallel=True)
def slopes_batch(x1s, x2s, z, par, r, wr):
    n = x1s.shape[0]
    v1 = np.empty(n)
    v2 = np.empty(n)
    fl = np.empty(n, np.bool_)
    for i in nb.prange(n):
        a, b, f = slopes(x1s[i], x2s[i], z, par, r, wr)
        v1[i] = a
        v2[i] = b
        fl[i] = f
    return v1, v2, fl
