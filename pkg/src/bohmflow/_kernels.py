"""Numba kernels: guidance fields, Jacobians, Newton steps, adaptive integration.

Everything here is nopython-jitted and free of Python objects so that long
integrations and per-sample Newton searches run at native speed.  Model
dispatch uses an integer kind plus a flat parameter vector:

    kind 0 (single node):  p = [a, b, c, omega_x, omega_y]
    kind 1 (two qubit):    p = [c1, c2, a0, omega_x, omega_y]

The two-qubit field uses the closed form in terms of A, B, G with the
exponentials rescaled by exp(-max(4 f_x, 4 f_y)); the rescaling cancels in
every ratio, so the field stays finite far outside the effective support
where e.g. exp(4 f_x) alone would overflow.
"""

import math

import numpy as np
from numba import njit

SINGLE_NODE = 0
TWO_QUBIT = 1

# integration status codes
COMPLETED = 0
STALLED = 1
ABORTED = 2

# integration modes
MODE_POSITION = 0
MODE_VARIATIONAL = 1
MODE_SHADOW = 2
MODE_VARIATIONAL2 = 3

LOG_FLOOR_DEFAULT = math.log(1e-300)

# Dormand-Prince 5(4): stage coefficients, 5th-order weights, error weights,
# and the 4th-order dense-output polynomial matrix (theta, theta^2, ...).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
])
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])
_DP_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@njit(cache=True)
def vel_jac_k(kind, p, x, y, t):
    """Velocity and spatial Jacobian: (vx, vy, j11, j12, j21, j22).

    Returns NaNs when the point sits exactly on a node.
    """
    if kind == SINGLE_NODE:
        a, b, c, wx, wy = p[0], p[1], p[2], p[3], p[4]
        beta = math.sqrt(2.0 * wx) * b
        gam = 2.0 * math.sqrt(wx * wy) * c
        c1t = math.cos(wx * t)
        s1t = math.sin(wx * t)
        cpt = math.cos((wx + wy) * t)
        spt = math.sin((wx + wy) * t)
        # W = a + beta x e^{-i wx t} + gam x y e^{-i (wx+wy) t}
        wr = a + beta * x * c1t + gam * x * y * cpt
        wi = -beta * x * s1t - gam * x * y * spt
        m2 = wr * wr + wi * wi
        if m2 <= 0.0:
            nan = math.nan
            return nan, nan, nan, nan, nan, nan
        wxr = beta * c1t + gam * y * cpt
        wxi = -beta * s1t - gam * y * spt
        wyr = gam * x * cpt
        wyi = -gam * x * spt
        # rx = Wx / W, ry = Wy / W
        rxr = (wxr * wr + wxi * wi) / m2
        rxi = (wxi * wr - wxr * wi) / m2
        ryr = (wyr * wr + wyi * wi) / m2
        ryi = (wyi * wr - wyr * wi) / m2
        vx = rxi
        vy = ryi
        j11 = -2.0 * rxr * rxi
        j22 = -2.0 * ryr * ryi
        # J12 = Im((Wxy - Wx ry)/W) with Wxy = gam e^{-i(wx+wy)t}
        zr = gam * cpt - (wxr * ryr - wxi * ryi)
        zi = -gam * spt - (wxr * ryi + wxi * ryr)
        j12 = (zi * wr - zr * wi) / m2
        return vx, vy, j11, j12, j12, j22

    c1, c2, a0, wx, wy = p[0], p[1], p[2], p[3], p[4]
    rx = math.sqrt(2.0 * wx) * a0
    ry = math.sqrt(2.0 * wy) * a0
    cxt = math.cos(wx * t)
    sxt = math.sin(wx * t)
    cyt = math.cos(wy * t)
    syt = math.sin(wy * t)
    fx = rx * cxt * x
    gx = rx * sxt * x
    fy = ry * cyt * y
    gy = ry * syt * y
    Fx = rx * cxt
    Gx = rx * sxt
    Fy = ry * cyt
    Gy = ry * syt
    m = 4.0 * fx if fx > fy else 4.0 * fy
    e1 = math.exp(4.0 * fx - m)
    e2 = math.exp(4.0 * fy - m)
    e12 = math.exp(2.0 * fx + 2.0 * fy - m)
    ph = 2.0 * (gx - gy)
    s = math.sin(ph)
    co = math.cos(ph)
    tq = 2.0 * c1 * c2 * e12
    A = tq * s
    B = c1 * c1 * e1 - c2 * c2 * e2
    G = tq * co + c1 * c1 * e1 + c2 * c2 * e2
    if G <= 0.0:
        nan = math.nan
        return nan, nan, nan, nan, nan, nan
    Axp = tq * (2.0 * Fx * s + 2.0 * Gx * co)
    Bxp = 4.0 * Fx * c1 * c1 * e1
    Gxp = tq * (2.0 * Fx * co - 2.0 * Gx * s) + Bxp
    Ayp = tq * (2.0 * Fy * s - 2.0 * Gy * co)
    Byp = -4.0 * Fy * c2 * c2 * e2
    Gyp = tq * (2.0 * Fy * co + 2.0 * Gy * s) - Byp
    nx = A * cxt + B * sxt
    ny = A * cyt + B * syt
    g2 = G * G
    vx = -rx * nx / G
    vy = ry * ny / G
    j11 = -rx * ((Axp * cxt + Bxp * sxt) * G - nx * Gxp) / g2
    j12 = -rx * ((Ayp * cxt + Byp * sxt) * G - nx * Gyp) / g2
    j21 = ry * ((Axp * cyt + Bxp * syt) * G - ny * Gxp) / g2
    j22 = ry * ((Ayp * cyt + Byp * syt) * G - ny * Gyp) / g2
    return vx, vy, j11, j12, j21, j22


@njit(cache=True)
def vel_k(kind, p, x, y, t):
    """Velocity only: (vx, vy); NaNs at a node."""
    if kind == SINGLE_NODE:
        a, b, c, wx, wy = p[0], p[1], p[2], p[3], p[4]
        beta = math.sqrt(2.0 * wx) * b
        gam = 2.0 * math.sqrt(wx * wy) * c
        c1t = math.cos(wx * t)
        s1t = math.sin(wx * t)
        cpt = math.cos((wx + wy) * t)
        spt = math.sin((wx + wy) * t)
        wr = a + beta * x * c1t + gam * x * y * cpt
        wi = -beta * x * s1t - gam * x * y * spt
        m2 = wr * wr + wi * wi
        if m2 <= 0.0:
            return math.nan, math.nan
        wxr = beta * c1t + gam * y * cpt
        wxi = -beta * s1t - gam * y * spt
        wyr = gam * x * cpt
        wyi = -gam * x * spt
        return (wxi * wr - wxr * wi) / m2, (wyi * wr - wyr * wi) / m2

    c1, c2, a0, wx, wy = p[0], p[1], p[2], p[3], p[4]
    rx = math.sqrt(2.0 * wx) * a0
    ry = math.sqrt(2.0 * wy) * a0
    cxt = math.cos(wx * t)
    sxt = math.sin(wx * t)
    cyt = math.cos(wy * t)
    syt = math.sin(wy * t)
    fx = rx * cxt * x
    gx = rx * sxt * x
    fy = ry * cyt * y
    gy = ry * syt * y
    m = 4.0 * fx if fx > fy else 4.0 * fy
    e1 = math.exp(4.0 * fx - m)
    e2 = math.exp(4.0 * fy - m)
    e12 = math.exp(2.0 * fx + 2.0 * fy - m)
    ph = 2.0 * (gx - gy)
    tq = 2.0 * c1 * c2 * e12
    A = tq * math.sin(ph)
    B = c1 * c1 * e1 - c2 * c2 * e2
    G = tq * math.cos(ph) + c1 * c1 * e1 + c2 * c2 * e2
    if G <= 0.0:
        return math.nan, math.nan
    return -rx * (A * cxt + B * sxt) / G, ry * (A * cyt + B * syt) / G


@njit(cache=True)
def log_psi_sq_k(kind, p, x, y, t):
    """ln |Psi|^2, evaluated in log space (never overflows; -inf at a node)."""
    if kind == SINGLE_NODE:
        a, b, c, wx, wy = p[0], p[1], p[2], p[3], p[4]
        beta = math.sqrt(2.0 * wx) * b
        gam = 2.0 * math.sqrt(wx * wy) * c
        wr = a + beta * x * math.cos(wx * t) + gam * x * y * math.cos((wx + wy) * t)
        wi = -beta * x * math.sin(wx * t) - gam * x * y * math.sin((wx + wy) * t)
        m2 = wr * wr + wi * wi
        if m2 <= 0.0:
            return -math.inf
        return (0.5 * math.log(wx * wy / (math.pi * math.pi))
                - wx * x * x - wy * y * y + math.log(m2))

    c1, c2, a0, wx, wy = p[0], p[1], p[2], p[3], p[4]
    rx = math.sqrt(2.0 * wx) * a0
    ry = math.sqrt(2.0 * wy) * a0
    fx = rx * math.cos(wx * t) * x
    gx = rx * math.sin(wx * t) * x
    fy = ry * math.cos(wy * t) * y
    gy = ry * math.sin(wy * t) * y
    m = 4.0 * fx if fx > fy else 4.0 * fy
    e1 = math.exp(4.0 * fx - m)
    e2 = math.exp(4.0 * fy - m)
    e12 = math.exp(2.0 * fx + 2.0 * fy - m)
    G = 2.0 * c1 * c2 * e12 * math.cos(2.0 * (gx - gy)) + c1 * c1 * e1 + c2 * c2 * e2
    # |Y_L(x)|^2 |Y_L(y)|^2 = sqrt(wx wy)/pi * exp(-wx (x-xL)^2 - wy (y-yL)^2)
    xL = -math.sqrt(2.0 / wx) * a0 * math.cos(wx * t)
    yL = -math.sqrt(2.0 / wy) * a0 * math.cos(wy * t)
    base = (0.5 * math.log(wx * wy / (math.pi * math.pi))
            - wx * (x - xL) * (x - xL) - wy * (y - yL) * (y - yL))
    if G <= 0.0:
        return -math.inf
    return base + m + math.log(G)


@njit(cache=True)
def newton_fixed_point(kind, p, t, xn, yn, vnx, vny, u0, v0, tol, maxit, cap):
    """Damped Newton search for v(xn+u, yn+v, t) = (vnx, vny).

    Returns (u, v, residual, converged).  `cap` bounds the step length to
    keep iterates from vaulting across the nodal singularity.
    """
    u = u0
    v = v0
    for _ in range(maxit):
        vx, vy, j11, j12, j21, j22 = vel_jac_k(kind, p, xn + u, yn + v, t)
        if not (math.isfinite(vx) and math.isfinite(vy)):
            return u, v, math.inf, False
        fx = vx - vnx
        fy = vy - vny
        r = math.hypot(fx, fy)
        if r < tol:
            return u, v, r, True
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            return u, v, r, False
        du = (j22 * fx - j12 * fy) / det
        dv = (-j21 * fx + j11 * fy) / det
        step = math.hypot(du, dv)
        if step > cap:
            du *= cap / step
            dv *= cap / step
        u -= du
        v -= dv
        if abs(u) > 1e4 or abs(v) > 1e4:
            return u, v, math.inf, False
    vx, vy, j11, j12, j21, j22 = vel_jac_k(kind, p, xn + u, yn + v, t)
    if not (math.isfinite(vx) and math.isfinite(vy)):
        return u, v, math.inf, False
    r = math.hypot(vx - vnx, vy - vny)
    return u, v, r, r < tol


@njit(cache=True)
def _rhs(kind, p, mode, t, y, f):
    """Fill f with the state derivative; returns False when undefined."""
    vx, vy = vel_k(kind, p, y[0], y[1], t)
    if not (math.isfinite(vx) and math.isfinite(vy)):
        return False
    f[0] = vx
    f[1] = vy
    if mode == MODE_VARIATIONAL or mode == MODE_VARIATIONAL2:
        vx2, vy2, j11, j12, j21, j22 = vel_jac_k(kind, p, y[0], y[1], t)
        if not (math.isfinite(j11) and math.isfinite(j12)
                and math.isfinite(j21) and math.isfinite(j22)):
            return False
        f[2] = j11 * y[2] + j12 * y[3]
        f[3] = j21 * y[2] + j22 * y[3]
        if mode == MODE_VARIATIONAL2:
            f[4] = j11 * y[4] + j12 * y[5]
            f[5] = j21 * y[4] + j22 * y[5]
        else:
            f[4] = 0.0
            f[5] = 0.0
    elif mode == MODE_SHADOW:
        wx2, wy2 = vel_k(kind, p, y[2], y[3], t)
        if not (math.isfinite(wx2) and math.isfinite(wy2)):
            return False
        f[2] = wx2
        f[3] = wy2
        f[4] = 0.0
        f[5] = 0.0
    else:
        f[2] = 0.0
        f[3] = 0.0
        f[4] = 0.0
        f[5] = 0.0
    return True


@njit(cache=True)
def dp45_integrate(kind, p, mode, x0, y0, w0, z0, t0, dt_sample, n_samples,
                   renorm_every, delta0, atol, rtol, hmin, log_floor,
                   max_clamped_underflow):
    """Adaptive Dormand-Prince 5(4) with dense-output sampling.

    Samples the state on the uniform grid t0 + i*dt_sample, i = 0..n_samples.
    When renorm_every > 0, deviation (mode 1) or companion offset (mode 2)
    is renormalized exactly at every renorm_every-th sample and the interval
    log-growth is recorded.

    Returns (status, n_done, xs, ys, flags, stretch, n_stretch) where n_done
    is the last filled sample index and flags marks samples produced by
    steps that were force-accepted at the minimum step size.
    """
    dim = 2 if mode == MODE_POSITION else 4
    ns = n_samples
    xs = np.full(ns + 1, np.nan)
    ys = np.full(ns + 1, np.nan)
    flags = np.zeros(ns + 1, dtype=np.uint8)
    n_ren = ns // renorm_every if renorm_every > 0 else 0
    stretch = np.full(max(n_ren, 1), np.nan)

    y = np.empty(4)
    ynew = np.empty(4)
    ystage = np.empty(4)
    f = np.empty(4)
    K = np.empty((7, 4))
    y[0] = x0
    y[1] = y0
    y[2] = w0
    y[3] = z0

    xs[0] = y[0]
    ys[0] = y[1]
    if ns == 0:
        return COMPLETED, 0, xs, ys, flags, stretch, 0

    tf = t0 + ns * dt_sample
    t = t0
    isamp = 1
    iren = 0
    # norm of the deviation at the start of the current renorm interval
    base_norm = math.hypot(y[2], y[3]) if mode == MODE_VARIATIONAL else delta0

    if not _rhs(kind, p, mode, t, y, f):
        return ABORTED, 0, xs, ys, flags, stretch, 0
    for j in range(dim):
        K[0, j] = f[j]

    h = dt_sample if dt_sample < 1e-3 else 1e-3
    stall = 0
    rejected = False
    status = COMPLETED

    while t < tf - 1e-12 * (1.0 + abs(tf)):
        clamped = False
        if h < hmin:
            h = hmin
            clamped = True
        # land exactly on the next renormalization instant (or the end)
        tb = tf
        if renorm_every > 0 and iren < n_ren:
            tb = t0 + (iren + 1) * renorm_every * dt_sample
        hit = False
        if t + h >= tb - 1e-12 * (1.0 + abs(tb)):
            h = tb - t
            hit = True

        # stages 2..6
        bad = False
        for s in range(1, 6):
            for j in range(dim):
                acc = 0.0
                for q in range(s):
                    acc += _DP_A[s, q] * K[q, j]
                ystage[j] = y[j] + h * acc
            if not _rhs(kind, p, mode, t + _DP_C[s] * h, ystage, f):
                bad = True
                break
            for j in range(dim):
                K[s, j] = f[j]
        if not bad:
            for j in range(dim):
                acc = 0.0
                for q in range(6):
                    acc += _DP_B[q] * K[q, j]
                ynew[j] = y[j] + h * acc
            if _rhs(kind, p, mode, t + h, ynew, f):
                for j in range(dim):
                    K[6, j] = f[j]
            else:
                bad = True

        if bad:
            err = math.inf
        else:
            err = 0.0
            for j in range(dim):
                e = 0.0
                for q in range(7):
                    e += _DP_E[q] * K[q, j]
                e *= h
                sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
                err += (e / sc) * (e / sc)
            err = math.sqrt(err / dim)

        if err <= 1.0 or clamped:
            if bad:
                # field undefined even at the minimum step: cannot continue
                status = ABORTED
                break
            accepted_clamped = clamped and err > 1.0
            tprev = t
            t = tb if hit else t + h
            # fill samples inside (tprev, t] via the 4th-order dense output
            while isamp <= ns:
                ts = t0 + isamp * dt_sample
                if ts > t + 1e-12 * (1.0 + abs(t)):
                    break
                if abs(ts - t) <= 1e-12 * (1.0 + abs(t)):
                    xs[isamp] = ynew[0]
                    ys[isamp] = ynew[1]
                else:
                    th = (ts - tprev) / h
                    if th > 1.0:
                        th = 1.0
                    vx_acc = 0.0
                    vy_acc = 0.0
                    for q in range(7):
                        poly = th * (_DP_P[q, 0] + th * (_DP_P[q, 1]
                                     + th * (_DP_P[q, 2] + th * _DP_P[q, 3])))
                        vx_acc += poly * K[q, 0]
                        vy_acc += poly * K[q, 1]
                    xs[isamp] = y[0] + h * vx_acc
                    ys[isamp] = y[1] + h * vy_acc
                if accepted_clamped:
                    flags[isamp] = 1
                isamp += 1

            for j in range(dim):
                y[j] = ynew[j]
                K[0, j] = K[6, j]

            # renormalization exactly at the boundary
            if hit and renorm_every > 0 and iren < n_ren and \
                    abs(t - (t0 + (iren + 1) * renorm_every * dt_sample)) <= 1e-9 * (1.0 + abs(t)):
                if mode == MODE_VARIATIONAL:
                    nrm = math.hypot(y[2], y[3])
                    if nrm <= 0.0 or not math.isfinite(nrm):
                        status = ABORTED
                        break
                    stretch[iren] = math.log(nrm / base_norm)
                    y[2] /= nrm
                    y[3] /= nrm
                    base_norm = 1.0
                elif mode == MODE_SHADOW:
                    dx = y[2] - y[0]
                    dy = y[3] - y[1]
                    nrm = math.hypot(dx, dy)
                    if nrm <= 0.0 or not math.isfinite(nrm):
                        status = ABORTED
                        break
                    stretch[iren] = math.log(nrm / delta0)
                    y[2] = y[0] + delta0 * dx / nrm
                    y[3] = y[1] + delta0 * dy / nrm
                iren += 1
                if not _rhs(kind, p, mode, t, y, f):
                    status = ABORTED
                    break
                for j in range(dim):
                    K[0, j] = f[j]

            if accepted_clamped:
                if log_psi_sq_k(kind, p, y[0], y[1], t) < log_floor:
                    stall += 1
                    if stall > max_clamped_underflow:
                        status = STALLED
                        break
                else:
                    stall = 0
            else:
                stall = 0

            if err > 1e-300:
                fac = 0.9 * err ** -0.2
            else:
                fac = 5.0
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            if rejected and fac > 1.0:
                fac = 1.0
            rejected = False
            h = h * fac
        else:
            rejected = True
            if math.isfinite(err) and err > 1e-300:
                fac = 0.9 * err ** -0.2
                if fac < 0.2:
                    fac = 0.2
                h = h * fac
            else:
                h = h * 0.2

    n_done = isamp - 1
    return status, n_done, xs, ys, flags, stretch, iren


@njit(cache=True)
def frozen_comoving_curve(kind, p, t, x0, y0, vnx, vny, sgn, ds, n_max,
                          arc_length, box):
    """Integrate the frozen-time co-moving field with fixed-step RK4.

    State is inertial (x, y); the field sgn*(v(x,y,t) - vn) is autonomous in
    the fictitious parameter s (sgn = -1 integrates backward).  Stops at the
    requested polyline arc length or when the point leaves the box around
    the start.  Returns (pts, n).
    """
    pts = np.empty((n_max, 2))
    x = x0
    y = y0
    pts[0, 0] = x
    pts[0, 1] = y
    total = 0.0
    n = 1
    for _ in range(n_max - 1):
        # RK4 on the unit-speed field (streamline parameterized by arc
        # length); normalizing each stage keeps the step ds independent of
        # the exponential growth of the co-moving field away from the saddle
        ok1, f1x, f1y = _unit_field(kind, p, t, x, y, vnx, vny, sgn)
        if not ok1:
            break
        ok2, f2x, f2y = _unit_field(kind, p, t, x + 0.5 * ds * f1x,
                                    y + 0.5 * ds * f1y, vnx, vny, sgn)
        ok3, f3x, f3y = _unit_field(kind, p, t, x + 0.5 * ds * f2x,
                                    y + 0.5 * ds * f2y, vnx, vny, sgn)
        ok4, f4x, f4y = _unit_field(kind, p, t, x + ds * f3x, y + ds * f3y,
                                    vnx, vny, sgn)
        if not (ok2 and ok3 and ok4):
            break
        xn = x + ds / 6.0 * (f1x + 2.0 * f2x + 2.0 * f3x + f4x)
        yn = y + ds / 6.0 * (f1y + 2.0 * f2y + 2.0 * f3y + f4y)
        total += math.hypot(xn - x, yn - y)
        x = xn
        y = yn
        pts[n, 0] = x
        pts[n, 1] = y
        n += 1
        if total >= arc_length:
            break
        if abs(x - x0) > box or abs(y - y0) > box:
            break
    return pts, n


@njit(cache=True)
def _unit_field(kind, p, t, x, y, vnx, vny, sgn):
    vx, vy = vel_k(kind, p, x, y, t)
    if not (math.isfinite(vx) and math.isfinite(vy)):
        return False, 0.0, 0.0
    fx = sgn * (vx - vnx)
    fy = sgn * (vy - vny)
    sp = math.hypot(fx, fy)
    if sp < 1e-14:
        return False, 0.0, 0.0
    return True, fx / sp, fy / sp
