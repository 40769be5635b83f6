"""Critical points of the Bohmian flow: nodes N, inertial-frame Y-points,
and co-moving-frame X-points.

For the two-qubit model the N and Y positions share one closed form on a
moving straight line, indexed by an integer lattice coordinate: odd indices
are nodes when c1*c2 > 0 (even when c1*c2 < 0) and even indices 2k' are
Y-points.  X-points have no closed form and are found by Newton iteration
on the co-moving velocity residual with the analytic Jacobian.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import Degenerate, NearEscape, NoConvergence, NotSaddle
from .models import SingleNodeModel, TwoQubitModel, model_kind, model_params

logger = logging.getLogger(__name__)

ESCAPE_GUARD = 1e-6
X_TOL = 1e-10
DEDUP_RADIUS = 1e-8


@dataclass(eq=False)
class NodalPoint:
    k: int
    position: np.ndarray
    velocity: np.ndarray
    t: float


@dataclass(eq=False)
class YPoint:
    k_prime: int  # the even lattice index 2k'
    position: np.ndarray
    t: float


@dataclass(eq=False)
class XPoint:
    node_k: int
    side: str  # 'left' | 'right'
    offset: np.ndarray  # (u, v) in the frame co-moving with the node
    position_inertial: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    t: float
    classification: str = ""
    residual: float = 0.0


@dataclass(frozen=True)
class FixedPointClassification:
    kind: str
    eigenvalues: np.ndarray = field(compare=False, default=None)
    eigenvectors: np.ndarray = field(compare=False, default=None)


def escape_period(model):
    """t_inf = pi / |omega_x - omega_y|; instants when all two-qubit nodes
    escape to infinity."""
    fr = model.frequencies
    if fr.omega_x == fr.omega_y:
        raise ValueError("escape period undefined for omega_x == omega_y")
    return math.pi / abs(fr.omega_x - fr.omega_y)


def escape_times(model, horizon):
    """All multiples of t_inf up to (and including) the horizon."""
    t_inf = escape_period(model)
    n = int(math.floor(horizon / t_inf + 1e-12))
    return np.array([k * t_inf for k in range(1, n + 1)])


def escape_instants(model, horizon):
    """Every instant in (0, horizon] at which the analytic critical points
    run to infinity: multiples of t_inf for the two-qubit model, zeros of
    sin(omega_y t) and sin((omega_x+omega_y) t) for the single-node model."""
    fr = model.frequencies
    if isinstance(model, SingleNodeModel):
        out = []
        for w in (fr.omega_y, fr.omega_x + fr.omega_y):
            half = math.pi / w
            out.extend(k * half for k in range(1, int(horizon / half + 1e-12) + 1))
        return np.unique(np.round(out, 12))
    return escape_times(model, horizon)


def near_escape(model, t, guard=ESCAPE_GUARD):
    """True when analytic N/Y positions are unreliable (nodes near infinity)."""
    fr = model.frequencies
    if isinstance(model, SingleNodeModel):
        for w in (fr.omega_y, fr.omega_x + fr.omega_y):
            half = math.pi / w
            if abs(t - round(t / half) * half) < guard:
                return True
        return False
    t_inf = escape_period(model)
    return abs(t - round(t / t_inf) * t_inf) < guard


def _check_guard(model, t, guard):
    if near_escape(model, t, guard):
        raise NearEscape(f"t = {t} is within {guard} of a nodal escape instant")


def _lattice_positions(model, t, kk):
    """Positions of the N/Y lattice (two-qubit) for lattice indices kk."""
    kk = np.asarray(kk, dtype=float)
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    lam = math.log(abs(model.c1 / model.c2))
    d = math.sin((wx - wy) * t)
    x = math.sqrt(2.0) * (kk * math.pi * math.cos(wy * t) + math.sin(wy * t) * lam) \
        / (4.0 * math.sqrt(wx) * model.a0 * d)
    y = math.sqrt(2.0) * (kk * math.pi * math.cos(wx * t) + math.sin(wx * t) * lam) \
        / (4.0 * math.sqrt(wy) * model.a0 * d)
    return np.stack([x, y], axis=-1)


def _lattice_velocities(model, t, kk):
    """Exact time derivative of the lattice positions (quotient rule)."""
    kk = np.asarray(kk, dtype=float)
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    lam = math.log(abs(model.c1 / model.c2))
    wxy = wx - wy
    d = math.sin(wxy * t)
    dp = wxy * math.cos(wxy * t)
    cx = math.sqrt(2.0) / (4.0 * math.sqrt(wx) * model.a0)
    cy = math.sqrt(2.0) / (4.0 * math.sqrt(wy) * model.a0)
    nx = kk * math.pi * math.cos(wy * t) + lam * math.sin(wy * t)
    nxp = -kk * math.pi * wy * math.sin(wy * t) + lam * wy * math.cos(wy * t)
    ny = kk * math.pi * math.cos(wx * t) + lam * math.sin(wx * t)
    nyp = -kk * math.pi * wx * math.sin(wx * t) + lam * wx * math.cos(wx * t)
    vx = cx * (nxp * d - nx * dp) / (d * d)
    vy = cy * (nyp * d - ny * dp) / (d * d)
    return np.stack([vx, vy], axis=-1)


def _single_node_position(model, t):
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    p = wx + wy
    x = -model.a * math.sqrt(2.0) * math.sin(p * t) \
        / (2.0 * math.sqrt(wx) * model.b * math.sin(wy * t))
    y = -model.b * math.sqrt(2.0) * math.sin(wx * t) \
        / (2.0 * math.sqrt(wy) * model.c * math.sin(p * t))
    return np.array([x, y])


def _single_node_velocity(model, t):
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    p = wx + wy
    kx = model.a / (model.b * math.sqrt(2.0 * wx))
    ky = model.b / (model.c * math.sqrt(2.0 * wy))
    sy = math.sin(wy * t)
    sp = math.sin(p * t)
    vx = -kx * (p * math.cos(p * t) * sy - wy * math.cos(wy * t) * sp) / (sy * sy)
    vy = -ky * (wx * math.cos(wx * t) * sp - p * math.cos(p * t) * math.sin(wx * t)) / (sp * sp)
    return np.array([vx, vy])


def _node_parity(model):
    """Lattice parity carrying the nodes: odd for c1*c2 > 0, even for < 0."""
    return 1 if model.c1 * model.c2 > 0 else 0


def _window_indices(window, parity):
    """Indices of the given parity from an int half-width or an iterable."""
    if np.isscalar(window):
        lo, hi = -int(window), int(window)
        return [k for k in range(lo, hi + 1) if abs(k) % 2 == parity]
    return sorted(k for k in window if abs(k) % 2 == parity)


def nodal_points(model, t, k_window=11, guard=ESCAPE_GUARD):
    """Analytic nodal points at time t, sorted by index.

    ``k_window`` is either a half-width (all admissible |k| <= window) or an
    explicit iterable of indices; only indices of the model's nodal parity
    are returned.  Raises :class:`NearEscape` inside the escape guard.
    """
    _check_guard(model, t, guard)
    if isinstance(model, SingleNodeModel):
        return [NodalPoint(k=0, position=_single_node_position(model, t),
                           velocity=_single_node_velocity(model, t), t=t)]
    if model.c2 == 0:
        return []
    ks = _window_indices(k_window, _node_parity(model))
    pos = _lattice_positions(model, t, ks)
    vel = _lattice_velocities(model, t, ks)
    return [NodalPoint(k=k, position=pos[i], velocity=vel[i], t=t)
            for i, k in enumerate(ks)]


def y_points(model, t, k_prime_window=10, guard=ESCAPE_GUARD):
    """Analytic inertial-frame fixed points (Y-points) at time t.

    For the two-qubit model these sit on the nodal line at the even lattice
    indices 2k', midway between successive nodes.  The single-node model has
    one Y-point at x = 0 with the node's y coordinate.
    """
    _check_guard(model, t, guard)
    if isinstance(model, SingleNodeModel):
        pos = _single_node_position(model, t)
        return [YPoint(k_prime=0, position=np.array([0.0, pos[1]]), t=t)]
    if model.c2 == 0:
        return []
    kks = _window_indices(k_prime_window, 0)
    pos = _lattice_positions(model, t, kks)
    return [YPoint(k_prime=kk, position=pos[i], t=t) for i, kk in enumerate(kks)]


def nearest_nodal_point(model, t, x, y, k_limit=51, guard=ESCAPE_GUARD):
    """Node nearest to (x, y), with the search window auto-expanded until the
    nearest excluded index is at least 3x farther than the best hit."""
    _check_guard(model, t, guard)
    if isinstance(model, SingleNodeModel):
        return nodal_points(model, t, guard=guard)[0]
    if model.c2 == 0:
        raise ValueError("product state has no nodal points")
    parity = _node_parity(model)
    limit = k_limit
    q = np.array([x, y])
    while True:
        ks = np.array(_window_indices(limit, parity))
        pos = _lattice_positions(model, t, ks)
        dist = np.hypot(pos[:, 0] - q[0], pos[:, 1] - q[1])
        i = int(np.argmin(dist))
        edge = _lattice_positions(model, t, [limit + 1 + parity])[0]
        if np.hypot(edge[0] - q[0], edge[1] - q[1]) > 3.0 * dist[i] or limit > 4096:
            return NodalPoint(k=int(ks[i]), position=pos[i],
                              velocity=_lattice_velocities(model, t, [ks[i]])[0], t=t)
        limit *= 2


def adjacent_y_points(model, t, node, guard=ESCAPE_GUARD):
    """The Y-points bracketing a node: lattice indices k-1 and k+1 for the
    two-qubit model; the single Y-point (twice) for the single-node model."""
    if isinstance(model, SingleNodeModel):
        yp = y_points(model, t, guard=guard)[0]
        return yp, yp
    pos = _lattice_positions(model, t, [node.k - 1, node.k + 1])
    return (YPoint(k_prime=node.k - 1, position=pos[0], t=t),
            YPoint(k_prime=node.k + 1, position=pos[1], t=t))


def _nodal_line_direction(model, t, node, guard=ESCAPE_GUARD):
    """Unit vector along the nodal line, oriented toward increasing index
    (for the single-node model: from the node toward its Y-point)."""
    if isinstance(model, SingleNodeModel):
        yp = y_points(model, t, guard=guard)[0]
        d = yp.position - node.position
    else:
        pos = _lattice_positions(model, t, [node.k - 1, node.k + 1])
        d = pos[1] - pos[0]
    n = np.hypot(d[0], d[1])
    if n == 0:
        raise ValueError("degenerate nodal line direction")
    return d / n


def find_x_points(model, t, node, seeds=None, x_tol=X_TOL, max_iter=100,
                  guard=ESCAPE_GUARD, strict=False):
    """Locate the X-points accompanying a node at time t.

    Newton iteration solves v(x_N + u, y_N + v, t) = (node velocity) with the
    analytic Jacobian.  Default seeding: the midpoints from the node toward
    each adjacent Y-point plus a ring of 8 perturbed guesses at radius
    0.3 * (distance to the nearest Y-point); two fallback rings are tried
    for any side that stays empty.  At most one root per side of the node
    (along the nodal line) is returned, the one closest to the node; extra
    converged roots are logged.

    With ``strict=True`` a missing side raises :class:`NoConvergence`.
    """
    kind = model_kind(model)
    p = model_params(model)
    xn, yn = node.position
    vnx, vny = node.velocity
    y_lo, y_hi = adjacent_y_points(model, t, node, guard=guard)
    d_lo = float(np.hypot(*(y_lo.position - node.position)))
    d_hi = float(np.hypot(*(y_hi.position - node.position)))
    d_near = min(d_lo, d_hi)
    direction = _nodal_line_direction(model, t, node, guard=guard)
    cap = max(0.25 * d_near, 1e-5)

    def run(seed_list):
        roots = []
        for (u0, v0) in seed_list:
            u, v, resid, ok = _kernels.newton_fixed_point(
                kind, p, t, xn, yn, vnx, vny, u0, v0, x_tol, max_iter, cap)
            if not ok or math.hypot(u, v) < DEDUP_RADIUS:
                continue
            if all(math.hypot(u - r[0], v - r[1]) > DEDUP_RADIUS for r in roots):
                roots.append((u, v, resid))
        return roots

    if seeds is None:
        mid_lo = 0.5 * (y_lo.position - node.position)
        mid_hi = 0.5 * (y_hi.position - node.position)
        seed_list = [tuple(mid_lo), tuple(mid_hi)]
        r0 = 0.3 * d_near
        for j in range(8):
            th = 2.0 * math.pi * j / 8.0
            seed_list.append((r0 * math.cos(th), r0 * math.sin(th)))
    else:
        seed_list = [tuple(s) for s in seeds]
    roots = run(seed_list)

    def side_of(uv):
        return "right" if uv[0] * direction[0] + uv[1] * direction[1] > 0 else "left"

    # fallback rings if a side is still empty (seeds were user-free only)
    if seeds is None:
        for frac in (0.15, 0.6, 0.9):
            have = {side_of(r) for r in roots}
            if {"left", "right"} <= have:
                break
            ring = [(frac * d_near * math.cos(2.0 * math.pi * j / 8.0),
                     frac * d_near * math.sin(2.0 * math.pi * j / 8.0))
                    for j in range(8)]
            for r in run(ring):
                if all(math.hypot(r[0] - q[0], r[1] - q[1]) > DEDUP_RADIUS
                       for q in roots):
                    roots.append(r)

    by_side = {}
    for r in roots:
        s = side_of(r)
        keep = by_side.get(s)
        if keep is None or math.hypot(r[0], r[1]) < math.hypot(keep[0], keep[1]):
            if keep is not None:
                logger.debug("extra fixed point near node k=%s side=%s at %s",
                             node.k, s, (keep[0], keep[1]))
            by_side[s] = r
        else:
            logger.debug("extra fixed point near node k=%s side=%s at %s",
                         node.k, s, (r[0], r[1]))

    out = []
    for s in ("left", "right"):
        if s not in by_side:
            if strict:
                raise NoConvergence(s, f"no X-point converged on the {s} side "
                                       f"of node k={node.k} at t={t}")
            logger.info("no X-point found on %s side of node k=%s at t=%s",
                        s, node.k, t)
            continue
        u, v, resid = by_side[s]
        _, _, j11, j12, j21, j22 = _kernels.vel_jac_k(kind, p, xn + u, yn + v, t)
        jac = np.array([[j11, j12], [j21, j22]])
        try:
            cls = classify_fixed_point(jac)
            kind_name = cls.kind
            evals, evecs = cls.eigenvalues, cls.eigenvectors
        except Degenerate:
            kind_name = "degenerate"
            evals, evecs = np.linalg.eig(jac)
        if kind_name != "saddle":
            logger.warning("fixed point near node k=%s side=%s classifies as %s",
                           node.k, s, kind_name)
        out.append(XPoint(node_k=node.k, side=s, offset=np.array([u, v]),
                          position_inertial=np.array([xn + u, yn + v]),
                          jacobian=jac, eigenvalues=evals, eigenvectors=evecs,
                          t=t, classification=kind_name, residual=resid))
    return out


def classify_fixed_point(jacobian):
    """Planar linear classification from trace, determinant and discriminant."""
    j = np.asarray(jacobian, dtype=float)
    if j.shape != (2, 2) or not np.all(np.isfinite(j)):
        raise ValueError("need a finite 2x2 matrix")
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    tr = j[0, 0] + j[1, 1]
    if abs(det) < 1e-14:
        raise Degenerate(f"|det| = {abs(det):.3e} below 1e-14")
    evals, evecs = np.linalg.eig(j)
    if det < 0:
        kind = "saddle"
    else:
        disc = tr * tr - 4.0 * det
        scale = max(1.0, float(np.max(np.abs(j))))
        if abs(tr) < 1e-12 * scale:
            kind = "center-like"
        elif disc >= 0:
            kind = "unstable-node" if tr > 0 else "stable-node"
        else:
            kind = "unstable-spiral" if tr > 0 else "stable-spiral"
    return FixedPointClassification(kind=kind, eigenvalues=evals, eigenvectors=evecs)


def trace_asymptotic_curves(model, t, x_point, arc_length=3.0, epsilon=1e-6,
                            box=10.0, ds=2e-3):
    """Stable and unstable asymptotic curves of a saddle X-point.

    The time dependence of the flow is frozen at t and the autonomous
    co-moving field is integrated in a fictitious parameter: forward from
    +/- epsilon along the unstable eigenvector and backward from +/- epsilon
    along the stable one.  Returns four polylines in co-moving coordinates,
    ordered [unstable+, unstable-, stable+, stable-].
    """
    cls = classify_fixed_point(x_point.jacobian)
    if cls.kind != "saddle":
        raise NotSaddle(f"X-point classifies as {cls.kind}")
    evals = np.real(cls.eigenvalues)
    evecs = np.real(cls.eigenvectors)
    i_un = int(np.argmax(evals))
    i_st = 1 - i_un
    kind = model_kind(model)
    p = model_params(model)
    node = x_point.position_inertial - x_point.offset
    vn = node_velocity_of(model, t, x_point.node_k)
    n_max = int(arc_length / ds) + 8
    curves = []
    for vec, sign_s in ((evecs[:, i_un], +1.0), (evecs[:, i_st], -1.0)):
        vec = vec / np.hypot(vec[0], vec[1])
        for sgn in (+1.0, -1.0):
            start = x_point.position_inertial + sgn * epsilon * vec
            pts, n = _kernels.frozen_comoving_curve(
                kind, p, t, start[0], start[1], vn[0], vn[1], sign_s,
                ds, n_max, arc_length, box)
            curves.append(pts[:n] - node)
    return curves


def node_velocity_of(model, t, k):
    if isinstance(model, SingleNodeModel):
        return _single_node_velocity(model, t)
    return _lattice_velocities(model, t, [k])[0]
