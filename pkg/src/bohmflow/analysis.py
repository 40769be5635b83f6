"""Chaos diagnostics built on sampled trajectories.

The pipeline is: distance channels (per-sample distances to the nearest
nodal point, its X-points and the nearest Y-point) -> event segmentation
(clustered close approaches between nodal escapes) -> vortex detection
(winding of the co-moving angle) -> finite-time Lyapunov series and an
ordered/chaotic verdict from the log-log decay of chi(t).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels
from .critical import (ESCAPE_GUARD, X_TOL, _lattice_positions,
                       _node_parity, _single_node_position,
                       _single_node_velocity, _lattice_velocities,
                       escape_instants, find_x_points, near_escape,
                       NodalPoint)
from .models import SingleNodeModel, model_kind, model_params

logger = logging.getLogger(__name__)

THRESHOLD_D = 1.0
MIN_GAP = 0.2
CLASSIFY_FLOOR = 1e-3


@dataclass(eq=False)
class DistanceChannels:
    """Per-sample distances to the nearest critical points.

    ``x_gap_flags`` marks samples where X-detection failed or the sample
    falls inside an escape guard (all channels NaN there).  ``nodal_speed``
    is the speed of the nearest node, used by the vortex diagnostics.
    """

    times: np.ndarray
    d_n: np.ndarray
    d_x: np.ndarray
    d_y: np.ndarray
    nearest_k: np.ndarray
    nearest_k_prime: np.ndarray
    nodal_speed: np.ndarray
    x_gap_flags: np.ndarray
    record: object = None
    model: object = None


@dataclass(eq=False)
class Event:
    t_start: float
    t_end: float
    involved_k: List[int]
    min_d_n: float
    min_d_x: float
    min_d_y: float
    a_cum_delta: float


@dataclass(eq=False)
class Vortex:
    t_start: float
    t_end: float
    node_k: int
    winding: float  # signed revolutions


@dataclass(eq=False)
class EventLog:
    events: List[Event] = field(default_factory=list)
    vortices: List[Vortex] = field(default_factory=list)


@dataclass(eq=False)
class LcnSeries:
    times: np.ndarray
    chi: np.ndarray
    a_cum: np.ndarray
    final_chi: float
    classification: str = "undecided"


def _node_lattice_k(model, t, x, y, k_limit):
    """(nearest node index, distance, speed) over an auto-expanded window."""
    parity = _node_parity(model)
    limit = k_limit
    while True:
        ks = np.arange(-limit, limit + 1)
        ks = ks[np.abs(ks) % 2 == parity]
        pos = _lattice_positions(model, t, ks)
        d = np.hypot(pos[:, 0] - x, pos[:, 1] - y)
        i = int(np.argmin(d))
        edge = _lattice_positions(model, t, [limit + 1 + parity])[0]
        if math.hypot(edge[0] - x, edge[1] - y) > 3.0 * d[i] or limit > 4096:
            return int(ks[i]), float(d[i]), pos[i]
        limit *= 2


def distance_channels(record, model, k_window=51, guard=ESCAPE_GUARD,
                      x_tol=X_TOL):
    """Distance channels D_N, D_X, D_Y along a sampled trajectory.

    For each sample the nearest node is found analytically; the X-points of
    that node and of its two lattice neighbours are located by Newton
    iteration (warm-started from the previous sample) and D_X is the
    distance to the closest of them.  Samples inside escape guards are
    flagged and left NaN.
    """
    kind = model_kind(model)
    p = model_params(model)
    n = len(record.times)
    d_n = np.full(n, np.nan)
    d_x = np.full(n, np.nan)
    d_y = np.full(n, np.nan)
    n_k = np.zeros(n, dtype=np.int64)
    n_kp = np.zeros(n, dtype=np.int64)
    nspeed = np.full(n, np.nan)
    gaps = np.zeros(n, dtype=bool)
    single = isinstance(model, SingleNodeModel)
    if not single and model.c2 == 0:
        raise ValueError("product state has no critical points at finite range")

    # warm-start cache: (node index, side) -> last converged offset
    warm = {}

    for i, t in enumerate(record.times):
        x, y = record.positions[i]
        if not (math.isfinite(x) and math.isfinite(y)) or near_escape(model, t, guard):
            gaps[i] = True
            continue
        if single:
            npos = _single_node_position(model, t)
            nvel = _single_node_velocity(model, t)
            k_near = 0
            d_n[i] = math.hypot(npos[0] - x, npos[1] - y)
            ypos = np.array([0.0, npos[1]])
            n_kp[i] = 0
            d_y[i] = math.hypot(ypos[0] - x, ypos[1] - y)
            cand_nodes = [(0, npos, nvel)]
        else:
            k_near, dn, npos = _node_lattice_k(model, t, x, y, k_window)
            d_n[i] = dn
            # nearest Y: even lattice neighbours around the node are the
            # only candidates closer than the next node over
            kk = np.array([k_near - 3, k_near - 1, k_near + 1, k_near + 3])
            ypos = _lattice_positions(model, t, kk)
            dy = np.hypot(ypos[:, 0] - x, ypos[:, 1] - y)
            j = int(np.argmin(dy))
            d_y[i] = dy[j]
            n_kp[i] = int(kk[j])
            ks = [k_near - 2, k_near, k_near + 2]
            cpos = _lattice_positions(model, t, ks)
            cvel = _lattice_velocities(model, t, ks)
            cand_nodes = [(ks[j2], cpos[j2], cvel[j2]) for j2 in range(3)]
        n_k[i] = k_near
        nvel = cand_nodes[[c[0] for c in cand_nodes].index(k_near)][2]
        nspeed[i] = math.hypot(nvel[0], nvel[1])

        best = math.inf
        found_any = False
        for kc, cp, cv in cand_nodes:
            node = NodalPoint(k=kc, position=cp, velocity=cv, t=t)
            for side in ("left", "right"):
                seed = warm.get((kc, side))
                ok = False
                if seed is not None:
                    u, v, resid, ok = _kernels.newton_fixed_point(
                        kind, p, t, cp[0], cp[1], cv[0], cv[1],
                        seed[0], seed[1], x_tol, 40, 0.5)
                    # a warm start may slide to the other side; reject it
                    if ok:
                        xs = find_side(model, t, node, (u, v))
                        ok = xs == side
                if not ok:
                    xs_pts = {xp.side: xp for xp in
                              find_x_points(model, t, node, guard=guard)}
                    xp = xs_pts.get(side)
                    if xp is None:
                        warm.pop((kc, side), None)
                        continue
                    u, v = xp.offset
                warm[(kc, side)] = (u, v)
                found_any = True
                dd = math.hypot(cp[0] + u - x, cp[1] + v - y)
                if dd < best:
                    best = dd
        if found_any:
            d_x[i] = best
        else:
            gaps[i] = True
    return DistanceChannels(times=record.times, d_n=d_n, d_x=d_x, d_y=d_y,
                            nearest_k=n_k, nearest_k_prime=n_kp,
                            nodal_speed=nspeed, x_gap_flags=gaps,
                            record=record, model=model)


def find_side(model, t, node, offset):
    from .critical import _nodal_line_direction
    d = _nodal_line_direction(model, t, node)
    return "right" if offset[0] * d[0] + offset[1] * d[1] > 0 else "left"


def _event_a_cum_delta(record, t_start, t_end):
    if record is None or record.stretching is None or len(record.stretching) == 0:
        return math.nan
    rdt = record.renorm_dt
    acum = np.concatenate([[0.0], np.cumsum(record.stretching)])
    i0 = min(max(int(math.floor(t_start / rdt)), 0), len(acum) - 1)
    i1 = min(max(int(math.ceil(t_end / rdt)), 0), len(acum) - 1)
    return float(acum[i1] - acum[i0])


def detect_events(channels, threshold_d=THRESHOLD_D, min_gap=MIN_GAP):
    """Segment clustered close approaches into events.

    An event is a maximal run of samples whose smallest channel value is
    below ``threshold_d``; runs separated by less than ``min_gap`` time
    units merge, but never across a nodal escape instant.
    """
    t = channels.times
    dmin = np.fmin(np.fmin(channels.d_n, channels.d_x), channels.d_y)
    close = np.where(np.isfinite(dmin), dmin < threshold_d, False)
    try:
        esc = escape_instants(channels.model, float(t[-1]) + 1.0)
    except ValueError:
        esc = np.array([])

    def escape_between(t0, t1):
        return any(t0 < e < t1 for e in esc)

    runs = []
    i = 0
    n = len(t)
    while i < n:
        if close[i]:
            j = i
            while j + 1 < n and close[j + 1]:
                j += 1
            runs.append([i, j])
            i = j + 1
        else:
            i += 1
    merged = []
    for r in runs:
        if merged and t[r[0]] - t[merged[-1][1]] < min_gap \
                and not escape_between(t[merged[-1][1]], t[r[0]]):
            merged[-1][1] = r[1]
        else:
            merged.append(r)

    events = []
    for i0, i1 in merged:
        sl = slice(i0, i1 + 1)
        ks = channels.nearest_k[sl]
        dn = channels.d_n[sl]
        # a node counts as involved when it is actually approached: a local
        # minimum of D_N below threshold while it is the nearest node
        seq = []
        for j in range(len(dn)):
            lo = dn[j - 1] if j > 0 else math.inf
            hi = dn[j + 1] if j + 1 < len(dn) else math.inf
            if np.isfinite(dn[j]) and dn[j] < threshold_d \
                    and dn[j] <= lo and dn[j] <= hi:
                if not seq or seq[-1] != int(ks[j]):
                    seq.append(int(ks[j]))
        events.append(Event(
            t_start=float(t[i0]), t_end=float(t[i1]), involved_k=seq,
            min_d_n=float(np.nanmin(channels.d_n[sl])),
            min_d_x=float(np.nanmin(channels.d_x[sl])),
            min_d_y=float(np.nanmin(channels.d_y[sl])),
            a_cum_delta=_event_a_cum_delta(channels.record, t[i0], t[i1])))
    return EventLog(events=events)


def detect_vortices(record, channels, model, threshold_d=THRESHOLD_D,
                    min_revolutions=1.0):
    """Bohmian vortices: spiral motion around a slowly moving node.

    Candidate intervals are maximal runs where the node channel is both the
    smallest one and below ``threshold_d`` with a constant nearest node; the
    winding of the co-moving angle atan2(v, u) is accumulated (unwrapped)
    over each run and intervals with at least ``min_revolutions`` full
    signed revolutions are reported.
    """
    t = channels.times
    n = len(t)
    cond = (np.isfinite(channels.d_n) & (channels.d_n < threshold_d)
            & np.where(np.isfinite(channels.d_x), channels.d_n < channels.d_x, True)
            & np.where(np.isfinite(channels.d_y), channels.d_n < channels.d_y, True))
    out = []
    i = 0
    single = isinstance(model, SingleNodeModel)
    while i < n:
        if not cond[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and cond[j + 1] \
                and channels.nearest_k[j + 1] == channels.nearest_k[i]:
            j += 1
        k = int(channels.nearest_k[i])
        total = 0.0
        prev = None
        for m in range(i, j + 1):
            if single:
                npos = _single_node_position(model, t[m])
            else:
                npos = _lattice_positions(model, t[m], [k])[0]
            u = record.positions[m, 0] - npos[0]
            v = record.positions[m, 1] - npos[1]
            ang = math.atan2(v, u)
            if prev is not None:
                d = ang - prev
                while d > math.pi:
                    d -= 2.0 * math.pi
                while d < -math.pi:
                    d += 2.0 * math.pi
                total += d
            prev = ang
        winding = total / (2.0 * math.pi)
        if abs(winding) >= min_revolutions:
            out.append(Vortex(t_start=float(t[i]), t_end=float(t[j]),
                              node_k=k, winding=winding))
        i = j + 1
    return out


def lcn_series(stretching, renorm_dt):
    """Finite-time Lyapunov series chi(t) = a_cum(t)/t on the renorm grid."""
    a = np.asarray(stretching, dtype=float)
    if a.size == 0:
        raise ValueError("empty stretching series")
    times = renorm_dt * np.arange(1, a.size + 1)
    a_cum = np.cumsum(a)
    chi = a_cum / times
    return LcnSeries(times=times, chi=chi, a_cum=a_cum, final_chi=float(chi[-1]))


def loglog_slope(times, values, t_lo, t_hi, n_bins=24):
    """Slope of ln(RMS value) vs ln(t) over log-spaced bins in [t_lo, t_hi].

    Binned RMS keeps the fit robust against sign changes and zero crossings
    of an oscillating decaying series.
    """
    mask = (times >= t_lo) & (times <= t_hi)
    tt = times[mask]
    vv = values[mask]
    if tt.size < 4:
        return math.nan
    edges = np.geomspace(tt[0], tt[-1] * (1 + 1e-12), n_bins + 1)
    idx = np.searchsorted(edges, tt, side="right") - 1
    xs, ys = [], []
    for b in range(n_bins):
        sel = vv[idx == b]
        if sel.size == 0:
            continue
        rms = math.sqrt(float(np.mean(sel * sel)))
        if rms <= 0:
            continue
        xs.append(0.5 * (math.log(edges[b]) + math.log(edges[b + 1])))
        ys.append(math.log(rms))
    if len(xs) < 3:
        return math.nan
    return float(np.polyfit(xs, ys, 1)[0])


def classify_trajectory(lcn, window=None, floor=CLASSIFY_FLOOR):
    """Ordered / chaotic / undecided from the trailing decay of chi(t).

    Fits the log-log slope of chi over the trailing ``window`` time units
    (default: the trailing decade, 0.9 * t_final).  Slope < -0.8 means chi
    dies off like 1/t (ordered); slope within (-0.2, 0.2) with final chi
    above ``floor`` means a positive plateau (chaotic).
    """
    t_final = float(lcn.times[-1])
    if window is None:
        window = 0.9 * t_final
    if t_final < window:
        raise ValueError("series shorter than the classification window")
    if np.all(np.abs(lcn.chi) < 1e-300):
        lcn.classification = "ordered"
        return "ordered"
    slope = loglog_slope(lcn.times, lcn.chi, t_final - window, t_final)
    if math.isnan(slope):
        label = "undecided"
    elif slope < -0.8:
        label = "ordered"
    elif -0.2 < slope < 0.2 and lcn.final_chi >= floor:
        label = "chaotic"
    else:
        label = "undecided"
    lcn.classification = label
    return label
