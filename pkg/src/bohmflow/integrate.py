"""Trajectory integration with variational (deviation-vector) tracking.

The integrator is an adaptive Dormand-Prince 5(4) pair with 4th-order dense
output onto a uniform sample grid.  Near nodes the guidance field is stiff;
when the step controller asks for steps below ``h_min`` the step is clamped
and force-accepted, the affected samples are flagged, and a run that keeps
clamping while the density underflows is reported as stalled rather than
raised out of.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .models import model_kind, model_params

STATUS_NAMES = {_kernels.COMPLETED: "completed",
                _kernels.STALLED: "stalled-at-node",
                _kernels.ABORTED: "aborted"}

DEFAULT_XI0 = (math.sqrt(0.5), math.sqrt(0.5))


@dataclass(frozen=True)
class IntegrationControls:
    """Tolerances, sampling grid and renormalization cadence.

    ``renorm_dt`` must be a positive integer multiple of ``dt_sample``;
    deviation vectors are renormalized exactly at those instants.
    """

    t_final: float
    atol: float = 1e-9
    rtol: float = 1e-9
    h_min: float = 1e-9
    dt_sample: float = 0.01
    renorm_dt: float = 0.05

    def __post_init__(self):
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.atol <= 0 or self.rtol < 0:
            raise ValueError("tolerances must be positive")
        if self.h_min <= 0:
            raise ValueError("h_min must be positive")
        if self.dt_sample <= 0 or self.renorm_dt <= 0:
            raise ValueError("sampling intervals must be positive")
        ratio = self.renorm_dt / self.dt_sample
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("renorm_dt must be an integer multiple of dt_sample")

    @property
    def renorm_every(self):
        return int(round(self.renorm_dt / self.dt_sample))

    @property
    def n_samples(self):
        return int(math.floor(self.t_final / self.dt_sample + 1e-9))


@dataclass(eq=False)
class TrajectoryRecord:
    """Uniformly sampled trajectory with optional stretching-number series.

    ``stretching[s]`` is the interval log-growth ln|xi_after / xi_before| of
    the deviation vector over the s-th renormalization interval;
    ``deviation_log_norms`` is its cumulative sum (ln|xi| as if the vector
    had never been rescaled).  ``flags`` marks samples produced by clamped
    minimum-size steps (accuracy degraded).
    """

    times: np.ndarray
    positions: np.ndarray
    status: str
    flags: np.ndarray
    stretching: Optional[np.ndarray] = None
    deviation_log_norms: Optional[np.ndarray] = None
    model: object = None
    controls: Optional[IntegrationControls] = None

    @property
    def dt_sample(self):
        return self.controls.dt_sample

    @property
    def renorm_dt(self):
        return self.controls.renorm_dt

    def position_at(self, t):
        """Sampled position nearest to time t."""
        i = int(round((t - self.times[0]) / self.controls.dt_sample))
        i = min(max(i, 0), len(self.times) - 1)
        return self.positions[i]


def _run(model, x0, y0, w0, z0, mode, controls, delta0=0.0,
         floor=1e-300, max_clamped=10):
    kind = model_kind(model)
    p = model_params(model)
    ns = controls.n_samples
    renorm_every = controls.renorm_every if mode != _kernels.MODE_POSITION else 0
    status, n_done, xs, ys, flags, stretch, n_ren = _kernels.dp45_integrate(
        kind, p, mode, float(x0), float(y0), float(w0), float(z0), 0.0,
        controls.dt_sample, ns, renorm_every, float(delta0),
        controls.atol, controls.rtol, controls.h_min, math.log(floor),
        max_clamped)
    times = np.arange(ns + 1) * controls.dt_sample
    if status != _kernels.COMPLETED:
        keep = n_done + 1
        times, xs, ys, flags = times[:keep], xs[:keep], ys[:keep], flags[:keep]
        stretch = stretch[:n_ren]
    elif renorm_every > 0:
        stretch = stretch[:n_ren]
    positions = np.stack([xs, ys], axis=1)
    record = TrajectoryRecord(times=times, positions=positions,
                              status=STATUS_NAMES[status], flags=flags,
                              model=model, controls=controls)
    if mode != _kernels.MODE_POSITION:
        record.stretching = stretch
        record.deviation_log_norms = np.cumsum(stretch)
    return record


def integrate(model, x0, y0, controls):
    """Integrate a single Bohmian trajectory; positions only."""
    return _run(model, x0, y0, 0.0, 0.0, _kernels.MODE_POSITION, controls)


def integrate_with_deviation(model, x0, y0, controls, xi0=DEFAULT_XI0):
    """Integrate a trajectory together with the linearized deviation vector.

    The deviation evolves under d(xi)/dt = J(x, y, t) xi with the analytic
    velocity Jacobian, is renormalized to unit length every ``renorm_dt``,
    and the per-interval log-growths are recorded as stretching numbers.
    """
    nrm = math.hypot(xi0[0], xi0[1])
    if not nrm > 0:
        raise ValueError("initial deviation vector must be nonzero")
    return _run(model, x0, y0, xi0[0], xi0[1], _kernels.MODE_VARIATIONAL,
                controls)


def shadow_stretching(model, x0, y0, delta0, controls):
    """Two-trajectory finite-difference oracle for the stretching numbers.

    A companion trajectory starts at distance ``delta0`` from the main one;
    at every renormalization instant the log of the separation ratio is
    recorded and the companion is pulled back onto the delta0 sphere around
    the main trajectory.  Independent of the variational equations by
    construction.
    """
    if not 0 < delta0 <= 1e-7:
        raise ValueError("delta0 must lie in (0, 1e-7]")
    d = delta0 / math.sqrt(2.0)
    rec = _run(model, x0, y0, x0 + d, y0 + d, _kernels.MODE_SHADOW, controls,
               delta0=delta0)
    return rec.stretching


def frame_transform(record, node_track):
    """Co-moving coordinates (u, v) = position - node position per sample.

    ``node_track`` is a sequence aligned with ``record.times`` whose entries
    are NodalPoint-like objects (anything with a ``position``) or None for
    samples inside escape gaps; those rows come back as NaN.
    """
    if len(node_track) != len(record.times):
        raise ValueError("node_track must align with record.times")
    uv = np.full_like(record.positions, np.nan)
    for i, node in enumerate(node_track):
        if node is None:
            continue
        pos = node.position if hasattr(node, "position") else np.asarray(node)
        uv[i, 0] = record.positions[i, 0] - pos[0]
        uv[i, 1] = record.positions[i, 1] - pos[1]
    return uv
