"""Wavefunction models for the 2-D harmonic oscillator (units hbar = m = 1).

Two models are supported:

* :class:`SingleNodeModel` -- a superposition of the ground state with the
  first excited state in x and the doubly excited cross term,
  ``a*psi_00 + b*psi_10 + c*psi_11``.  It carries exactly one moving node.
* :class:`TwoQubitModel` -- an entangled superposition of products of
  right/left displaced coherent states along x and y,
  ``c1*Y_R(x)Y_L(y) + c2*Y_L(x)Y_R(y)``, with infinitely many nodes.

Both models are immutable; every evaluation function here is pure, so they
are safe to share across worker threads.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .errors import AtNode

SQRT2 = math.sqrt(2.0)

#: overlap <Y_R|Y_L> = exp(-2 a0^2) above which the two coherent states are
#: no longer effectively orthogonal and the qubit reading becomes dubious
OVERLAP_WARN = 1e-4

PSI_SQ_FLOOR = 1e-300


@dataclass(frozen=True)
class OscillatorFrequencies:
    """Angular frequencies of the 2-D oscillator.

    ``commensurable`` optionally records a rational reduction
    ``(s1, s2, omega)`` with coprime positive integers s1, s2 such that
    omega_x = s1*omega and omega_y = s2*omega; every trajectory is then
    periodic with period 2*pi/omega.
    """

    omega_x: float
    omega_y: float
    commensurable: Optional[Tuple[int, int, float]] = None

    def __post_init__(self):
        if not (self.omega_x > 0 and self.omega_y > 0):
            raise ValueError("frequencies must be positive")
        if self.commensurable is not None:
            s1, s2, omega = self.commensurable
            if s1 <= 0 or s2 <= 0 or int(s1) != s1 or int(s2) != s2:
                raise ValueError("commensurable factors must be positive integers")
            if math.gcd(int(s1), int(s2)) != 1:
                raise ValueError("commensurable factors must be coprime")
            if abs(self.omega_x - s1 * omega) > 1e-12 * max(1.0, self.omega_x) or \
                    abs(self.omega_y - s2 * omega) > 1e-12 * max(1.0, self.omega_y):
                raise ValueError("commensurable reduction inconsistent with frequencies")

    @classmethod
    def from_ratio(cls, s1, s2, omega=1.0):
        """Build commensurable frequencies omega_x = s1*omega, omega_y = s2*omega."""
        g = math.gcd(int(s1), int(s2))
        s1, s2 = int(s1) // g, int(s2) // g
        return cls(s1 * omega, s2 * omega, commensurable=(s1, s2, omega))

    @property
    def period(self):
        """Common period 2*pi/omega; None for incommensurable frequencies."""
        if self.commensurable is None:
            return None
        return 2.0 * math.pi / self.commensurable[2]


@dataclass(frozen=True)
class SingleNodeModel:
    """a*psi_00 + b*psi_10 + c*psi_11 superposition with one moving node."""

    a: float
    b: float
    c: float
    frequencies: OscillatorFrequencies

    def __post_init__(self):
        if self.b == 0 or self.c == 0:
            raise ValueError("b and c must be nonzero (the node would degenerate)")


@dataclass(frozen=True)
class TwoQubitModel:
    """Superposition of two coherent-state products, entangled for c1*c2 != 0."""

    c1: float
    c2: float
    a0: float
    frequencies: OscillatorFrequencies

    def __post_init__(self):
        if abs(self.c1 ** 2 + self.c2 ** 2 - 1.0) > 1e-12:
            raise ValueError("c1^2 + c2^2 must equal 1")
        if not (self.c1 > 0 and self.c2 >= 0):
            raise ValueError("requires c1 > 0 and c2 >= 0")
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if math.exp(-2.0 * self.a0 ** 2) >= OVERLAP_WARN:
            warnings.warn(
                f"coherent-state overlap exp(-2*a0^2) = {math.exp(-2.0 * self.a0 ** 2):.3e} "
                f"is not negligible; the two-qubit interpretation is unreliable",
                stacklevel=3)


WavefunctionModel = (SingleNodeModel, TwoQubitModel)


def make_two_qubit(c2, a0=2.5, frequencies=None):
    """Two-qubit model with c1 = sqrt(1 - c2^2).

    c2 parameterizes entanglement: zero at c2 = 0 (product state) and
    maximal at c2 = sqrt(2)/2 where c1 = c2.
    """
    if not 0.0 <= c2 <= 1.0:
        raise ValueError(f"c2 = {c2} outside [0, 1]")
    if a0 <= 0:
        raise ValueError("a0 must be positive")
    if frequencies is None:
        frequencies = OscillatorFrequencies(1.0, math.sqrt(3.0))
    return TwoQubitModel(c1=math.sqrt(1.0 - c2 * c2), c2=float(c2), a0=float(a0),
                         frequencies=frequencies)


def model_kind(model):
    if isinstance(model, SingleNodeModel):
        return _kernels.SINGLE_NODE
    if isinstance(model, TwoQubitModel):
        return _kernels.TWO_QUBIT
    raise TypeError(f"not a wavefunction model: {model!r}")


def model_params(model):
    """Flat parameter vector used by the compiled kernels."""
    fr = model.frequencies
    if isinstance(model, SingleNodeModel):
        return np.array([model.a, model.b, model.c, fr.omega_x, fr.omega_y])
    return np.array([model.c1, model.c2, model.a0, fr.omega_x, fr.omega_y])


@dataclass(frozen=True)
class VelocitySample:
    vx: float
    vy: float
    magnitude_psi_sq: float


def _coherent_1d(x, t, omega, a0, sigma):
    """Displaced coherent state in the position representation."""
    re_a = a0 * math.cos(sigma - omega * t)
    im_a = a0 * math.sin(sigma - omega * t)
    zeta = 0.5 * (a0 * a0 * math.sin(2.0 * (omega * t - sigma)) - omega * t)
    return (omega / math.pi) ** 0.25 * np.exp(
        -0.5 * omega * (x - math.sqrt(2.0 / omega) * re_a) ** 2
        + 1j * (math.sqrt(2.0 * omega) * im_a * x + zeta))


def eval_psi(model, x, y, t):
    """Complex wavefunction value Psi(x, y, t)."""
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    if isinstance(model, SingleNodeModel):
        beta = math.sqrt(2.0 * wx) * model.b
        gam = 2.0 * math.sqrt(wx * wy) * model.c
        w = (model.a + beta * x * np.exp(-1j * wx * t)
             + gam * x * y * np.exp(-1j * (wx + wy) * t))
        norm = (wx * wy) ** 0.25 / math.sqrt(math.pi)
        gauss = math.exp(-0.5 * (wx * x * x + wy * y * y))
        return norm * gauss * np.exp(-0.5j * (wx + wy) * t) * w
    yrx = _coherent_1d(x, t, wx, model.a0, 0.0)
    ylx = _coherent_1d(x, t, wx, model.a0, math.pi)
    yry = _coherent_1d(y, t, wy, model.a0, 0.0)
    yly = _coherent_1d(y, t, wy, model.a0, math.pi)
    return model.c1 * yrx * yly + model.c2 * ylx * yry


def log_psi_sq(model, x, y, t):
    """ln |Psi|^2 evaluated in log space (usable far outside the support)."""
    return _kernels.log_psi_sq_k(model_kind(model), model_params(model),
                                 float(x), float(y), float(t))


def psi_sq(model, x, y, t):
    lp = log_psi_sq(model, x, y, t)
    return math.exp(lp) if lp > -745.0 else 0.0


def velocity(model, x, y, t, floor=PSI_SQ_FLOOR):
    """Bohmian velocity Im(grad Psi / Psi) at a point.

    Raises :class:`AtNode` when |Psi|^2 falls below ``floor``; the guidance
    field is singular there.
    """
    rho = psi_sq(model, x, y, t)
    vx, vy = _kernels.vel_k(model_kind(model), model_params(model),
                            float(x), float(y), float(t))
    if rho < floor or not (math.isfinite(vx) and math.isfinite(vy)):
        raise AtNode(f"|Psi|^2 = {rho:.3e} below floor {floor:.3e} at "
                     f"({x}, {y}, t={t})")
    return VelocitySample(vx, vy, rho)


def velocity_jacobian(model, x, y, t, floor=PSI_SQ_FLOOR):
    """Spatial Jacobian d(vx,vy)/d(x,y) as a 2x2 array (analytic)."""
    rho = psi_sq(model, x, y, t)
    vx, vy, j11, j12, j21, j22 = _kernels.vel_jac_k(
        model_kind(model), model_params(model), float(x), float(y), float(t))
    if rho < floor or not all(map(math.isfinite, (j11, j12, j21, j22))):
        raise AtNode(f"|Psi|^2 = {rho:.3e} below floor {floor:.3e} at "
                     f"({x}, {y}, t={t})")
    return np.array([[j11, j12], [j21, j22]])


def _quantum_potential_single(model, x, y, t):
    # |Psi| = C(x,y) |W| with C a Gaussian and W quadratic in (x, y);
    # all derivatives in the Laplacian of |Psi| are available in closed form.
    fr = model.frequencies
    wx, wy = fr.omega_x, fr.omega_y
    beta = math.sqrt(2.0 * wx) * model.b
    gam = 2.0 * math.sqrt(wx * wy) * model.c
    e1 = np.exp(-1j * wx * t)
    e2 = np.exp(-1j * (wx + wy) * t)
    w = model.a + beta * x * e1 + gam * x * y * e2
    wxd = beta * e1 + gam * y * e2
    wyd = gam * x * e2
    m2 = (w * w.conjugate()).real
    if m2 <= 0.0:
        raise AtNode("quantum potential diverges at the node")
    px = (w.conjugate() * wxd).real
    py = (w.conjugate() * wyd).real
    # laplacian(|W|)/|W| = (|Wx|^2+|Wy|^2)/|W|^2 - (Re(conj(W)Wx)^2+Re(conj(W)Wy)^2)/|W|^4
    lw = ((abs(wxd) ** 2 + abs(wyd) ** 2) / m2 - (px * px + py * py) / (m2 * m2))
    # laplacian(C)/C and cross term with grad C / C = (-wx x, -wy y)
    lc = wx * wx * x * x + wy * wy * y * y - wx - wy
    cross = -2.0 * (wx * x * px + wy * y * py) / m2
    return -0.5 * (lc + cross + lw)


def quantum_potential(model, x, y, t, h=1e-4, floor=PSI_SQ_FLOOR):
    """Quantum potential Q = -(1/2) laplacian(|Psi|) / |Psi|.

    Closed form for the single-node model; 5-point central differences with
    step ``h`` for the two-qubit model (evaluated on |Psi| rescaled by its
    center value, which keeps the stencil well-conditioned in the far tail).
    """
    if psi_sq(model, x, y, t) < floor:
        raise AtNode(f"|Psi|^2 below floor at ({x}, {y}, t={t})")
    if isinstance(model, SingleNodeModel):
        return _quantum_potential_single(model, x, y, t)
    lp0 = 0.5 * log_psi_sq(model, x, y, t)

    def rel(dx, dy):
        return math.exp(0.5 * log_psi_sq(model, x + dx, y + dy, t) - lp0)

    acc = 0.0
    for d in (-2.0 * h, -h, h, 2.0 * h):
        acc += (16.0 if abs(d) == h else -1.0) * (rel(d, 0.0) + rel(0.0, d))
    lap = (acc - 60.0) / (12.0 * h * h)
    return -0.5 * lap
