"""Bohmian trajectories, flow critical points and chaos diagnostics for
2-D harmonic-oscillator superpositions and entangled coherent-state qubits."""

__version__ = "0.1.0"

from .errors import (AtNode, BohmflowError, Degenerate, GridMismatch,
                     JacobianSingular, NearEscape, NoConvergence, NotSaddle,
                     ParseError, Stalled, TooFewSamples, ValidationError)
from .models import (OscillatorFrequencies, SingleNodeModel, TwoQubitModel,
                     VelocitySample, eval_psi, log_psi_sq, make_two_qubit,
                     psi_sq, quantum_potential, velocity, velocity_jacobian)
from .critical import (FixedPointClassification, NodalPoint, XPoint, YPoint,
                       classify_fixed_point, escape_times, find_x_points,
                       nearest_nodal_point, nodal_points,
                       trace_asymptotic_curves, y_points)
from .integrate import (IntegrationControls, TrajectoryRecord, frame_transform,
                        integrate, integrate_with_deviation, shadow_stretching)
from .analysis import (DistanceChannels, Event, EventLog, LcnSeries, Vortex,
                       classify_trajectory, detect_events, detect_vortices,
                       distance_channels, lcn_series)
from .ensemble import (ColorplotGrid, EnsembleTable, GridSpec,
                       LcnDistribution, colorplot, entanglement_sweep,
                       frobenius_distance, lcn_distribution, run_ensemble)
from .config import RunConfig, parse_config, serialize_config

__all__ = [name for name in dir() if not name.startswith("_")]
