"""Exception types shared across the package."""


class BohmflowError(Exception):
    """Base class for all package-specific errors."""


class AtNode(BohmflowError):
    """The evaluation point sits on (or numerically below) a wavefunction node."""


class NearEscape(BohmflowError):
    """Requested time is too close to a nodal escape instant (nodes at infinity)."""


class NoConvergence(BohmflowError):
    """Newton iteration failed to locate a fixed point on one side of a node."""

    def __init__(self, side, message=""):
        self.side = side
        super().__init__(message or f"no fixed point converged on side {side!r}")


class Degenerate(BohmflowError):
    """Jacobian determinant too small for a meaningful planar classification."""


class NotSaddle(BohmflowError):
    """Asymptotic curves require a saddle point."""


class Stalled(BohmflowError):
    """Integration stalled at a node (repeated clamped steps with vanishing density)."""


class JacobianSingular(BohmflowError):
    """Velocity Jacobian undefined at the current state."""


class TooFewSamples(BohmflowError):
    """Not enough qualifying rows to form a distribution."""


class GridMismatch(BohmflowError):
    """Colorplot grids have incompatible region or bin size."""


class ParseError(BohmflowError):
    """Malformed run-configuration text."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key {key!r}")
        super().__init__(f"{message}" + (f" ({', '.join(loc)})" if loc else ""))


class ValidationError(BohmflowError):
    """A configuration value violates an invariant."""
