"""Exception types shared across the package."""


class PilotWaveError(Exception):
    """Base class for all numerical-laboratory errors."""


class CutoffExceeded(PilotWaveError):
    """Requested operation is only defined below an energy cutoff."""


class AtNode(PilotWaveError):
    """Velocity requested at (or numerically indistinguishable from) a node."""


class OriginSingular(PilotWaveError):
    """Polar quantity requested at the coordinate origin."""


class StepUnderflow(PilotWaveError):
    """Adaptive stepper halved below the floor, usually on top of a vortex.

    Carries the last location and time in .location / .time when raised by
    the trajectory integrator.
    """

    def __init__(self, msg, location=None, time=None):
        super().__init__(msg)
        self.location = location
        self.time = time


class TrackingLost(PilotWaveError):
    """Node continuation could not be matched unambiguously."""


class ImpossibleCategory(PilotWaveError):
    """Requested vorticity category does not exist at this cutoff."""


class IndeterminateVorticity(PilotWaveError):
    """A root of the reduced polynomial sits on the unit circle."""


class SupportMismatch(PilotWaveError):
    """Density has weight where the reference measure vanishes."""


class CFLViolated(PilotWaveError):
    """Finite-volume step exceeds the stability bound (mis-set cap or dt)."""


class BuildFailed(PilotWaveError):
    """Too many masked cells or trajectories to trust the result."""


class OnSeparatrix(PilotWaveError):
    """Orbit constant requested on an invariant separatrix line."""
