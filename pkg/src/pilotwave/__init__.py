"""Numerical laboratory for pilot-wave dynamics of the 2-D isotropic oscillator."""

__version__ = "0.1.0"

from .errors import (AtNode, BuildFailed, CFLViolated, CutoffExceeded,
                     ImpossibleCategory, IndeterminateVorticity, OnSeparatrix,
                     OriginSingular, PilotWaveError, StepUnderflow,
                     SupportMismatch, TrackingLost)
from .states import (Configuration, OscillatorState, eval_psi, eval_grad_psi,
                     make_state, random_state, load_state, save_state)
from .integrate import IntegratorSettings
