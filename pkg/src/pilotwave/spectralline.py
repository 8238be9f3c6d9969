"""Reduced pointer dynamics of a dispersive energy detector.

After rescaling time by the inverse fractional resolution T, the pointer
coupling of a single-line source leaves an autonomous planar system in the
field amplitude Q and the reading deviation devE = reading - perfect value.
The flow preserves the product equilibrium (one-particle Born in Q, unit
normal in devE) and is organised by a conserved orbit function; Q-widened
ensembles turn into model line profiles, which the dispersion kernel maps to
recorded spectra.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import gaussian_kde

from .errors import AtNode, OnSeparatrix
from .fieldmodels import sample_one_particle
from .integrate import IntegratorSettings, integrate_batch

SEPARATRIX_RADIUS = 1e-12

# devE-stationary amplitudes: 2 Q^4 - 5 Q^2 + 1 = 0
FIXED_POINT_Q = (math.sqrt((5.0 - math.sqrt(17.0)) / 4.0),
                 math.sqrt((5.0 + math.sqrt(17.0)) / 4.0))


@dataclass(frozen=True)
class DetectorModel:
    """T: inverse fractional resolution; E_line: line energy, arbitrary units."""
    T: float
    E_line: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0.0):
            raise ValueError(f"T={self.T} must be positive and finite")


def reduced_velocity(Q, devE):
    """(dQ/dT, d devE/dT) for the autonomous reduced system."""
    Q = np.asarray(Q, dtype=float)
    devE = np.asarray(devE, dtype=float)
    if np.any(np.abs(Q) < SEPARATRIX_RADIUS):
        raise AtNode("reduced velocity requested at Q = 0")
    dq = devE * (1.0 / Q - Q) / 6.0
    de = 1.0 / (6.0 * Q * Q) + Q * Q / 3.0 - 5.0 / 6.0
    return dq, de


def reduced_velocity_batch():
    """rhs(t, y) over stacked (Q, devE) rows for the batch integrator."""
    def rhs(t, y):
        Q, devE = y[:, 0], y[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            dq = devE * (1.0 / Q - Q) / 6.0
            de = 1.0 / (6.0 * Q * Q) + Q * Q / 3.0 - 5.0 / 6.0
        return np.stack([dq, de], axis=1)
    return rhs


def orbit_constant(Q, devE):
    """Conserved along reduced trajectories; blows up on Q in {0, +-1}."""
    Q = np.asarray(Q, dtype=float)
    devE = np.asarray(devE, dtype=float)
    gap = np.minimum(np.abs(Q), np.abs(np.abs(Q) - 1.0))
    if np.any(gap < SEPARATRIX_RADIUS):
        raise OnSeparatrix("orbit constant undefined on Q in {0, +1, -1}")
    val = devE**2 / 2.0 + Q**2 - np.log(np.abs(Q)) - np.log(np.abs(Q**2 - 1.0))
    return float(val) if val.ndim == 0 else val


LINE_SETTINGS = IntegratorSettings(rtol=1e-11, atol=1e-12, max_step=0.05)


def sample_line_start(n, w, rng):
    """(n, 2) initial points: Q from the w-widened Born marginal, devE normal."""
    Q = sample_one_particle(n, rng, scale=w)
    devE = rng.standard_normal(n)
    return np.stack([Q, devE], axis=1)


@dataclass
class SpectralEnsemble:
    points: np.ndarray        # (n, 2) current (Q, devE)
    w: float
    T: float

    @property
    def Q(self):
        return self.points[:, 0]

    @property
    def devE(self):
        return self.points[:, 1]


@dataclass
class LineProfile:
    ensemble: SpectralEnsemble
    start: np.ndarray
    hist: np.ndarray
    edges: np.ndarray
    mean: float
    std: float
    failed_fraction: float


def line_profile(w, T_obs, n=10_000, seed=0, bins=80, settings=LINE_SETTINGS):
    """Integrate a w-widened ensemble to T_obs; histogram of devE readings."""
    if not 1.0 <= T_obs <= 1000.0:
        raise ValueError(f"T_obs={T_obs} outside [1, 1000]")
    rng = np.random.default_rng(seed)
    y0 = sample_line_start(n, w, rng)
    res = integrate_batch(reduced_velocity_batch(), y0, 0.0, T_obs, settings)
    ok = ~res.failed
    devE = res.y[ok, 1]
    hist, edges = np.histogram(devE, bins=bins, density=True)
    ens = SpectralEnsemble(points=res.y[ok], w=w, T=T_obs)
    return LineProfile(ensemble=ens, start=y0, hist=hist, edges=edges,
                       mean=float(np.mean(devE)), std=float(np.std(devE)),
                       failed_fraction=float(np.mean(res.failed)))


def dispersion(E, detector):
    """Recorded-energy density for true energy detector.E_line: Gaussian with
    mean E_line and fractional width 1/T."""
    sd = detector.E_line / detector.T
    z = (np.asarray(E, dtype=float) - detector.E_line) / sd
    return np.exp(-z * z / 2.0) / (sd * math.sqrt(2.0 * math.pi))


def deviation_to_energy(devE, detector):
    """E = E_line (1 + devE / T)."""
    return detector.E_line * (1.0 + np.asarray(devE, dtype=float) / detector.T)


def observed_spectrum(E_grid, rho_true, T):
    """Blur a tabulated spectrum with the energy-dependent dispersion kernel.

    Each true energy E' contributes a Gaussian of width E'/T; trapezoid
    quadrature over the input grid.  Norm is preserved to quadrature accuracy
    when the grid resolves and contains the kernels.
    """
    E_grid = np.asarray(E_grid, dtype=float)
    rho_true = np.asarray(rho_true, dtype=float)
    if np.any(rho_true < 0.0):
        raise ValueError("true spectrum must be nonnegative")
    if np.any(E_grid <= 0.0):
        raise ValueError("energy grid must be positive")
    sd = E_grid / T                                   # kernel width per source
    z = (E_grid[:, None] - E_grid[None, :]) / sd[None, :]
    K = np.exp(-z * z / 2.0) / (sd[None, :] * math.sqrt(2.0 * math.pi))
    weights = np.gradient(E_grid)
    return K @ (rho_true * weights)


def modality(samples, bandwidth=0.2):
    """Number of modes of a kernel-density smooth at fixed absolute bandwidth.

    Peaks with prominence under 5% of the density maximum count as sampling
    ripple, not modes.
    """
    samples = np.asarray(samples, dtype=float)
    sd = np.std(samples)
    if sd == 0.0:
        return 1
    kde = gaussian_kde(samples, bw_method=bandwidth / sd)
    lo, hi = samples.min() - 3 * bandwidth, samples.max() + 3 * bandwidth
    grid = np.linspace(lo, hi, max(256, int((hi - lo) / (bandwidth / 5))))
    dens = kde(grid)
    peaks, _ = find_peaks(dens, prominence=0.05 * dens.max())
    return max(1, int(len(peaks)))
