"""Truncated field-theory models: two-mode decay and pointer measurement.

Both models have closed-form velocity fields, so ensemble work is a batched
ODE integration over samples drawn from analytic initial densities.  The
decay model lives in the two mode amplitudes (q1, q2); the measurement model
in the field amplitude Q and pointer position Y, rescaled so the pointer
packets drift apart at unit rate per quantum of energy.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import AtNode
from .integrate import IntegratorSettings, integrate_batch

_EXP_CLIP = 350.0   # keeps |D|^2 ~ e^700 finite; beyond this the vacuum limit holds


# ---------------------------------------------------------------------------
# two-field decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayConfig:
    q1: float
    q2: float
    omega: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.q1) and np.isfinite(self.q2)):
            raise ValueError("amplitudes must be finite")
        if not (self.omega > 0 and self.g > 0):
            raise ValueError("omega and g must be positive")


def decay_velocity(config, t):
    """Closed-form (q1_dot, q2_dot) for the oscillatory decay state."""
    w, g = config.omega, config.g
    c = math.cos(g * t / (2 * w))
    s = math.sin(g * t / (2 * w))
    denom = config.q1**2 * c * c + config.q2**2 * s * s
    if denom < 1e-300:
        raise AtNode(f"decay state node at ({config.q1}, {config.q2}), t={t}")
    half_sin = 0.5 * math.sin(g * t / w)
    lam = g / (2 * w * w)
    qd1 = half_sin * (config.q2 - lam * config.q1) / denom
    qd2 = half_sin * (lam * config.q2 - config.q1) / denom
    return qd1, qd2


def decay_velocity_batch(omega=1.0, g=1.0):
    """Vectorized decay velocity; NaN rows at nodes (integrator halves onto them)."""
    lam = g / (2 * omega * omega)

    def rhs(t, y):
        q1, q2 = y[:, 0], y[:, 1]
        c = np.cos(g * t / (2 * omega))
        s = np.sin(g * t / (2 * omega))
        denom = q1 * q1 * c * c + q2 * q2 * s * s
        half_sin = 0.5 * np.sin(g * t / omega)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.stack([half_sin * (q2 - lam * q1) / denom,
                            half_sin * (lam * q2 - q1) / denom], axis=1)
        out[denom < 1e-300] = np.nan
        return out
    return rhs


def one_particle_cdf(q, scale=1.0):
    """CDF of the one-particle Born marginal 2 q^2 e^{-q^2} / sqrt(pi)."""
    q = np.asarray(q, dtype=float) / scale
    return 0.5 * (1.0 + erf(q)) - q * np.exp(-q * q) / math.sqrt(math.pi)


def sample_one_particle(n, rng, scale=1.0):
    """Samples of 2 q^2 e^{-q^2} / sqrt(pi) by rejection from a unit normal."""
    out = np.empty(n)
    have = 0
    while have < n:
        q = rng.standard_normal(2 * (n - have) + 32)
        u = rng.uniform(size=q.shape)
        # target / (M * proposal) with M = 2.2 covering 2 sqrt(2) q^2 e^{-q^2/2}
        accept = u < (2.0 * math.sqrt(2.0) * q * q * np.exp(-q * q / 2)) / 2.2
        got = q[accept][: n - have]
        out[have:have + len(got)] = got
        have += len(got)
    return out * scale


@dataclass
class DecayEnsemble:
    start: np.ndarray       # (n, 2) initial (q1, q2)
    samples: np.ndarray     # (n, 2) final (q1, q2)
    failed: np.ndarray      # (n,) bool
    t_end: float


DECAY_SETTINGS = IntegratorSettings(max_step=math.pi / 50)


def decay_ensemble(n=10000, t_end=math.pi, w=(1.0, 1.0), seed=0,
                   omega=1.0, g=1.0, settings=DECAY_SETTINGS):
    """Evolve n samples of the (possibly widened/narrowed) product ensemble.

    Equilibrium at t=0 is one-particle Born in q1 times a vacuum Gaussian in
    q2; w scales each axis about its equilibrium width.
    """
    rng = np.random.default_rng(seed)
    q1 = sample_one_particle(n, rng, scale=w[0] / math.sqrt(omega))
    q2 = rng.standard_normal(n) * (w[1] / math.sqrt(2 * omega))
    y0 = np.stack([q1, q2], axis=1)
    res = integrate_batch(decay_velocity_batch(omega, g), y0, 0.0, t_end,
                          settings=settings)
    return DecayEnsemble(start=y0, samples=res.y, failed=res.failed,
                         t_end=t_end)


# ---------------------------------------------------------------------------
# energy measurement of a mode: vacuum, one particle, superposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementConfig:
    Q: float
    Y: float
    T: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.Q) and np.isfinite(self.Y)
                and np.isfinite(self.T)):
            raise ValueError("configuration must be finite")


def _vel_vacuum(Q, Y, T):
    return Q * (T - Y) / 3.0, (2.0 / 3.0) * (1.0 + Q * Q)


def _vel_one_particle(Q, Y, T):
    dq = (Y - 3.0 * T) * (1.0 / Q - Q) / 3.0
    dy = 1.0 / (3.0 * Q * Q) + 4.0 / 3.0 + (2.0 / 3.0) * Q * Q
    return dq, dy


def _vel_superposition(theta, Q, Y, T):
    """Velocities for c0 = e^{i theta}/sqrt(2), c1 = 1/sqrt(2)."""
    A = np.minimum(T * (2.0 * T - Y), _EXP_CLIP)
    D = (np.exp(1j * theta) / math.sqrt(2.0)) * np.exp(A) + Q
    d2 = np.abs(D) ** 2
    num = -(5.0 / 3.0) * T + (2.0 / 3.0) * Q * Q * T + Y / 3.0
    dq = np.real(num / D) + (2.0 / 3.0) * Q * T / d2 - (Y - T) * Q / 3.0
    dy = np.real((2.0 / 3.0) * Q / D) + (1.0 / 3.0) / d2 \
        + (2.0 / 3.0) * (Q * Q + 1.0)
    return dq, dy, d2


def measurement_velocity(case, config):
    """(dQ/dT, dY/dT) for case 'vacuum', 'one_particle', or ('superposition', theta)."""
    Q, Y, T = config.Q, config.Y, config.T
    if case == "vacuum":
        return _vel_vacuum(Q, Y, T)
    if case == "one_particle":
        if abs(Q) < 1e-150:
            raise AtNode(f"one-particle node at Q=0, T={T}")
        return _vel_one_particle(Q, Y, T)
    kind, theta = case
    if kind != "superposition":
        raise ValueError(f"unknown case {case!r}")
    dq, dy, d2 = _vel_superposition(theta, np.float64(Q), np.float64(Y),
                                    np.float64(T))
    if d2 < 1e-300:
        raise AtNode(f"superposition node at Q={Q}, Y={Y}, T={T}")
    return float(dq), float(dy)


def measurement_velocity_batch(case):
    if case == "vacuum":
        def rhs(t, y):
            dq, dy = _vel_vacuum(y[:, 0], y[:, 1], t)
            return np.stack([dq, dy], axis=1)
        return rhs
    if case == "one_particle":
        def rhs(t, y):
            Q = y[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                dq, dy = _vel_one_particle(Q, y[:, 1], t)
            out = np.stack([dq, dy], axis=1)
            out[np.abs(Q) < 1e-150] = np.nan
            return out
        return rhs
    kind, theta = case
    if kind != "superposition":
        raise ValueError(f"unknown case {case!r}")

    def rhs(t, y):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dq, dy, d2 = _vel_superposition(theta, y[:, 0], y[:, 1], t)
        out = np.stack([dq, dy], axis=1)
        out[d2 < 1e-300] = np.nan
        return out
    return rhs


def sample_superposition_Q(n, theta, rng):
    """Rejection samples of (1/2 + Q^2 + sqrt(2) Q cos theta) e^{-Q^2}/sqrt(pi)."""
    ct = math.cos(theta)
    out = np.empty(n)
    have = 0
    while have < n:
        q = rng.standard_normal(2 * (n - have) + 32)
        u = rng.uniform(size=q.shape)
        ratio = math.sqrt(2.0) * (0.5 + q * q + math.sqrt(2.0) * q * ct) \
            * np.exp(-q * q / 2)
        accept = u < ratio / 2.7
        got = q[accept][: n - have]
        out[have:have + len(got)] = got
        have += len(got)
    return out


def sample_measurement_start(case, n, w, seed):
    """Widened Born samples (Q, Y) at T=0 for the given case."""
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal(n)
    if case == "vacuum":
        Q = rng.standard_normal(n) / math.sqrt(2.0)
    elif case == "one_particle":
        Q = sample_one_particle(n, rng)
    else:
        kind, theta = case
        if kind != "superposition":
            raise ValueError(f"unknown case {case!r}")
        Q = sample_superposition_Q(n, theta, rng)
    return np.stack([w * Q, Y], axis=1)


MEASUREMENT_SETTINGS = IntegratorSettings(max_step=0.02)


def _superposition_tau_rhs(theta):
    """Node-regularized superposition flow: d(Q, Y, T)/dtau = g * (dQ, dY, 1).

    g = |D|^2 / (1 + |D|^2) removes the 1/|D|^2 divergence, so the nodal line
    (real theta only) is crossed transversally at rate Q*T instead of ending
    the trajectory in a finite-time collision; away from nodes g ~ 1 and tau
    is ordinary time.
    """
    c0 = np.exp(1j * theta) / math.sqrt(2.0)

    def rhs(tau, y):
        Q, Yv, T = y[:, 0], y[:, 1], y[:, 2]
        A = np.minimum(T * (2.0 * T - Yv), _EXP_CLIP)
        D = c0 * np.exp(A) + Q
        d2 = np.abs(D) ** 2
        inv = 1.0 / (1.0 + d2)
        g = d2 * inv
        num = -(5.0 / 3.0) * T + (2.0 / 3.0) * Q * Q * T + Yv / 3.0
        dq = (num * np.real(D) + (2.0 / 3.0) * Q * T) * inv \
            - (Yv - T) * Q / 3.0 * g
        dy = ((2.0 / 3.0) * Q * np.real(D) + 1.0 / 3.0) * inv \
            + (2.0 / 3.0) * (Q * Q + 1.0) * g
        return np.stack([dq, dy, g], axis=1)
    return rhs


def _backstep_rhs(theta):
    """Unit-pseudo-time walk-back by each point's own overshoot span c."""
    def rhs(s, y):
        Q, Yv, T, c = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dq, dy, d2 = _vel_superposition(theta, Q, Yv, T)
        out = np.stack([-c * dq, -c * dy, -c, np.zeros_like(c)], axis=1)
        out[d2 < 1e-300] = np.nan
        return out
    return rhs


def _superposition_ensemble(theta, y0, T_end, settings, tau_chunk=2.0,
                            max_rounds=40):
    """Evolve (Q, Y) samples to T_end through the regularized flow."""
    n = len(y0)
    state = np.concatenate([y0, np.zeros((n, 1))], axis=1)
    failed = np.zeros(n, dtype=bool)
    for _ in range(max_rounds):
        idx = np.flatnonzero(~failed & (state[:, 2] < T_end))
        if len(idx) == 0:
            break
        res = integrate_batch(_superposition_tau_rhs(theta), state[idx],
                              0.0, tau_chunk, settings=settings)
        state[idx] = res.y
        failed[idx[res.failed]] = True
    failed |= state[:, 2] < T_end
    # batched walk-back of the overshoot along the plain (off-node) flow
    final = np.full((n, 2), np.nan)
    oi = np.flatnonzero(~failed)
    if len(oi):
        yb = np.concatenate([state[oi, :3],
                             (state[oi, 2] - T_end)[:, None]], axis=1)
        resb = integrate_batch(_backstep_rhs(theta), yb, 0.0, 1.0,
                               settings=settings)
        final[oi] = resb.y[:, :2]
        failed[oi[resb.failed]] = True
    return final, failed


DEFAULT_PHASES = tuple(2.0 * math.pi * k / 10 for k in range(1, 11))


def measurement_ensemble(case, n=10000, w=1.0, T_end=4.5, seed=0,
                         settings=MEASUREMENT_SETTINGS):
    y0 = sample_measurement_start(case, n, w, seed)
    if isinstance(case, tuple):
        y1, failed = _superposition_ensemble(case[1], y0, T_end, settings)
        return y0, y1, failed
    res = integrate_batch(measurement_velocity_batch(case), y0, 0.0, T_end,
                          settings=settings)
    return y0, res.y, res.failed


def detection_probability(w, theta_list=DEFAULT_PHASES, T_end=4.5, n=10000,
                          seed=0, threshold=9.0):
    """Fraction of the ensemble past the pointer threshold, averaged over phases."""
    per_theta = []
    for i, theta in enumerate(theta_list):
        y0, y1, failed = measurement_ensemble(
            ("superposition", theta), n=n, w=w, T_end=T_end,
            seed=seed + 7919 * i)
        ok = ~failed
        per_theta.append(float(np.mean(y1[ok, 1] > threshold)))
    return float(np.mean(per_theta)), per_theta


# ---------------------------------------------------------------------------
# the stationary vacuum pointer (normal-ordered frame)
# ---------------------------------------------------------------------------

def vacuum_normal_velocity(Q, Yp):
    """Normal-ordered vacuum flow: time-independent in Y' = Y - T."""
    return -Q * Yp / 3.0, (2.0 / 3.0) * Q * Q - 1.0 / 3.0


def _pointer_rhs(t, y):
    # (u, Y') with u = ln|Q|; orbits bounded, never cross Q = 0
    return np.stack([-y[:, 1] / 3.0,
                     (2.0 * np.exp(2.0 * y[:, 0]) - 1.0) / 3.0], axis=1)


@dataclass
class PointerSpectrum:
    values: np.ndarray       # Y' samples at T_end
    density: np.ndarray      # normalized histogram
    edges: np.ndarray
    n: int
    converged: bool          # successive-snapshot L1 < 0.02


def _hist(values, edges):
    h, _ = np.histogram(values, bins=edges, density=True)
    return h


def stationary_vacuum_pointer(w, T_end=120.0, n=20000, seed=0, bins=48,
                              check_T=100.0):
    """Pointer marginal in Y' for a vacuum widened by w, run to stationarity.

    The marginal estimate averages three snapshots around each comparison
    time; orbital phase advance decorrelates them, beating down shot noise
    that a single-snapshot histogram cannot get under the 0.02 L1 check.
    """
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal(n) * (w / math.sqrt(2.0))
    Q[Q == 0.0] = 1e-8
    Yp = rng.standard_normal(n)
    y = np.stack([np.log(np.abs(Q)), Yp], axis=1)
    settings = IntegratorSettings(max_step=0.1)
    edges = np.linspace(-12.0, 12.0, bins + 1)
    gap = (T_end - check_T) / 5.0
    snap_T = [check_T - 2 * gap, check_T - gap, check_T,
              T_end - 2 * gap, T_end - gap, T_end]
    t = 0.0
    hists = []
    for tn in snap_T:
        y = integrate_batch(_pointer_rhs, y, t, tn, settings=settings).y
        t = tn
        hists.append(_hist(y[:, 1], edges))
    h_mid = np.mean(hists[:3], axis=0)
    h_fin = np.mean(hists[3:], axis=0)
    l1 = float(np.sum(np.abs(h_fin - h_mid)) * (edges[1] - edges[0]))
    return PointerSpectrum(values=y[:, 1], density=h_fin, edges=edges,
                           n=n, converged=l1 < 0.02)
