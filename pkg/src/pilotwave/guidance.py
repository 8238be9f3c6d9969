"""Guidance-equation velocity fields and trajectory integration.

All velocities are log-derivatives of the Gaussian-stripped polynomial part P
(psi = P e^{-eta^2/2}/sqrt(pi)): the envelope's radial log-derivative is the
real number -eta, which drops out of Im(..), so P alone determines the flow
and stays well scaled at any radius.  Node proximity is measured by the
dimensionless ratio |P|^2 / B(eta)^2 with B the per-state envelope bound.
"""

import math

import numpy as np

from .errors import AtNode, OriginSingular
from .integrate import DEFAULT_SETTINGS, integrate_batch, integrate as _integrate
from .states import (SQRT_PI, _coeff_matrix, as_xy, envelope_bound, eval_psi,
                     poly_parts)
from numpy.polynomial import polynomial as npoly

# querying a velocity closer to a node than this (relative amplitude^2) is
# meaningless in float64; the step guard (1e-12) fires far earlier
ATNODE_REL = 1e-24


def node_proximity(state, qx, qy, t):
    """|P|^2 / B(eta)^2: scale-invariant squared distance-to-node measure."""
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    P = poly_parts(state, qx, qy, t)
    B = envelope_bound(state, np.hypot(qx, qy))
    return np.abs(P) ** 2 / B**2


def velocity_polar(state, config, t):
    """(eta_dot, phi_dot) at one configuration.

    phi_dot is the angular rate, Im(dP/dphi / P)/eta^2.
    """
    qx, qy = as_xy(config)
    eta = math.hypot(float(qx), float(qy))
    if eta < 1e-12:
        raise OriginSingular("polar velocity undefined at eta < 1e-12")
    P, dPe, dPp = poly_parts(state, qx, qy, t, derivatives=True)
    if _rel2(state, P, eta) < ATNODE_REL:
        raise AtNode(f"velocity query at a node (eta={eta:.4g})")
    return float(np.imag(dPe / P)), float(np.imag(dPp / P)) / eta**2


def velocity_cartesian(state, config, t):
    """(vQx, vQy) = Im(grad psi / psi) at one configuration."""
    qx, qy = as_xy(config)
    qx, qy = float(qx), float(qy)
    eta = math.hypot(qx, qy)
    if eta < 1e-12:
        return _origin_velocity(state, t)
    P, dPe, dPp = poly_parts(state, qx, qy, t, derivatives=True)
    if _rel2(state, P, eta) < ATNODE_REL:
        raise AtNode(f"velocity query at a node ({qx:.4g}, {qy:.4g})")
    veta = np.imag(dPe / P)
    vphi = np.imag(dPp / P) / eta**2
    c, s = qx / eta, qy / eta
    return float(veta * c - eta * vphi * s), float(veta * s + eta * vphi * c)


def _rel2(state, P, eta):
    return float(np.abs(P) ** 2) / float(envelope_bound(state, eta)) ** 2


def _origin_velocity(state, t):
    """Limit of Im(grad psi/psi) at eta = 0.

    P(0) takes contributions only from nd = ng modes; the first Cartesian
    derivatives only from |nd - ng| = 1 modes (coefficient of eta^1).
    """
    F = _coeff_matrix(state.m)
    nq, lq = state.n_quanta, state.ang_momentum
    ph = np.exp(-1j * nq * t)
    P0 = np.sum(state.coeffs[lq == 0] * ph[lq == 0] * F[lq == 0, 0])
    dw = dwb = 0j
    if state.m >= 1:
        dw = np.sum(state.coeffs[lq == 1] * ph[lq == 1] * F[lq == 1, 1])
        dwb = np.sum(state.coeffs[lq == -1] * ph[lq == -1] * F[lq == -1, 1])
    if abs(P0) ** 2 / float(envelope_bound(state, 0.0)) ** 2 < ATNODE_REL:
        raise AtNode("origin is a node of this state")
    dx = dw + dwb
    dy = 1j * (dw - dwb)
    return float(np.imag(dx / P0)), float(np.imag(dy / P0))


def velocity_batch(state):
    """Closure (t_vec, y) -> velocities for the batched integrator.

    Never raises: points at nodes or the origin come back NaN, which the
    stepper treats as a rejected step.
    """
    def vel(t, y):
        qx, qy = y[:, 0], y[:, 1]
        eta2 = qx**2 + qy**2
        P, dPe, dPp = poly_parts(state, qx, qy, t, derivatives=True)
        with np.errstate(all="ignore"):
            rad = np.imag(dPe / P) / np.sqrt(eta2)
            ang = np.imag(dPp / P) / eta2
            vx = rad * qx - ang * qy
            vy = rad * qy + ang * qx
        return np.stack([vx, vy], axis=1)
    return vel


def node_guard(state, threshold):
    """Closure (t_vec, y) -> bool array marking near-node landings."""
    def prox(t, y):
        return node_proximity(state, y[:, 0], y[:, 1], t) < threshold
    return prox


def integrate_guidance(state, start, t0, t1, settings=DEFAULT_SETTINGS):
    """One trajectory of the guidance flow; StepUnderflow reports location."""
    qx, qy = as_xy(start)
    return _integrate(velocity_batch(state), np.array([qx, qy], dtype=float),
                      t0, t1, settings,
                      proximity=node_guard(state, settings.node_guard_radius))


def integrate_ensemble(state, starts, t0, t1, settings=DEFAULT_SETTINGS,
                       track_angle=False):
    """Batched trajectories from an (n, 2) array of starts; returns BatchResult."""
    return integrate_batch(velocity_batch(state), np.asarray(starts, dtype=float),
                           t0, t1, settings,
                           proximity=node_guard(state, settings.node_guard_radius),
                           track_angle=track_angle)


# ---------------------------------------------------------------------------
# density time-derivative and the Green's-function velocity
# ---------------------------------------------------------------------------

def density_rate(state, qx, qy, t):
    """Analytic d|psi|^2/dT on arrays of points."""
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    eta = np.hypot(qx, qy)
    phi = np.arctan2(qy, qx)
    F = _coeff_matrix(state.m)
    nq, lq = state.n_quanta, state.ang_momentum
    P = np.zeros(np.broadcast(eta, np.asarray(t, dtype=float)).shape, dtype=complex)
    dPt = np.zeros_like(P)
    for k, c in enumerate(state.coeffs):
        if c == 0:
            continue
        mode = c * np.exp(1j * (lq[k] * phi - nq[k] * np.asarray(t, dtype=float)))
        fval = npoly.polyval(eta, F[k])
        P += mode * fval
        dPt += -1j * nq[k] * mode * fval
    return 2.0 * np.real(np.conj(P) * dPt) * np.exp(-(eta**2)) / np.pi


def velocity_green(drho_dt, xs, ys, config, psi_sq):
    """Non-canonical velocity from the 2-D Green's-function construction.

    v(x) = 1/(2 pi |psi(x)|^2) * integral of (unit vector x->x') / |x - x'|
    times drho_dt(x') over the grid, midpoint rule; the self-cell (odd kernel
    over a symmetric cell) contributes zero.
    """
    if psi_sq < 1e-300:
        raise AtNode("Green velocity undefined at a node")
    qx, qy = as_xy(config)
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float),
                       indexing="ij")
    dx = float(xs[1] - xs[0])
    dy = float(ys[1] - ys[0])
    rx = X - float(qx)
    ry = Y - float(qy)
    r2 = rx**2 + ry**2
    with np.errstate(all="ignore"):
        wx = rx / r2
        wy = ry / r2
    self_cell = r2 < (0.25 * min(dx, dy)) ** 2
    wx[self_cell] = 0.0
    wy[self_cell] = 0.0
    area = dx * dy
    pref = area / (2.0 * np.pi * psi_sq)
    return (pref * float(np.sum(wx * drho_dt)),
            pref * float(np.sum(wy * drho_dt)))


def velocity_green_field(state, t, xs, ys):
    """Green's-function velocity evaluated at every grid point (2 arrays)."""
    X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float),
                       indexing="ij")
    rate = density_rate(state, X, Y, t)
    psi2 = np.abs(eval_psi(state, X, Y, t)) ** 2
    vx = np.zeros_like(X)
    vy = np.zeros_like(Y)
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            vx[i, j], vy[i, j] = velocity_green(
                rate, xs, ys, (X[i, j], Y[i, j]), float(psi2[i, j]))
    return vx, vy
