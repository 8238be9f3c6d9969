"""Guidance velocities against finite-difference oracles, node handling,
and the Green's-function construction."""

import math

import numpy as np
import pytest

import oracles
from pilotwave.errors import AtNode, OriginSingular
from pilotwave.guidance import (density_rate, integrate_ensemble,
                                integrate_guidance, node_proximity,
                                velocity_batch, velocity_cartesian,
                                velocity_green_field, velocity_polar)
from pilotwave.integrate import TWO_PI
from pilotwave.states import eval_psi, eval_psi_grid, make_state, random_state
from pilotwave.vorticity import m1_node_position


def psi_func(state):
    cd = {(int(a), int(b)): c
          for a, b, c in zip(state.nd, state.ng, state.coeffs)}
    return lambda x, y, t: oracles.psi_oracle(cd, x, y, t)


@pytest.mark.parametrize("m,seed,t", [(2, 3, 0.0), (3, 7, 0.8), (4, 1, 2.6)])
def test_velocity_matches_phase_gradient_oracle(m, seed, t, rng):
    state = random_state(m, seed)
    qx = rng.uniform(-3, 3, 25)
    qy = rng.uniform(-3, 3, 25)
    keep = node_proximity(state, qx, qy, t) > 1e-8
    vfx, vfy = oracles.fd_velocity(psi_func(state), qx, qy, t)
    for i in np.flatnonzero(keep):
        vx, vy = velocity_cartesian(state, (qx[i], qy[i]), t)
        assert abs(vx - vfx[i]) < 1e-7 * (1 + abs(vx))
        assert abs(vy - vfy[i]) < 1e-7 * (1 + abs(vy))


def test_polar_and_cartesian_agree(rng):
    state = random_state(3, 11)
    for _ in range(20):
        eta = rng.uniform(0.3, 3.0)
        phi = rng.uniform(0.0, TWO_PI)
        qx, qy = eta * math.cos(phi), eta * math.sin(phi)
        veta, vphi = velocity_polar(state, (qx, qy), 0.4)
        vx, vy = velocity_cartesian(state, (qx, qy), 0.4)
        px = veta * math.cos(phi) - eta * vphi * math.sin(phi)
        py = veta * math.sin(phi) + eta * vphi * math.cos(phi)
        assert abs(vx - px) < 1e-12
        assert abs(vy - py) < 1e-12


def test_batch_closure_matches_scalar(rng):
    state = random_state(2, 5)
    vel = velocity_batch(state)
    y = rng.uniform(-2.5, 2.5, size=(15, 2))
    t = np.full(15, 1.1)
    out = vel(t, y)
    for i in range(15):
        vx, vy = velocity_cartesian(state, (y[i, 0], y[i, 1]), 1.1)
        assert abs(out[i, 0] - vx) < 1e-12
        assert abs(out[i, 1] - vy) < 1e-12


def test_node_and_origin_guards():
    state = random_state(1, 9)
    t = 0.6
    nx, ny = m1_node_position(state, t)
    with pytest.raises(AtNode):
        velocity_cartesian(state, (nx, ny), t)
    with pytest.raises(OriginSingular):
        velocity_polar(state, (0.0, 0.0), t)
    vel = velocity_batch(state)
    out = vel(np.array([t]), np.array([[0.0, 0.0]]))   # eta^2 = 0 exactly
    assert not np.all(np.isfinite(out))


def test_density_rate_matches_fd(rng):
    state = random_state(3, 13)
    qx = rng.uniform(-3, 3, 20)
    qy = rng.uniform(-3, 3, 20)
    t, h = 0.9, 1e-6
    fd = (np.abs(eval_psi(state, qx, qy, t + h)) ** 2
          - np.abs(eval_psi(state, qx, qy, t - h)) ** 2) / (2 * h)
    assert np.max(np.abs(density_rate(state, qx, qy, t) - fd)) < 1e-7


def test_continuity_equation_pointwise(rng):
    state = random_state(2, 21)
    t, h = 1.3, 1e-5
    qx = rng.uniform(-2.5, 2.5, 15)
    qy = rng.uniform(-2.5, 2.5, 15)

    def flux(x, y):
        fx = np.empty_like(x)
        fy = np.empty_like(x)
        for i in range(len(x)):
            vx, vy = velocity_cartesian(state, (x[i], y[i]), t)
            rho = abs(eval_psi(state, x[i], y[i], t)) ** 2
            fx[i], fy[i] = rho * vx, rho * vy
        return fx, fy

    keep = node_proximity(state, qx, qy, t) > 1e-6
    div = (flux(qx + h, qy)[0] - flux(qx - h, qy)[0]) / (2 * h) \
        + (flux(qx, qy + h)[1] - flux(qx, qy - h)[1]) / (2 * h)
    rate = density_rate(state, qx, qy, t)
    assert np.max(np.abs(div + rate)[keep]) < 1e-4


def test_eigenstate_orbit_is_circular():
    state = make_state({(1, 0): 1.0})
    tr = integrate_guidance(state, (2.0, 0.0), 0.0, TWO_PI)
    radii = np.hypot(tr.ys[:, 0], tr.ys[:, 1])
    assert np.max(np.abs(radii - 2.0)) < 1e-8
    dphi = math.atan2(tr.ys[-1, 1], tr.ys[-1, 0])
    assert abs(dphi - TWO_PI / 4.0) < 1e-7   # phase speed 1/eta^2 at eta=2


def test_ensemble_masks_node_starts():
    state = random_state(1, 9)
    nx, ny = m1_node_position(state, 0.0)
    starts = np.array([[nx, ny], [1.5, 0.7], [-0.8, 1.1]])
    res = integrate_ensemble(state, starts, 0.0, 1.0)
    assert bool(res.failed[0])
    assert not res.failed[1:].any()
    assert np.all(np.isfinite(res.y))


# ---------------------------------------------------------------------------
# Green's-function route
# ---------------------------------------------------------------------------

def test_green_velocity_vanishes_for_stationary_state():
    eig = make_state({(2, 1): 1.0})
    xs = np.linspace(-6.0, 6.0, 64)
    vgx, vgy = velocity_green_field(eig, 0.3, xs, xs)
    psi2 = np.abs(eval_psi_grid(eig, xs, xs, 0.3)) ** 2
    sel = psi2 > 1e-8
    assert np.max(np.hypot(vgx, vgy)[sel]) < 1e-9


def test_green_velocity_satisfies_continuity_on_grid():
    state = random_state(3, 7)
    xs = np.linspace(-6.0, 6.0, 64)
    t = 0.8
    vgx, vgy = velocity_green_field(state, t, xs, xs)
    psi2 = np.abs(eval_psi_grid(state, xs, xs, t)) ** 2
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    rate = density_rate(state, X, Y, t)
    dx = xs[1] - xs[0]
    div = np.gradient(psi2 * vgx, dx, axis=0) + np.gradient(psi2 * vgy, dx, axis=1)
    inner = (slice(4, -4), slice(4, -4))
    assert np.max(np.abs((div + rate)[inner])) < 0.15 * np.max(np.abs(rate))
