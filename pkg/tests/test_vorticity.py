"""Winding integrals vs the root-count route, node finding/tracking, and
category sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from pilotwave.errors import ImpossibleCategory, IndeterminateVorticity
from pilotwave.states import (angular_to_cartesian, make_state, random_state,
                              state_from_cartesian)
from pilotwave.vorticity import (TWO_PI, census, find_nodes,
                                 generate_classified_states, m1_node_position,
                                 top_shell_poly, total_vorticity, track_nodes,
                                 winding_integral)

# the default scan box can miss far-out nodes of near-degenerate states; the
# node-sum checks use this wider one
WIDE = (-16.0, 16.0, -16.0, 16.0)


def psi_func(state):
    cd = {(int(a), int(b)): c
          for a, b, c in zip(state.nd, state.ng, state.coeffs)}
    return lambda x, y, t: oracles.psi_oracle(cd, x, y, t)


@pytest.mark.parametrize("m,seed,t,radius", [(2, 0, 0.0, 2.5), (3, 5, 1.1, 2.0),
                                             (4, 9, 0.4, 3.0)])
def test_winding_matches_phase_oracle(m, seed, t, radius):
    # the Gaussian envelope is positive, so psi and its polynomial part share
    # a phase and the two loop integrals must agree
    state = random_state(m, seed)
    w = winding_integral(state, t, radius)
    w_ref = oracles.winding_oracle(psi_func(state), t, radius)
    assert abs(w - w_ref) < 1e-9
    assert abs(w / TWO_PI - round(w / TWO_PI)) < 1e-9


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_far_loop_reads_total_vorticity(m):
    state = random_state(m, 10 + m)
    vc = total_vorticity(state)
    w = winding_integral(state, 0.7, 25.0)
    assert abs(w - vc.total_vorticity) < 1e-9


@pytest.mark.parametrize("m,seed", [(2, 0), (2, 1), (2, 3), (2, 4),
                                    (3, 0), (3, 2), (3, 4)])
def test_node_windings_sum_to_total(m, seed):
    state = random_state(m, seed)
    vc = total_vorticity(state)
    ns = find_nodes(state, 0.3, search_box=WIDE, grid_n=384)
    assert len(ns.nodes) <= m * m
    for n in ns.nodes:
        assert abs(abs(n.vorticity) - TWO_PI) < 1e-6
    assert abs(sum(n.vorticity for n in ns.nodes) - vc.total_vorticity) < 1e-6


def test_loop_through_node_is_rejected():
    state = random_state(1, 5)
    x0, y0 = m1_node_position(state, 0.4)
    r = 0.7
    with pytest.raises(IndeterminateVorticity):
        winding_integral(state, 0.4, r, center=(x0 - r, y0))


def test_tied_shell_coefficients_are_indeterminate():
    # equal moduli put the shell-polynomial root exactly on the unit circle
    state = make_state({(0, 1): 2**-0.5, (1, 0): 2**-0.5})
    with pytest.raises(IndeterminateVorticity):
        total_vorticity(state)


def test_top_shell_coefficients():
    state = make_state({(2, 0): 0.6, (1, 1): 0.8j, (0, 1): 0.0},
                       normalize=True)
    a = top_shell_poly(state)
    norm = math.hypot(0.6, 0.8)
    assert a.shape == (3,)
    assert abs(a[2] - 0.6 / norm / math.sqrt(2)) < 1e-12
    assert abs(a[1] - 0.8j / norm) < 1e-12
    assert a[0] == 0


@pytest.mark.parametrize("coeffs,winding", [({(3, 0): 1.0}, 3),
                                            ({(0, 3): 1.0}, -3),
                                            ({(4, 0): 1.0}, 4)])
def test_pure_mode_windings(coeffs, winding):
    vc = total_vorticity(make_state(coeffs))
    assert vc.winding == winding
    assert vc.category == "maximal"
    assert vc.total_vorticity == pytest.approx(TWO_PI * winding)


@given(st.integers(2, 4), st.integers(0, 10**6))
def test_winding_parity_and_bound(m, seed):
    # 2*(roots inside) - m forces |w| <= m with the parity of m
    try:
        vc = total_vorticity(random_state(m, (41, seed)))
    except IndeterminateVorticity:
        return
    assert abs(vc.winding) <= m
    assert (vc.winding - m) % 2 == 0


def test_census_m2_abundances():
    rows = census(2, 2000, 77)
    assert [k for k, _, _ in rows] == list(range(2000))
    ws = [w for _, w, _ in rows if w is not None]
    n = len(ws)
    assert n > 1990
    zero = sum(1 for w in ws if w == 0) / n
    up = sum(1 for w in ws if w == 2) / n
    dn = sum(1 for w in ws if w == -2) / n
    assert abs(zero - 0.66) < 0.05
    assert abs(up - 0.17) < 0.03
    assert abs(dn - 0.17) < 0.03


def test_generate_classified_states():
    for state in generate_classified_states(2, "zero", 5, seed=3):
        assert total_vorticity(state).winding == 0
    for state in generate_classified_states(3, "maximal", 5, seed=3):
        assert abs(total_vorticity(state).winding) == 3


def test_zero_category_impossible_for_odd_m():
    with pytest.raises(ImpossibleCategory):
        generate_classified_states(3, "zero", 1, seed=0)
    with pytest.raises(ValueError):
        generate_classified_states(2, "rotating", 1, seed=0)


def test_m1_node_path_matches_oracle():
    state = random_state(1, 5)
    cart = angular_to_cartesian(state)
    T = np.linspace(0.0, TWO_PI, 17)
    qx, qy = m1_node_position(state, T)
    ox, oy = oracles.node_path_m1(cart[(0, 0)], cart[(1, 0)], cart[(0, 1)], T)
    assert np.max(np.abs(qx - ox)) < 1e-12
    assert np.max(np.abs(qy - oy)) < 1e-12
    # and the scan agrees with the closed form
    ns = find_nodes(state, 0.4)
    assert len(ns.nodes) == 1
    x1, y1 = m1_node_position(state, 0.4)
    assert math.hypot(ns.nodes[0].qx - x1, ns.nodes[0].qy - y1) < 1e-9


def test_m1_degenerate_state_raises():
    state = state_from_cartesian({(0, 0): 2**-0.5, (1, 0): 2**-0.5})
    with pytest.raises(ValueError):
        m1_node_position(state, 0.0)
    with pytest.raises(ValueError):
        m1_node_position(random_state(2, 0), 0.0)


def test_track_nodes_conserves_total():
    state = random_state(2, 1)
    vc = total_vorticity(state)
    ns, times = track_nodes(state, 0.0, 0.1, dt=0.02, search_box=WIDE,
                            grid_n=256)
    assert np.all(np.diff(times) > 0)
    for t in times:
        here = ns.at(float(t), tol=1e-9)
        assert here, f"no nodes recorded at T={t}"
        total = sum(n.vorticity for n in here)
        assert abs(total - vc.total_vorticity) < 1e-6
    for ev in ns.events:
        assert ev.kind in ("creation", "annihilation")
        assert len(ev.positions) == 2
