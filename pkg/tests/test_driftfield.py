"""Drift-field construction, the sign-change type classification, and the
long-horizon radial drift helper."""

import math

import numpy as np
import pytest

from pilotwave.driftfield import (DriftField, LongDrift, build_drift_field,
                                  classify, default_grid, long_drift,
                                  radial_balance, ring_average)
from pilotwave.errors import BuildFailed
from pilotwave.integrate import IntegratorSettings, TWO_PI
from pilotwave.states import make_state, random_state
from pilotwave.vorticity import m1_node_position, total_vorticity


def ring_field(values, n_eta=1):
    """Synthetic one-ring (or stacked) field with a prescribed angular drift."""
    values = np.asarray(values, dtype=float)
    phi = np.linspace(0.0, TWO_PI, len(values), endpoint=False)
    d_phi = np.tile(values, (n_eta, 1))
    return DriftField(eta=np.linspace(5.0, 10.0, n_eta), phi=phi,
                      d_eta=np.zeros_like(d_phi), d_phi=d_phi,
                      masked=np.zeros_like(d_phi, dtype=bool))


def test_default_grid():
    eta, phi = default_grid()
    assert eta.shape == (100,) and phi.shape == (100,)
    assert eta[0] == 4.0 and eta[-1] == 20.0
    assert phi[0] == 0.0 and phi[-1] < TWO_PI


@pytest.mark.parametrize("nd,ng", [(1, 0), (0, 2)])
def test_eigenstate_drift_closed_form(nd, ng):
    # pure modes rotate rigidly: no radial drift, angular advance
    # 2 pi (nd - ng) / eta^2 per period
    state = make_state({(nd, ng): 1.0})
    eta = np.array([5.0, 10.0])
    phi = np.linspace(0.0, TWO_PI, 8, endpoint=False)
    f = build_drift_field(state, eta=eta, phi=phi)
    assert not f.masked.any()
    assert np.abs(f.d_eta).max() < 1e-9
    for i, e in enumerate(eta):
        pred = TWO_PI * (nd - ng) / e**2
        assert np.abs(f.d_phi[i] - pred).max() < 1e-9


def test_uniform_circulation_is_type0():
    c = classify(ring_field(0.3 * np.ones(32)))
    assert c.label == "type0"
    assert c.axes == []


def test_single_harmonic_is_type1():
    phi = np.linspace(0.0, TWO_PI, 64, endpoint=False)
    c = classify(ring_field(np.sin(phi)))
    assert c.label == "type1"
    kinds = dict((k, p) for p, k in c.axes)
    assert set(kinds) == {"attractive", "repulsive"}
    assert abs(kinds["attractive"] - math.pi) < 1e-6
    assert min(kinds["repulsive"], TWO_PI - kinds["repulsive"]) < 1e-6


def test_second_harmonic_is_type2():
    phi = np.linspace(0.0, TWO_PI, 64, endpoint=False)
    c = classify(ring_field(np.sin(2 * phi)))
    assert c.label == "type2"
    assert len(c.axes) == 4
    assert sum(1 for _, k in c.axes if k == "attractive") == 2


def test_many_sign_changes_unclassified():
    phi = np.linspace(0.0, TWO_PI, 64, endpoint=False)
    assert classify(ring_field(np.sin(3 * phi))).label == "unclassified"


def test_subthreshold_ring_unclassified(rng):
    c = classify(ring_field(1e-8 * rng.standard_normal(32)))
    assert c.label == "unclassified"
    assert c.axes == []


def test_deadband_does_not_split_arcs():
    # samples inside the dead band must drop out instead of flipping sign
    phi = np.linspace(0.0, TWO_PI, 64, endpoint=False)
    vals = np.sin(phi)
    vals[np.abs(vals) < 1e-7] = -1e-9
    assert classify(ring_field(vals)).label == "type1"


def test_ring_average_skips_masked_rows():
    f = ring_field(0.5 * np.ones(16), n_eta=3)
    f.d_phi[1] = np.nan
    f.masked[1] = True
    a = ring_average(f)
    assert np.allclose(a, 0.5)


def test_radial_balance_weighting():
    f = ring_field(np.zeros(16), n_eta=2)
    f.eta = np.array([1.0, 3.0])
    f.d_eta[0] = 1.0
    f.d_eta[1] = -1.0
    inward, outward = radial_balance(f)
    assert inward == pytest.approx(0.75)
    assert outward == pytest.approx(0.25)
    f.d_eta[:] = 0.0
    assert radial_balance(f) == (0.0, 0.0)


def test_m1_state_classifies_type0_with_matching_sense():
    state = random_state(1, 5)
    vc = total_vorticity(state)
    f = build_drift_field(state, eta=np.linspace(4.0, 20.0, 16),
                          phi=np.linspace(0.0, TWO_PI, 16, endpoint=False))
    c = classify(f)
    assert c.label == "type0"
    assert np.all(np.sign(c.ring_average) == np.sign(vc.winding))


def test_node_start_fails_build():
    state = random_state(1, 5)
    x0, y0 = m1_node_position(state, 0.0)
    eta = np.array([math.hypot(x0, y0)])
    phi = np.array([math.atan2(y0, x0) % TWO_PI, 1.5, 3.0, 4.5])
    settings = IntegratorSettings(max_step=TWO_PI / 100, max_halvings=6)
    with pytest.raises(BuildFailed):
        build_drift_field(state, eta=eta, phi=phi, settings=settings)
    # a permissive limit keeps the field, with the bad cell masked out
    f = build_drift_field(state, eta=eta, phi=phi, settings=settings,
                          max_masked_fraction=0.5)
    assert f.masked.sum() == 1
    assert np.isnan(f.d_eta[f.masked]).all()
    assert np.isfinite(f.d_phi[~f.masked]).all()


def test_long_drift_eigenstate_stays_put():
    state = make_state({(1, 0): 1.0})
    ld = long_drift(state, 5, eta_range=(8.0, 12.0), periods=3, seed=2)
    assert not ld.failed.any()
    assert np.all((ld.eta0 >= 8.0) & (ld.eta0 <= 12.0))
    assert np.abs(ld.eta1 - ld.eta0).max() < 1e-9
    assert abs(ld.median_shift) < 1e-9


def test_long_drift_zero_periods():
    ld = long_drift(random_state(2, 1), 7, periods=0, seed=4)
    assert ld.periods == 0
    assert np.array_equal(ld.eta0, ld.eta1)
    assert not ld.failed.any()


def test_median_shift_ignores_failed_points():
    ld = LongDrift(eta0=np.zeros(3), eta1=np.array([1.0, 2.0, 100.0]),
                   failed=np.array([False, False, True]), periods=10)
    assert ld.median_shift == pytest.approx(1.5)
