"""
Tests for flows, Hofer lengths and closed-orbit detection
"""
import math

import numpy as np
import pytest

from hofer.certificates import Verdict
from hofer.dynamics import (
    OrbitVerdict,
    analytic_min_period,
    closed_form_flow,
    detect_closed_trajectories,
    flow,
    hofer_length,
    no_short_trajectory_check,
    symplecticity_residual,
    toric_flow,
)
from hofer.errors import DomainViolation, Unsupported
from hofer.geometry import HALF_PI, ManifoldModel, distance, sample_points
from hofer.hamiltonians import hamiltonian_P, hamiltonian_Q, hamiltonian_from_expression, reparametrized


@pytest.mark.parametrize("model", [ManifoldModel.cp2(), ManifoldModel.blowup(0.5)])
@pytest.mark.parametrize("name", ["P", "Q"])
def test_integrated_flow_matches_rotation(model, name):
    H = hamiltonian_P(model) if name == "P" else hamiltonian_Q(model)
    for p in sample_points(model, 10, np.random.default_rng(7)):
        traj = flow(H, p, 1.0, 1e-9, n_samples=21)
        err = max(distance(q, closed_form_flow(name, p, t)) for t, q in traj.samples)
        assert err <= 1e-6
        assert traj.stats.energy_drift <= 1e-8


def test_toric_flow_agrees_with_closed_form():
    m = ManifoldModel.cp2()
    H = hamiltonian_P(m)
    for p in sample_points(m, 20, np.random.default_rng(1)):
        assert distance(toric_flow(H, p, 0.37), closed_form_flow("P", p, 0.37)) <= 1e-12


def test_flow_time_is_bounded():
    m = ManifoldModel.cp2()
    p = sample_points(m, 1, np.random.default_rng(0))[0]
    with pytest.raises(DomainViolation):
        flow(hamiltonian_P(m), p, 10.0)


def test_no_closed_form_for_other_hamiltonians():
    p = sample_points(ManifoldModel.cp2(), 1, np.random.default_rng(0))[0]
    with pytest.raises(Unsupported):
        closed_form_flow("2P", p, 0.5)


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.7])
def test_lengths_on_the_blowup(lam):
    m = ManifoldModel.blowup(lam)
    assert hofer_length(hamiltonian_P(m)).value == pytest.approx(HALF_PI * (1 - lam ** 2), abs=1e-12)
    assert hofer_length(hamiltonian_Q(m)).value == pytest.approx(HALF_PI, abs=1e-12)


def test_sampled_length_is_close_to_exact():
    est = hofer_length(hamiltonian_P(ManifoldModel.cp2()), force_sampling=True)
    assert est.method == "sampled"
    assert abs(est.value - HALF_PI) <= 1e-3


def test_reparametrized_length_is_unchanged():
    H = hamiltonian_P(ManifoldModel.cp2())
    est = hofer_length(reparametrized(H, 0.5), time_steps=64)
    assert abs(est.value - HALF_PI) <= 1e-3


def test_P_has_no_short_orbit():
    H = hamiltonian_P(ManifoldModel.cp2())
    results = detect_closed_trajectories(H, 1.0, 40, seed=7)
    assert not any(r.verdict is OrbitVerdict.PERIODIC for r in results)
    assert analytic_min_period(H) == pytest.approx(2.0)
    cert = no_short_trajectory_check(H, 16, seed=7)
    assert cert.verdict is Verdict.PASS


def test_2P_closes_at_time_one():
    H = hamiltonian_from_expression(ManifoldModel.cp2(), "2P")
    results = detect_closed_trajectories(H, 1.1, 12, seed=7)
    periods = [r.period for r in results if r.verdict is OrbitVerdict.PERIODIC]
    assert periods
    assert max(abs(T - 1.0) for T in periods) <= 1e-4
    assert analytic_min_period(H) == pytest.approx(1.0)
    cert = no_short_trajectory_check(H, 8, seed=7)
    assert cert.verdict is Verdict.FAIL
    assert "witness" in cert.evidence


def test_orbit_detection_needs_autonomous_hamiltonian():
    H = reparametrized(hamiltonian_P(ManifoldModel.cp2()))
    with pytest.raises(Unsupported):
        detect_closed_trajectories(H, 1.0, 4)


def test_zero_hamiltonian_has_only_fixed_points():
    H = hamiltonian_from_expression(ManifoldModel.cp2(), "0")
    results = detect_closed_trajectories(H, 1.0, 5)
    assert all(r.verdict is OrbitVerdict.FIXED for r in results)
    assert math.isinf(analytic_min_period(H))


@pytest.mark.parametrize("model", [ManifoldModel.cp2(), ManifoldModel.blowup(0.5)], ids=lambda m: m.label)
def test_time_one_map_preserves_the_form(model):
    for H in (hamiltonian_P(model), hamiltonian_Q(model)):
        for p in sample_points(model, 3, np.random.default_rng(11)):
            assert symplecticity_residual(H, p, 1.0) <= 1e-4


@pytest.mark.parametrize("c", [1.0, 2.0, 4.0])
def test_period_scales_inversely(c):
    H = hamiltonian_P(ManifoldModel.cp2()).scaled(c)
    T = 2.0 / c
    results = detect_closed_trajectories(H, 1.05 * T, 6, seed=3)
    periods = [r.period for r in results if r.verdict is OrbitVerdict.PERIODIC]
    assert periods
    assert max(abs(t - T) for t in periods) <= 1e-4
    assert analytic_min_period(H) == pytest.approx(T)


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
@pytest.mark.parametrize("force_sampling", [False, True])
def test_length_scales_linearly(c, force_sampling):
    H = hamiltonian_Q(ManifoldModel.blowup(0.5))
    base = hofer_length(H, seed=5, force_sampling=force_sampling)
    scaled = hofer_length(H.scaled(c), seed=5, force_sampling=force_sampling)
    assert abs(scaled.value - c * base.value) <= scaled.error + c * base.error + 1e-12
