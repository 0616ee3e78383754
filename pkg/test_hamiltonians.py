"""
Tests for Hamiltonian parsing, transformations and extrema
"""
import math

import numpy as np
import numpy.testing as npt
import pytest

from hofer.errors import ConfigError, Unsupported
from hofer.geometry import HALF_PI, ManifoldModel
from hofer.hamiltonians import (
    action_extrema,
    hamiltonian_P,
    hamiltonian_from_expression,
    radial_bump,
    reparametrized,
    reparametrized_time,
)


def test_scaled_expression_parses_implicit_product():
    H = hamiltonian_from_expression(ManifoldModel.cp2(), "2P")
    assert H.affine and H.autonomous
    npt.assert_allclose(H.evaluate_actions(np.array([[0.5, 0.1, 0.0]])), [1.0])
    npt.assert_allclose(H.gradient_actions(np.array([[0.5, 0.1, 0.0]]))[0], [2.0, 0.0, 0.0])


def test_time_dependent_expression():
    H = hamiltonian_from_expression(ManifoldModel.cp2(), "P*cos(t)")
    assert not H.autonomous
    assert H.affine
    npt.assert_allclose(H.evaluate_actions(np.array([[1.0, 0.0, 0.0]]), 0.0), [1.0])


def test_bad_expressions():
    with pytest.raises(ConfigError):
        hamiltonian_from_expression(ManifoldModel.cp2(), "P + X")
    with pytest.raises(ConfigError):
        hamiltonian_from_expression(ManifoldModel.cp2(), "P +* ")
    with pytest.raises(Unsupported):
        hamiltonian_from_expression(ManifoldModel.cp1(), "Q")


def test_extrema_of_P_on_cp2():
    lo, hi = action_extrema(hamiltonian_P(ManifoldModel.cp2()), 0.0)
    assert lo.value == pytest.approx(0.0, abs=1e-12)
    assert hi.value == pytest.approx(HALF_PI, abs=1e-12)


def test_reparametrization_keeps_endpoints():
    H = hamiltonian_P(ManifoldModel.cp2())
    K = reparametrized(H, 0.5)
    assert not K.autonomous
    assert reparametrized_time(0.5, 0.0) == 0.0
    assert reparametrized_time(0.5, 1.0) == pytest.approx(1.0)
    npt.assert_allclose(K.evaluate_actions(np.array([[1.0, 0.0, 0.0]]), 0.0), [1.5])
    with pytest.raises(ConfigError):
        reparametrized(H, 1.0)


def test_scaling_carries_bump_metadata():
    bump = radial_bump(ManifoldModel.disk(1.0), 0.9)
    doubled = bump.scaled(2.0)
    assert doubled.meta["slope"] == pytest.approx(1.8)
    assert doubled.meta["max"] == pytest.approx(2 * bump.meta["max"])
    assert doubled.meta["slack"] == bump.meta["slack"]


def test_radial_bump_profile():
    m = ManifoldModel.disk(1.0)
    bump = radial_bump(m, 0.9, 0.03)
    areas = np.array([0.0, 0.005, 0.5, 0.995, 1.0])
    acts = np.column_stack([np.zeros(5), np.zeros(5), areas])
    values = bump.evaluate_actions(acts)
    assert values[0] == 0.0 and values[1] == 0.0
    npt.assert_allclose(values[-2:], 0.9 * 0.97, atol=1e-12)
    slope = bump.gradient_actions(acts)[:, 2]
    assert slope.max() <= 0.9 + 1e-12
    assert math.isclose(slope[2], 0.9)
    with pytest.raises(Unsupported):
        radial_bump(ManifoldModel.cp2(), 0.9)
