"""
Tests for manifold models, points, the moment map and volumes
"""
import math

import numpy as np
import numpy.testing as npt
import pytest

from hofer.errors import DomainViolation, Unsupported
from hofer.geometry import (
    HALF_PI,
    ManifoldModel,
    distance,
    fubini_study_matrix,
    make_point,
    moment_map_rho,
    monte_carlo_volume,
    point_from_real,
    points_equal,
    polytope,
    polytope_area,
    sample_points,
    symplectic_form_matrix,
    volume,
)


def test_cp2_polytope_is_the_standard_triangle():
    verts = polytope(ManifoldModel.cp2()).array
    npt.assert_allclose(verts, [[0, 0], [HALF_PI, 0], [0, HALF_PI]], atol=1e-12)
    assert polytope_area(ManifoldModel.cp2()) == pytest.approx(math.pi ** 2 / 8, abs=1e-12)


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.7])
def test_blowup_polytope_cuts_the_corner(lam):
    k = 1 - lam ** 2
    verts = polytope(ManifoldModel.blowup(lam)).array
    npt.assert_allclose(verts, [[0, 0], [HALF_PI * k, 0], [HALF_PI * k, HALF_PI * lam ** 2], [0, HALF_PI]],
                        atol=1e-12)
    # four times the polytope area is the symplectic volume
    assert 4 * polytope_area(ManifoldModel.blowup(lam)) == pytest.approx(volume(ManifoldModel.blowup(lam)), abs=1e-12)


def test_volumes():
    assert volume(ManifoldModel.cp1()) == pytest.approx(math.pi)
    assert volume(ManifoldModel.cp2()) == pytest.approx(math.pi ** 2 / 2)
    assert volume(ManifoldModel.blowup(0.5)) == pytest.approx(math.pi ** 2 / 2 * (1 - 0.5 ** 4))
    assert volume(ManifoldModel.product(ManifoldModel.cp1(), 2.0)) == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("model", [ManifoldModel.cp2(), ManifoldModel.blowup(0.5)])
def test_monte_carlo_volume_matches_analytic(model):
    est, err = monte_carlo_volume(model, 200_000, np.random.default_rng(3))
    assert abs(est - volume(model)) <= 4 * err + 1e-9


def test_blowup_parameter_is_checked():
    with pytest.raises(DomainViolation):
        ManifoldModel.blowup(1.2)
    with pytest.raises(DomainViolation):
        ManifoldModel.disk(0.0)


def test_points_are_canonical_and_charted():
    m = ManifoldModel.cp2()
    p = make_point(m, [1j, 0.5, 0.0])
    q = make_point(m, [2.0, -0.5j * 2, 0.0])
    assert p.chart_id == 0
    npt.assert_allclose(np.linalg.norm(p.homogeneous), 1.0)
    assert points_equal(p, q)


def test_removed_ball_is_rejected():
    with pytest.raises(DomainViolation):
        make_point(ManifoldModel.blowup(0.5), [1.0, 0.1, 0.1])


def test_moment_map_vertices():
    m = ManifoldModel.cp2()
    assert moment_map_rho(make_point(m, [1, 0, 0])) == pytest.approx((HALF_PI, 0.0))
    assert moment_map_rho(make_point(m, [0, 1, 0])) == pytest.approx((0.0, HALF_PI))
    assert moment_map_rho(make_point(m, [0, 0, 1])) == pytest.approx((0.0, 0.0))
    with pytest.raises(Unsupported):
        moment_map_rho(make_point(ManifoldModel.cp1(), [1, 1]))


def test_sampled_points_lie_in_the_polytope():
    m = ManifoldModel.blowup(0.5)
    pts = sample_points(m, 500, np.random.default_rng(0))
    rho = np.array([moment_map_rho(p) for p in pts])
    assert polytope(m).contains(rho, margin=-1e-9).all()
    assert distance(pts[0], pts[0]) == 0.0


def test_fubini_study_matrix_is_antisymmetric_and_standard_at_origin():
    omega = fubini_study_matrix(np.zeros((1, 4)))[0]
    npt.assert_allclose(omega, -omega.T, atol=1e-15)
    assert abs(np.linalg.det(omega)) > 0


def _complex_block(a):
    return np.array([[a.real, -a.imag], [a.imag, a.real]])


@pytest.mark.parametrize("model", [ManifoldModel.cp2(), ManifoldModel.blowup(0.5)], ids=lambda m: m.label)
def test_chart_transition_preserves_the_form(model):
    p = make_point(model, [1.0, 0.6 + 0.3j, 0.4 - 0.2j])
    w1, w2 = p.homogeneous[1] / p.homogeneous[0], p.homogeneous[2] / p.homogeneous[0]
    # (w1, w2) in chart 0 goes to (1/w1, w2/w1) in chart 1
    J = np.block([
        [_complex_block(-1 / w1 ** 2), np.zeros((2, 2))],
        [_complex_block(-w2 / w1 ** 2), _complex_block(1 / w1)],
    ])
    x0 = p.real_coords(0)
    h = 1e-6
    numeric = np.column_stack([
        (point_from_real(model, x0 + h * e, 0).real_coords(1) - point_from_real(model, x0 - h * e, 0).real_coords(1))
        / (2 * h)
        for e in np.eye(4)
    ])
    npt.assert_allclose(numeric, J, atol=1e-6)
    omega0 = symplectic_form_matrix(model, p, chart=0)
    omega1 = symplectic_form_matrix(model, p, chart=1)
    npt.assert_allclose(J.T @ omega1 @ J, omega0, atol=1e-9)
