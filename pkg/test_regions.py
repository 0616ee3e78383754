"""
Tests for graph regions, gluing and quasi-cylinder areas
"""
import numpy as np
import pytest

from hofer.errors import EndpointMismatch, NormalizationFailure
from hofer.geometry import HALF_PI, ManifoldModel, make_point, sample_points, volume
from hofer.hamiltonians import hamiltonian_P, hamiltonian_Q, reparametrized
from hofer.regions import (
    FormKind,
    Side,
    glue,
    gluing_identity,
    region_above,
    region_area,
    region_below,
    split_product,
    synthetic_pair,
)

NU = 0.1


@pytest.fixture
def P():
    return hamiltonian_P(ManifoldModel.cp2())


def test_split_region_area_is_length_plus_nu(P):
    region = glue(P, P, NU)
    assert region.form_kind is FormKind.SPLIT
    assert region_area(region).value == pytest.approx(HALF_PI + NU, abs=1e-12)


def test_graph_region_volumes(P):
    below, above = region_below(P, NU), region_above(P, NU)
    assert below.side is Side.BELOW and above.side is Side.ABOVE
    vol_m = volume(ManifoldModel.cp2())
    # both sides together fill the slab [−ν/2, max P + ν/2] over M × [0, 1]
    assert below.volume() + above.volume() == pytest.approx(vol_m * (HALF_PI + NU), rel=1e-9)


@pytest.mark.parametrize("side", ["below", "above"])
def test_monte_carlo_volume_agrees(P, side):
    region = region_below(P, NU) if side == "below" else region_above(P, NU)
    est, err = region.monte_carlo_volume(100_000, seed=2)
    assert abs(est - region.volume()) <= 4 * err + 1e-12


def test_membership_at_the_graph(P):
    below = region_below(P, NU)
    p = make_point(ManifoldModel.cp2(), [1, 0, 0])
    assert below.contains(p, HALF_PI - 1e-9, 0.5)
    assert not below.contains(p, HALF_PI + 1e-3, 0.5)
    assert not below.contains(p, 0.0, 1.5)


def test_nu_must_be_positive(P):
    with pytest.raises(NormalizationFailure):
        region_below(P, 0.0)


def test_gluing_needs_equal_time_one_maps():
    m = ManifoldModel.cp2()
    with pytest.raises(EndpointMismatch):
        glue(hamiltonian_P(m), hamiltonian_Q(m), NU, samples=50)


def test_gluing_identity_for_reparametrized_path(P):
    report = gluing_identity(P, reparametrized(P), NU, n_samples=200_000, seed=7)
    assert report.holds
    assert abs(report.lhs - report.rhs) <= 3 * report.lhs_stderr + 1e-12
    assert not report.consequence_applies


def test_shorter_path_gives_smaller_glued_cylinder():
    H, K = synthetic_pair(ManifoldModel.cp2())
    report = gluing_identity(H, K, NU, n_samples=200_000, seed=7)
    assert report.consequence_applies
    assert report.consequence_holds


def test_split_product_area():
    region = split_product(ManifoldModel.cp1(), 2.0)
    assert region.is_product
    assert region_area(region).value == pytest.approx(2.0)


def test_glued_area_estimate_has_error_bar(P):
    region = glue(P, reparametrized(P), NU)
    est = region_area(region, n_samples=50_000, seed=1)
    assert est.method == "monte-carlo"
    assert est.stderr > 0
    assert np.isfinite(est.value)


@pytest.mark.parametrize("build", [region_below, region_above], ids=["below", "above"])
def test_regions_grow_with_nu(build):
    Q = hamiltonian_Q(ManifoldModel.blowup(0.5))
    rng = np.random.default_rng(9)
    for nu, wider_nu in ((0.05, 0.1), (0.1, 0.4)):
        region, wider = build(Q, nu), build(Q, wider_nu)
        for p in sample_points(Q.manifold, 200, rng):
            s, t = rng.uniform(-wider_nu, HALF_PI + wider_nu), rng.random()
            if region.contains(p, s, t):
                assert wider.contains(p, s, t)
        assert wider.volume() - region.volume() == pytest.approx(volume(Q.manifold) * (wider_nu - nu) / 2, rel=1e-9)
