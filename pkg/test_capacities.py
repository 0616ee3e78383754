"""
Tests for capacity bounds, admissibility and the length-minimality rules
"""
import math

import pytest

from hofer.capacities import (
    DEFAULT_SLACK,
    SCOPE_GLOBAL,
    SCOPE_HOMOTOPIC,
    ball_volume,
    capacity_area_premise,
    capacity_of_hamiltonian,
    gromov_lower_bound,
    hz_admissibility,
    hz_lower_bound,
    length_certificate,
    length_minimal_certificate,
    obstruction_threshold,
    radial_min_period,
    r1_registry,
    volume_obstruction,
)
from hofer.certificates import CertificateKind, Verdict
from hofer.dynamics import LengthEstimate, analytic_min_period, hofer_length, no_short_trajectory_check
from hofer.embeddings import corrupted, i_minus_spec, psi_embedding, upsilon_embedding, verify_map
from hofer.errors import DomainViolation, InsufficientPremises, MissingSide, Unsupported, UnverifiedMap
from hofer.geometry import HALF_PI, ManifoldModel
from hofer.hamiltonians import hamiltonian_P, hamiltonian_Q, hamiltonian_from_expression, radial_bump
from hofer.regions import region_below

PROBES = 2_000


def _gromov(sign, eps, lam=None):
    emb = psi_embedding(sign, eps) if lam is None else upsilon_embedding(lam, eps, sign=sign)
    return gromov_lower_bound(emb.region, emb.spec, probes=PROBES, seed=7)


@pytest.fixture(scope="module")
def cp2_bounds():
    return {eps: [_gromov("-", eps), _gromov("+", eps)] for eps in (0.1, 0.05, 0.01)}


def test_gromov_bound_on_both_sides(cp2_bounds):
    for cert in cp2_bounds[0.05]:
        assert cert.value == pytest.approx(math.pi * (1 / math.sqrt(2) - 0.05) ** 2)
        assert cert.value >= 1.32
        assert cert.evidence["epsilon"] == 0.05
    assert {c.evidence["side"] for c in cp2_bounds[0.05]} == {"Below", "Above"}


def test_blowup_gromov_bound():
    cert = _gromov("-", 0.05, lam=0.5)
    assert cert.value == pytest.approx(math.pi * (math.sqrt(3 / 8) - 0.05) ** 2)


def test_gromov_bound_refuses_unverified_map():
    with pytest.raises(UnverifiedMap):
        gromov_lower_bound(ManifoldModel.cp2(), corrupted(i_minus_spec()), probes=500)


def test_capacity_of_P_converges_with_epsilon(cp2_bounds):
    P = hamiltonian_P(ManifoldModel.cp2())
    certs = [c for group in cp2_bounds.values() for c in group]
    cap = capacity_of_hamiltonian(P, certs, length=HALF_PI)
    assert cap.evidence["monotone_in_epsilon"]
    assert cap.value == pytest.approx(math.pi * (1 / math.sqrt(2) - 0.01) ** 2)
    assert HALF_PI - cap.value <= math.pi * (math.sqrt(2) * 0.01 + 1e-4)


def test_capacity_needs_both_sides(cp2_bounds):
    P = hamiltonian_P(ManifoldModel.cp2())
    with pytest.raises(MissingSide):
        capacity_of_hamiltonian(P, cp2_bounds[0.05][:1])


def test_capacity_is_the_smallest_bound_over_nu(cp2_bounds):
    P = hamiltonian_P(ManifoldModel.cp2())
    wide = [gromov_lower_bound(e.region, e.spec, probes=PROBES, seed=7)
            for e in (psi_embedding("-", 0.1, 0.2), psi_embedding("+", 0.1, 0.2))]
    cap = capacity_of_hamiltonian(P, cp2_bounds[0.01] + wide)
    assert cap.evidence["nu"] == 0.2
    assert cap.value == pytest.approx(math.pi * (1 / math.sqrt(2) - 0.1) ** 2)
    assert {row["nu"] for row in cap.evidence["per_nu"]} == {0.1, 0.2}
    assert {p.evidence["nu"] for p in cap.premises} == {0.2}
    with pytest.raises(MissingSide):
        capacity_of_hamiltonian(P, [cp2_bounds[0.01][0], wide[1]])


def test_global_scope_needs_the_whole_error_bar(cp2_bounds):
    m = ManifoldModel.cp2()
    P = hamiltonian_P(m)
    cap = capacity_of_hamiltonian(P, [c for group in cp2_bounds.values() for c in group], length=HALF_PI)
    blurred = length_certificate(P, LengthEstimate(P.name, HALF_PI - 1e-6, 1e-5, "sampled", 0, 512))
    cert = length_minimal_certificate(P, length=blurred, capacity=cap, premise=capacity_area_premise(m))
    assert cert.evidence["r1"] == math.pi
    assert cert.scope == SCOPE_HOMOTOPIC


def test_zero_hamiltonian_has_zero_capacity():
    cap = capacity_of_hamiltonian(hamiltonian_from_expression(ManifoldModel.cp2(), "0"), [])
    assert cap.value == 0.0


@pytest.mark.parametrize("model", [ManifoldModel.disk(1.0), ManifoldModel.product(ManifoldModel.cp1(), 1.0)],
                         ids=lambda m: m.label)
def test_radial_bump_admissibility(model):
    good = hz_admissibility(radial_bump(model, 0.9), orbit_samples=16, seed=7)
    assert good.verdict is Verdict.PASS
    assert good.value >= 0.9 * (1 - 0.03) - 1e-12
    assert hz_lower_bound(good).value == good.value

    bad = hz_admissibility(radial_bump(model, 1.1), orbit_samples=16, seed=7)
    assert bad.verdict is Verdict.FAIL
    assert "d" in bad.evidence["failed"]
    assert "witness" in bad.evidence["conditions"]["d"]
    with pytest.raises(InsufficientPremises):
        hz_lower_bound(bad)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_hz_value_and_period_scale_with_the_hamiltonian(c):
    H = radial_bump(ManifoldModel.disk(1.0), 0.45)
    base = hz_admissibility(H, orbit_samples=8, seed=7)
    scaled = hz_admissibility(H.scaled(c), orbit_samples=8, seed=7)
    assert base.verdict is Verdict.PASS and scaled.verdict is Verdict.PASS
    assert scaled.value == pytest.approx(c * base.value, rel=1e-12)
    assert radial_min_period(H.scaled(c)) == pytest.approx(radial_min_period(H) / c)
    P = hamiltonian_P(ManifoldModel.cp2())
    assert analytic_min_period(P.scaled(c)) == pytest.approx(analytic_min_period(P) / c)


def test_zero_function_is_degenerate():
    cert = hz_admissibility(hamiltonian_from_expression(ManifoldModel.disk(1.0), "0"))
    assert cert.verdict is Verdict.FAIL
    assert cert.evidence["failed"] == ["a", "b"]


def test_capacity_area_premise_dimensions():
    assert capacity_area_premise(ManifoldModel.cp2()).verdict is Verdict.PREMISE
    assert capacity_area_premise(ManifoldModel.cp1()).verdict is Verdict.PREMISE
    with pytest.raises(Unsupported):
        capacity_area_premise(ManifoldModel.product(ManifoldModel.cp2(), 1.0))


def test_volume_obstruction_for_Q_on_the_blowup():
    r = 1 / math.sqrt(2)
    assert ball_volume(r) == pytest.approx(math.pi ** 3 / 48)
    lam_star = obstruction_threshold(r, "-")
    assert lam_star == pytest.approx((3 / 4) ** (1 / 6), abs=1e-3)
    above = volume_obstruction(r, region_below(hamiltonian_Q(ManifoldModel.blowup(0.97)), 1e-6))
    below = volume_obstruction(r, region_below(hamiltonian_Q(ManifoldModel.blowup(0.5)), 1e-6))
    assert above.verdict is Verdict.PASS and above.value > 0
    assert below.verdict is Verdict.FAIL
    with pytest.raises(DomainViolation):
        obstruction_threshold(r, "-", bracket=(0.98, 0.99))


def test_r1_registry_override():
    registry = r1_registry()
    blowup = ManifoldModel.blowup(0.5)
    assert registry.get(ManifoldModel.cp2()).value == math.pi
    assert registry.get(blowup) is None
    custom = registry.with_override(blowup, 2.0, provenance="test")
    assert custom.get(blowup).user_asserted
    assert custom.certificate(blowup).kind is CertificateKind.R1_ENTRY
    with pytest.raises(DomainViolation):
        registry.with_override(blowup, -1.0)


def test_route_a_global_minimality(cp2_bounds):
    m = ManifoldModel.cp2()
    P = hamiltonian_P(m)
    length = length_certificate(P, hofer_length(P))
    cap = capacity_of_hamiltonian(P, [c for group in cp2_bounds.values() for c in group], length=HALF_PI)
    cert = length_minimal_certificate(P, length=length, capacity=cap, premise=capacity_area_premise(m))
    assert cert.verdict is Verdict.PASS
    assert cert.scope == SCOPE_GLOBAL
    assert cert.evidence["route"] == "A"
    assert 0 < -cert.evidence["slack"] <= DEFAULT_SLACK
    assert cert.is_sound()


def test_route_b_on_the_blowup():
    m = ManifoldModel.blowup(0.5)
    Q = hamiltonian_Q(m)
    cert = length_minimal_certificate(
        Q,
        length=length_certificate(Q, hofer_length(Q)),
        no_short_orbit=no_short_trajectory_check(Q, 8, seed=7),
        premise=capacity_area_premise(m),
    )
    assert cert.evidence["route"] == "B"
    assert cert.scope == SCOPE_HOMOTOPIC
    upgraded = length_minimal_certificate(
        Q,
        length=length_certificate(Q, hofer_length(Q)),
        no_short_orbit=no_short_trajectory_check(Q, 8, seed=7),
        premise=capacity_area_premise(m),
        registry=r1_registry().with_override(m, math.pi),
    )
    assert upgraded.scope == SCOPE_GLOBAL


def test_refusal_names_the_witness():
    m = ManifoldModel.cp2()
    H = hamiltonian_from_expression(m, "2P")
    with pytest.raises(InsufficientPremises) as info:
        length_minimal_certificate(
            H,
            length=length_certificate(H, hofer_length(H)),
            no_short_orbit=no_short_trajectory_check(H, 8, seed=7),
            premise=capacity_area_premise(m),
        )
    assert "witness" in info.value.details
    assert "B" in info.value.details["routes"]


def test_missing_premise_is_named():
    P = hamiltonian_P(ManifoldModel.cp2())
    with pytest.raises(InsufficientPremises) as info:
        length_minimal_certificate(P)
    assert info.value.details["missing"] == ["HoferLength", "CapacityAreaPremise"]


def test_verified_record_can_be_reused():
    emb = psi_embedding("-", 0.05)
    record = verify_map(emb.spec, PROBES, 1e-6, seed=1)
    cert = gromov_lower_bound(emb.region, emb.spec, record)
    assert cert.evidence["verification"]["probes"] == PROBES
