"""
Tests for the explicit symplectic embeddings and their verification
"""
import math

import numpy as np
import numpy.testing as npt
import pytest

from hofer.embeddings import (
    Psi_minus,
    Psi_plus,
    Upsilon_minus,
    ball_to_trapezoid,
    blowup_chain,
    corrupted,
    i_minus,
    i_minus_spec,
    i_plus_spec,
    identity_disk_spec,
    j_minus,
    j_s_minus,
    psi_embedding,
    sample_ball,
    shipped_specs,
    upsilon_embedding,
    verify_map,
)
from hofer.errors import ContainmentViolation, DomainViolation
from hofer.geometry import HALF_PI, moment_map_rho

EPS = 0.05
PROBES = 2_000


@pytest.mark.parametrize("spec", [i_minus_spec(), i_plus_spec(), identity_disk_spec(1.0)], ids=lambda s: s.name)
def test_base_maps_are_symplectic(spec):
    record = verify_map(spec, PROBES, 1e-6, seed=7)
    assert record.passed
    assert record.pullback_residual_max <= 1e-6
    assert record.injectivity_ratio_min > 0


def test_corrupted_map_fails():
    record = verify_map(corrupted(i_minus_spec()), PROBES, 1e-6, seed=7)
    assert not record.passed
    assert record.pullback_residual_max >= 1e-2
    assert record.to_dict()["pass"] is False


def test_i_minus_image_in_moment_polytope():
    P, Q = moment_map_rho(i_minus(0.3, 0.4j))
    assert P == pytest.approx(HALF_PI * (1 - 0.25))
    assert Q == pytest.approx(HALF_PI * 0.09)
    with pytest.raises(DomainViolation):
        i_minus(0.8, 0.8)


@pytest.mark.parametrize("sign", ["-", "+"])
def test_psi_embeddings_verify(sign):
    emb = psi_embedding(sign, EPS)
    assert emb.radius == pytest.approx(1 / math.sqrt(2) - EPS)
    record = verify_map(emb.spec, PROBES, 1e-6, seed=7)
    assert record.passed
    assert record.containment_margin_min >= 0


def test_psi_minus_chain_margin():
    emb = psi_embedding("-", EPS)
    x = sample_ball(np.random.default_rng(7), 5_000, 6, emb.radius)
    bound = math.sqrt(2) * math.pi / 2 * EPS - HALF_PI * EPS ** 2 - 1e-9
    assert emb.chain_margins(x).min() >= bound


def test_pointwise_psi_maps():
    point, s, t = Psi_minus(0.1, 0.2j, 0.1, -0.2)
    assert 0 <= t <= 1
    assert s <= moment_map_rho(point)[0]
    point_plus, s_plus, _ = Psi_plus(0.1, 0.2j, 0.1, -0.2)
    assert s_plus >= moment_map_rho(point_plus)[0]
    with pytest.raises(DomainViolation):
        Psi_minus(0.6, 0.0, 0.5, 0.0)


@pytest.mark.parametrize("lam", [0.3, 0.5])
def test_blowup_chain_stages(lam):
    s = 0.8 * math.sqrt(1 - lam ** 2)
    chain = blowup_chain(s, lam)
    for stage in chain.stages:
        record = verify_map(stage, PROBES, 1e-6, seed=3)
        assert record.passed, stage.name
    x = chain.stages[0].sampler(np.random.default_rng(0), 50)
    npt.assert_allclose(chain.backward(chain.forward(x)), x, atol=1e-9)


def test_blowup_chain_checks_s():
    with pytest.raises(DomainViolation):
        blowup_chain(1.0, 0.5)


def test_j_minus_and_trapezoid_coordinates():
    lam = 0.5
    s = math.sqrt(1 - lam ** 2)
    record = verify_map(j_s_minus(s, EPS, lam), PROBES, 1e-6, seed=7)
    assert record.passed
    assert record.smoothness_defect <= 1e-4
    j = j_minus(s, EPS, lam)
    w = sample_ball(np.random.default_rng(1), 100, 4, j.radius)
    y = ball_to_trapezoid(w, s, j.strip)
    npt.assert_allclose(y, j.trapezoid(w))
    assert np.all((y[:, 0] > 0) & (y[:, 0] < 1))
    assert np.all(y[:, 1] > math.pi * EPS * s * (1 - 1e-9))


@pytest.fixture(scope="module")
def j_half():
    lam = 0.5
    return j_minus(math.sqrt((1 - lam ** 2) / 2), EPS, lam)


def test_j_minus_is_smooth_on_the_plane_w1_zero(j_half):
    center = np.zeros((1, 4))
    assert np.all(np.isfinite(j_half.forward(center)))
    delta = EPS * j_half.radius
    assert j_half.action_P(center)[0] == pytest.approx(HALF_PI * j_half.k - math.pi * delta / 4, rel=1e-12)
    w0 = np.array([[0.3, 0.1, 1e-12, 0.0], [0.3, 0.1, -1e-12, 0.0], [0.3, 0.1, 0.0, 1e-12]])
    images = j_half.forward(w0)
    assert np.max(np.abs(images - images[0])) < 1e-9
    assert j_half.smoothness_defect() <= 1e-4


def test_j_minus_keeps_P_above_the_ball_bound(j_half):
    w = sample_ball(np.random.default_rng(2), 2_000, 4, j_half.radius)
    bound = HALF_PI * (j_half.k - np.sum(w * w, axis=1) - EPS * j_half.radius)
    assert np.all(j_half.action_P(w) > bound)
    inner = HALF_PI * (j_half.k - np.sum(w[:, :2] ** 2, axis=1))
    assert np.all(j_half.action_P(w) < inner)


@pytest.mark.parametrize("sign", ["-", "+"])
def test_upsilon_embeddings_verify(sign):
    emb = upsilon_embedding(0.5, EPS, sign=sign)
    assert emb.radius == pytest.approx(math.sqrt(3 / 8) - EPS)
    record = verify_map(emb.spec, PROBES, 1e-6, seed=7)
    assert record.passed
    assert record.meta["lambda"] == 0.5
    assert record.smoothness_defect <= 1e-4


def test_upsilon_minus_chain_margin():
    emb = upsilon_embedding(0.5, EPS)
    assert emb.family.epsilon == pytest.approx(EPS / 2)
    x = sample_ball(np.random.default_rng(7), 5_000, 6, emb.radius)
    assert emb.chain_margins(x).min() >= 3 * math.pi * EPS ** 2 / 8 - 1e-9


def test_upsilon_minus_point():
    point, s, t = Upsilon_minus(0.1, 0.2, 0.05, 0.05, 0.5)
    assert point.manifold.lam == 0.5
    assert 0 <= t <= 1
    center, s0, t0 = Upsilon_minus(0, 0, 0, 0, 0.5)
    assert s0 < moment_map_rho(center)[0]
    assert t0 == pytest.approx(0.5)


def test_containment_violation_is_raised_for_foreign_region():
    emb = psi_embedding("-", EPS)
    emb.spec.margin = lambda x: -np.ones(len(x))
    with pytest.raises(ContainmentViolation):
        Psi_minus(0.1, 0.1, 0.1, 0.1, embedding=emb)


def test_every_shipped_map_passes():
    failures = [r.map for r in (verify_map(spec, 1_000, 1e-6, seed=11) for spec in shipped_specs(EPS))
                if not r.passed]
    assert failures == []
