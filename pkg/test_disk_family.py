"""
Tests for the area-preserving disk-to-rectangle and disk-to-strip families
"""
import math

import numpy as np
import numpy.testing as npt
import pytest

from hofer.disk_family import (
    FamilyVariant,
    build_disk_rect_family,
    build_strip_family,
    log_window,
    max_radius,
    smooth_step,
)
from hofer.errors import DomainViolation, InfeasibleContainment

EPS = 0.05


@pytest.fixture(scope="module")
def minus_family():
    return build_disk_rect_family(FamilyVariant.MINUS_CP2, 1 / math.sqrt(2) - EPS, EPS)


@pytest.fixture(scope="module")
def strip():
    return build_strip_family(0.5, 0.025)


def _enclosed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _random_disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    a = rng.uniform(0, 2 * math.pi, n)
    return r * np.cos(a), r * np.sin(a)


def test_smooth_step_values():
    value, d1, _ = smooth_step(np.array([0.2, 0.25, 0.3, 0.35]))
    npt.assert_allclose(value, [0.0230, 0.0649, 0.1296, 0.2110], rtol=5e-3)
    npt.assert_allclose(d1, [0.597, 1.079, 1.483, 1.753], rtol=5e-3)
    x = np.linspace(-0.5, 1.5, 41)
    npt.assert_allclose(smooth_step(x)[0] + smooth_step(1 - x)[0], 1.0, atol=1e-15)


def test_log_window_derivatives():
    rho = np.geomspace(0.011, 0.039, 25)
    h = 1e-7
    v, d1, d2 = log_window(rho, 0.01, 0.04)
    npt.assert_allclose(d1, (log_window(rho + h, 0.01, 0.04)[0] - log_window(rho - h, 0.01, 0.04)[0]) / (2 * h),
                        rtol=1e-5, atol=1e-6)
    npt.assert_allclose(d2, (log_window(rho + h, 0.01, 0.04)[1] - log_window(rho - h, 0.01, 0.04)[1]) / (2 * h),
                        rtol=1e-4, atol=1e-3)
    assert np.all(log_window(np.array([0.0, 0.005]), 0.01, 0.04)[0] == 0)


def test_full_rectangles_fill_the_slab():
    r = 1 / math.sqrt(2)
    for variant in (FamilyVariant.MINUS_CP2, FamilyVariant.PLUS_CP2):
        rect = build_disk_rect_family(variant, r - EPS, EPS).rect_of(r)
        npt.assert_allclose([rect.x_min, rect.x_max, rect.y_min, rect.y_max], [0, math.pi / 2, 0, 1], atol=1e-12)


@pytest.mark.parametrize("variant", [FamilyVariant.MINUS_BLOWUP, FamilyVariant.PLUS_BLOWUP])
def test_blowup_rectangles_shrink_with_lambda(variant):
    lam = 0.5
    k = 1 - lam ** 2
    family = build_disk_rect_family(variant, max_radius(variant, EPS, lam), EPS, lam)
    rect = family.rect_of(math.sqrt(k / 2))
    npt.assert_allclose([rect.x_min, rect.x_max, rect.y_min, rect.y_max], [0, math.pi * k / 2, 0, 1], atol=1e-12)


def test_rectangle_area_matches_disk_area(minus_family):
    for r in (0.1, 0.3, 0.6):
        assert minus_family.rect_of(r).area == pytest.approx(math.pi * r * r, rel=1e-12)


def test_map_preserves_area(minus_family):
    u, v = _random_disk(np.random.default_rng(0), 400, minus_family.R)
    npt.assert_allclose(np.linalg.det(minus_family.jacobian(u, v)), 1.0, atol=1e-6)


def test_level_curves_enclose_the_disk_area(minus_family):
    for r in (EPS / 16, EPS / 4, EPS, 0.4):
        assert _enclosed_area(minus_family.curve(r, 20_000)) == pytest.approx(math.pi * r * r, rel=1e-4)


def test_circles_land_inside_their_rectangles(minus_family):
    for r in np.linspace(0.05, minus_family.R * 0.999, 8):
        pts = minus_family.circle_image(r, 360)
        assert minus_family.rect_of(r + EPS).margins(pts).min() >= -1e-12
    assert minus_family.containment_margins().min() >= 0


def test_curves_are_nested(minus_family):
    assert minus_family.nesting_speed(minus_family.sample_radii()[1:]).min() > 0


def test_family_is_linear_near_the_origin(minus_family):
    aspect = 2 * minus_family.w / math.sqrt(math.pi)
    J0 = minus_family.jacobian(np.zeros(1), np.zeros(1))[0]
    npt.assert_allclose(J0, np.diag([aspect, 1 / aspect]), atol=1e-12)
    center = minus_family.evaluate(np.zeros(1), np.zeros(1))[0]
    npt.assert_allclose(center, [float(minus_family.center_x(EPS)), 0.5], atol=1e-15)


def test_one_sided_differences_agree_at_the_origin(minus_family):
    h = 1e-7
    origin = minus_family.evaluate(np.zeros(1), np.zeros(1))[0]
    for d in ((1.0, 0.0), (0.0, 1.0), (0.6, -0.8)):
        ahead = minus_family.evaluate(np.array([h * d[0]]), np.array([h * d[1]]))[0]
        behind = minus_family.evaluate(np.array([-h * d[0]]), np.array([-h * d[1]]))[0]
        npt.assert_allclose((ahead - origin) / h, (origin - behind) / h, atol=1e-6)


@pytest.mark.parametrize("variant", [FamilyVariant.MINUS_CP2, FamilyVariant.PLUS_BLOWUP])
def test_jacobian_matches_differences_across_the_windows(variant):
    lam = 0.5 if variant.on_blowup else None
    family = build_disk_rect_family(variant, max_radius(variant, EPS, lam), EPS, lam)
    assert family.smoothness_defect() <= 1e-4
    for r in (0.3 * EPS, 0.6 * EPS, 0.9 * EPS, 0.3):
        assert family.smoothness_defect(radii=[r]) <= 1e-4


def test_curve_centers_follow_the_rectangles(minus_family):
    inner = np.array([0.0, EPS / 8, EPS / 2])
    npt.assert_allclose(minus_family.curve_center(inner), minus_family.center_x(EPS), atol=1e-14)
    outer = np.array([EPS, 0.2, 0.6])
    lag = minus_family.curve_center(outer) - minus_family.center_x(outer + EPS)
    npt.assert_allclose(lag, minus_family.drift_lag, atol=1e-12)
    assert 0 < minus_family.drift_lag < minus_family.w * EPS


def test_plus_family_drifts_the_other_way():
    minus = build_disk_rect_family(FamilyVariant.MINUS_CP2, 0.5, EPS)
    plus = build_disk_rect_family(FamilyVariant.PLUS_CP2, 0.5, EPS)
    assert minus.center_x(0.3) + plus.center_x(0.3) == pytest.approx(math.pi / 2)
    npt.assert_allclose(minus.curve_center(np.array([0.3])) + plus.curve_center(np.array([0.3])), math.pi / 2)


def test_domain_checks(minus_family):
    with pytest.raises(DomainViolation):
        build_disk_rect_family(FamilyVariant.MINUS_CP2, 0.7, EPS)
    with pytest.raises(DomainViolation):
        build_disk_rect_family(FamilyVariant.MINUS_CP2, 0.01, EPS)
    with pytest.raises(DomainViolation):
        build_disk_rect_family(FamilyVariant.MINUS_BLOWUP, 0.3, EPS)
    with pytest.raises(DomainViolation):
        minus_family.evaluate(np.array([minus_family.R]), np.array([0.0]))


def test_strip_family_stays_in_its_strip(strip):
    assert strip.containment_margins().min() > 0
    assert strip.nesting_speed(strip.sample_radii()[1:]).min() > 0
    u, v = _random_disk(np.random.default_rng(4), 2_000, strip.S * 0.999)
    Yx = strip.evaluate(u, v)
    assert np.all(Yx[:, 0] > 0)
    assert np.all(Yx[:, 0] < math.pi * (u ** 2 + v ** 2 + strip.delta))
    assert np.all((Yx[:, 1] > 0) & (Yx[:, 1] < 1))


def test_strip_family_preserves_area(strip):
    u, v = _random_disk(np.random.default_rng(5), 400, strip.S)
    npt.assert_allclose(np.linalg.det(strip.jacobian(u, v)), 1.0, atol=1e-6)
    for r in (strip.rho2, strip.rho3, 2 * strip.rho3, 0.45):
        assert _enclosed_area(strip.curve(r, 40_000)) == pytest.approx(math.pi * r * r, rel=1e-3)


def test_strip_family_starts_at_its_center(strip):
    npt.assert_allclose(strip.evaluate(np.zeros(1), np.zeros(1))[0], [math.pi * strip.delta / 2, 0.5], atol=1e-15)
    assert strip.smoothness_defect() <= 1e-6


def test_strip_exponent_grows_as_the_slack_shrinks():
    exponents = [build_strip_family(0.5, delta).p for delta in (0.05, 0.02, 0.01)]
    assert exponents == sorted(exponents)
    assert exponents[0] < exponents[-1]
    with pytest.raises(InfeasibleContainment):
        build_strip_family(0.6, 1e-5)
    with pytest.raises(DomainViolation):
        build_strip_family(0.5, 0.0)
