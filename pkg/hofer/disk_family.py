"""
Nested area-preserving maps from disks into growing planar regions.

The circle of radius ρ goes to the level curve

    X(ρ, τ) = (c(ρ) + ρe^{q/2}·r(τ) cos τ, y_c + ρe^{−q/2}·r(τ) sin τ)

where r² = (1 − s) + s·r_p² blends the unit circle with the superellipse
|x|^p + |y|^p = s0^p of the same area π. Points are matched by area flux,
so the map preserves area, and its restriction to B²(r) never depends on
the outer radius. All profiles are constant near ρ = 0, where the map is
the linear map diag(e^{q/2}, e^{−q/2}) plus a translation, and they switch
through C^∞ windows, so the map is smooth everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger
from scipy import special

from hofer.errors import DomainViolation, InfeasibleContainment

BISECTION_STEPS = 64
CONTAINMENT_RADII = 64
CONTAINMENT_ANGLES = 720
SPEED_ANGLES = 2048
MAX_EXPONENT = 1024
QUADRATURE_NODES = 48
SMOOTHNESS_DIRECTIONS = 16
SMOOTHNESS_STEP = 1e-4
STEP_CLIP = 1e-6


class FamilyVariant(str, Enum):
    MINUS_CP2 = "MinusCP2"
    PLUS_CP2 = "PlusCP2"
    MINUS_BLOWUP = "MinusBlowup"
    PLUS_BLOWUP = "PlusBlowup"

    @property
    def on_blowup(self) -> bool:
        return self in (FamilyVariant.MINUS_BLOWUP, FamilyVariant.PLUS_BLOWUP)

    @property
    def sign(self) -> float:
        return -1.0 if self in (FamilyVariant.PLUS_CP2, FamilyVariant.PLUS_BLOWUP) else 1.0


@dataclass(frozen=True)
class Rectangle:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def margins(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.minimum.reduce([
            pts[:, 0] - self.x_min,
            self.x_max - pts[:, 0],
            pts[:, 1] - self.y_min,
            self.y_max - pts[:, 1],
        ])

    def corners(self) -> np.ndarray:
        return np.array([
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ])

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}


def superellipse_factor(p: float) -> float:
    """κ(p) = Γ(1+1/p)²/Γ(1+2/p); the curve with semi-axes a, b encloses 4abκ"""
    return float(special.gamma(1 + 1 / p) ** 2 / special.gamma(1 + 2 / p))


def max_radius(variant: FamilyVariant, epsilon: float, lam: Optional[float] = None) -> float:
    """Largest admissible outer radius: 1/√2 − ε, or √((1−λ²)/2) − ε on the blow-up"""
    if variant.on_blowup:
        return math.sqrt((1 - lam ** 2) / 2) - epsilon
    return 1 / math.sqrt(2) - epsilon


def smooth_step(x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """C^∞ step, 0 for x ≤ 0 and 1 for x ≥ 1, with its first two derivatives"""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.clip(np.where(inside, x, 0.5), STEP_CLIP, 1 - STEP_CLIP)
    sig = special.expit(1 / (1 - xi) - 1 / xi)
    w = sig * (1 - sig)
    g = 1 / xi ** 2 + 1 / (1 - xi) ** 2
    d1 = g * w
    d2 = (2 / (1 - xi) ** 3 - 2 / xi ** 3) * w + g * d1 * (1 - 2 * sig)
    value = np.where(x >= 1, 1.0, np.where(inside, sig, 0.0))
    return value, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def log_window(rho, start: float, stop: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """smooth_step(log(ρ/start)/log(stop/start)) with its first two ρ-derivatives"""
    rho = np.asarray(rho, dtype=float)
    span = math.log(stop / start)
    safe = np.where(rho > 0, rho, start)
    x = np.where(rho > 0, np.log(safe / start) / span, -1.0)
    value, d1, d2 = smooth_step(x)
    scale = safe * span
    return value, d1 / scale, d2 / scale ** 2 - d1 / (safe * scale)


def difference_defect(
    evaluate: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    directions: np.ndarray,
    step: float,
    central: bool = True,
) -> float:
    """
    Largest gap between difference quotients of a map and its Jacobian.

    With central=False both one-sided quotients are compared, which exposes
    a cone point or a cut through the base points.
    """
    points = np.atleast_2d(points)
    J = jacobian(points)
    base = evaluate(points)
    worst = 0.0
    for d in np.atleast_2d(directions):
        exact = J @ d
        ahead = evaluate(points + step * d)
        behind = evaluate(points - step * d)
        if central:
            quotients = [(ahead - behind) / (2 * step)]
        else:
            quotients = [(ahead - base) / step, (base - behind) / step]
        for quotient in quotients:
            worst = max(worst, float(np.max(np.linalg.norm(quotient - exact, axis=1))))
    return worst


def _polar(u, v) -> tuple[np.ndarray, np.ndarray]:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return np.hypot(u, v), np.mod(np.arctan2(v, u), 2 * math.pi)


@dataclass
class CurveProfile:
    """Center c, log aspect q and circle-to-superellipse weight s at radii ρ, each with two ρ-derivatives"""
    c: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    q: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    s: np.ndarray
    s1: np.ndarray
    s2: np.ndarray


def _repeat(prof: CurveProfile, n: int) -> CurveProfile:
    return CurveProfile(**{name: np.repeat(value, n) for name, value in vars(prof).items()})


class NestedCurveMap:
    '''
    Area-preserving map of B²(R) swept out by nested level curves.

    Subclasses supply profile(ρ). The angle τ on C_ρ of the point with polar
    angle θ solves

        G(τ, ρ) = S_s(τ) + k1·r sin τ + k2·r² sin 2τ + k3·(S_p(τ) − τ) = θ

    with S_s = ∫₀^τ r², k1 = c′e^{−q/2}, k2 = ρq′/4 and k3 = ρs′/2, which is
    the area flux condition. G increases from 0 to 2π exactly when the
    curves are nested.
    '''

    y_center = 0.5

    def __init__(self, R: float, p: int):
        self.R = float(R)
        self.p = int(p)
        self.kappa = superellipse_factor(self.p)
        self.s0 = math.sqrt(math.pi / (4 * self.kappa))

    def profile(self, rho: np.ndarray) -> CurveProfile:
        raise NotImplementedError

    def window_radii(self) -> Sequence[float]:
        return ()

    # -- the unit shape --------------------------------------------------------

    def _superellipse(self, tau) -> tuple[np.ndarray, np.ndarray]:
        """r_p and dr_p/dτ of |x|^p + |y|^p = s0^p"""
        c, s = np.cos(tau), np.sin(tau)
        m = np.maximum(np.abs(c), np.abs(s))
        cn, sn = c / m, s / m
        total = cn ** self.p + sn ** self.p
        rp = self.s0 / (m * total ** (1.0 / self.p))
        rpp = rp * (cn ** (self.p - 1) * s - sn ** (self.p - 1) * c) / (m * total)
        return rp, rpp

    def _sector(self, psi):
        """∫₀^ψ r_p² for 0 ≤ ψ ≤ π/4"""
        T = np.tan(psi)
        p = self.p
        return self.s0 ** 2 * T * special.hyp2f1(2 / p, 1 / p, 1 + 1 / p, -(T ** p))

    def swept(self, tau) -> np.ndarray:
        """S_p(τ) = ∫₀^τ r_p² for τ ∈ [0, 2π]; every quadrant sweeps π/2"""
        tau = np.asarray(tau, dtype=float)
        quarter = math.pi / 2
        j = np.clip(np.floor(tau / quarter), 0, 3)
        psi = tau - j * quarter
        low = self._sector(np.minimum(psi, math.pi / 4))
        high = quarter - self._sector(np.minimum(quarter - psi, math.pi / 4))
        return j * quarter + np.where(psi <= math.pi / 4, low, high)

    def extent(self, s) -> np.ndarray:
        """Half-width of the unit shape with weight s, attained on the axes"""
        return np.sqrt(1 - np.asarray(s, dtype=float) * (1 - self.s0 ** 2))

    # -- the angle equation ----------------------------------------------------

    @staticmethod
    def _coefficients(rho, prof: CurveProfile):
        a = np.exp(prof.q / 2)
        k1 = prof.c1 / a
        k1p = (prof.c2 - prof.c1 * prof.q1 / 2) / a
        k2 = rho * prof.q1 / 4
        k2p = (prof.q1 + rho * prof.q2) / 4
        k3 = rho * prof.s1 / 2
        k3p = (prof.s1 + rho * prof.s2) / 2
        return k1, k1p, k2, k2p, k3, k3p

    def _flux(self, tau, rho, prof: CurveProfile):
        k1, _, k2, _, k3, _ = self._coefficients(rho, prof)
        rp, _ = self._superellipse(tau)
        D = self.swept(tau) - tau
        r2 = 1 + prof.s * (rp ** 2 - 1)
        return tau + prof.s * D + k1 * np.sqrt(r2) * np.sin(tau) + k2 * r2 * np.sin(2 * tau) + k3 * D

    def _solve_angle(self, theta, rho, prof: CurveProfile):
        lo = np.zeros_like(theta)
        hi = np.full_like(theta, 2 * math.pi)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self._flux(mid, rho, prof) < theta
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def _partials(self, tau, rho, prof: CurveProfile):
        """G_τ, G_ρ and the shape terms r, r_τ, r_ρ at (τ, ρ)"""
        k1, k1p, k2, k2p, k3, k3p = self._coefficients(rho, prof)
        rp, rpp = self._superellipse(tau)
        E = rp ** 2 - 1
        r2 = 1 + prof.s * E
        r = np.sqrt(r2)
        rr_tau = prof.s * rp * rpp
        r_tau = rr_tau / r
        r_rho = prof.s1 * E / (2 * r)
        D = self.swept(tau) - tau
        st, ct = np.sin(tau), np.cos(tau)
        s2t, c2t = np.sin(2 * tau), np.cos(2 * tau)
        G_tau = r2 + k1 * (r_tau * st + r * ct) + k2 * (2 * rr_tau * s2t + 2 * r2 * c2t) + k3 * E
        G_rho = (prof.s1 * D + k1p * r * st + k1 * r_rho * st
                 + k2p * r2 * s2t + k2 * prof.s1 * E * s2t + k3p * D)
        return G_tau, G_rho, r, r_tau, r_rho

    # -- the map ---------------------------------------------------------------

    def _check_domain(self, rho):
        if np.any(rho >= self.R):
            raise DomainViolation(f"Point outside B²({self.R})", {"max_radius": float(rho.max())})

    def _points(self, rho, tau, prof: CurveProfile) -> np.ndarray:
        rp, _ = self._superellipse(tau)
        r = np.sqrt(1 + prof.s * (rp ** 2 - 1))
        a = np.exp(prof.q / 2)
        return np.stack([prof.c + rho * a * r * np.cos(tau), self.y_center + rho / a * r * np.sin(tau)], axis=1)

    def evaluate(self, u, v) -> np.ndarray:
        """Image points, shape (N, 2)"""
        rho, theta = _polar(u, v)
        self._check_domain(rho)
        prof = self.profile(rho)
        return self._points(rho, self._solve_angle(theta, rho, prof), prof)

    def jacobian(self, u, v) -> np.ndarray:
        """Analytic Jacobian ∂(x, y)/∂(u, v), shape (N, 2, 2); finite at ρ = 0"""
        rho, theta = _polar(u, v)
        self._check_domain(rho)
        prof = self.profile(rho)
        tau = self._solve_angle(theta, rho, prof)
        G_tau, G_rho, r, r_tau, r_rho = self._partials(tau, rho, prof)
        tau_theta = 1 / G_tau
        tau_rho = -G_rho / G_tau
        a = np.exp(prof.q / 2)
        half = rho * prof.q1 / 2
        st, ct = np.sin(tau), np.cos(tau)
        gx = r_tau * ct - r * st
        gy = r_tau * st + r * ct
        X_rho = np.stack([
            prof.c1 + a * (1 + half) * r * ct + rho * a * (r_rho * ct + gx * tau_rho),
            (1 - half) / a * r * st + rho / a * (r_rho * st + gy * tau_rho),
        ], axis=1)
        # ∂X/∂θ divided by ρ
        X_theta = np.stack([a * gx * tau_theta, gy / a * tau_theta], axis=1)
        c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
        J = np.empty((len(rho), 2, 2))
        J[:, :, 0] = X_rho * c - X_theta * s
        J[:, :, 1] = X_rho * s + X_theta * c
        return J

    def circle_image(self, r: float, n: int = CONTAINMENT_ANGLES) -> np.ndarray:
        theta = np.linspace(0, 2 * math.pi, n, endpoint=False)
        return self.evaluate(r * np.cos(theta), r * np.sin(theta))

    def curve(self, r: float, n: int = CONTAINMENT_ANGLES) -> np.ndarray:
        """C_r sampled uniformly in the shape angle; n divisible by 4 hits the extreme points"""
        tau = np.linspace(0, 2 * math.pi, n, endpoint=False)
        rho = np.full(n, float(r))
        return self._points(rho, tau, _repeat(self.profile(np.array([float(r)])), n))

    def nesting_speed(self, radii, n: int = SPEED_ANGLES) -> np.ndarray:
        """min over τ of ∂G/∂τ per radius; positive iff the curves are regular and nested"""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        tau = np.tile(np.linspace(0, 2 * math.pi, n, endpoint=False), len(radii))
        rho = np.repeat(radii, n)
        G_tau = self._partials(tau, rho, _repeat(self.profile(radii), n))[0]
        return G_tau.reshape(len(radii), n).min(axis=1)

    def smoothness_defect(self, radii: Optional[Sequence[float]] = None,
                          n_dirs: int = SMOOTHNESS_DIRECTIONS) -> float:
        """
        Largest gap between difference quotients and the analytic Jacobian.

        One-sided quotients from the origin along n_dirs directions, then
        central quotients with step 1e-4·r on circles of the given radii,
        by default one in each blending window.
        """
        phi = np.linspace(0, 2 * math.pi, n_dirs, endpoint=False)
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        evaluate = lambda pts: self.evaluate(pts[:, 0], pts[:, 1])
        jacobian = lambda pts: self.jacobian(pts[:, 0], pts[:, 1])
        origin_step = SMOOTHNESS_STEP * min(self.window_radii() or (self.R,))
        worst = difference_defect(evaluate, jacobian, np.zeros((1, 2)), dirs, origin_step, central=False)
        for r in self.window_radii() if radii is None else radii:
            worst = max(worst, difference_defect(evaluate, jacobian, r * dirs, np.eye(2), SMOOTHNESS_STEP * r))
        return worst


class DiskRectFamily(NestedCurveMap):
    '''
    Area-preserving map (u, v) ↦ (x, y) with ψ(∂B²(r)) ⊂ rect_of(r + ε).

    Rectangles have x-center x0 + sgn·((π/2)r² − w·r), half-width w·r,
    y-center 1/2 and half-height h·r, with w·h = π/4. The level curves keep
    the rectangle aspect, round off into a superellipse on [ε/8, ε/2] and
    start following the rectangle centers on [ε/2, ε].
    '''

    def __init__(self, variant: FamilyVariant, R: float, epsilon: float, lam: Optional[float] = None):
        self.variant = FamilyVariant(variant)
        self.epsilon = float(epsilon)
        self.lam = lam
        if self.variant.on_blowup:
            if lam is None or not 0 < lam < 1:
                raise DomainViolation(f"Blow-up family needs 0 < λ < 1, got {lam}")
            self.k = 1.0 - lam ** 2
        else:
            self.k = 1.0
        self.x0 = math.pi / 4 * self.k
        self.sgn = self.variant.sign
        self.w = math.pi / (2 * math.sqrt(2)) * math.sqrt(self.k)
        self.h = 1 / math.sqrt(2 * self.k)
        self.r_max = max_radius(self.variant, self.epsilon, lam)
        self.q0 = 2 * math.log(2 * self.w / math.sqrt(math.pi))
        self.shape_window = (self.epsilon / 8, self.epsilon / 2)
        self.drift_window = (self.epsilon / 2, self.epsilon)
        self._nodes, self._weights = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
        self.R = float(R)
        # how far the curve centers trail the rectangle centers once they follow them
        self.drift_lag = float(self._drift(np.array([self.epsilon]))[0] - self._target(self.epsilon))
        super().__init__(R, self._exponent())

    def _exponent(self) -> int:
        room = (self.w * self.epsilon - self.drift_lag) / 2
        if room <= 0:
            raise InfeasibleContainment(f"Center drift leaves no room at ε={self.epsilon}",
                                        {"epsilon": self.epsilon, "drift_lag": self.drift_lag})
        p = 4
        while self.w * self.R * (1 / math.sqrt(superellipse_factor(p)) - 1) > room:
            p += 2
            if p > MAX_EXPONENT:
                raise InfeasibleContainment(f"No superellipse exponent fits ε={self.epsilon}",
                                            {"epsilon": self.epsilon, "room": room})
        return p

    # -- rectangles ----------------------------------------------------------

    def center_x(self, r):
        r = np.asarray(r, dtype=float)
        return self.x0 + self.sgn * (math.pi / 2 * r ** 2 - self.w * r)

    def center_x_prime(self, r):
        return self.sgn * (math.pi * np.asarray(r, dtype=float) - self.w)

    def rect_of(self, r: float) -> Rectangle:
        cx = float(self.center_x(r))
        return Rectangle(cx - self.w * r, cx + self.w * r, 0.5 - self.h * r, 0.5 + self.h * r)

    # -- curve centers -------------------------------------------------------

    def _target(self, rho):
        t = np.asarray(rho, dtype=float) + self.epsilon
        return math.pi / 2 * t ** 2 - self.w * t

    def _target_slope(self, rho):
        return math.pi * (np.asarray(rho, dtype=float) + self.epsilon) - self.w

    def _drift(self, rho):
        """T(0) + ∫₀^ρ T′·σ with σ the drift window, in the frame of sgn = +1"""
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.drift_window
        b = np.clip(rho, lo, hi)
        t = lo + (b - lo)[:, None] * (self._nodes + 1) / 2
        sig = log_window(t, lo, hi)[0]
        inner = (b - lo) / 2 * np.sum(self._weights * self._target_slope(t) * sig, axis=1)
        tail = np.where(rho > hi, self._target(rho) - self._target(hi), 0.0)
        return float(self._target(0.0)) + inner + tail

    def curve_center(self, rho) -> np.ndarray:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        return self.x0 + self.sgn * self._drift(rho)

    def profile(self, rho) -> CurveProfile:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        s, s1, s2 = log_window(rho, *self.shape_window)
        sig, sig1, _ = log_window(rho, *self.drift_window)
        slope = self._target_slope(rho)
        zero = np.zeros_like(rho)
        return CurveProfile(
            c=self.curve_center(rho),
            c1=self.sgn * slope * sig,
            c2=self.sgn * (math.pi * sig + slope * sig1),
            q=np.full_like(rho, self.q0),
            q1=zero,
            q2=zero,
            s=s,
            s1=s1,
            s2=s2,
        )

    def window_radii(self) -> Sequence[float]:
        return tuple(r for r in (self.epsilon / 16, self.epsilon / 4, self.epsilon / math.sqrt(2)) if r < self.R)

    def sample_radii(self) -> np.ndarray:
        fine = np.geomspace(self.epsilon / 16, min(2 * self.epsilon, self.R), CONTAINMENT_RADII // 2)
        return np.unique(np.concatenate([np.linspace(0.0, self.R, CONTAINMENT_RADII), fine]))

    def containment_margins(self, radii: Optional[np.ndarray] = None) -> np.ndarray:
        """min over C_r of the margin in rect_of(r + ε), one value per radius"""
        if radii is None:
            radii = self.sample_radii()
        return np.array([float(self.rect_of(r + self.epsilon).margins(self.curve(r)).min()) for r in radii])

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "R": self.R,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "exponent": self.p,
            "aspect": math.exp(self.q0 / 2),
            "shape_window": list(self.shape_window),
            "drift_window": list(self.drift_window),
            "drift_lag": self.drift_lag,
        }


class StripFamily(NestedCurveMap):
    '''
    Area-preserving map B²(S) → (Y, x′) with C_ρ inside (0, π(ρ² + δ)) × (0, 1).

    Curves start as ellipses around (πδ/2, 1/2), round off into superellipses
    on [ρ1, ρ2], stretch towards the height 2H on [ρ2, ρ3] and from ρ3 on
    slide right so that the left edge stays positive while the right edge
    follows the area. The exponent grows like 1/δ as δ → 0.
    '''

    LEFT_TAIL = 0.5

    def __init__(self, S: float, delta: float):
        if not 0 < delta:
            raise DomainViolation(f"Strip slack must be positive, got δ={delta}")
        if not S > 0:
            raise DomainViolation(f"Strip radius must be positive, got S={S}")
        self.S = float(S)
        self.delta = float(delta)
        self.eta = self.delta / (2 * self.S ** 2)
        super().__init__(S, self._exponent(self.eta))
        self.alpha = 3 / (self.p + 1)
        self.height = (1 + self.eta / 4) / (2 * self.kappa * (1 + self.eta))
        self.c0 = math.pi * self.delta / 2
        beta = 2 - self.alpha
        self.rho3 = (self.c0 * self.height * self.S ** (-self.alpha) / (4 * self.s0 ** 2)) ** (1 / beta)
        self.rho2 = self.rho3 / 4
        self.rho1 = self.rho2 / 4
        self.q0 = 2 * math.log(self.rho3 * self.s0 / (self.height * (self.rho3 / self.S) ** self.alpha))

    @staticmethod
    def _exponent(eta: float) -> int:
        p = 4
        while (3 / (p + 1) > 2 * eta / (1 + eta)
               or superellipse_factor(p) * (1 + eta) <= 1 + eta / 4):
            p += 2
            if p > MAX_EXPONENT:
                raise InfeasibleContainment(f"No superellipse exponent fits the strip slack η={eta:.3e}",
                                            {"eta": eta, "max_exponent": MAX_EXPONENT})
        return p

    def budget(self, rho) -> np.ndarray:
        """Right end π(ρ² + δ) of the strip allotted to C_ρ"""
        return math.pi * (np.asarray(rho, dtype=float) ** 2 + self.delta)

    def _left(self, u):
        t = self.LEFT_TAIL
        e = np.exp(-u)
        return ((1 - t) * e + t / (1 + u),
                -(1 - t) * e - t / (1 + u) ** 2,
                (1 - t) * e + 2 * t / (1 + u) ** 3)

    def profile(self, rho) -> CurveProfile:
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        s, s1, s2 = log_window(rho, self.rho1, self.rho2)
        sb, sb1, sb2 = log_window(rho, self.rho2, self.rho3)
        safe = np.maximum(rho, self.rho1)
        lag = (1 - self.alpha) * np.log(self.rho3 / safe)
        lag1 = -(1 - self.alpha) / safe
        lag2 = (1 - self.alpha) / safe ** 2
        q = self.q0 - 2 * sb * lag
        q1 = -2 * (sb1 * lag + sb * lag1)
        q2 = -2 * (sb2 * lag + 2 * sb1 * lag1 + sb * lag2)

        # u = A·s0/c0 with A = ρe^{q/2} the horizontal semi-axis scale
        grow = 1 / safe + q1 / 2
        u = safe * np.exp(q / 2) * self.s0 / self.c0
        u1 = u * grow
        u2 = u1 * grow + u * (-1 / safe ** 2 + q2 / 2)
        phi, phi1, phi2 = self._left(u)
        far = self.c0 * (phi + u - 1)
        far1 = self.c0 * (phi1 + 1) * u1
        far2 = self.c0 * (phi2 * u1 ** 2 + (phi1 + 1) * u2)
        sc, sc1, sc2 = log_window(rho, self.rho3, 2 * self.rho3)
        return CurveProfile(
            c=self.c0 + sc * far,
            c1=sc1 * far + sc * far1,
            c2=sc2 * far + 2 * sc1 * far1 + sc * far2,
            q=q,
            q1=q1,
            q2=q2,
            s=s,
            s1=s1,
            s2=s2,
        )

    def window_radii(self) -> Sequence[float]:
        return (self.rho1 / 2,)

    def sample_radii(self) -> np.ndarray:
        fine = np.geomspace(self.rho1 / 4, self.S, 2 * CONTAINMENT_RADII)
        return np.unique(np.concatenate([np.linspace(0.0, self.S, CONTAINMENT_RADII), fine]))

    def containment_margins(self, radii: Optional[np.ndarray] = None) -> np.ndarray:
        """min over C_r of the margin in (0, π(r² + δ)) × (0, 1), one value per radius"""
        if radii is None:
            radii = self.sample_radii()
        out = []
        for r in radii:
            pts = self.curve(r)
            out.append(float(np.min([pts[:, 0].min(), (self.budget(r) - pts[:, 0]).min(),
                                     pts[:, 1].min(), (1 - pts[:, 1]).min()])))
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "delta": self.delta,
            "exponent": self.p,
            "height": 2 * self.height,
            "windows": [self.rho1, self.rho2, self.rho3, 2 * self.rho3],
        }


def _check_nesting(family: NestedCurveMap, radii: np.ndarray, label: str) -> float:
    speed = family.nesting_speed(radii[radii > 0])
    slowest = float(speed.min())
    if slowest <= 0:
        raise InfeasibleContainment(
            f"{label} curves are not nested (flux density {slowest:.3e})",
            {"flux_density": slowest, "radius": float(radii[radii > 0][int(np.argmin(speed))])},
        )
    return slowest


def build_disk_rect_family(
    variant: FamilyVariant,
    R: float,
    epsilon: float,
    lam: Optional[float] = None,
) -> DiskRectFamily:
    """
    Build and check a disk-to-rectangle family.

    Raises:
        DomainViolation: ε or R outside the admissible range
        InfeasibleContainment: a sampled curve leaves its rectangle or the curves cross
    """
    variant = FamilyVariant(variant)
    if not 0 < epsilon < R:
        raise DomainViolation(f"Need 0 < ε < R, got ε={epsilon}, R={R}")
    if variant.on_blowup and (lam is None or not 0 < lam < 1):
        raise DomainViolation(f"Blow-up family needs 0 < λ < 1, got {lam}")
    limit = max_radius(variant, epsilon, lam)
    if R > limit + 1e-15:
        raise DomainViolation(f"R={R} exceeds the admissible radius {limit}", {"limit": limit})
    family = DiskRectFamily(variant, R, epsilon, lam)
    radii = family.sample_radii()
    margins = family.containment_margins(radii)
    worst = float(margins.min())
    if worst < 0:
        raise InfeasibleContainment(
            f"Curve family leaves its rectangle (worst margin {worst:.3e})",
            {"worst_margin": worst, "radius": float(radii[int(np.argmin(margins))])},
        )
    slowest = _check_nesting(family, radii, variant.value)
    logger.debug(f"Built {variant.value} family R={R:.6f} ε={epsilon} p={family.p} "
                 f"(worst margin {worst:.3e}, flux density {slowest:.3e})")
    return family


def build_strip_family(S: float, delta: float) -> StripFamily:
    """
    Build and check a ball-to-strip family B²(S) → (0, π(ρ² + δ)) × (0, 1).

    Raises:
        DomainViolation: S or δ not positive
        InfeasibleContainment: no exponent fits, a curve leaves the strip or the curves cross
    """
    family = StripFamily(S, delta)
    radii = family.sample_radii()
    margins = family.containment_margins(radii)
    worst = float(margins.min())
    if worst <= 0:
        raise InfeasibleContainment(
            f"Strip family leaves its strip (worst margin {worst:.3e})",
            {"worst_margin": worst, "radius": float(radii[int(np.argmin(margins))])},
        )
    slowest = _check_nesting(family, radii, "Strip")
    logger.debug(f"Built strip family S={S:.6f} δ={delta:.3e} p={family.p} "
                 f"(worst margin {worst:.3e}, flux density {slowest:.3e})")
    return family
