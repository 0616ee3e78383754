"""
Explicit symplectic embeddings and their numerical verification.

Every map is packaged as a SymplecticMapSpec acting on real coordinates
(complex coordinates interleaved as Re, Im). Targets are expressed in one
affine chart, with the (s, t) slab of a graph region appended where the
codomain is a region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from hofer.disk_family import (
    DiskRectFamily,
    FamilyVariant,
    StripFamily,
    build_disk_rect_family,
    build_strip_family,
    difference_defect,
    max_radius,
)
from hofer.errors import ContainmentViolation, DomainViolation
from hofer.geometry import (
    DISK_FORM,
    HALF_PI,
    ManifoldModel,
    PointRepr,
    block_form,
    canonicalize,
    complex_to_real,
    fubini_study_matrix,
    make_point,
    real_to_complex,
)
from hofer.hamiltonians import actions_of_arrays, hamiltonian_P
from hofer.regions import SLAB_FORM, GraphRegion, region_above, region_below

PULLBACK_TOL = 1e-6
DEFAULT_EPSILON = 0.05
DEFAULT_NU = 0.1
INJECTIVITY_TOL = 1e-9
SMOOTHNESS_TOL = 1e-4
FLIP_T = np.diag([1.0, -1.0])


def standard_form(n_complex: int) -> np.ndarray:
    return block_form([DISK_FORM] * n_complex)


def sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    """Uniform points of the open ball B^dim(radius)"""
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(n) ** (1.0 / dim))[:, None]


def _batched(matrix: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(matrix, (n,) + matrix.shape)


# ---------------------------------------------------------------------------
# Map specifications and verification
# ---------------------------------------------------------------------------

@dataclass
class SymplecticMapSpec:
    '''
    A smooth map between open subsets of R^d with forms on both sides.

    forward maps domain rows to target rows; jacobian returns (N, d, d)
    matrices (central differences when absent); margin returns the signed
    containment margin of each domain row's image.
    '''
    name: str
    dim: int
    domain: dict
    codomain: str
    forward: Callable[[np.ndarray], np.ndarray]
    target_form: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain_form: Optional[Callable[[np.ndarray], np.ndarray]] = None
    margin: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness: Optional[Callable[[], float]] = None
    meta: dict = field(default_factory=dict)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.forward(np.atleast_2d(np.asarray(x, dtype=float)))

    def jacobian_at(self, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.jacobian is not None:
            return self.jacobian(x)
        J = np.empty((len(x), self.dim, self.dim))
        for i in range(self.dim):
            step = np.zeros(self.dim)
            step[i] = h
            J[:, :, i] = (self.forward(x + step) - self.forward(x - step)) / (2 * h)
        return J

    def forms(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        source = (self.domain_form(x) if self.domain_form is not None
                  else _batched(standard_form(self.dim // 2), len(x)))
        return source, self.target_form(y)


@dataclass
class VerificationRecord:
    map: str
    probes: int
    pullback_residual_max: float
    containment_margin_min: Optional[float]
    injectivity_ratio_min: Optional[float]
    tol: float
    passed: bool
    meta: dict = field(default_factory=dict)
    smoothness_defect: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "probes": self.probes,
            "pullback_residual_max": self.pullback_residual_max,
            "containment_margin_min": self.containment_margin_min,
            "injectivity_ratio_min": self.injectivity_ratio_min,
            "smoothness_defect": self.smoothness_defect,
            "tol": self.tol,
            "pass": self.passed,
            **({"meta": self.meta} if self.meta else {}),
        }


def pullback_residuals(spec: SymplecticMapSpec, x: np.ndarray) -> np.ndarray:
    """Frobenius norm of Jᵀ ω_target J − ω_domain at each row of x"""
    y = spec.evaluate(x)
    J = spec.jacobian_at(x)
    source, target = spec.forms(x, y)
    diff = np.einsum("nji,njk,nkl->nil", J, target, J) - source
    return np.linalg.norm(diff, axis=(1, 2))


def verify_map(
    spec: SymplecticMapSpec,
    probes: int = 10_000,
    tol: float = PULLBACK_TOL,
    seed: int = 0,
    chunk: int = 2_000,
) -> VerificationRecord:
    """
    Probe a map for symplecticity, containment and injectivity.

    PASS iff the largest pullback residual is at most tol and every probed
    image has non-negative containment margin, and, for maps that carry a
    smoothness check, difference quotients agree with the Jacobian to
    SMOOTHNESS_TOL. Injectivity is evidence only:
    the smallest ratio of image to domain distance over nearest image
    neighbours.
    """
    if probes < 1:
        raise DomainViolation("verify_map needs at least one probe")
    rng = np.random.default_rng(seed)
    x = spec.sampler(rng, probes)
    residual = 0.0
    margins = []
    images = []
    for start in range(0, probes, chunk):
        part = x[start:start + chunk]
        residual = max(residual, float(np.max(pullback_residuals(spec, part))))
        images.append(spec.evaluate(part))
        if spec.margin is not None:
            margins.append(spec.margin(part))
    y = np.concatenate(images)
    margin_min = float(np.min(np.concatenate(margins))) if margins else None
    ratio = None
    if probes > 1:
        dist, idx = cKDTree(y).query(y, k=2)
        dom = np.linalg.norm(x - x[idx[:, 1]], axis=1)
        ratio = float(np.min(dist[:, 1] / np.maximum(dom, 1e-300)))
    defect = spec.smoothness() if spec.smoothness is not None else None
    passed = (residual <= tol and (margin_min is None or margin_min >= 0)
              and (defect is None or defect <= SMOOTHNESS_TOL))
    if ratio is not None and ratio < INJECTIVITY_TOL:
        logger.warning(f"{spec.name}: nearest images collapse (ratio {ratio:.2e})")
    logger.debug(f"Verified {spec.name}: residual={residual:.2e} margin={margin_min} smoothness={defect} pass={passed}")
    return VerificationRecord(spec.name, probes, residual, margin_min, ratio, tol, passed, dict(spec.meta), defect)


# ---------------------------------------------------------------------------
# Ball charts: v ↦ v/√(1 − |v|²)
# ---------------------------------------------------------------------------

def ball_to_chart(v: np.ndarray) -> np.ndarray:
    """Chart coordinates of [√(1−|v|²) : v] (in the chart of the inserted coordinate)"""
    sq = np.sum(v * v, axis=1, keepdims=True)
    return v / np.sqrt(1.0 - sq)


def chart_to_ball(w: np.ndarray) -> np.ndarray:
    sq = np.sum(w * w, axis=1, keepdims=True)
    return w / np.sqrt(1.0 + sq)


def ball_chart_jacobian(v: np.ndarray) -> np.ndarray:
    """cI + c³ v vᵀ with c = (1 − |v|²)^(−1/2)"""
    c = 1.0 / np.sqrt(1.0 - np.sum(v * v, axis=1))
    eye = np.eye(v.shape[1])
    return c[:, None, None] * eye + (c ** 3)[:, None, None] * v[:, :, None] * v[:, None, :]


def _check_ball(v: np.ndarray, radius: float, label: str) -> None:
    sq = np.sum(v * v, axis=1)
    if np.any(sq >= radius ** 2):
        raise DomainViolation(f"{label}: point outside the open ball of radius {radius}",
                              {"radius_sq": float(sq.max())})


# ---------------------------------------------------------------------------
# i^±
# ---------------------------------------------------------------------------

def i_minus_arrays(z: np.ndarray) -> np.ndarray:
    """[√(1 − |z1|² − |z2|²) : z1 : z2] for rows (z1, z2)"""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    sq = np.sum(np.abs(z) ** 2, axis=1)
    if np.any(sq >= 1):
        raise DomainViolation("i_minus needs |z1|² + |z2|² < 1", {"radius_sq": float(sq.max())})
    return canonicalize(np.column_stack([np.sqrt(1 - sq), z[:, 0], z[:, 1]]))


def i_plus_arrays(z: np.ndarray) -> np.ndarray:
    """[z1 : √(1 − |z1|² − |z2|²) : z2] for rows (z1, z2)"""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    sq = np.sum(np.abs(z) ** 2, axis=1)
    if np.any(sq >= 1):
        raise DomainViolation("i_plus needs |z1|² + |z2|² < 1", {"radius_sq": float(sq.max())})
    return canonicalize(np.column_stack([z[:, 0], np.sqrt(1 - sq), z[:, 1]]))


def i_minus(z1: complex, z2: complex) -> PointRepr:
    return make_point(ManifoldModel.cp2(), i_minus_arrays([[z1, z2]])[0])


def i_plus(z1: complex, z2: complex) -> PointRepr:
    return make_point(ManifoldModel.cp2(), i_plus_arrays([[z1, z2]])[0])


def _ball_margin(radius: float):
    return lambda x: radius ** 2 - np.sum(x * x, axis=1)


def i_minus_spec(radius: float = 0.9) -> SymplecticMapSpec:
    """i^− on B⁴(radius), target in the chart z0 ≠ 0"""
    return SymplecticMapSpec(
        name="i_minus",
        dim=4,
        domain={"type": "ball", "dim": 4, "radius": radius},
        codomain="CP2",
        forward=ball_to_chart,
        target_form=fubini_study_matrix,
        sampler=lambda rng, n: sample_ball(rng, n, 4, radius),
        jacobian=ball_chart_jacobian,
        margin=lambda x: 1.0 - np.sum(x * x, axis=1),
        inverse=chart_to_ball,
        meta={"chart": 0},
    )


def i_plus_spec(radius: float = 0.9) -> SymplecticMapSpec:
    """i^+ on B⁴(radius), target in the chart z1 ≠ 0"""
    spec = i_minus_spec(radius)
    spec.name = "i_plus"
    spec.meta = {"chart": 1}
    return spec


def moment_image(homogeneous: np.ndarray) -> np.ndarray:
    """(P, Q) of homogeneous rows"""
    acts = actions_of_arrays(ManifoldModel.cp2(), homogeneous, None)
    return acts[:, :2]


# ---------------------------------------------------------------------------
# Ψ^± into R_P^∓ over CP²
# ---------------------------------------------------------------------------

@dataclass
class RegionEmbedding:
    '''A product embedding base × disk family into a graph region'''
    spec: SymplecticMapSpec
    family: DiskRectFamily
    region: GraphRegion
    radius: float
    epsilon: float
    chain_margin: Callable[[np.ndarray], np.ndarray]
    homogeneous_of: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def chain_margins(self, x: np.ndarray) -> np.ndarray:
        """Margin of the inequality chain H(base image) − s, per domain row"""
        return self.chain_margin(np.atleast_2d(np.asarray(x, dtype=float)))


def _family_images(family: DiskRectFamily, uv: np.ndarray) -> np.ndarray:
    """(s, t) = (x, 1 − y): the slab carries dt∧ds, so the rectangle's y-axis is read reversed"""
    xy = family.evaluate(uv[:, 0], uv[:, 1])
    return np.column_stack([xy[:, 0], 1.0 - xy[:, 1]])


def _family_jacobian(family: DiskRectFamily, uv: np.ndarray) -> np.ndarray:
    return FLIP_T @ family.jacobian(uv[:, 0], uv[:, 1])


def disk_family_spec(family: DiskRectFamily) -> SymplecticMapSpec:
    """The family itself as a map B²(R) → (s, t) slab"""
    def margin(x):
        rho = np.hypot(x[:, 0], x[:, 1])
        xy = family.evaluate(x[:, 0], x[:, 1])
        r = rho + family.epsilon
        cx = family.center_x(r)
        return np.minimum.reduce([
            xy[:, 0] - (cx - family.w * r),
            (cx + family.w * r) - xy[:, 0],
            xy[:, 1] - (0.5 - family.h * r),
            (0.5 + family.h * r) - xy[:, 1],
        ])

    return SymplecticMapSpec(
        name=f"psi_{family.variant.value}",
        dim=2,
        domain={"type": "ball", "dim": 2, "radius": family.R},
        codomain="slab",
        forward=lambda x: _family_images(family, x),
        target_form=lambda y: _batched(SLAB_FORM, len(y)),
        sampler=lambda rng, n: sample_ball(rng, n, 2, family.R),
        jacobian=lambda x: _family_jacobian(family, x),
        margin=margin,
        smoothness=family.smoothness_defect,
        meta=family.to_dict(),
    )


def _product_spec(
    name: str,
    base_forward: Callable[[np.ndarray], np.ndarray],
    base_jacobian: Callable[[np.ndarray], np.ndarray],
    homogeneous_of: Callable[[np.ndarray], np.ndarray],
    manifold: ManifoldModel,
    family: DiskRectFamily,
    region: GraphRegion,
    radius: float,
    base_smoothness: Optional[Callable[[], float]] = None,
) -> SymplecticMapSpec:
    def forward(x):
        _check_ball(x, radius, name)
        return np.column_stack([base_forward(x[:, :4]), _family_images(family, x[:, 4:])])

    def jacobian(x):
        J = np.zeros((len(x), 6, 6))
        J[:, :4, :4] = base_jacobian(x[:, :4])
        J[:, 4:, 4:] = _family_jacobian(family, x[:, 4:])
        return J

    def target_form(y):
        out = np.zeros((len(y), 6, 6))
        out[:, :4, :4] = fubini_study_matrix(y[:, :4])
        out[:, 4:, 4:] = SLAB_FORM
        return out

    def margin(x):
        z = homogeneous_of(x[:, :4])
        acts = actions_of_arrays(manifold, z, None)
        st = _family_images(family, x[:, 4:])
        return region.margins(acts, st[:, 0], st[:, 1])

    def smoothness():
        defect = family.smoothness_defect()
        return defect if base_smoothness is None else max(defect, base_smoothness())

    return SymplecticMapSpec(
        name=name,
        dim=6,
        domain={"type": "ball", "dim": 6, "radius": radius},
        codomain=f"R_P{'-' if region.side.value == 'Below' else '+'}({region.nu:g}/2) over {manifold.label}",
        forward=forward,
        target_form=target_form,
        sampler=lambda rng, n: sample_ball(rng, n, 6, radius),
        jacobian=jacobian,
        margin=margin,
        smoothness=smoothness,
        meta={"epsilon": family.epsilon, "radius": radius, "family": family.to_dict()},
    )


def psi_embedding(sign: str = "-", epsilon: float = DEFAULT_EPSILON, nu: float = DEFAULT_NU) -> RegionEmbedding:
    """
    Ψ^− = i^− × ψ^− into R_P^−(ν/2), or Ψ^+ = i^+ × ψ^+ into R_P^+(ν/2), on B⁶(1/√2 − ε).
    """
    m = ManifoldModel.cp2()
    radius = 1 / math.sqrt(2) - epsilon
    P = hamiltonian_P(m)
    if sign == "-":
        family = build_disk_rect_family(FamilyVariant.MINUS_CP2, radius, epsilon)
        region = region_below(P, nu)
        homogeneous_of = lambda v: i_minus_arrays(real_to_complex(v))

        def chain(x):
            base = HALF_PI * (1 - np.sum(x[:, :4] ** 2, axis=1))
            return base - (math.pi / 4 + HALF_PI * np.sum(x[:, 4:] ** 2, axis=1))
    elif sign == "+":
        family = build_disk_rect_family(FamilyVariant.PLUS_CP2, radius, epsilon)
        region = region_above(P, nu)
        homogeneous_of = lambda v: i_plus_arrays(real_to_complex(v))

        def chain(x):
            base = HALF_PI * (x[:, 0] ** 2 + x[:, 1] ** 2)
            return (math.pi / 4 - HALF_PI * np.sum(x[:, 4:] ** 2, axis=1)) - base
    else:
        raise DomainViolation(f"Unknown sign {sign!r}; use '-' or '+'")
    spec = _product_spec(f"Psi{'_minus' if sign == '-' else '_plus'}", ball_to_chart, ball_chart_jacobian,
                         homogeneous_of, m, family, region, radius)
    return RegionEmbedding(spec, family, region, radius, epsilon, chain, homogeneous_of)


def _psi_point(embedding: RegionEmbedding, z1, z2, u, v, builder) -> tuple[PointRepr, float, float]:
    x = np.array([[z1.real, z1.imag, z2.real, z2.imag, u, v]], dtype=float)
    _check_ball(x, embedding.radius, embedding.spec.name)
    point = make_point(ManifoldModel.cp2(), builder([[z1, z2]])[0])
    s, t = _family_images(embedding.family, x[:, 4:])[0]
    margin = float(embedding.spec.margin(x)[0])
    if margin < 0:
        raise ContainmentViolation(f"{embedding.spec.name} left its region", {"margin": margin})
    return point, float(s), float(t)


def Psi_minus(z1: complex, z2: complex, u: float, v: float, embedding: Optional[RegionEmbedding] = None):
    """Ψ^−(z1, z2, u, v) = (i^−(z1, z2), ψ^−(u, v)) as (point, s, t)"""
    embedding = embedding or psi_embedding("-")
    return _psi_point(embedding, complex(z1), complex(z2), u, v, i_minus_arrays)


def Psi_plus(z1: complex, z2: complex, u: float, v: float, embedding: Optional[RegionEmbedding] = None):
    """Ψ^+(z1, z2, u, v) = (i^+(z1, z2), ψ^+(u, v)) as (point, s, t)"""
    embedding = embedding or psi_embedding("+")
    return _psi_point(embedding, complex(z1), complex(z2), u, v, i_plus_arrays)


# ---------------------------------------------------------------------------
# The blow-up chain U_s → V_s → T_s → T⁴(πs²)
# ---------------------------------------------------------------------------

@dataclass
class BlowupChain:
    '''
    Coordinates of the chain for k = 1 − λ².

    U_s: chart z2 ≠ 0 of the blow-up; V_s ⊂ C² with |z0|² ∈ (k − s², k),
    |z1|² < k − |z0|²; T_s: (x, y, ζ) with x = s·arg(z0)/2, y² = |z0|² − k + s²;
    T⁴(πs²): (x′, y′, ζ) with x′ = 1 − x/(πs), y′ = πy².
    '''
    s: float
    lam: float
    stages: list[SymplecticMapSpec]

    @property
    def k(self) -> float:
        return 1.0 - self.lam ** 2

    def forward(self, x: np.ndarray) -> np.ndarray:
        for stage in self.stages:
            x = stage.evaluate(x)
        return x

    def backward(self, y: np.ndarray) -> np.ndarray:
        for stage in reversed(self.stages):
            y = stage.inverse(y)
        return y

    def backward_jacobian(self, y: np.ndarray) -> np.ndarray:
        """Jacobian of backward at the rows of y, from the inverted stage Jacobians"""
        J = None
        for stage in reversed(self.stages):
            x = stage.inverse(y)
            step = np.linalg.inv(stage.jacobian_at(x))
            J = step if J is None else step @ J
            y = x
        return J


def _sample_v(rng: np.random.Generator, n: int, s: float, k: float) -> np.ndarray:
    """Points of V_s away from the cut arg z0 = 0 and the inner circle"""
    r0_sq = k - s ** 2 * rng.uniform(0.02, 0.98, n)
    arg0 = 2 * math.pi * rng.uniform(0.01, 0.99, n)
    r1_sq = (k - r0_sq) * rng.uniform(0.0, 0.98, n)
    arg1 = 2 * math.pi * rng.random(n)
    z0 = np.sqrt(r0_sq) * np.exp(1j * arg0)
    z1 = np.sqrt(r1_sq) * np.exp(1j * arg1)
    return complex_to_real(np.column_stack([z0, z1]))


def _v_to_t(v: np.ndarray, s: float, k: float) -> np.ndarray:
    z = real_to_complex(v)
    r0_sq = np.abs(z[:, 0]) ** 2
    x = s * np.mod(np.angle(z[:, 0]), 2 * math.pi) / 2
    y = np.sqrt(r0_sq - k + s ** 2)
    return np.column_stack([x, y, v[:, 2], v[:, 3]])


def _t_to_v(t: np.ndarray, s: float, k: float) -> np.ndarray:
    x, y = t[:, 0], t[:, 1]
    r0 = np.sqrt(k - s ** 2 + y ** 2)
    z0 = r0 * np.exp(2j * x / s)
    return np.column_stack([z0.real, z0.imag, t[:, 2], t[:, 3]])


def _v_to_t_jacobian(v: np.ndarray, s: float, k: float) -> np.ndarray:
    a, b = v[:, 0], v[:, 1]
    r_sq = a * a + b * b
    y = np.sqrt(r_sq - k + s ** 2)
    J = np.zeros((len(v), 4, 4))
    J[:, 0, 0] = -s / 2 * b / r_sq
    J[:, 0, 1] = s / 2 * a / r_sq
    J[:, 1, 0] = a / y
    J[:, 1, 1] = b / y
    J[:, 2, 2] = J[:, 3, 3] = 1.0
    return J


def trapezoid_form(t: np.ndarray, s: float) -> np.ndarray:
    """(2y/s) dy∧dx plus the standard fiber form"""
    out = np.zeros((len(t), 4, 4))
    c = 2 * t[:, 1] / s
    out[:, 0, 1] = -c
    out[:, 1, 0] = c
    out[:, 2:, 2:] = DISK_FORM
    return out


def blowup_chain(s: float, lam: float) -> BlowupChain:
    """
    Explicit maps U_s → V_s → T_s → T⁴(πs²) with inverses.

    Raises:
        DomainViolation: unless 0 < s² ≤ 1 − λ² and 0 < λ < 1
    """
    if not 0 < lam < 1:
        raise DomainViolation(f"Need 0 < λ < 1, got {lam}")
    k = 1.0 - lam ** 2
    if not 0 < s ** 2 <= k:
        raise DomainViolation(f"Need 0 < s² ≤ 1 − λ², got s={s}", {"s": s, "k": k})

    def u_sampler(rng, n):
        return ball_to_chart(_sample_v(rng, n, s, k))

    u_to_v = SymplecticMapSpec(
        name="U_s->V_s",
        dim=4,
        domain={"type": "U_s", "s": s, "lambda": lam},
        codomain="V_s",
        forward=chart_to_ball,
        target_form=lambda y: _batched(standard_form(2), len(y)),
        domain_form=fubini_study_matrix,
        sampler=u_sampler,
        jacobian=lambda w: np.linalg.inv(ball_chart_jacobian(chart_to_ball(w))),
        margin=lambda w: _v_margin(chart_to_ball(w), s, k),
        inverse=ball_to_chart,
    )
    v_to_t = SymplecticMapSpec(
        name="V_s->T_s",
        dim=4,
        domain={"type": "V_s", "s": s, "lambda": lam},
        codomain="T_s",
        forward=lambda v: _v_to_t(v, s, k),
        target_form=lambda t: trapezoid_form(t, s),
        sampler=lambda rng, n: _sample_v(rng, n, s, k),
        jacobian=lambda v: _v_to_t_jacobian(v, s, k),
        margin=lambda v: _t_margin(_v_to_t(v, s, k), s),
        inverse=lambda t: _t_to_v(t, s, k),
    )
    t_to_t4 = SymplecticMapSpec(
        name="T_s->T4",
        dim=4,
        domain={"type": "T_s", "s": s, "lambda": lam},
        codomain=f"T4(pi*{s ** 2:g})",
        forward=lambda t: np.column_stack([1 - t[:, 0] / (math.pi * s), math.pi * t[:, 1] ** 2, t[:, 2:]]),
        target_form=lambda y: _batched(standard_form(2), len(y)),
        domain_form=lambda t: trapezoid_form(t, s),
        sampler=lambda rng, n: _v_to_t(_sample_v(rng, n, s, k), s, k),
        jacobian=lambda t: _t_to_t4_jacobian(t, s),
        margin=lambda t: _t4_margin(np.column_stack([1 - t[:, 0] / (math.pi * s), math.pi * t[:, 1] ** 2, t[:, 2:]]), s),
        inverse=lambda y: np.column_stack([math.pi * s * (1 - y[:, 0]), np.sqrt(y[:, 1] / math.pi), y[:, 2:]]),
    )
    return BlowupChain(s, lam, [u_to_v, v_to_t, t_to_t4])


def _t_to_t4_jacobian(t: np.ndarray, s: float) -> np.ndarray:
    J = np.zeros((len(t), 4, 4))
    J[:, 0, 0] = -1 / (math.pi * s)
    J[:, 1, 1] = 2 * math.pi * t[:, 1]
    J[:, 2, 2] = J[:, 3, 3] = 1.0
    return J


def _v_margin(v: np.ndarray, s: float, k: float) -> np.ndarray:
    r0_sq = v[:, 0] ** 2 + v[:, 1] ** 2
    r1_sq = v[:, 2] ** 2 + v[:, 3] ** 2
    return np.minimum.reduce([r0_sq - (k - s ** 2), k - r0_sq, (k - r0_sq) - r1_sq])


def _t_margin(t: np.ndarray, s: float) -> np.ndarray:
    fiber = t[:, 2] ** 2 + t[:, 3] ** 2
    return np.minimum.reduce([t[:, 0], math.pi * s - t[:, 0], t[:, 1], s - t[:, 1], s ** 2 - t[:, 1] ** 2 - fiber])


def _t4_margin(y: np.ndarray, s: float) -> np.ndarray:
    fiber = math.pi * (y[:, 2] ** 2 + y[:, 3] ** 2)
    return np.minimum.reduce([y[:, 0], 1 - y[:, 0], y[:, 1], math.pi * s ** 2 - y[:, 1] - fiber])


# ---------------------------------------------------------------------------
# j^− and Υ^− on the blow-up
# ---------------------------------------------------------------------------

def ball_to_trapezoid(w: np.ndarray, s: float, strip: StripFamily) -> np.ndarray:
    """
    (w0, w1) ↦ (x′, y′, ζ) in T⁴(πs²).

    The strip family sends w1 to (Y, x′) with dY∧dx′ = dw1, then
    y′ = π(s² − |w0|²) − Y and ζ = w0·e^{−2πix′}.
    """
    Yx = strip.evaluate(w[:, 2], w[:, 3])
    x = Yx[:, 1]
    y = math.pi * (s ** 2 - w[:, 0] ** 2 - w[:, 1] ** 2) - Yx[:, 0]
    zeta = (w[:, 0] + 1j * w[:, 1]) * np.exp(-2j * math.pi * x)
    return np.column_stack([x, y, zeta.real, zeta.imag])


def ball_to_trapezoid_jacobian(w: np.ndarray, s: float, strip: StripFamily) -> np.ndarray:
    J_strip = strip.jacobian(w[:, 2], w[:, 3])
    y = ball_to_trapezoid(w, s, strip)
    zeta = y[:, 2:]
    J = np.zeros((len(w), 4, 4))
    J[:, 0, 2:] = J_strip[:, 1]
    J[:, 1, 0] = -2 * math.pi * w[:, 0]
    J[:, 1, 1] = -2 * math.pi * w[:, 1]
    J[:, 1, 2:] = -J_strip[:, 0]
    phase = -2 * math.pi * y[:, 0]
    c, sn = np.cos(phase), np.sin(phase)
    J[:, 2, 0], J[:, 2, 1] = c, -sn
    J[:, 3, 0], J[:, 3, 1] = sn, c
    J[:, 2, 2:] = 2 * math.pi * zeta[:, 1:2] * J_strip[:, 1]
    J[:, 3, 2:] = -2 * math.pi * zeta[:, 0:1] * J_strip[:, 1]
    return J


@dataclass
class JMinus:
    '''
    j_s^−: B⁴(s − ε) → U_s, the ball-to-trapezoid map followed by the inverse chain.

    With S = s − ε the strip slack is δ = ε·S, so y′ > π·ε·s on the whole
    ball and P∘j = (π/2)(k − |w0|²) − Y(w1)/2 > (π/2)(k − |w|² − δ).
    '''
    s: float
    epsilon: float
    lam: float
    strip: StripFamily
    chain: BlowupChain

    @property
    def radius(self) -> float:
        return self.s - self.epsilon

    @property
    def k(self) -> float:
        return 1.0 - self.lam ** 2

    def trapezoid(self, w: np.ndarray) -> np.ndarray:
        _check_ball(w, self.radius, "j_minus")
        return ball_to_trapezoid(w, self.s, self.strip)

    def forward(self, w: np.ndarray) -> np.ndarray:
        """U_s chart coordinates of j^−(w)"""
        return self.chain.backward(self.trapezoid(w))

    def jacobian(self, w: np.ndarray) -> np.ndarray:
        y = self.trapezoid(w)
        return self.chain.backward_jacobian(y) @ ball_to_trapezoid_jacobian(w, self.s, self.strip)

    def homogeneous(self, w: np.ndarray) -> np.ndarray:
        """[z0 : z1 : √(1 − |v|²)] for the V_s point v of j^−(w)"""
        v = chart_to_ball(self.forward(w))
        z = real_to_complex(v)
        return canonicalize(np.column_stack([z[:, 0], z[:, 1], np.sqrt(1 - np.sum(v * v, axis=1))]))

    def action_P(self, w: np.ndarray) -> np.ndarray:
        return actions_of_arrays(ManifoldModel.blowup(self.lam), self.homogeneous(w), None)[:, 0]

    def smoothness_defect(self, step: float = 1e-7) -> float:
        """
        One-sided difference quotients against the Jacobian at the center
        and at points of the plane w1 = 0, along every coordinate axis and
        four diagonals.
        """
        S = self.radius
        points = np.array([
            [0.0, 0.0, 0.0, 0.0],
            [0.3 * S, 0.0, 0.0, 0.0],
            [0.0, -0.5 * S, 0.0, 0.0],
            [0.4 * S, 0.4 * S, 0.0, 0.0],
        ])
        directions = np.vstack([np.eye(4), np.array([[1, 0, 1, 0], [0, 1, 0, -1], [1, 1, 1, 1], [1, -1, -1, 1]]) / 2.0])
        return difference_defect(self.forward, self.jacobian, points, directions, step, central=False)

    def spec(self) -> SymplecticMapSpec:
        blowup = ManifoldModel.blowup(self.lam)
        radius = self.radius
        return SymplecticMapSpec(
            name="j_minus",
            dim=4,
            domain={"type": "ball", "dim": 4, "radius": radius},
            codomain=f"U_s in {blowup.label}",
            forward=self.forward,
            target_form=fubini_study_matrix,
            sampler=lambda rng, n: sample_ball(rng, n, 4, radius),
            jacobian=self.jacobian,
            margin=lambda w: _t4_margin(self.trapezoid(w), self.s),
            smoothness=self.smoothness_defect,
            meta={"s": self.s, "epsilon": self.epsilon, "lambda": self.lam, "strip": self.strip.to_dict()},
        )


def j_minus(s: float, epsilon: float, lam: float) -> JMinus:
    """
    Build j_s^− on B⁴(s − ε).

    Raises:
        DomainViolation: unless 0 < ε < s ≤ √(1 − λ²)
        InfeasibleContainment: no strip family fits the slack ε·(s − ε)
    """
    if not 0 < lam < 1:
        raise DomainViolation(f"Need 0 < λ < 1, got {lam}")
    k = 1.0 - lam ** 2
    if not 0 < epsilon < s <= math.sqrt(k) + 1e-15:
        raise DomainViolation(f"Need 0 < ε < s ≤ √(1 − λ²), got ε={epsilon}, s={s}")
    s = min(s, math.sqrt(k))
    S = s - epsilon
    strip = build_strip_family(S, epsilon * S)
    return JMinus(s, epsilon, lam, strip, blowup_chain(s, lam))


def j_s_minus(s: float, epsilon: float, lam: float) -> SymplecticMapSpec:
    """j_s^−: B⁴(s − ε) → U_s as a verifiable map"""
    return j_minus(s, epsilon, lam).spec()


def upsilon_embedding(
    lam: float,
    epsilon: float = DEFAULT_EPSILON,
    nu: float = DEFAULT_NU,
    sign: str = "-",
) -> RegionEmbedding:
    """
    Embeddings of B⁶(S), S = √((1 − λ²)/2) − ε, into the graph regions of P over the blow-up.

    sign "-" gives Υ^− = j^− × υ^− into R_P^−(ν/2), with j^− = j_σ^− for
    σ = √((1 − λ²)/2) and υ^− built with ε/2, which leaves room for the
    strip slack of j^−. sign "+" restricts i^+ to the smaller ball (its image
    misses the removed ball) and pairs it with the rescaled plus family into
    R_P^+(ν/2).
    """
    if not 0 < lam < 1:
        raise DomainViolation(f"Need 0 < λ < 1, got {lam}")
    m = ManifoldModel.blowup(lam)
    k = 1.0 - lam ** 2
    P = hamiltonian_P(m)
    if sign == "-":
        variant = FamilyVariant.MINUS_BLOWUP
        radius = max_radius(variant, epsilon, lam)
        family = build_disk_rect_family(variant, radius, epsilon / 2, lam)
        region = region_below(P, nu)
        j = j_minus(math.sqrt(k / 2), epsilon, lam)
        base_forward, base_jacobian, homogeneous_of = j.forward, j.jacobian, j.homogeneous
        base_smoothness = j.smoothness_defect

        def chain(x):
            rect_right = math.pi / 4 * k + HALF_PI * (np.hypot(x[:, 4], x[:, 5]) + epsilon / 2) ** 2
            return j.action_P(x[:, :4]) - rect_right
    elif sign == "+":
        variant = FamilyVariant.PLUS_BLOWUP
        radius = max_radius(variant, epsilon, lam)
        family = build_disk_rect_family(variant, radius, epsilon, lam)
        region = region_above(P, nu)
        base_forward = ball_to_chart
        base_jacobian = ball_chart_jacobian
        homogeneous_of = lambda v: i_plus_arrays(real_to_complex(v))
        base_smoothness = None

        def chain(x):
            base = HALF_PI * (x[:, 0] ** 2 + x[:, 1] ** 2)
            return (math.pi / 4 * k - HALF_PI * np.sum(x[:, 4:] ** 2, axis=1)) - base
    else:
        raise DomainViolation(f"Unknown sign {sign!r}; use '-' or '+'")
    name = "Upsilon_minus" if sign == "-" else "Upsilon_plus"
    spec = _product_spec(name, base_forward, base_jacobian, homogeneous_of, m, family, region, radius,
                         base_smoothness)
    spec.meta["lambda"] = lam
    return RegionEmbedding(spec, family, region, radius, epsilon, chain, homogeneous_of)


def _upsilon_point(embedding: RegionEmbedding, w0, w1, u, v, lam):
    w0, w1 = complex(w0), complex(w1)
    x = np.array([[w0.real, w0.imag, w1.real, w1.imag, u, v]], dtype=float)
    _check_ball(x, embedding.radius, embedding.spec.name)
    point = make_point(ManifoldModel.blowup(lam), embedding.homogeneous_of(x[:, :4])[0])
    s, t = _family_images(embedding.family, x[:, 4:])[0]
    margin = float(embedding.spec.margin(x)[0])
    if margin < 0:
        raise ContainmentViolation(f"{embedding.spec.name} left its region", {"margin": margin})
    return point, float(s), float(t)


def Upsilon_minus(w0: complex, w1: complex, u: float, v: float, lam: float,
                  epsilon: float = DEFAULT_EPSILON, embedding: Optional[RegionEmbedding] = None):
    """Υ^−(w0, w1, u, v) = (j^−(w0, w1), υ^−(u, v)) as (point, s, t)"""
    embedding = embedding or upsilon_embedding(lam, epsilon)
    return _upsilon_point(embedding, w0, w1, u, v, lam)


def Upsilon_plus(z1: complex, z2: complex, u: float, v: float, lam: float,
                 epsilon: float = DEFAULT_EPSILON, embedding: Optional[RegionEmbedding] = None):
    """(i^+(z1, z2), υ^+(u, v)) on the blow-up as (point, s, t)"""
    embedding = embedding or upsilon_embedding(lam, epsilon, sign="+")
    return _upsilon_point(embedding, z1, z2, u, v, lam)


# ---------------------------------------------------------------------------
# Controls
# ---------------------------------------------------------------------------

def identity_disk_spec(area: float) -> SymplecticMapSpec:
    radius = math.sqrt(area / math.pi)
    return SymplecticMapSpec(
        name="identity_disk",
        dim=2,
        domain={"type": "ball", "dim": 2, "radius": radius},
        codomain=f"D({area:g})",
        forward=lambda x: np.array(x, dtype=float),
        target_form=lambda y: _batched(DISK_FORM, len(y)),
        sampler=lambda rng, n: sample_ball(rng, n, 2, radius),
        jacobian=lambda x: _batched(np.eye(2), len(x)),
        margin=_ball_margin(radius),
        inverse=lambda y: np.array(y, dtype=float),
    )


def corrupted(spec: SymplecticMapSpec, factor: float = 1.01, coordinate: int = 0) -> SymplecticMapSpec:
    """The same map with one output coordinate scaled (a negative control)"""
    scale = np.ones(spec.dim)
    scale[coordinate] = factor
    base_forward = spec.forward

    def forward(x):
        return base_forward(x) * scale

    def jacobian(x):
        return scale[None, :, None] * spec.jacobian_at(x)

    def target_form(y):
        return spec.target_form(y / scale)

    return SymplecticMapSpec(
        name=f"{spec.name}_corrupted",
        dim=spec.dim,
        domain=spec.domain,
        codomain=spec.codomain,
        forward=forward,
        target_form=target_form,
        sampler=spec.sampler,
        jacobian=jacobian,
        domain_form=spec.domain_form,
        margin=spec.margin,
        meta={"factor": factor, "coordinate": coordinate},
    )


def shipped_specs(epsilon: float = DEFAULT_EPSILON, lam: float = 0.5, nu: float = DEFAULT_NU) -> list[SymplecticMapSpec]:
    """Every map the verification suite checks"""
    k = 1.0 - lam ** 2
    s = math.sqrt(k)
    chain = blowup_chain(0.8 * s, lam)
    return [
        i_minus_spec(0.9),
        i_plus_spec(0.9),
        disk_family_spec(build_disk_rect_family(FamilyVariant.MINUS_CP2, 1 / math.sqrt(2) - epsilon, epsilon)),
        psi_embedding("-", epsilon, nu).spec,
        psi_embedding("+", epsilon, nu).spec,
        *chain.stages,
        j_s_minus(s, epsilon, lam),
        upsilon_embedding(lam, epsilon, nu).spec,
        upsilon_embedding(lam, epsilon, nu, sign="+").spec,
    ]
