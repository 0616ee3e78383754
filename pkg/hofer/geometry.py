"""
Toric models of CP², its one-point blow-up, CP¹, disks and products with a disk.

The base form is the Fubini-Study form with line area π. In an affine chart
with coordinates w it reads (i/2) h_ab dw_a ∧ dw̄_b with
h_ab = ((1+|w|²)δ_ab − w̄_a w_b) / (1+|w|²)², so at a chart origin it is the
standard form of C^n. The moment map (π/2)|z_i|²/Σ|z|² has angles of period
2, hence every volume is four times the area of its polytope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy.spatial import ConvexHull

from hofer.errors import ChartDegenerate, DomainViolation, SingularForm, Unsupported

POINT_TOL = 1e-10
CHART_TOL = 1e-8
EXCEPTIONAL_TUBE = 1e-8
HALF_PI = math.pi / 2

# Flat area form on a disk factor
DISK_FORM = np.array([[0.0, 1.0], [-1.0, 0.0]])


class ManifoldKind(str, Enum):
    """Supported symplectic models"""
    CP1 = "CP1"
    CP2 = "CP2"
    BLOWUP = "BlowupCP2"
    DISK = "Disk"
    PRODUCT = "ProductWithDisk"


TORIC_KINDS = (ManifoldKind.CP1, ManifoldKind.CP2, ManifoldKind.BLOWUP)


@dataclass(frozen=True)
class ManifoldModel:
    kind: ManifoldKind
    lam: Optional[float] = None
    disk_area: Optional[float] = None
    base: Optional["ManifoldModel"] = None

    def __post_init__(self):
        if self.kind is ManifoldKind.BLOWUP:
            if self.lam is None or not 0.0 < self.lam < 1.0:
                raise DomainViolation(f"Blow-up radius must lie in (0, 1), got {self.lam}", {"lambda": self.lam})
        if self.kind in (ManifoldKind.DISK, ManifoldKind.PRODUCT):
            if self.disk_area is None or self.disk_area <= 0:
                raise DomainViolation(f"Disk area must be positive, got {self.disk_area}", {"disk_area": self.disk_area})
        if self.kind is ManifoldKind.PRODUCT:
            if self.base is None or self.base.kind not in TORIC_KINDS:
                raise Unsupported("Products are built over CP1, CP2 or the blow-up")

    @classmethod
    def cp1(cls) -> "ManifoldModel":
        return cls(ManifoldKind.CP1)

    @classmethod
    def cp2(cls) -> "ManifoldModel":
        return cls(ManifoldKind.CP2)

    @classmethod
    def blowup(cls, lam: float) -> "ManifoldModel":
        return cls(ManifoldKind.BLOWUP, lam=float(lam))

    @classmethod
    def disk(cls, area: float) -> "ManifoldModel":
        return cls(ManifoldKind.DISK, disk_area=float(area))

    @classmethod
    def product(cls, base: "ManifoldModel", area: float) -> "ManifoldModel":
        return cls(ManifoldKind.PRODUCT, disk_area=float(area), base=base)

    @property
    def toric_base(self) -> Optional["ManifoldModel"]:
        if self.kind in TORIC_KINDS:
            return self
        if self.kind is ManifoldKind.PRODUCT:
            return self.base
        return None

    @property
    def has_disk(self) -> bool:
        return self.kind in (ManifoldKind.DISK, ManifoldKind.PRODUCT)

    @property
    def n_homogeneous(self) -> int:
        base = self.toric_base
        if base is None:
            return 0
        return 2 if base.kind is ManifoldKind.CP1 else 3

    @property
    def base_complex_dim(self) -> int:
        return max(self.n_homogeneous - 1, 0)

    @property
    def complex_dim(self) -> int:
        return self.base_complex_dim + (1 if self.has_disk else 0)

    @property
    def real_dim(self) -> int:
        return 2 * self.complex_dim

    @property
    def lambda_sq(self) -> float:
        base = self.toric_base
        if base is not None and base.kind is ManifoldKind.BLOWUP:
            return base.lam ** 2
        return 0.0

    @property
    def disk_radius(self) -> float:
        return math.sqrt(self.disk_area / math.pi) if self.has_disk else 0.0

    @property
    def label(self) -> str:
        if self.kind is ManifoldKind.BLOWUP:
            return f"Blowup(lambda={self.lam:g})"
        if self.kind is ManifoldKind.DISK:
            return f"D({self.disk_area:g})"
        if self.kind is ManifoldKind.PRODUCT:
            return f"{self.base.label}xD({self.disk_area:g})"
        return self.kind.value

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "label": self.label}
        if self.lam is not None:
            data["lambda"] = self.lam
        if self.disk_area is not None:
            data["disk_area"] = self.disk_area
        if self.base is not None:
            data["base"] = self.base.to_dict()
        return data


# ---------------------------------------------------------------------------
# Homogeneous coordinates and charts
# ---------------------------------------------------------------------------

def canonicalize(z: np.ndarray) -> np.ndarray:
    """
    Normalize homogeneous coordinates and fix the phase.

    Works on a single vector or on rows of a 2-D array. The first coordinate
    whose modulus exceeds POINT_TOL is made real and positive.

    Args:
        z: Complex array of shape (k,) or (N, k)

    Returns:
        Unit vectors with canonical phase, same shape as z
    """
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    rows = np.atleast_2d(z)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < POINT_TOL):
        raise DomainViolation("Zero vector has no projective class")
    rows = rows / norms[:, None]
    first = np.argmax(np.abs(rows) > POINT_TOL, axis=1)
    lead = rows[np.arange(len(rows)), first]
    rows = rows * (np.conj(lead) / np.abs(lead))[:, None]
    return rows[0] if single else rows


def chart_coordinates(z: np.ndarray, chart: int) -> np.ndarray:
    """Affine coordinates z_j / z_chart for j != chart (works on rows)"""
    z = np.asarray(z, dtype=complex)
    others = [j for j in range(z.shape[-1]) if j != chart]
    return z[..., others] / z[..., chart:chart + 1]


def from_chart(w: np.ndarray, chart: int) -> np.ndarray:
    """Unit homogeneous vector with 1 inserted at position chart (works on rows)"""
    w = np.asarray(w, dtype=complex)
    ones = np.ones(w.shape[:-1] + (1,), dtype=complex)
    z = np.concatenate([w[..., :chart], ones, w[..., chart:]], axis=-1)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def complex_to_real(w: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts: (..., n) complex -> (..., 2n) real"""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def real_to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def _embedding_matrix(n: int) -> np.ndarray:
    E = np.zeros((2 * n, n), dtype=complex)
    for a in range(n):
        E[2 * a, a] = 1.0
        E[2 * a + 1, a] = 1j
    return E


def fubini_study_matrix(x: np.ndarray) -> np.ndarray:
    """
    Real matrix of the base form at chart points.

    Args:
        x: Real chart coordinates of shape (2n,) or (N, 2n)

    Returns:
        Antisymmetric matrices of shape (2n, 2n) or (N, 2n, 2n)
    """
    x = np.asarray(x, dtype=float)
    w = real_to_complex(x)
    n = w.shape[-1]
    s = 1.0 + np.sum(np.abs(w) ** 2, axis=-1)
    eye = np.eye(n)
    h = (s[..., None, None] * eye - np.conj(w)[..., :, None] * w[..., None, :]) / (s ** 2)[..., None, None]
    E = _embedding_matrix(n)
    return -np.imag(np.einsum("ia,...ab,jb->...ij", E, h, np.conj(E)))


def volume_density(omega: np.ndarray) -> np.ndarray:
    """Coefficient of ω^n/n! against Lebesgue measure (the Pfaffian, via sqrt(det))"""
    return np.sqrt(np.clip(np.linalg.det(omega), 0.0, None))


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointRepr:
    '''
    A point of a manifold model.

    homogeneous is a unit vector with canonical phase (None on a bare disk),
    disk the complex coordinate of the disk factor (None without one), and
    chart_id the active affine chart of the base.
    '''
    manifold: ManifoldModel
    homogeneous: Optional[np.ndarray] = None
    disk: Optional[complex] = None
    chart_id: Optional[int] = None

    @property
    def chart_coords(self) -> np.ndarray:
        if self.homogeneous is None:
            return np.zeros(0, dtype=complex)
        return chart_coordinates(self.homogeneous, self.chart_id)

    def real_coords(self, chart: Optional[int] = None) -> np.ndarray:
        """Real coordinates in the given (or active) chart, disk factor appended"""
        parts = []
        if self.homogeneous is not None:
            k = self.chart_id if chart is None else chart
            if abs(self.homogeneous[k]) < CHART_TOL:
                raise ChartDegenerate(f"Point lies on the boundary of chart {k}", {"chart": k})
            parts.append(complex_to_real(chart_coordinates(self.homogeneous, k)))
        if self.disk is not None:
            parts.append(np.array([self.disk.real, self.disk.imag]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_chart(self, chart: int) -> "PointRepr":
        return make_point(self.manifold, self.homogeneous, self.disk, chart=chart)

    def to_dict(self) -> dict:
        data: dict = {"chart": self.chart_id}
        if self.homogeneous is not None:
            data["homogeneous"] = [[float(c.real), float(c.imag)] for c in self.homogeneous]
        if self.disk is not None:
            data["disk"] = [float(self.disk.real), float(self.disk.imag)]
        return data

    def __repr__(self) -> str:
        parts = []
        if self.homogeneous is not None:
            parts.append("[" + ":".join(f"{c:.4g}" for c in self.homogeneous) + "]")
        if self.disk is not None:
            parts.append(f"d={self.disk:.4g}")
        return f"PointRepr({', '.join(parts)})"


def make_point(
    m: ManifoldModel,
    homogeneous: Optional[Sequence[complex]] = None,
    disk: Optional[complex] = None,
    chart: Optional[int] = None,
) -> PointRepr:
    """
    Build a validated point of m.

    Args:
        m: Manifold model
        homogeneous: Homogeneous coordinates of the base (any scale and phase)
        disk: Coordinate in the disk factor
        chart: Explicit chart; defaults to the largest coordinate

    Returns:
        PointRepr with canonical phase
    """
    z = None
    if m.toric_base is not None:
        if homogeneous is None or len(homogeneous) != m.n_homogeneous:
            raise DomainViolation(f"{m.label} needs {m.n_homogeneous} homogeneous coordinates")
        z = canonicalize(np.asarray(homogeneous, dtype=complex))
        if m.lambda_sq > 0:
            outside = float(np.sum(np.abs(z[1:]) ** 2))
            if outside < m.lambda_sq - POINT_TOL:
                raise DomainViolation(
                    "Point lies inside the removed ball",
                    {"radius_sq": outside, "lambda_sq": m.lambda_sq},
                )
        if chart is None:
            chart = int(np.argmax(np.abs(z)))
        elif abs(z[chart]) < CHART_TOL:
            raise ChartDegenerate(f"Point lies on the boundary of chart {chart}", {"chart": chart})
    elif homogeneous is not None:
        raise DomainViolation(f"{m.label} has no homogeneous coordinates")

    d = None
    if m.has_disk:
        if disk is None:
            raise DomainViolation(f"{m.label} needs a disk coordinate")
        d = complex(disk)
        if math.pi * abs(d) ** 2 > m.disk_area + POINT_TOL:
            raise DomainViolation("Disk coordinate outside D(a)", {"area": math.pi * abs(d) ** 2})
    return PointRepr(m, z, d, chart)


def point_from_real(m: ManifoldModel, x: np.ndarray, chart: Optional[int]) -> PointRepr:
    """Inverse of PointRepr.real_coords"""
    x = np.asarray(x, dtype=float)
    nb = 2 * m.base_complex_dim
    z = from_chart(real_to_complex(x[:nb]), chart) if m.toric_base is not None else None
    d = complex(x[nb], x[nb + 1]) if m.has_disk else None
    if z is not None:
        z = canonicalize(z)
        new_chart = int(np.argmax(np.abs(z)))
        return PointRepr(m, z, d, new_chart)
    return PointRepr(m, None, d, None)


def _on_exceptional_divisor(m: ManifoldModel, z: np.ndarray) -> bool:
    return m.lambda_sq > 0 and abs(float(np.sum(np.abs(z[1:]) ** 2)) - m.lambda_sq) <= POINT_TOL


def projective_distance(z: np.ndarray, w: np.ndarray) -> float:
    """Distance between phase-aligned unit representatives"""
    overlap = abs(np.vdot(z, w))
    return math.sqrt(max(0.0, 2.0 - 2.0 * overlap))


def distance(p: PointRepr, q: PointRepr) -> float:
    """
    Distance used for point equality and flow comparisons.

    On the exceptional divisor of the blow-up two points are the same when
    their [z1:z2] classes agree.
    """
    total = 0.0
    if p.homogeneous is not None:
        m = p.manifold
        if _on_exceptional_divisor(m, p.homogeneous) and _on_exceptional_divisor(m, q.homogeneous):
            a = p.homogeneous[1:] / np.linalg.norm(p.homogeneous[1:])
            b = q.homogeneous[1:] / np.linalg.norm(q.homogeneous[1:])
            total += (m.toric_base.lam * projective_distance(a, b)) ** 2
        else:
            total += projective_distance(p.homogeneous, q.homogeneous) ** 2
    if p.disk is not None:
        total += abs(p.disk - q.disk) ** 2
    return math.sqrt(total)


def points_equal(p: PointRepr, q: PointRepr, tol: float = POINT_TOL) -> bool:
    return distance(p, q) <= tol


# ---------------------------------------------------------------------------
# Moment map, forms
# ---------------------------------------------------------------------------

def toric_actions(z: np.ndarray) -> np.ndarray:
    """(π/2)|z_i|²/Σ|z|² for all but the last coordinate (works on rows)"""
    z = np.asarray(z, dtype=complex)
    sq = np.abs(z) ** 2
    return HALF_PI * sq[..., :-1] / np.sum(sq, axis=-1, keepdims=True)


def moment_map_rho(p: PointRepr) -> tuple[float, float]:
    """Action coordinates (P, Q) of a point of CP² or its blow-up"""
    base = p.manifold.toric_base
    if base is None or base.kind is ManifoldKind.CP1:
        raise Unsupported(f"Moment map (P, Q) is defined on CP2 and its blow-up, not {p.manifold.label}")
    P, Q = toric_actions(p.homogeneous)
    return float(P), float(Q)


def symplectic_form_matrix(m: ManifoldModel, p: PointRepr, chart: Optional[int] = None) -> np.ndarray:
    """
    Matrix of the symplectic form in the real coordinates of a chart.

    Args:
        m: Manifold model
        p: Point of m
        chart: Chart index; defaults to the point's active chart

    Returns:
        Antisymmetric (2d, 2d) matrix, base block first, disk block last
    """
    blocks = []
    if m.toric_base is not None:
        k = p.chart_id if chart is None else chart
        if abs(p.homogeneous[k]) < CHART_TOL:
            raise ChartDegenerate(f"Point lies on the boundary of chart {k}", {"chart": k})
        x = complex_to_real(chart_coordinates(p.homogeneous, k))
        blocks.append(fubini_study_matrix(x))
    if m.has_disk:
        blocks.append(DISK_FORM)
    return block_form(blocks)


def block_form(blocks: Sequence[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    start = 0
    for b in blocks:
        k = b.shape[0]
        out[start:start + k, start:start + k] = b
        start += k
    return out


def form_at_real(m: ManifoldModel, x: np.ndarray) -> np.ndarray:
    """Form matrix at real chart coordinates x (base chart coordinates then disk)"""
    blocks = []
    nb = 2 * m.base_complex_dim
    if m.toric_base is not None:
        blocks.append(fubini_study_matrix(x[:nb]))
    if m.has_disk:
        blocks.append(DISK_FORM)
    omega = block_form(blocks)
    if abs(np.linalg.det(omega)) < 1e-300:
        raise SingularForm("Form matrix is numerically singular", {"coords": list(map(float, x))})
    return omega


# ---------------------------------------------------------------------------
# Polytopes and volumes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolytopeModel:
    vertices: tuple[tuple[float, float], ...]

    @cached_property
    def hull(self) -> ConvexHull:
        return ConvexHull(np.array(self.vertices))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.vertices)

    @property
    def area(self) -> float:
        v = self.array
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def margins(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to the boundary, positive inside"""
        points = np.atleast_2d(points)
        eq = self.hull.equations
        return -np.max(points @ eq[:, :2].T + eq[:, 2], axis=1)

    def contains(self, points: np.ndarray, margin: float = -1e-12) -> np.ndarray:
        return self.margins(points) >= margin

    def to_rows(self) -> list[dict]:
        return [{"index": i, "x": x, "y": y} for i, (x, y) in enumerate(self.vertices)]


def polytope(m: ManifoldModel) -> PolytopeModel:
    if m.kind is ManifoldKind.CP2:
        return PolytopeModel(((0.0, 0.0), (HALF_PI, 0.0), (0.0, HALF_PI)))
    if m.kind is ManifoldKind.BLOWUP:
        k = 1.0 - m.lam ** 2
        return PolytopeModel(((0.0, 0.0), (HALF_PI * k, 0.0), (HALF_PI * k, HALF_PI * m.lam ** 2), (0.0, HALF_PI)))
    raise Unsupported(f"No moment polytope for {m.label}")


def polytope_area(m: ManifoldModel) -> float:
    return polytope(m).area


def volume(m: ManifoldModel) -> float:
    """Analytic symplectic volume"""
    if m.kind is ManifoldKind.CP1:
        return math.pi
    if m.kind is ManifoldKind.CP2:
        return math.pi ** 2 / 2
    if m.kind is ManifoldKind.BLOWUP:
        return math.pi ** 2 / 2 * (1.0 - m.lam ** 4)
    if m.kind is ManifoldKind.DISK:
        return m.disk_area
    return volume(m.base) * m.disk_area


def _uniform_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random(n)[:, None] ** (1.0 / dim)


def monte_carlo_volume(
    m: ManifoldModel,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 100_000,
) -> tuple[float, float]:
    """
    Independent volume oracle.

    The chart {z0 != 0} covers the base up to a null set. It is pulled back
    to the unit ball by w = x/(1 − |x|²) and the chart volume density is
    integrated against the radial Jacobian.

    Returns:
        (estimate, standard error)
    """
    if m.kind is ManifoldKind.DISK:
        R = m.disk_radius
        pts = rng.uniform(-R, R, size=(n_samples, 2))
        f = (np.sum(pts ** 2, axis=1) <= R * R).astype(float) * 4 * R * R
        return float(f.mean()), float(f.std(ddof=1) / math.sqrt(n_samples))
    if m.kind is ManifoldKind.PRODUCT:
        est, err = monte_carlo_volume(m.base, n_samples, rng, chunk)
        return est * m.disk_area, err * m.disk_area

    n = m.base_complex_dim
    dim = 2 * n
    ball_volume = math.pi ** n / math.factorial(n)
    values = []
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        x = _uniform_ball(rng, size, dim)
        r = np.linalg.norm(x, axis=1)
        rho = r / (1.0 - r ** 2)
        w = x * (1.0 / (1.0 - r ** 2))[:, None]
        density = volume_density(fubini_study_matrix(w))
        jac = (1.0 / (1.0 - r ** 2)) ** (dim - 1) * (1.0 + r ** 2) / (1.0 - r ** 2) ** 2
        f = density * jac
        if m.lambda_sq > 0:
            rho_sq = rho ** 2
            f = f * (rho_sq / (1.0 + rho_sq) >= m.lambda_sq)
        values.append(f)
        remaining -= size
    f = np.concatenate(values) * ball_volume
    logger.debug(f"Monte Carlo volume of {m.label}: {f.mean():.6f} from {n_samples} samples")
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(n_samples))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_homogeneous(m: ManifoldModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform (Liouville) samples of the base in canonical form.

    The blow-up is sampled by rejection, excluding a tube of width
    EXCEPTIONAL_TUBE around the exceptional divisor.
    """
    k = m.n_homogeneous
    if k == 0:
        raise Unsupported(f"{m.label} has no toric base")
    out = []
    count = 0
    while count < n:
        g = rng.standard_normal((max(n - count, 16) * 2, k)) + 1j * rng.standard_normal((max(n - count, 16) * 2, k))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if m.lambda_sq > 0:
            g = g[np.sum(np.abs(g[:, 1:]) ** 2, axis=1) >= m.lambda_sq + EXCEPTIONAL_TUBE]
        out.append(g)
        count += len(g)
    return canonicalize(np.concatenate(out)[:n])


def sample_disk(area: float, n: int, rng: np.random.Generator, shrink: float = 1.0) -> np.ndarray:
    """Uniform samples of D(area), optionally of the concentric disk of area shrink·area"""
    radius = math.sqrt(shrink * area / math.pi)
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * math.pi * rng.random(n)
    return r * np.exp(1j * theta)


def sample_points(m: ManifoldModel, n: int, rng: np.random.Generator) -> list[PointRepr]:
    zs = sample_homogeneous(m, n, rng) if m.toric_base is not None else [None] * n
    ds = sample_disk(m.disk_area, n, rng, shrink=0.999) if m.has_disk else [None] * n
    points = []
    for z, d in zip(zs, ds):
        chart = int(np.argmax(np.abs(z))) if z is not None else None
        points.append(PointRepr(m, z, None if d is None else complex(d), chart))
    return points
