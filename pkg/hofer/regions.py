"""
Graph regions R_H^±(ν/2), quasi-cylinders and the gluing map.

A region lives in M × R_s × [0, 1]_t with the product form ω ⊕ dt∧ds. For
toric Hamiltonians the flows are exact rotations, so membership, volumes
and the gluing map are evaluated without integration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from loguru import logger

from hofer.dynamics import hofer_length, rotate_by_advance, toric_flow_arrays
from hofer.errors import EndpointMismatch, NormalizationFailure
from hofer.geometry import (
    HALF_PI,
    ManifoldKind,
    ManifoldModel,
    PointRepr,
    block_form,
    form_at_real,
    make_point,
    point_from_real,
    polytope,
    sample_disk,
    sample_homogeneous,
    volume,
)
from hofer.hamiltonians import (
    HamiltonianFn,
    action_domain,
    action_extrema,
    actions_of_arrays,
    actions_of_point,
    hamiltonian_from_expression,
)

ENDPOINT_TOL = 1e-6
NORMALIZATION_TOL = 1e-9
TIME_GRID = 65
# ω ⊕ dt∧ds on the (s, t) block
SLAB_FORM = np.array([[0.0, -1.0], [1.0, 0.0]])


class Side(str, Enum):
    BELOW = "Below"
    ABOVE = "Above"


class FormKind(str, Enum):
    SPLIT = "Split"
    GLUED = "Glued"


# ---------------------------------------------------------------------------
# Space-time statistics of toric Hamiltonians
# ---------------------------------------------------------------------------

def action_centroid(m: ManifoldModel) -> np.ndarray:
    """Mean of (P, Q, A) under the Liouville measure (uniform on the action polytope)"""
    out = np.zeros(3)
    base = m.toric_base
    if base is not None:
        if base.kind is ManifoldKind.CP1:
            out[0] = HALF_PI / 2
        else:
            v = polytope(base).array
            x, y = v[:, 0], v[:, 1]
            xn, yn = np.roll(x, -1), np.roll(y, -1)
            cross = x * yn - xn * y
            area = cross.sum() / 2
            out[0] = float(np.sum((x + xn) * cross) / (6 * area))
            out[1] = float(np.sum((y + yn) * cross) / (6 * area))
    if m.has_disk:
        out[2] = m.disk_area / 2
    return out


def _time_grid(H: HamiltonianFn) -> np.ndarray:
    return np.array([0.0]) if H.autonomous else np.linspace(0.0, 1.0, TIME_GRID)


def extreme_profile(H: HamiltonianFn, times, which: str = "max") -> np.ndarray:
    """max_x H_t (or min) at each time; exact at vertices for affine H, interpolated otherwise"""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if H.affine:
        verts = action_domain(H.manifold).vertices
        vals = np.stack([H.evaluate_actions(np.tile(v, (len(times), 1)), times) for v in verts])
        return vals.max(axis=0) if which == "max" else vals.min(axis=0)
    grid = _time_grid(H)
    pick = 1 if which == "max" else 0
    values = np.array([action_extrema(H, float(s))[pick].value for s in grid])
    if len(grid) == 1:
        return np.full(len(times), values[0])
    return np.interp(times, grid, values)


def mean_value(H: HamiltonianFn, n_samples: int = 200_000, seed: int = 0) -> float:
    """Space-time average of H over M × [0, 1]"""
    c = action_centroid(H.manifold)
    if H.affine:
        ts, ws = np.polynomial.legendre.leggauss(16)
        ts = (ts + 1) / 2
        return float(np.dot(ws / 2, H.evaluate_actions(np.tile(c, (len(ts), 1)), ts)))
    rng = np.random.default_rng(seed)
    acts = _sample_actions(H.manifold, n_samples, rng)
    return float(np.mean(H.evaluate_actions(acts, rng.random(n_samples))))


def _sample_arrays(m: ManifoldModel, n: int, rng: np.random.Generator):
    z = sample_homogeneous(m, n, rng) if m.toric_base is not None else None
    d = sample_disk(m.disk_area, n, rng) if m.has_disk else None
    return z, d


def _sample_actions(m: ManifoldModel, n: int, rng: np.random.Generator) -> np.ndarray:
    z, d = _sample_arrays(m, n, rng)
    return actions_of_arrays(m, z, d)


def check_normalized(H: HamiltonianFn) -> HamiltonianFn:
    """
    Return H shifted so that min_x H_t = 0 for every t.

    Raises:
        NormalizationFailure: the minimum cannot be located
    """
    grid = _time_grid(H)
    mins = extreme_profile(H, grid, "min")
    if not np.all(np.isfinite(mins)):
        raise NormalizationFailure(f"Cannot locate the minimum of {H.name}", {"times": grid.tolist()})
    if np.max(np.abs(mins)) <= NORMALIZATION_TOL:
        return H
    logger.debug(f"Shifting {H.name} by its per-time minimum (max shift {np.max(np.abs(mins)):.3g})")
    if len(grid) == 1:
        shift = float(mins[0])
        return H.shifted(lambda t: shift)
    if H.affine:
        return H.shifted(lambda t: extreme_profile(H, t, "min").reshape(np.shape(t)))
    return H.shifted(lambda t: np.interp(t, grid, mins))


# ---------------------------------------------------------------------------
# Graph regions
# ---------------------------------------------------------------------------

@dataclass
class GraphRegion:
    '''
    R_H^−(ν/2) = {ℓ ≤ s ≤ H_t(x)} or R_H^+(ν/2) = {H_t(x) ≤ s ≤ μ_H(t)}.

    Profiles are ℓ ≡ −ν/2 and μ_H(t) = max_x H_t + ν/2.
    '''
    base: ManifoldModel
    H: HamiltonianFn
    side: Side
    nu: float
    h_inf: float
    length: float

    @property
    def nu_half(self) -> float:
        return self.nu / 2

    def ell(self, t) -> np.ndarray:
        return np.full(np.shape(t), -self.nu_half, dtype=float)

    def mu(self, t) -> np.ndarray:
        return extreme_profile(self.H, t, "max").reshape(np.shape(t)) + self.nu_half

    def bounds(self, acts: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper s-bounds of the fibre over (x, t)"""
        t = np.broadcast_to(np.asarray(t, dtype=float), np.atleast_2d(acts).shape[:1])
        h = self.H.evaluate_actions(acts, t)
        if self.side is Side.BELOW:
            return self.ell(t), h
        return h, self.mu(t)

    def margins(self, acts: np.ndarray, s, t) -> np.ndarray:
        """Signed distance to the boundary in the (s, t) directions, positive inside"""
        lo, hi = self.bounds(acts, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.minimum.reduce([s - lo, hi - s, t, 1.0 - t])

    def contains_arrays(self, acts: np.ndarray, s, t, tol: float = 0.0) -> np.ndarray:
        return self.margins(acts, s, t) >= -tol

    def contains(self, p: PointRepr, s: float, t: float, tol: float = 0.0) -> bool:
        return bool(self.contains_arrays(actions_of_point(p), s, t, tol)[0])

    def volume(self) -> float:
        """vol(M)·∫∫(upper − lower); exact for affine H"""
        vol_m = volume(self.base)
        mean_h = mean_value(self.H)
        if self.side is Side.BELOW:
            return vol_m * (mean_h + self.nu_half)
        ts, ws = np.polynomial.legendre.leggauss(16)
        mean_mu = float(np.dot(ws / 2, self.mu((ts + 1) / 2)))
        return vol_m * (mean_mu - mean_h)

    def monte_carlo_volume(self, n_samples: int = 200_000, seed: int = 0) -> tuple[float, float]:
        """Liouville-sampled fibre lengths; returns (volume, standard error)"""
        rng = np.random.default_rng(seed)
        acts = _sample_actions(self.base, n_samples, rng)
        t = rng.random(n_samples)
        lo, hi = self.bounds(acts, t)
        fibre = np.maximum(hi - lo, 0.0)
        vol_m = volume(self.base)
        return vol_m * float(fibre.mean()), vol_m * float(fibre.std(ddof=1)) / math.sqrt(n_samples)

    def summary(self) -> dict:
        return {
            "hamiltonian": self.H.name,
            "manifold": self.base.label,
            "side": self.side.value,
            "length": self.length,
            "nu": self.nu,
            "volume": self.volume(),
        }


def _region(H: HamiltonianFn, nu: float, side: Side) -> GraphRegion:
    if nu <= 0:
        raise NormalizationFailure(f"ν must be positive, got {nu}")
    Hn = check_normalized(H)
    grid = _time_grid(Hn)
    h_inf = float(np.max(extreme_profile(Hn, grid, "max")))
    length = hofer_length(Hn).value
    return GraphRegion(Hn.manifold, Hn, side, nu, h_inf, length)


def region_below(H: HamiltonianFn, nu: float) -> GraphRegion:
    """R_H^−(ν/2), H shifted to per-time minimum 0"""
    return _region(H, nu, Side.BELOW)


def region_above(H: HamiltonianFn, nu: float) -> GraphRegion:
    """R_H^+(ν/2), H shifted to per-time minimum 0"""
    return _region(H, nu, Side.ABOVE)


# ---------------------------------------------------------------------------
# Quasi-cylinders and gluing
# ---------------------------------------------------------------------------

@dataclass
class AreaEstimate:
    value: float
    stderr: float
    method: str
    volume: float
    volume_stderr: float
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "area": self.value,
            "stderr": self.stderr,
            "method": self.method,
            "volume": self.volume,
            "volume_stderr": self.volume_stderr,
            "samples": self.samples,
        }


@dataclass
class QuasiCylinder:
    '''
    R_{H,K}(ν) = R_H^−(ν/2) ∪ g(R_K^+(ν/2)), or a split M × D(a).

    For the split product only base and disk_area are set.
    '''
    base: ManifoldModel
    disk_area: Optional[float]
    form_kind: FormKind
    nu: float = 0.0
    lower: Optional[GraphRegion] = None
    upper: Optional[GraphRegion] = None
    endpoint_error: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def H(self) -> Optional[HamiltonianFn]:
        return None if self.lower is None else self.lower.H

    @property
    def K(self) -> Optional[HamiltonianFn]:
        return None if self.upper is None else self.upper.H

    @property
    def is_product(self) -> bool:
        return self.lower is None

    # -- the gluing map ------------------------------------------------------

    def psi_arrays(self, z, d, t, inverse: bool = False):
        """ψ_t = φ^H_t ∘ (φ^K_t)^{-1} (or its inverse) on arrays, one time per point"""
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(z) if z is not None else len(d),))
        acts = actions_of_arrays(self.base, z, d)
        adv = self.H.angle_advance_at(acts, t) - self.K.angle_advance_at(acts, t)
        return rotate_by_advance(z, d, -adv if inverse else adv)

    def glue_map(self, p: PointRepr, s: float, t: float) -> tuple[PointRepr, float, float]:
        """g(x, s, t) = (ψ_t x, s − K_t(x) + H_t(ψ_t x), t)"""
        if self.is_product:
            return p, s, t
        z = None if p.homogeneous is None else p.homogeneous[None, :]
        d = None if p.disk is None else np.array([p.disk])
        z_out, d_out = self.psi_arrays(z, d, t)
        q = make_point(self.base, None if z_out is None else z_out[0], None if d_out is None else complex(d_out[0]))
        s_new = s - self.K.evaluate(p, t) + self.H.evaluate(q, t)
        return q, s_new, t

    def glue_map_real(self, x: np.ndarray, chart: Optional[int], out_chart: Optional[int]) -> np.ndarray:
        """g in real coordinates (chart coordinates, s, t)"""
        p = point_from_real(self.base, x[:-2], chart)
        q, s, t = self.glue_map(p, float(x[-2]), float(x[-1]))
        return np.concatenate([q.real_coords(out_chart), [s, t]])

    def glue_pullback_residual(self, p: PointRepr, s: float, t: float, h: float = 1e-6) -> float:
        """‖Jᵀ Ω J − Ω‖ for the central-difference Jacobian of g at (p, s, t)"""
        q, _, _ = self.glue_map(p, s, t)
        c_in, c_out = p.chart_id, q.chart_id
        x = np.concatenate([p.real_coords(c_in), [s, t]])
        J = np.zeros((len(x), len(x)))
        for i in range(len(x)):
            step = np.zeros_like(x)
            step[i] = h
            J[:, i] = (self.glue_map_real(x + step, c_in, c_out) - self.glue_map_real(x - step, c_in, c_out)) / (2 * h)
        y = self.glue_map_real(x, c_in, c_out)
        omega_in = block_form([form_at_real(self.base, x[:-2]), SLAB_FORM])
        omega_out = block_form([form_at_real(self.base, y[:-2]), SLAB_FORM])
        return float(np.max(np.abs(J.T @ omega_out @ J - omega_in)))

    # -- membership and volume -----------------------------------------------

    def upper_bound(self, acts_y: np.ndarray, acts_x: np.ndarray, t) -> np.ndarray:
        if self.is_product:
            raise NormalizationFailure("A split product has no graph profile")
        mu_k = self.upper.mu(t)
        return mu_k - self.K.evaluate_actions(acts_x, t) + self.H.evaluate_actions(acts_y, t)

    def contains_arrays(self, z, d, s, t) -> np.ndarray:
        """Membership of (y, s, t) with y given by arrays"""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        acts_y = actions_of_arrays(self.base, z, d)
        zx, dx = self.psi_arrays(z, d, t, inverse=True)
        acts_x = actions_of_arrays(self.base, zx, dx)
        lower = self.lower.ell(t)
        return (s >= lower) & (s <= self.upper_bound(acts_y, acts_x, t)) & (t >= 0) & (t <= 1)

    def contains(self, p: PointRepr, s: float, t: float) -> bool:
        z = None if p.homogeneous is None else p.homogeneous[None, :]
        d = None if p.disk is None else np.array([p.disk])
        return bool(self.contains_arrays(z, d, np.array([s]), np.array([t]))[0])

    def slab(self) -> tuple[float, float]:
        lo = -self.lower.nu_half
        hi = float(np.max(self.upper.mu(_time_grid(self.K)))) + self.lower.h_inf
        return lo, hi

    def analytic_volume(self) -> float:
        if self.is_product:
            return self.disk_area * volume(self.base)
        if self.form_kind is FormKind.SPLIT:
            return volume(self.base) * (self.upper.length + self.nu)
        return self.lower.volume() + self.upper.volume()

    def analytic_area(self) -> float:
        if self.is_product:
            return self.disk_area
        if self.form_kind is FormKind.SPLIT:
            return self.upper.length + self.nu
        return self.analytic_volume() / volume(self.base)

    def monte_carlo_volume(self, n_samples: int, seed: int = 0, chunk: int = 200_000) -> tuple[float, float]:
        """Rejection estimate over M × [s_lo, s_hi] × [0, 1] with its standard error"""
        rng = np.random.default_rng(seed)
        lo, hi = self.slab()
        hits = 0
        remaining = n_samples
        while remaining > 0:
            size = min(chunk, remaining)
            z, d = _sample_arrays(self.base, size, rng)
            t = rng.random(size)
            s = rng.uniform(lo, hi, size)
            hits += int(np.count_nonzero(self.contains_arrays(z, d, s, t)))
            remaining -= size
        p = hits / n_samples
        box = volume(self.base) * (hi - lo)
        return box * p, box * math.sqrt(p * (1 - p) / n_samples)

    def summary(self) -> dict:
        data = {"manifold": self.base.label, "form": self.form_kind.value, "nu": self.nu}
        if self.is_product:
            data["area"] = self.disk_area
        else:
            data.update({"H": self.H.name, "K": self.K.name, "length_H": self.lower.length,
                         "length_K": self.upper.length, "endpoint_error": self.endpoint_error})
        return data


def split_product(m: ManifoldModel, a: float) -> QuasiCylinder:
    return QuasiCylinder(m, a, FormKind.SPLIT)


def endpoint_error(H: HamiltonianFn, K: HamiltonianFn, samples: int = 1000, seed: int = 0) -> float:
    """max distance between φ^H_1 and φ^K_1 over sampled points"""
    rng = np.random.default_rng(seed)
    z, d = _sample_arrays(H.manifold, samples, rng)
    zh, dh = toric_flow_arrays(H, z, d, 1.0)
    zk, dk = toric_flow_arrays(K, z, d, 1.0)
    err = np.zeros(samples)
    if z is not None:
        overlap = np.abs(np.sum(np.conj(zh) * zk, axis=1))
        err += np.maximum(0.0, 2.0 - 2.0 * overlap)
    if d is not None:
        err += np.abs(dh - dk) ** 2
    return float(np.sqrt(err.max()))


def glue(H: HamiltonianFn, K: HamiltonianFn, nu: float, samples: int = 1000, seed: int = 0) -> QuasiCylinder:
    """
    R_{H,K}(ν) with the gluing map g.

    Raises:
        EndpointMismatch: φ^H_1 and φ^K_1 differ at a sampled point
    """
    lower = region_below(H, nu)
    upper = region_above(K, nu)
    err = endpoint_error(lower.H, upper.H, samples, seed)
    if err > ENDPOINT_TOL:
        raise EndpointMismatch(
            f"Time-one maps of {H.name} and {K.name} differ by {err:.3e}",
            {"error": err, "samples": samples},
        )
    kind = FormKind.SPLIT if K is H else FormKind.GLUED
    return QuasiCylinder(H.manifold, None, kind, nu, lower, upper, err)


def region_area(region, n_samples: int = 0, seed: int = 0) -> AreaEstimate:
    """
    Area of a quasi-cylinder: volume divided by vol(base).

    Split regions are exact. Glued regions are estimated by Monte Carlo
    when n_samples > 0, otherwise evaluated from space-time means.
    """
    if isinstance(region, GraphRegion):
        vol = region.volume()
        return AreaEstimate(vol / volume(region.base), 0.0, "analytic", vol, 0.0)
    vol_m = volume(region.base)
    if region.is_product or (region.form_kind is FormKind.SPLIT and n_samples == 0):
        return AreaEstimate(region.analytic_area(), 0.0, "analytic", region.analytic_volume(), 0.0)
    if n_samples == 0:
        vol = region.analytic_volume()
        return AreaEstimate(vol / vol_m, 0.0, "means", vol, 0.0)
    vol, err = region.monte_carlo_volume(n_samples, seed)
    return AreaEstimate(vol / vol_m, err / vol_m, "monte-carlo", vol, err, n_samples)


@dataclass
class GluingIdentityReport:
    length_H: float
    length_K: float
    nu: float
    lhs: float
    lhs_stderr: float
    rhs: float
    area_HK: float
    area_KH: float
    holds: bool
    consequence_applies: bool
    consequence_holds: Optional[bool]
    samples: int

    def to_dict(self) -> dict:
        return {
            "length_H": self.length_H,
            "length_K": self.length_K,
            "nu": self.nu,
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "area_HK": self.area_HK,
            "area_KH": self.area_KH,
            "holds": self.holds,
            "consequence_applies": self.consequence_applies,
            "consequence_holds": self.consequence_holds,
            "samples": self.samples,
        }


def gluing_identity(H: HamiltonianFn, K: HamiltonianFn, nu: float, n_samples: int = 1_000_000, seed: int = 0) -> GluingIdentityReport:
    """
    vol R_{H,K}(ν) + vol R_{K,H}(ν) = vol R_H(ν) + vol R_K(ν).

    The left side is estimated by Monte Carlo, the right side is exact.
    When L(K) + 2ν < L(H) also checks that one of the glued cylinders has
    area below L(H).
    """
    hk = glue(H, K, nu, seed=seed)
    kh = glue(K, H, nu, seed=seed)
    v_hk, e_hk = hk.monte_carlo_volume(n_samples, seed)
    v_kh, e_kh = kh.monte_carlo_volume(n_samples, seed + 1)
    vol_m = volume(H.manifold)
    L_H, L_K = hk.lower.length, hk.upper.length
    rhs = vol_m * (L_H + nu) + vol_m * (L_K + nu)
    lhs = v_hk + v_kh
    stderr = math.hypot(e_hk, e_kh)
    holds = abs(lhs - rhs) <= 3 * stderr + 1e-12
    applies = L_K + 2 * nu < L_H
    consequence = None
    if applies:
        consequence = min(v_hk + 3 * e_hk, v_kh + 3 * e_kh) / vol_m < L_H
    logger.info(f"Gluing identity: lhs={lhs:.6f} ± {stderr:.2e}, rhs={rhs:.6f}, holds={holds}")
    return GluingIdentityReport(L_H, L_K, nu, lhs, stderr, rhs, v_hk / vol_m, v_kh / vol_m,
                                holds, applies, consequence, n_samples)


def synthetic_pair(m: ManifoldModel):
    """H = 5P and K = π/2 − P: same time-one map, L(K) = π/2 < L(H) = 5π/2"""
    return (hamiltonian_from_expression(m, "5*P", name="5P"),
            hamiltonian_from_expression(m, f"{HALF_PI!r} - P", name="pi/2-P"))
