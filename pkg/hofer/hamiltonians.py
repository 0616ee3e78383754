"""
Toric Hamiltonians H = f(P, Q, A, t).

P and Q are the moment-map coordinates of the base, A = π|d|² is the area
coordinate of a disk factor. Every Hamiltonian here Poisson-commutes with
the torus action, so actions are conserved and flows are rotations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp
from loguru import logger
from scipy import integrate, optimize
from scipy.stats import qmc
from sympy.parsing.sympy_parser import (
    implicit_multiplication_application,
    parse_expr,
    standard_transformations,
)

from hofer.errors import ConfigError, NormalizationFailure, Unsupported
from hofer.geometry import (
    HALF_PI,
    ManifoldKind,
    ManifoldModel,
    PointRepr,
    polytope,
    real_to_complex,
)

SYMBOLS = {name: sp.Symbol(name, real=True) for name in ("P", "Q", "A", "t")}
ACTION_SYMBOLS = (SYMBOLS["P"], SYMBOLS["Q"], SYMBOLS["A"])
_TRANSFORMS = standard_transformations + (implicit_multiplication_application,)

Profile = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
Gradient = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], tuple]


def _broadcast(value, like: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), np.shape(like)).astype(float)


# ---------------------------------------------------------------------------
# Action coordinates
# ---------------------------------------------------------------------------

def actions_of_point(p: PointRepr) -> np.ndarray:
    """(P, Q, A) of a point; missing coordinates are 0"""
    out = np.zeros(3)
    if p.homogeneous is not None:
        sq = np.abs(p.homogeneous) ** 2
        out[0] = HALF_PI * sq[0] / sq.sum()
        if len(sq) == 3:
            out[1] = HALF_PI * sq[1] / sq.sum()
    if p.disk is not None:
        out[2] = math.pi * abs(p.disk) ** 2
    return out


def actions_of_arrays(m: ManifoldModel, z: Optional[np.ndarray], d: Optional[np.ndarray]) -> np.ndarray:
    """Vectorized (P, Q, A) for N points, shape (N, 3)"""
    n = len(z) if z is not None else len(d)
    out = np.zeros((n, 3))
    if z is not None:
        sq = np.abs(z) ** 2
        total = sq.sum(axis=1)
        out[:, 0] = HALF_PI * sq[:, 0] / total
        if sq.shape[1] == 3:
            out[:, 1] = HALF_PI * sq[:, 1] / total
    if d is not None:
        out[:, 2] = math.pi * np.abs(d) ** 2
    return out


def actions_and_jacobian(m: ManifoldModel, x: np.ndarray, chart: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    """
    Actions at real chart coordinates and their derivatives.

    For u the homogeneous vector with 1 in slot chart and m_j = (π/2)|u_j|²/|u|²,
    ∂m_j/∂Re w_a = 2 Re w_a ((π/2)δ_{j,i_a} − m_j)/|u|², likewise for Im.

    Returns:
        (actions of shape (3,), jacobian of shape (3, len(x)))
    """
    acts = np.zeros(3)
    jac = np.zeros((3, len(x)))
    nb = 2 * m.base_complex_dim
    if m.toric_base is not None:
        w = real_to_complex(x[:nb])
        k = m.n_homogeneous
        slots = [j for j in range(k) if j != chart]
        u_sq = np.ones(k)
        u_sq[slots] = np.abs(w) ** 2
        norm_sq = u_sq.sum()
        n_act = 2 if k == 3 else 1
        for j in range(n_act):
            mj = HALF_PI * u_sq[j] / norm_sq
            acts[j] = mj
            for a, slot in enumerate(slots):
                factor = (HALF_PI * (slot == j) - mj) / norm_sq
                jac[j, 2 * a] = 2 * x[2 * a] * factor
                jac[j, 2 * a + 1] = 2 * x[2 * a + 1] * factor
    if m.has_disk:
        dx, dy = x[nb], x[nb + 1]
        acts[2] = math.pi * (dx * dx + dy * dy)
        jac[2, nb] = 2 * math.pi * dx
        jac[2, nb + 1] = 2 * math.pi * dy
    return acts, jac


@dataclass(frozen=True)
class ActionDomain:
    '''Image of a manifold in (P, Q, A) space: a convex polytope'''
    vertices: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    active: tuple[bool, bool, bool]

    @property
    def lower(self) -> np.ndarray:
        return self.vertices.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.vertices.max(axis=0)

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return np.all(np.atleast_2d(pts) @ self.A_ub.T <= self.b_ub + tol, axis=1)


def action_domain(m: ManifoldModel) -> ActionDomain:
    base = m.toric_base
    rows, rhs, verts2 = [], [], []
    if base is None:
        verts2 = [(0.0, 0.0)]
    elif base.kind is ManifoldKind.CP1:
        verts2 = [(0.0, 0.0), (HALF_PI, 0.0)]
        rows += [[-1, 0, 0], [1, 0, 0]]
        rhs += [0.0, HALF_PI]
    else:
        poly = polytope(base)
        verts2 = list(poly.vertices)
        for a, b, c in poly.hull.equations:
            rows.append([a, b, 0.0])
            rhs.append(-c)
    a_vals = [0.0, m.disk_area] if m.has_disk else [0.0]
    if m.has_disk:
        rows += [[0, 0, -1], [0, 0, 1]]
        rhs += [0.0, m.disk_area]
    vertices = np.array([(p, q, a) for (p, q) in verts2 for a in a_vals], dtype=float)
    active = (base is not None, base is not None and base.kind is not ManifoldKind.CP1, m.has_disk)
    A_ub = np.array(rows, dtype=float).reshape(-1, 3)
    return ActionDomain(vertices, A_ub, np.array(rhs, dtype=float), active)


# ---------------------------------------------------------------------------
# Hamiltonian functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HamiltonianFn:
    '''
    A toric Hamiltonian f(P, Q, A, t) on a manifold model.

    profile and gradient act on numpy arrays; gradient returns the partial
    derivatives with respect to P, Q and A.
    '''
    manifold: ManifoldModel
    name: str
    profile: Profile
    gradient: Gradient
    autonomous: bool = True
    affine: bool = False
    expression: Optional[str] = None
    meta: dict = field(default_factory=dict, compare=False)

    def evaluate_actions(self, acts: np.ndarray, t=0.0) -> np.ndarray:
        acts = np.atleast_2d(acts)
        tt = np.broadcast_to(np.asarray(t, dtype=float), acts.shape[:1])
        return _broadcast(self.profile(acts[:, 0], acts[:, 1], acts[:, 2], tt), tt)

    def gradient_actions(self, acts: np.ndarray, t=0.0) -> np.ndarray:
        acts = np.atleast_2d(acts)
        tt = np.broadcast_to(np.asarray(t, dtype=float), acts.shape[:1])
        parts = self.gradient(acts[:, 0], acts[:, 1], acts[:, 2], tt)
        return np.stack([_broadcast(g, tt) for g in parts], axis=1)

    def evaluate(self, p: PointRepr, t: float = 0.0) -> float:
        return float(self.evaluate_actions(actions_of_point(p), t)[0])

    def value_real(self, x: np.ndarray, chart: Optional[int], t: float = 0.0) -> float:
        acts, _ = actions_and_jacobian(self.manifold, x, chart)
        return float(self.evaluate_actions(acts, t)[0])

    def differential_real(self, x: np.ndarray, chart: Optional[int], t: float = 0.0) -> np.ndarray:
        acts, jac = actions_and_jacobian(self.manifold, x, chart)
        return self.gradient_actions(acts, t)[0] @ jac

    def differential(self, p: PointRepr, t: float = 0.0, chart: Optional[int] = None) -> np.ndarray:
        """Covector dH in the real coordinates of the given (or active) chart"""
        k = p.chart_id if chart is None else chart
        return self.differential_real(p.real_coords(k), k, t)

    def angle_advance(self, acts: np.ndarray, t: float) -> np.ndarray:
        """Time integrals of ∂f/∂(P, Q, A) from 0 to t at fixed actions, shape (N, 3)"""
        acts = np.atleast_2d(acts)
        if self.autonomous:
            return self.gradient_actions(acts, 0.0) * t
        if t == 0:
            return np.zeros_like(acts)
        value, _ = integrate.quad_vec(lambda s: self.gradient_actions(acts, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
        return value

    def angle_advance_at(self, acts: np.ndarray, times: np.ndarray, nodes: int = 32) -> np.ndarray:
        """angle_advance with one time per row (Gauss-Legendre for time-dependent H)"""
        acts = np.atleast_2d(acts)
        times = np.broadcast_to(np.asarray(times, dtype=float).reshape(-1), acts.shape[:1])
        if self.autonomous:
            return self.gradient_actions(acts, 0.0) * times[:, None]
        xs, ws = np.polynomial.legendre.leggauss(nodes)
        total = np.zeros_like(acts, dtype=float)
        for x, w in zip(xs, ws):
            total += w * self.gradient_actions(acts, times * (x + 1) / 2)
        return total * (times / 2)[:, None]

    def scaled(self, c: float, name: Optional[str] = None) -> "HamiltonianFn":
        prof, grad = self.profile, self.gradient
        return replace(
            self,
            name=name or f"{c:g}*{self.name}",
            profile=lambda P, Q, A, t: c * prof(P, Q, A, t),
            gradient=lambda P, Q, A, t: tuple(c * g for g in grad(P, Q, A, t)),
            expression=None if self.expression is None else f"{c!r}*({self.expression})",
            meta={k: c * v if k in ("slope", "max") else v for k, v in self.meta.items()},
        )

    def shifted(self, offset: Callable[[np.ndarray], np.ndarray], name: Optional[str] = None) -> "HamiltonianFn":
        """H_t − offset(t); the gradient is unchanged"""
        prof = self.profile
        return replace(
            self,
            name=name or self.name,
            profile=lambda P, Q, A, t: prof(P, Q, A, t) - offset(t),
            expression=None,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "manifold": self.manifold.label,
            "autonomous": self.autonomous,
            "expression": self.expression,
        }


def parse_expression(text: str) -> sp.Expr:
    """Parse an expression in P, Q, A, t; implicit products like '2P' are allowed"""
    try:
        expr = parse_expr(text, local_dict=dict(SYMBOLS), transformations=_TRANSFORMS)
    except Exception as e:
        raise ConfigError(f"Cannot parse Hamiltonian expression {text!r}: {e}") from e
    unknown = expr.free_symbols - set(SYMBOLS.values())
    if unknown:
        raise ConfigError(f"Unknown symbols in {text!r}: {sorted(map(str, unknown))}")
    return expr


def hamiltonian_from_expression(m: ManifoldModel, text: str, name: Optional[str] = None) -> HamiltonianFn:
    expr = parse_expression(text)
    used = {str(s) for s in expr.free_symbols}
    dom = action_domain(m)
    for sym, is_active in zip("PQA", dom.active):
        if sym in used and not is_active:
            raise Unsupported(f"Symbol {sym} is not defined on {m.label}")
    args = (*ACTION_SYMBOLS, SYMBOLS["t"])
    f = sp.lambdify(args, expr, modules="numpy")
    partials = [sp.lambdify(args, sp.diff(expr, s), modules="numpy") for s in ACTION_SYMBOLS]
    affine = all(sp.simplify(sp.diff(expr, a, b)) == 0 for a in ACTION_SYMBOLS for b in ACTION_SYMBOLS)
    logger.debug(f"Parsed Hamiltonian {text!r} -> {expr} (affine={affine})")
    return HamiltonianFn(
        manifold=m,
        name=name or text.replace(" ", ""),
        profile=f,
        gradient=lambda P, Q, A, t: tuple(g(P, Q, A, t) for g in partials),
        autonomous=SYMBOLS["t"] not in expr.free_symbols,
        affine=affine,
        expression=str(expr),
    )


def hamiltonian_P(m: ManifoldModel) -> HamiltonianFn:
    return hamiltonian_from_expression(m, "P", name="P")


def hamiltonian_Q(m: ManifoldModel) -> HamiltonianFn:
    return hamiltonian_from_expression(m, "Q", name="Q")


def zero_hamiltonian(m: ManifoldModel) -> HamiltonianFn:
    return hamiltonian_from_expression(m, "0", name="0")


def reparametrized(H: HamiltonianFn, c: float = 0.5, name: Optional[str] = None) -> HamiltonianFn:
    """
    K_t = f'(t)·H with f(t) = t + c·sin(2πt)/(2π).

    f(0) = 0, f(1) = 1 and f' > 0 for |c| < 1, so the flow of K traces the
    flow of H at the reparametrized time f(t).
    """
    if not H.autonomous:
        raise Unsupported("Reparametrization is defined for autonomous Hamiltonians")
    if not abs(c) < 1:
        raise ConfigError(f"Reparametrization strength must satisfy |c| < 1, got {c}")
    prof, grad = H.profile, H.gradient

    def speed(t):
        return 1.0 + c * np.cos(2 * np.pi * t)

    return replace(
        H,
        name=name or f"{H.name}@f",
        profile=lambda P, Q, A, t: speed(t) * prof(P, Q, A, t),
        gradient=lambda P, Q, A, t: tuple(speed(t) * g for g in grad(P, Q, A, t)),
        autonomous=False,
        expression=None,
        meta={"reparametrized": H.name, "strength": c},
    )


def reparametrized_time(c: float, t):
    return t + c * np.sin(2 * np.pi * t) / (2 * np.pi)


# ---------------------------------------------------------------------------
# Radial bump Hamiltonians on a disk factor
# ---------------------------------------------------------------------------

def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return 3 * x ** 2 - 2 * x ** 3


def _smoothstep_integral(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 - x ** 4 / 2


def radial_bump(m: ManifoldModel, slope: float, slack: float = 0.03) -> HamiltonianFn:
    """
    H = slope·G(A) on a disk factor of area a.

    G vanishes for A < w, has G' = 1 on [2w, a − 2w] with smoothstep ramps
    and is constant a − 3w for A > a − w, where w = a·slack/3. Non-constant
    orbits at level A have period 1/(slope·G'(A)) >= 1/slope.
    """
    if not m.has_disk:
        raise Unsupported(f"Radial bump needs a disk factor, got {m.label}")
    if not 0 < slack <= 0.75:
        raise ConfigError(f"Bump slack must lie in (0, 0.75], got {slack}")
    a = m.disk_area
    w = a * slack / 3

    def G(A):
        A = np.asarray(A, dtype=float)
        return np.select(
            [A < w, A < 2 * w, A < a - 2 * w, A < a - w],
            [
                0.0 * A,
                w * _smoothstep_integral((A - w) / w),
                w / 2 + (A - 2 * w),
                w / 2 + (a - 4 * w) + w * (0.5 - _smoothstep_integral((a - w - A) / w)),
            ],
            default=a - 3 * w,
        )

    def dG(A):
        A = np.asarray(A, dtype=float)
        return np.select(
            [A < w, A < 2 * w, A < a - 2 * w, A < a - w],
            [0.0 * A, _smoothstep((A - w) / w), 1.0 + 0.0 * A, _smoothstep((a - w - A) / w)],
            default=0.0,
        )

    zero = lambda P, Q, A, t: np.zeros_like(np.asarray(A, dtype=float))
    return HamiltonianFn(
        manifold=m,
        name=f"bump(slope={slope:g})",
        profile=lambda P, Q, A, t: slope * G(A),
        gradient=lambda P, Q, A, t: (zero(P, Q, A, t), zero(P, Q, A, t), slope * dG(A)),
        autonomous=True,
        meta={"slope": slope, "slack": slack, "width": w, "max": slope * (a - 3 * w)},
    )


# ---------------------------------------------------------------------------
# Extrema over the action domain
# ---------------------------------------------------------------------------

@dataclass
class Extremum:
    value: float
    actions: np.ndarray
    refined: bool
    gap: float = 0.0


def _refine(H: HamiltonianFn, dom: ActionDomain, start: np.ndarray, t: float, sign: float) -> np.ndarray:
    idx = [i for i, on in enumerate(dom.active) if on]
    if not idx:
        return start

    def embed(y):
        full = start.copy()
        full[idx] = y
        return full

    def objective(y):
        return sign * float(H.evaluate_actions(embed(y), t)[0])

    def jac(y):
        return sign * H.gradient_actions(embed(y), t)[0][idx]

    cons = {
        "type": "ineq",
        "fun": lambda y: dom.b_ub - dom.A_ub @ embed(y),
        "jac": lambda y: -dom.A_ub[:, idx],
    }
    res = optimize.minimize(objective, start[idx], jac=jac, constraints=[cons], method="SLSQP",
                            options={"ftol": 1e-14, "maxiter": 200})
    candidate = embed(res.x)
    if not dom.contains(candidate, tol=1e-10)[0]:
        return start
    return candidate


def action_extrema(
    H: HamiltonianFn,
    t: float = 0.0,
    samples: int = 256,
    seed: int = 0,
    candidates: Optional[np.ndarray] = None,
) -> tuple[Extremum, Extremum]:
    """
    Minimum and maximum of H_t over the manifold.

    Affine profiles attain both at vertices of the action domain. Otherwise
    quasi-random samples (or the given candidate actions) seed an SLSQP
    ascent/descent inside the domain.

    Returns:
        (minimum, maximum)
    """
    dom = action_domain(H.manifold)
    if H.affine:
        vals = H.evaluate_actions(dom.vertices, t)
        i, j = int(np.argmin(vals)), int(np.argmax(vals))
        return (Extremum(float(vals[i]), dom.vertices[i], True),
                Extremum(float(vals[j]), dom.vertices[j], True))
    if candidates is None:
        candidates = sample_action_domain(dom, samples, seed)
    candidates = np.vstack([candidates, dom.vertices])
    vals = H.evaluate_actions(candidates, t)
    i, j = int(np.argmin(vals)), int(np.argmax(vals))
    lo = _refine(H, dom, candidates[i], t, 1.0)
    hi = _refine(H, dom, candidates[j], t, -1.0)
    lo_val = min(float(H.evaluate_actions(lo, t)[0]), float(vals[i]))
    hi_val = max(float(H.evaluate_actions(hi, t)[0]), float(vals[j]))
    if not (np.isfinite(lo_val) and np.isfinite(hi_val)):
        raise NormalizationFailure(f"Extrema of {H.name} at t={t} are not finite")
    return (Extremum(lo_val, lo, True, float(vals[i]) - lo_val),
            Extremum(hi_val, hi, True, hi_val - float(vals[j])))


def sample_action_domain(dom: ActionDomain, n: int, seed: int = 0) -> np.ndarray:
    """Sobol points of the bounding box filtered to the action domain"""
    lo, hi = dom.lower, dom.upper
    sampler = qmc.Sobol(d=3, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(4 * n, 2))))
    pts = qmc.scale(sampler.random_base2(m), lo, np.where(hi > lo, hi, lo + 1e-300))
    pts = pts[dom.contains(pts)]
    return pts[:n] if len(pts) else dom.vertices


def normalized(H: HamiltonianFn, samples: int = 256) -> HamiltonianFn:
    """Shift H so that min_x H_t(x) = 0 for every t"""
    if H.autonomous:
        lo, _ = action_extrema(H, 0.0, samples)
        shift = lo.value
        if abs(shift) < 1e-15:
            return H
        return H.shifted(lambda t: shift)

    def per_time(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        mins = np.array([action_extrema(H, float(s), samples)[0].value for s in np.unique(t_arr)])
        lookup = dict(zip(np.unique(t_arr), mins))
        return np.array([lookup[s] for s in t_arr]).reshape(np.shape(t))

    return H.shifted(per_time)
