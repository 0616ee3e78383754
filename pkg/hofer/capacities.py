"""
Capacity certificates and the length-minimality engine.

Computed evidence (verified embeddings, sampled orbits, volumes) and
recorded premises (capacity-area inequalities, r₁ values) are combined into
typed certificates. A LengthMinimal certificate lists every certificate it
consumed, so its soundness can be checked by walking the premise tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

import numpy as np
from loguru import logger
from scipy import optimize

from hofer.certificates import Certificate, CertificateKind, Verdict
from hofer.dynamics import LengthEstimate, OrbitVerdict, analytic_min_period, detect_closed_trajectories
from hofer.embeddings import SymplecticMapSpec, VerificationRecord, verify_map
from hofer.errors import DomainViolation, InsufficientPremises, MissingSide, UnverifiedMap, Unsupported
from hofer.geometry import ManifoldKind, ManifoldModel
from hofer.hamiltonians import HamiltonianFn, action_domain, hamiltonian_Q
from hofer.regions import GraphRegion, Side, region_above, region_below

DEFAULT_SLACK = 0.05
HZ_GRID = (17, 17, 401)
HZ_TOL = 1e-9
SCOPE_HOMOTOPIC = "among homotopic paths"
SCOPE_GLOBAL = "globally"

CITE_GROMOV = "Gromov width: c_G(N) = sup{πr² : B^{2n}(r) embeds symplectically in N}"
CITE_HZ = "Hofer-Zehnder capacity: c_HZ(N) = sup{max H : H admissible on N}"
CITE_CAPACITY_OF_H = "c(H) = min(inf_ν c(R_H^−(ν/2)), inf_ν c(R_H^+(ν/2)))"
CITE_AREA_PREMISE = (
    "capacity-area inequality: c(M × D(a)) ≤ a, hence c(Q) ≤ area(Q) for quasi-cylinders "
    "over compact M of dimension ≤ 4 (J-holomorphic curve argument)"
)
CITE_CRITERION = (
    "if c(H) ≥ L(H) and the capacity-area inequality holds, the path φ^H_t is length "
    "minimizing among paths homotopic to it with fixed endpoints"
)
CITE_R1 = "if c(H) = L(H) ≤ r₁(M)/2 the path is length minimizing among all paths with the same endpoints"
CITE_NO_SHORT_ORBIT = "c_HZ(H) ≥ L(H) for autonomous H with no non-constant closed orbit of period ≤ 1"


# ---------------------------------------------------------------------------
# r₁ registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class R1Entry:
    value: float
    citation: str
    user_asserted: bool = False
    provenance: str = "built-in"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "citation": self.citation,
            "user_asserted": self.user_asserted,
            "provenance": self.provenance,
        }


def registry_key(m: ManifoldModel) -> str:
    return m.label


@dataclass
class R1Registry:
    '''r₁(M): least positive length of a loop class in π₁(Ham(M))'''
    entries: dict[str, R1Entry] = field(default_factory=dict)

    def get(self, m: ManifoldModel) -> Optional[R1Entry]:
        return self.entries.get(registry_key(m))

    def with_override(self, m: ManifoldModel, value: float, provenance: str = "user") -> "R1Registry":
        """Copy of the registry with a user-asserted r₁(m)"""
        if not (value > 0 or math.isinf(value)):
            raise DomainViolation(f"r₁ must be positive or infinite, got {value}")
        entries = dict(self.entries)
        entries[registry_key(m)] = R1Entry(float(value), "user-asserted value", True, provenance)
        logger.info(f"r₁({m.label}) = {value} asserted by {provenance}")
        return R1Registry(entries)

    def certificate(self, m: ManifoldModel) -> Optional[Certificate]:
        entry = self.get(m)
        if entry is None:
            return None
        return Certificate(
            kind=CertificateKind.R1_ENTRY,
            verdict=Verdict.PREMISE,
            subject=f"r₁({m.label})",
            value=entry.value,
            evidence=entry.to_dict(),
            citation=entry.citation,
        )

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in sorted(self.entries.items())}


def r1_registry() -> R1Registry:
    """
    Shipped r₁ values.

    π₁(Ham(CP²)) = Z₃ is generated by the rotation through 2π, of length π; the
    rotation loop of CP¹ (area π) also has length π. No blow-up value ships:
    an entry must be supplied with with_override.
    """
    return R1Registry({
        registry_key(ManifoldModel.cp2()): R1Entry(
            math.pi, "π₁(Ham(CP²)) = Z₃ generated by the full rotation φ^P over time 2, of length π"),
        registry_key(ManifoldModel.cp1()): R1Entry(
            math.pi, "π₁(Ham(S²)) = Z₂ generated by the full rotation, of length area(S²) = π"),
    })


# ---------------------------------------------------------------------------
# Gromov lower bounds and c(H)
# ---------------------------------------------------------------------------

Target = Union[GraphRegion, ManifoldModel]


def _target_label(target: Target) -> str:
    if isinstance(target, GraphRegion):
        sign = "-" if target.side is Side.BELOW else "+"
        return f"R_{target.H.name}^{sign}({target.nu:g}/2) over {target.base.label}"
    return target.label


def gromov_lower_bound(
    target: Target,
    spec: SymplecticMapSpec,
    record: Optional[VerificationRecord] = None,
    probes: int = 10_000,
    tol: float = 1e-6,
    seed: int = 0,
) -> Certificate:
    """
    c_G(target) ≥ πr² from a verified embedding of a ball of radius r.

    Raises:
        UnverifiedMap: the map does not PASS verify_map
        DomainViolation: the map's domain is not a ball
    """
    if spec.domain.get("type") != "ball":
        raise DomainViolation(f"{spec.name} is not defined on a ball", {"domain": spec.domain})
    if record is None:
        record = verify_map(spec, probes, tol, seed)
    if not record.passed:
        raise UnverifiedMap(f"{spec.name} failed verification", record.to_dict())
    r = float(spec.domain["radius"])
    evidence = {"radius": r, "verification": record.to_dict()}
    if isinstance(target, GraphRegion):
        evidence.update({"side": target.side.value, "nu": target.nu, "hamiltonian": target.H.name})
    if "epsilon" in spec.meta:
        evidence["epsilon"] = spec.meta["epsilon"]
    return Certificate(
        kind=CertificateKind.GROMOV_LOWER_BOUND,
        verdict=Verdict.PASS,
        subject=f"c_G({_target_label(target)}) via {spec.name}",
        value=math.pi * r * r,
        evidence=evidence,
        citation=CITE_GROMOV,
    )


def _is_zero(H: HamiltonianFn) -> bool:
    dom = action_domain(H.manifold)
    vals = H.evaluate_actions(dom.vertices, 0.0)
    grads = H.gradient_actions(dom.vertices, 0.0)
    return H.autonomous and H.affine and np.allclose(vals, 0.0) and np.allclose(grads, 0.0)


def capacity_of_hamiltonian(
    H: HamiltonianFn,
    certs: Iterable[Certificate],
    nu_grid: Optional[Iterable[float]] = None,
    length: Optional[float] = None,
) -> Certificate:
    """
    Lower bound for c(H) from Gromov certificates on both sides.

    Certificates are grouped by ν. Within a group each side contributes its
    best certified value and the group bounds min(c(R^−), c(R^+)); c(H) is
    bounded by the smallest group bound. The ε-grid trace is recorded along
    with whether the per-side bounds grow as ε shrinks.

    Raises:
        MissingSide: no ν carries passing certificates for both sides
    """
    certs = [c for c in certs if c.kind is CertificateKind.GROMOV_LOWER_BOUND and c.passed]
    subject = f"c({H.name}) on {H.manifold.label}"
    if not certs and _is_zero(H):
        return Certificate(CertificateKind.CAPACITY_OF_HAMILTONIAN, Verdict.PASS, subject, value=0.0,
                           evidence={"trivial": True}, analytic_flag=True, citation=CITE_CAPACITY_OF_H)

    groups: dict[Optional[float], dict[str, Certificate]] = {}
    trace = []
    for cert in certs:
        side = cert.evidence.get("side")
        if side is None:
            continue
        nu = cert.evidence.get("nu")
        trace.append({"side": side, "epsilon": cert.evidence.get("epsilon"), "nu": nu, "value": cert.value})
        best = groups.setdefault(nu, {})
        if side not in best or cert.value > best[side].value:
            best[side] = cert
    sides = (Side.BELOW.value, Side.ABOVE.value)
    complete = {nu: best for nu, best in groups.items() if all(side in best for side in sides)}
    if not complete:
        present = {side for best in groups.values() for side in best}
        side = next((s for s in sides if s not in present), Side.ABOVE.value)
        raise MissingSide(f"No certificate for the {side.lower()} side of {H.name}",
                          {"side": side, "nu": sorted(n for n in groups if n is not None),
                           "hint": "verify embeddings into both graph regions for the same ν"})

    monotone = True
    for nu, best in complete.items():
        for side in sides:
            rows = sorted((t for t in trace if t["side"] == side and t["nu"] == nu and t["epsilon"] is not None),
                          key=lambda t: -t["epsilon"])
            values = [t["value"] for t in rows]
            monotone &= all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    per_nu = {nu: min(best[side].value for side in sides) for nu, best in complete.items()}
    nu_star = min(per_nu, key=per_nu.get)
    best = complete[nu_star]
    value = per_nu[nu_star]
    evidence = {
        "sides": {side: best[side].value for side in sides},
        "nu": nu_star,
        "per_nu": [{"nu": nu, "value": v} for nu, v in per_nu.items()],
        "grid": trace,
        "monotone_in_epsilon": monotone,
    }
    if nu_grid is not None:
        evidence["nu_grid"] = list(nu_grid)
    if length is not None:
        evidence["length"] = length
        evidence["gap"] = length - value
    return Certificate(
        kind=CertificateKind.CAPACITY_OF_HAMILTONIAN,
        verdict=Verdict.PASS,
        subject=subject,
        value=value,
        premises=[best[Side.BELOW.value], best[Side.ABOVE.value]],
        evidence=evidence,
        citation=CITE_CAPACITY_OF_H,
    )


# ---------------------------------------------------------------------------
# Hofer-Zehnder admissibility
# ---------------------------------------------------------------------------

def _action_grid(m: ManifoldModel, grid: tuple[int, int, int]):
    dom = action_domain(m)
    axes = []
    for i, n in enumerate(grid):
        if dom.active[i]:
            axes.append(np.linspace(dom.lower[i], dom.upper[i], n))
        else:
            axes.append(np.zeros(1))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = dom.contains(mesh.reshape(-1, 3), tol=1e-12).reshape(mesh.shape[:3])
    return axes, mesh, mask


def _interior(flags: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Grid points whose axis neighbours all lie in the domain and carry the flag"""
    inside = flags & mask
    out = inside.copy()
    for axis in range(3):
        if flags.shape[axis] < 3:
            continue
        fwd = np.zeros_like(inside)
        bwd = np.zeros_like(inside)
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
        fwd[tuple(dst)] = inside[tuple(src)]
        bwd[tuple(src)] = inside[tuple(dst)]
        out &= fwd & bwd
    return out


def radial_min_period(H: HamiltonianFn) -> Optional[float]:
    """1/(slope·max G′) for radial bumps, whose orbits are rotations at rate slope·G′(A)"""
    slope = H.meta.get("slope")
    return None if slope is None else 1.0 / abs(slope)


def hz_admissibility(
    H: HamiltonianFn,
    N: Optional[ManifoldModel] = None,
    grid: tuple[int, int, int] = HZ_GRID,
    orbit_samples: int = 64,
    seed: int = 0,
    tol: float = HZ_TOL,
) -> Certificate:
    """
    Check the admissibility conditions for c_HZ on a grid of action coordinates.

    (a) H equals max H outside a compact κ: the outermost disk layers sit at
        the maximum (trivial on closed manifolds);
    (b) H vanishes on a nonempty open U: some grid point and its neighbours
        have H = 0;
    (c) 0 ≤ H ≤ max H on the grid;
    (d) no non-constant orbit of period ≤ 1: sampled orbit detection, with the
        closed-form period where one applies.

    A FAIL names the violated conditions; an identically zero H is reported
    as degenerate.
    """
    N = N or H.manifold
    if N != H.manifold:
        raise DomainViolation(f"{H.name} lives on {H.manifold.label}, not {N.label}")
    if not H.autonomous:
        raise Unsupported("Admissibility is defined for autonomous Hamiltonians")
    axes, mesh, mask = _action_grid(N, grid)
    values = H.evaluate_actions(mesh.reshape(-1, 3), 0.0).reshape(mask.shape)
    valid = values[mask]
    h_max, h_min = float(valid.max()), float(valid.min())
    subject = f"{H.name} on {N.label}"
    conditions: dict[str, dict] = {}
    failed: list[str] = []

    if h_max <= tol:
        evidence = {"degenerate": True, "max": h_max, "failed": ["a", "b"]}
        return Certificate(CertificateKind.HZ_ADMISSIBLE, Verdict.FAIL, subject, value=h_max,
                           assertions=["max H = 0: U and κ are not separated"], evidence=evidence,
                           citation=CITE_HZ)

    top = np.abs(values - h_max) <= tol
    if N.has_disk:
        step = axes[2][1] - axes[2][0]
        outer = mask & (mesh[..., 2] >= N.disk_area - 2 * step)
        below_max = mask & ~top
        kappa_extent = float(mesh[..., 2][below_max].max()) if below_max.any() else 0.0
        holds = bool(np.all(top[outer]))
        conditions["a"] = {"holds": holds, "kappa_max_area": kappa_extent, "boundary_area": N.disk_area}
    else:
        conditions["a"] = {"holds": True, "kappa": "whole manifold"}
    zero_interior = _interior(np.abs(values) <= tol, mask)
    conditions["b"] = {"holds": bool(zero_interior.any()), "interior_points": int(zero_interior.sum())}
    conditions["c"] = {"holds": h_min >= -tol, "min": h_min, "max": h_max}

    results = detect_closed_trajectories(H, 1.0, orbit_samples, seed)
    periodic = [r for r in results if r.verdict is OrbitVerdict.PERIODIC]
    analytic = analytic_min_period(H)
    if analytic is None:
        analytic = radial_min_period(H)
    conditions["d"] = {
        "holds": not periodic and (analytic is None or analytic > 1.0),
        "starts": len(results),
        "periodic": len(periodic),
        "analytic_min_period": analytic,
        "sampling": True,
    }
    if periodic:
        conditions["d"]["witness"] = periodic[0].to_dict()
    elif analytic is not None and analytic <= 1.0:
        conditions["d"]["witness"] = {"period": analytic, "source": "closed-form period"}

    failed =[name for name, info in conditions.items() if not info["holds"]]
    verdict = Verdict.FAIL if failed else Verdict.PASS
    logger.debug(f"HZ admissibility of {subject}: {verdict.value} {failed or ''}")
    return Certificate(
        kind=CertificateKind.HZ_ADMISSIBLE,
        verdict=verdict,
        subject=subject,
        value=h_max,
        assertions=[f"({name}) {'holds' if info['holds'] else 'violated'}" for name, info in conditions.items()],
        evidence={"conditions": conditions, "failed": failed, "grid": list(grid)},
        analytic_flag=analytic is not None,
        citation=CITE_HZ,
    )


def hz_lower_bound(admissible: Certificate) -> Certificate:
    """c_HZ(N) ≥ max H from a passing admissibility certificate"""
    if admissible.kind is not CertificateKind.HZ_ADMISSIBLE or not admissible.passed:
        raise InsufficientPremises("c_HZ bound needs a passing admissibility certificate",
                                   {"missing": "HZAdmissible PASS"})
    return Certificate(
        kind=CertificateKind.HZ_LOWER_BOUND,
        verdict=Verdict.PASS,
        subject=f"c_HZ ≥ max H for {admissible.subject}",
        value=admissible.value,
        premises=[admissible],
        analytic_flag=admissible.analytic_flag,
        citation=CITE_HZ,
    )


# ---------------------------------------------------------------------------
# Recorded premises and the volume obstruction
# ---------------------------------------------------------------------------

def capacity_area_premise(m: ManifoldModel) -> Certificate:
    """
    Recorded (never computed) capacity-area inequality for quasi-cylinders over m.

    Raises:
        Unsupported: m is not of dimension two or four
    """
    if m.real_dim not in (2, 4):
        raise Unsupported(f"Capacity-area premise is recorded for dimensions 2 and 4, got {m.real_dim}",
                          {"dimension": m.real_dim})
    return Certificate(
        kind=CertificateKind.CAPACITY_AREA_PREMISE,
        verdict=Verdict.PREMISE,
        subject=f"quasi-cylinders over {m.label}",
        evidence={"dimension": m.real_dim, "capacities": ["c_G", "c_HZ"]},
        citation=CITE_AREA_PREMISE,
    )


def ball_volume(r: float, dim: int = 6) -> float:
    n = dim // 2
    return math.pi ** n * r ** dim / math.factorial(n)


def volume_obstruction(r: float, region: GraphRegion, n_samples: int = 0, seed: int = 0) -> Certificate:
    """
    PASS (obstruction established) when vol(B⁶(r)) exceeds vol(region).

    The analytic region volume is used; a Monte Carlo estimate is attached when
    n_samples > 0.
    """
    if region.base.real_dim != 4:
        raise Unsupported(f"Volume obstruction compares 6-balls, got a {region.base.real_dim + 2}-dimensional region")
    ball = ball_volume(r, 6)
    vol = region.volume()
    evidence = {"radius": r, "ball_volume": ball, "region_volume": vol, "excess": ball - vol}
    if n_samples > 0:
        mc, err = region.monte_carlo_volume(n_samples, seed)
        evidence.update({"region_volume_mc": mc, "region_volume_stderr": err})
    obstructed = ball > vol
    return Certificate(
        kind=CertificateKind.VOLUME_OBSTRUCTION,
        verdict=Verdict.PASS if obstructed else Verdict.FAIL,
        subject=f"B⁶({r:.6g}) into {_target_label(region)}",
        value=ball - vol,
        assertions=["no symplectic embedding: volume exceeds the region" if obstructed
                    else "volume does not obstruct the embedding"],
        evidence=evidence,
        analytic_flag=True,
    )


def obstruction_threshold(r: float = 1 / math.sqrt(2), side: str = "-", nu: float = 1e-6,
                          bracket: tuple[float, float] = (0.5, 0.999)) -> float:
    """
    Smallest λ with vol(B⁶(r)) = vol(R_Q^∓(ν/2)) over the blow-up.

    Above the returned λ the region is too small for the ball.
    """
    ball = ball_volume(r, 6)
    build = region_below if side == "-" else region_above

    def excess(lam: float) -> float:
        return build(hamiltonian_Q(ManifoldModel.blowup(lam)), nu).volume() - ball

    lo, hi = bracket
    if excess(lo) <= 0 or excess(hi) >= 0:
        raise DomainViolation("Volume threshold is not bracketed", {"bracket": list(bracket), "side": side})
    return float(optimize.brentq(excess, lo, hi, xtol=1e-10))


# ---------------------------------------------------------------------------
# Length minimality
# ---------------------------------------------------------------------------

def length_certificate(H: HamiltonianFn, estimate: LengthEstimate) -> Certificate:
    return Certificate(
        kind=CertificateKind.HOFER_LENGTH,
        verdict=Verdict.PASS,
        subject=f"L({H.name}) on {H.manifold.label}",
        value=estimate.value,
        evidence=estimate.to_dict(),
        analytic_flag=estimate.method == "exact-vertices",
    )


def length_minimal_certificate(
    H: HamiltonianFn,
    m: Optional[ManifoldModel] = None,
    length: Optional[Certificate] = None,
    capacity: Optional[Certificate] = None,
    no_short_orbit: Optional[Certificate] = None,
    premise: Optional[Certificate] = None,
    registry: Optional[R1Registry] = None,
    max_slack: float = DEFAULT_SLACK,
) -> Certificate:
    """
    Combine premises into a LengthMinimal certificate.

    Route A consumes a c(H) bound with c(H) ≥ L(H) − max_slack; route B consumes
    a passing NoShortOrbit certificate for autonomous H (c_HZ(H) ≥ L(H)). Both
    need the capacity-area premise. The scope is upgraded to global when the
    registry holds r₁(m) and L(H) ≤ r₁(m)/2.

    Raises:
        InsufficientPremises: the missing item is named in details
    """
    m = m or H.manifold
    missing = []
    if length is None:
        missing.append("HoferLength")
    if premise is None or premise.kind is not CertificateKind.CAPACITY_AREA_PREMISE:
        missing.append("CapacityAreaPremise")
    if missing:
        raise InsufficientPremises(f"Missing {', '.join(missing)}", {"missing": missing})
    L = float(length.value)
    L_err = float(length.evidence.get("error", 0.0))

    route, used, slack = None, None, None
    unavailable: dict[str, str] = {}
    if capacity is not None and capacity.passed:
        gap = float(capacity.value) - L
        if gap >= -max_slack:
            route, used, slack = "A", capacity, gap
        else:
            unavailable["A"] = f"c(H) ≥ {capacity.value:.6g} is {-gap:.3g} below L(H), above slack {max_slack:g}"
    else:
        unavailable["A"] = "no capacity certificate" if capacity is None else "capacity certificate failed"
    if route is None:
        if no_short_orbit is None:
            unavailable["B"] = "no NoShortOrbit certificate"
        elif not no_short_orbit.passed:
            unavailable["B"] = "NoShortOrbit FAIL"
        elif not H.autonomous:
            unavailable["B"] = "H is time-dependent"
        else:
            route, used, slack = "B", no_short_orbit, 0.0
    if route is None:
        details = {"missing": "c(H) ≥ L(H)", "routes": unavailable,
                   "hint": "supply verified embeddings for both graph regions, or an autonomous H without short orbits"}
        if no_short_orbit is not None and "witness" in no_short_orbit.evidence:
            details["witness"] = no_short_orbit.evidence["witness"]
        raise InsufficientPremises(f"No route establishes c({H.name}) ≥ L({H.name})", details)

    premises = [length, used, premise]
    scope = SCOPE_HOMOTOPIC
    citations = [CITE_CRITERION if route == "A" else CITE_NO_SHORT_ORBIT]
    registry = registry if registry is not None else r1_registry()
    r1_cert = registry.certificate(m)
    evidence = {"length": L, "length_error": L_err, "route": route, "slack": slack, "max_slack": max_slack}
    if unavailable:
        evidence["unavailable_routes"] = unavailable
    if r1_cert is not None:
        evidence["r1"] = r1_cert.value
        if L + L_err <= r1_cert.value / 2 + 1e-12:
            scope = SCOPE_GLOBAL
            premises.append(r1_cert)
            citations.append(CITE_R1)
    assertions = [
        f"L({H.name}) = {L:.12g}",
        f"c({H.name}) ≥ L({H.name})" + ("" if slack >= 0 else f" up to slack {-slack:.3g}"),
        f"length minimizing {scope}",
    ]
    cert = Certificate(
        kind=CertificateKind.LENGTH_MINIMAL,
        verdict=Verdict.PASS,
        subject=f"φ^{H.name}_t on {m.label}, t ∈ [0, 1]",
        value=L,
        premises=premises,
        assertions=assertions,
        evidence=evidence,
        analytic_flag=all(p.analytic_flag or p.verdict is Verdict.PREMISE for p in premises),
        citation="; ".join(citations),
        scope=scope,
    )
    if not cert.is_sound():
        cert = replace(cert, verdict=Verdict.FAIL)
    logger.info(f"LengthMinimal {H.name} on {m.label}: route {route}, {scope}, slack {slack:.3g}")
    return cert
