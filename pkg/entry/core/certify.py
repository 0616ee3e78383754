"""
Certificate pipeline behind the certify command
"""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from loguru import logger

from entry.models import RunConfig
from entry.utils.batch_processing import parallel_process_batch
from entry.utils.error_handling import log_operation_start, log_operation_success, remediation_hint
from hofer.capacities import (
    DEFAULT_SLACK,
    capacity_area_premise,
    capacity_of_hamiltonian,
    gromov_lower_bound,
    length_certificate,
    length_minimal_certificate,
    obstruction_threshold,
    r1_registry,
    volume_obstruction,
)
from hofer.certificates import Certificate, CertificateStore
from hofer.dynamics import hofer_length, no_short_trajectory_check
from hofer.embeddings import RegionEmbedding, psi_embedding, upsilon_embedding, verify_map
from hofer.errors import InsufficientPremises, MissingSide, Unsupported
from hofer.geometry import ManifoldKind, ManifoldModel
from hofer.hamiltonians import HamiltonianFn, hamiltonian_from_expression
from hofer.regions import region_above, region_below

EPSILON_GRID = (0.1, 0.05, 0.02, 0.01)
OBSTRUCTION_RADIUS = 1 / math.sqrt(2)
ORBIT_STARTS = 64


@dataclass
class CertifyOutcome:
    hamiltonian: str
    manifold: ManifoldModel
    store: CertificateStore
    verdict: Optional[Certificate] = None
    refusal: Optional[Dict[str, Any]] = None
    epsilon_trace: List[Dict[str, Any]] = field(default_factory=list)
    obstruction: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return self.verdict is not None and self.verdict.passed and self.store.all_passed()

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "hamiltonian": self.hamiltonian,
            "manifold": self.manifold.to_dict(),
            "passed": self.passed,
            "certificates": [c.to_dict() for c in self.store],
        }
        if self.verdict is not None:
            data["verdict"] = self.verdict.to_dict()
        if self.refusal is not None:
            data["refusal"] = self.refusal
        if self.epsilon_trace:
            data["epsilon_trace"] = self.epsilon_trace
        if self.obstruction is not None:
            data["obstruction"] = self.obstruction
        return data


def _embeddings_for(H: HamiltonianFn, epsilon: float, nu: float) -> List[RegionEmbedding]:
    """Verified ball embeddings exist for both graph regions of P over CP² and the blow-up"""
    if H.expression != "P":
        return []
    m = H.manifold
    if m.kind is ManifoldKind.CP2:
        return [psi_embedding("-", epsilon, nu), psi_embedding("+", epsilon, nu)]
    if m.kind is ManifoldKind.BLOWUP:
        return [upsilon_embedding(m.lam, epsilon, nu, "-"), upsilon_embedding(m.lam, epsilon, nu, "+")]
    return []


def gromov_certificates(H: HamiltonianFn, cfg: RunConfig, epsilons=EPSILON_GRID) -> List[Certificate]:
    """One Gromov lower bound per side and per ε of the grid"""
    jobs = [(eps, emb) for eps in epsilons for emb in _embeddings_for(H, eps, cfg.nu)]
    if not jobs:
        return []

    def certify_job(job):
        eps, emb = job
        record = verify_map(emb.spec, cfg.samples, 1e-6, cfg.seed, cfg.chunk_size)
        return gromov_lower_bound(emb.region, emb.spec, record)

    return parallel_process_batch(jobs, certify_job, cfg.workers, 1, "embeddings")


def epsilon_trace(certs: List[Certificate], length: float) -> List[Dict[str, Any]]:
    """Per ε: the smaller of the two side bounds and its gap to L(H)"""
    rows = []
    for eps in sorted({c.evidence["epsilon"] for c in certs}, reverse=True):
        value = min(c.value for c in certs if c.evidence["epsilon"] == eps)
        rows.append({"epsilon": eps, "capacity_bound": value, "gap": length - value})
    return rows


def obstruction_record(H: HamiltonianFn, nu: float, n_samples: int, seed: int) -> Dict[str, Any]:
    """Volume obstruction for embedding B⁶(1/√2) into either graph region of Q on the blow-up"""
    sides = {}
    for label, build in (("-", region_below), ("+", region_above)):
        cert = volume_obstruction(OBSTRUCTION_RADIUS, build(H, nu), n_samples, seed)
        sides[label] = {
            "certificate": cert.to_dict(),
            "threshold_lambda": obstruction_threshold(OBSTRUCTION_RADIUS, label),
        }
    return {"radius": OBSTRUCTION_RADIUS, "sides": sides}


def run_certify(cfg: RunConfig) -> CertifyOutcome:
    """
    Lengths, embeddings or no-short-orbit, premises and the r₁ registry,
    folded into one LengthMinimal verdict.

    Refusals are reported in the outcome, never raised.
    """
    m = cfg.manifold_model()
    H = hamiltonian_from_expression(m, cfg.hamiltonian)
    log_operation_start("certify", hamiltonian=H.name, manifold=m.label, seed=cfg.seed)
    store = CertificateStore()
    outcome = CertifyOutcome(H.name, m, store)

    estimate = hofer_length(H, seed=cfg.seed)
    length = store.add(length_certificate(H, estimate))

    gromov = gromov_certificates(H, cfg)
    capacity = None
    if gromov:
        try:
            capacity = capacity_of_hamiltonian(H, gromov, nu_grid=[cfg.nu], length=estimate.value)
            store.add(capacity)
            outcome.epsilon_trace = epsilon_trace(gromov, estimate.value)
        except MissingSide as e:
            logger.warning(f"Gromov route unavailable: {e.message}")

    premise = None
    try:
        premise = store.add(capacity_area_premise(m))
    except Unsupported as e:
        logger.warning(f"No capacity-area premise: {e.message}")

    nso = None
    route_a = capacity is not None and capacity.value >= estimate.value - DEFAULT_SLACK
    if not route_a and H.autonomous:
        nso = no_short_trajectory_check(H, min(cfg.samples, ORBIT_STARTS), cfg.seed, cfg.tol)

    registry = r1_registry()
    if cfg.r1_blowup is not None and m.kind is ManifoldKind.BLOWUP:
        registry = registry.with_override(m, cfg.r1_blowup, provenance="--r1-blowup")

    try:
        outcome.verdict = store.add(length_minimal_certificate(
            H, m, length=length, capacity=capacity, no_short_orbit=nso, premise=premise, registry=registry))
        if nso is not None:
            store.add(nso)
        log_operation_success("certify", verdict=outcome.verdict.verdict.value, scope=outcome.verdict.scope)
    except InsufficientPremises as e:
        outcome.refusal = {**e.to_dict(), "hint": remediation_hint(e)}
        logger.error(f"❌ Refused: {e.message}")

    if m.kind is ManifoldKind.BLOWUP and H.expression == "Q":
        outcome.obstruction = obstruction_record(H, cfg.nu, cfg.samples, cfg.seed)
    return outcome
