"""
Verification suites run by the verify command
"""
import math
import time
from typing import Callable, Dict, List

import numpy as np
from loguru import logger

from entry.models import CheckResult, RunConfig, Suite, SuiteReport
from entry.utils.batch_processing import parallel_process_batch
from entry.utils.error_handling import log_operation_start, log_operation_success
from entry.utils.string_utils import format_duration
from hofer.capacities import hz_admissibility
from hofer.dynamics import (
    OrbitVerdict,
    closed_form_flow,
    detect_closed_trajectories,
    flow,
    hofer_length,
    symplecticity_residual,
)
from hofer.embeddings import corrupted, i_minus_spec, psi_embedding, sample_ball, shipped_specs, verify_map
from hofer.geometry import HALF_PI, ManifoldModel, distance, sample_points
from hofer.hamiltonians import hamiltonian_P, hamiltonian_Q, radial_bump, reparametrized
from hofer.regions import glue, gluing_identity, region_area, region_below

FLOW_ORACLE_TOL = 1e-6
ENERGY_TOL = 1e-8
LENGTH_TOL = 1e-3
PERIOD_TOL = 1e-4
PULLBACK_TOL = 1e-6
FORM_TOL = 1e-4
FORM_STARTS = 8
BUMP_SLACK = 0.03
LENGTH_LAMBDAS = (0.3, 0.5, 0.7)


def _blowup_lambda(cfg: RunConfig) -> float:
    return cfg.lam if cfg.lam is not None else 0.5


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def _oracle_error(H, name: str, tol: float) -> Callable:
    def check(p) -> tuple[float, float]:
        traj = flow(H, p, 1.0, tol, n_samples=51)
        err = max(distance(q, closed_form_flow(name, p, t)) for t, q in traj.samples)
        drift = traj.stats.energy_drift or 0.0
        return err, drift
    return check


def flows_suite(cfg: RunConfig) -> List[CheckResult]:
    checks = []
    rng = np.random.default_rng(cfg.seed)
    n_starts = min(cfg.samples, 100)
    for m in (ManifoldModel.cp2(), ManifoldModel.blowup(_blowup_lambda(cfg))):
        for name, H in (("P", hamiltonian_P(m)), ("Q", hamiltonian_Q(m))):
            starts = sample_points(m, n_starts, rng)
            results = parallel_process_batch(starts, _oracle_error(H, name, cfg.tol),
                                             cfg.workers, max(1, n_starts // cfg.workers), "flow starts")
            err = max(r[0] for r in results)
            drift = max(r[1] for r in results)
            checks.append(CheckResult(suite=Suite.FLOWS, name=f"oracle {name} on {m.label}", passed=err <= FLOW_ORACLE_TOL,
                                      value=err, threshold=FLOW_ORACLE_TOL, details={"starts": n_starts}))
            checks.append(CheckResult(suite=Suite.FLOWS, name=f"energy {name} on {m.label}", passed=drift <= ENERGY_TOL,
                                      value=drift, threshold=ENERGY_TOL))
            form = max(symplecticity_residual(H, p) for p in starts[:FORM_STARTS])
            checks.append(CheckResult(suite=Suite.FLOWS, name=f"form {name} on {m.label}", passed=form <= FORM_TOL,
                                      value=form, threshold=FORM_TOL, details={"starts": min(n_starts, FORM_STARTS)}))

    lengths = [("L(P) on CP2", hamiltonian_P(ManifoldModel.cp2()), HALF_PI)]
    for lam in LENGTH_LAMBDAS:
        blowup = ManifoldModel.blowup(lam)
        lengths.append((f"L(P) on {blowup.label}", hamiltonian_P(blowup), HALF_PI * (1 - lam ** 2)))
        lengths.append((f"L(Q) on {blowup.label}", hamiltonian_Q(blowup), HALF_PI))
    for label, H, expected in lengths:
        est = hofer_length(H, seed=cfg.seed)
        err = abs(est.value - expected)
        checks.append(CheckResult(suite=Suite.FLOWS, name=label, passed=err <= LENGTH_TOL, value=est.value,
                                  threshold=LENGTH_TOL, details={"expected": expected, "error": err}))

    cp2 = ManifoldModel.cp2()
    orbit_starts = min(cfg.samples, 64)
    p_results = detect_closed_trajectories(hamiltonian_P(cp2), 1.0, orbit_starts, cfg.seed, cfg.tol)
    n_periodic = sum(r.verdict is OrbitVerdict.PERIODIC for r in p_results)
    checks.append(CheckResult(suite=Suite.FLOWS, name="P has no orbit of period <= 1", passed=n_periodic == 0,
                              value=float(n_periodic), details={"starts": orbit_starts}))
    double = hamiltonian_P(cp2).scaled(2.0, name="2P")
    d_results = detect_closed_trajectories(double, 1.1, min(orbit_starts, 16), cfg.seed, cfg.tol)
    periods = [r.period for r in d_results if r.verdict is OrbitVerdict.PERIODIC]
    worst = max((abs(T - 1.0) for T in periods), default=math.inf)
    checks.append(CheckResult(suite=Suite.FLOWS, name="2P closes at T = 1", passed=bool(periods) and worst <= PERIOD_TOL,
                              value=worst, threshold=PERIOD_TOL, details={"periodic": len(periods)}))
    return checks


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

def embeddings_suite(cfg: RunConfig) -> List[CheckResult]:
    checks = []
    lam = _blowup_lambda(cfg)
    for spec in shipped_specs(cfg.epsilon, lam, cfg.nu):
        record = verify_map(spec, cfg.samples, PULLBACK_TOL, cfg.seed, cfg.chunk_size)
        checks.append(CheckResult(suite=Suite.EMBEDDINGS, name=spec.name, passed=record.passed,
                                  value=record.pullback_residual_max, threshold=PULLBACK_TOL,
                                  details=record.to_dict()))

    eps = cfg.epsilon
    bound = math.sqrt(2) * math.pi / 2 * eps - HALF_PI * eps ** 2 - 1e-9
    emb = psi_embedding("-", eps, cfg.nu)
    x = sample_ball(np.random.default_rng(cfg.seed), cfg.samples, 6, emb.radius)
    chain = float(emb.chain_margins(x).min())
    checks.append(CheckResult(suite=Suite.EMBEDDINGS, name="Psi_minus chain margin", passed=chain >= bound,
                              value=chain, threshold=bound))
    return checks


def corrupted_suite(cfg: RunConfig) -> List[CheckResult]:
    """Negative control: the corrupted map must fail, so this suite reports FAIL"""
    record = verify_map(corrupted(i_minus_spec()), cfg.samples, PULLBACK_TOL, cfg.seed, cfg.chunk_size)
    return [CheckResult(suite=Suite.CORRUPTED, name=record.map, passed=record.passed,
                        value=record.pullback_residual_max, threshold=PULLBACK_TOL, details=record.to_dict())]


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

def regions_suite(cfg: RunConfig) -> List[CheckResult]:
    checks = []
    cp2 = ManifoldModel.cp2()
    P = hamiltonian_P(cp2)
    area = region_area(glue(P, P, cfg.nu)).value
    expected = HALF_PI + cfg.nu
    checks.append(CheckResult(suite=Suite.REGIONS, name="area R_P(nu)", passed=abs(area - expected) <= 1e-12,
                              value=area, threshold=expected))

    report = gluing_identity(P, reparametrized(P), cfg.nu, n_samples=cfg.samples, seed=cfg.seed)
    checks.append(CheckResult(suite=Suite.REGIONS, name="gluing identity P / reparametrized P", passed=report.holds,
                              value=report.lhs - report.rhs, threshold=3 * report.lhs_stderr,
                              details=report.to_dict()))

    below = region_below(P, cfg.nu)
    mc, err = below.monte_carlo_volume(cfg.samples, cfg.seed)
    exact = below.volume()
    checks.append(CheckResult(suite=Suite.REGIONS, name="volume R_P^-", passed=abs(mc - exact) <= 3 * err + 1e-12,
                              value=mc, threshold=exact, details={"stderr": err}))
    return checks


# ---------------------------------------------------------------------------
# hz
# ---------------------------------------------------------------------------

def hz_suite(cfg: RunConfig) -> List[CheckResult]:
    checks = []
    orbit_samples = min(cfg.samples, 32)
    for m in (ManifoldModel.disk(1.0), ManifoldModel.product(ManifoldModel.cp1(), 1.0)):
        good = hz_admissibility(radial_bump(m, 0.9, BUMP_SLACK), m, orbit_samples=orbit_samples, seed=cfg.seed)
        floor = 0.9 * (1 - BUMP_SLACK)
        checks.append(CheckResult(suite=Suite.HZ, name=f"bump 0.9 on {m.label}",
                                  passed=good.passed and good.value >= floor - 1e-12,
                                  value=good.value, threshold=floor, details=good.evidence))
        bad = hz_admissibility(radial_bump(m, 1.1, BUMP_SLACK), m, orbit_samples=orbit_samples, seed=cfg.seed)
        failed = bad.evidence.get("failed", [])
        checks.append(CheckResult(suite=Suite.HZ, name=f"bump 1.1 on {m.label} fails (d)",
                                  passed=not bad.passed and "d" in failed and "witness" in bad.evidence["conditions"]["d"],
                                  details={"failed": failed}))
    return checks


SUITES: Dict[Suite, Callable[[RunConfig], List[CheckResult]]] = {
    Suite.FLOWS: flows_suite,
    Suite.EMBEDDINGS: embeddings_suite,
    Suite.REGIONS: regions_suite,
    Suite.HZ: hz_suite,
    Suite.CORRUPTED: corrupted_suite,
}

ALL_SUITES = (Suite.FLOWS, Suite.EMBEDDINGS, Suite.REGIONS, Suite.HZ)


def run_suites(cfg: RunConfig) -> List[SuiteReport]:
    """Run the configured suite (or every regular suite for 'all')"""
    selected = ALL_SUITES if cfg.suite is Suite.ALL else (cfg.suite,)
    reports = []
    for suite in selected:
        log_operation_start(f"{suite.value} suite", seed=cfg.seed, samples=cfg.samples)
        start = time.perf_counter()
        checks = SUITES[suite](cfg)
        report = SuiteReport(suite=suite, seed=cfg.seed, checks=checks)
        if report.passed:
            log_operation_success(f"{suite.value} suite", checks=len(checks),
                                  elapsed=format_duration(time.perf_counter() - start))
        else:
            logger.error(f"❌ {suite.value} suite failed at {report.first_failure.name}")
        reports.append(report)
    return reports
