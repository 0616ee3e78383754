"""
Pydantic models for run configuration and report records
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from hofer.geometry import ManifoldModel


class Command(str, Enum):
    POLYTOPE = "polytope"
    VERIFY = "verify"
    CERTIFY = "certify"


class ManifoldChoice(str, Enum):
    CP1 = "cp1"
    CP2 = "cp2"
    BLOWUP = "blowup"
    DISK = "disk"
    CP1_DISK = "cp1xdisk"
    CP2_DISK = "cp2xdisk"


class Suite(str, Enum):
    FLOWS = "flows"
    EMBEDDINGS = "embeddings"
    REGIONS = "regions"
    HZ = "hz"
    CORRUPTED = "corrupted"
    ALL = "all"


class RunConfig(BaseModel):
    command: Command
    manifold: ManifoldChoice = ManifoldChoice.CP2
    lam: Optional[float] = Field(default=None, alias="lambda")
    disk_area: float = 1.0
    hamiltonian: str = "P"
    epsilon: float = 0.05
    nu: float = 0.1
    suite: Suite = Suite.ALL
    seed: int = 7
    samples: int = 10_000
    tol: float = 1e-9
    out: str = "out"
    overlay: Optional[str] = None
    s: Optional[float] = None
    r1_blowup: Optional[float] = None
    workers: int = 4
    chunk_size: int = 2_000
    px_per_unit: float = 200.0

    model_config = {"populate_by_name": True}

    @field_validator("tol", "epsilon", "nu", "disk_area", "px_per_unit")
    @classmethod
    def _positive(cls, v: float, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive")
        return v

    @field_validator("samples", "workers", "chunk_size")
    @classmethod
    def _positive_int(cls, v: int, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1")
        return v

    @model_validator(mode="after")
    def _check_lambda(self):
        if self.manifold is ManifoldChoice.BLOWUP:
            if self.lam is None:
                self.lam = 0.5
            if not 0 < self.lam < 1:
                raise ValueError("lambda must lie in (0, 1)")
        return self

    def manifold_model(self) -> ManifoldModel:
        if self.manifold is ManifoldChoice.CP1:
            return ManifoldModel.cp1()
        if self.manifold is ManifoldChoice.CP2:
            return ManifoldModel.cp2()
        if self.manifold is ManifoldChoice.BLOWUP:
            return ManifoldModel.blowup(self.lam)
        if self.manifold is ManifoldChoice.DISK:
            return ManifoldModel.disk(self.disk_area)
        if self.manifold is ManifoldChoice.CP1_DISK:
            return ManifoldModel.product(ManifoldModel.cp1(), self.disk_area)
        return ManifoldModel.product(ManifoldModel.cp2(), self.disk_area)

    def summary(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


class CheckResult(BaseModel):
    """One named check of a verification suite"""
    suite: Suite
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    details: Dict[str, Any] = Field(default_factory=dict)


class SuiteReport(BaseModel):
    suite: Suite
    seed: int
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> Optional[CheckResult]:
        return next((c for c in self.checks if not c.passed), None)


class RunReport(BaseModel):
    """Everything written to report.json"""
    command: Command
    config: Dict[str, Any]
    passed: bool
    results: Dict[str, Any] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)
    error: Optional[Dict[str, Any]] = None
