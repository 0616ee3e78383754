"""
Typed certificates and the append-only store they are collected in.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional


class CertificateKind(str, Enum):
    GROMOV_LOWER_BOUND = "GromovLowerBound"
    HZ_ADMISSIBLE = "HZAdmissible"
    HZ_LOWER_BOUND = "HZLowerBound"
    CAPACITY_AREA_PREMISE = "CapacityAreaPremise"
    NO_SHORT_ORBIT = "NoShortOrbit"
    LENGTH_MINIMAL = "LengthMinimal"
    VOLUME_OBSTRUCTION = "VolumeObstruction"
    CAPACITY_OF_HAMILTONIAN = "CapacityOfHamiltonian"
    HOFER_LENGTH = "HoferLength"
    R1_ENTRY = "R1Entry"


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    PREMISE = "PREMISE"


_ids = itertools.count(1)


@dataclass
class Certificate:
    kind: CertificateKind
    verdict: Verdict
    subject: str
    value: Optional[float] = None
    premises: list["Certificate"] = field(default_factory=list)
    assertions: list[str] = field(default_factory=list)
    evidence: dict[str, Any] = field(default_factory=dict)
    analytic_flag: bool = False
    citation: Optional[str] = None
    scope: Optional[str] = None
    ident: int = field(default_factory=lambda: next(_ids))

    @property
    def passed(self) -> bool:
        return self.verdict is not Verdict.FAIL

    def closure(self) -> list["Certificate"]:
        """All certificates reachable through premises, self included"""
        seen: dict[int, Certificate] = {}
        stack = [self]
        while stack:
            cert = stack.pop()
            if cert.ident in seen:
                continue
            seen[cert.ident] = cert
            stack.extend(cert.premises)
        return list(seen.values())

    def is_sound(self) -> bool:
        """No FAIL in the premise closure and no premise cycle"""
        return all(c.passed for c in self.closure()) and not _has_cycle(self)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "kind": self.kind.value,
            "verdict": self.verdict.value,
            "subject": self.subject,
            "analytic": self.analytic_flag,
            "premises": [p.to_dict() for p in self.premises],
        }
        optional = {
            "value": self.value,
            "assertions": self.assertions or None,
            "evidence": self.evidence or None,
            "citation": self.citation,
            "scope": self.scope,
        }
        data.update({k: v for k, v in optional.items() if v is not None})
        return data


def _has_cycle(root: Certificate) -> bool:
    visiting: set[int] = set()
    done: set[int] = set()

    def visit(cert: Certificate) -> bool:
        if cert.ident in done:
            return False
        if cert.ident in visiting:
            return True
        visiting.add(cert.ident)
        if any(visit(p) for p in cert.premises):
            return True
        visiting.discard(cert.ident)
        done.add(cert.ident)
        return False

    return visit(root)


class CertificateStore:
    """Append-only collection; stores from concurrent producers merge by union"""

    def __init__(self, certificates: Optional[Iterable[Certificate]] = None):
        self._items: dict[int, Certificate] = {}
        for cert in certificates or []:
            self.add(cert)

    def add(self, cert: Certificate) -> Certificate:
        self._items.setdefault(cert.ident, cert)
        return cert

    def merge(self, other: "CertificateStore") -> "CertificateStore":
        return CertificateStore(list(self._items.values()) + list(other._items.values()))

    def of_kind(self, kind: CertificateKind) -> list[Certificate]:
        return [c for c in self._items.values() if c.kind is kind]

    def __iter__(self):
        return iter(sorted(self._items.values(), key=lambda c: c.ident))

    def __len__(self) -> int:
        return len(self._items)

    def all_passed(self) -> bool:
        return all(c.passed for c in self._items.values())
