"""Technique catalog: the symbolic state space for kill-chain search.

A catalog is a flat JSON array of technique records, each pinned to one of
the seven kill-chain phases. Once loaded it is immutable and indexed by
phase, so any number of workers may read it concurrently.
"""

import json
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path


class CatalogError(Exception):
    """Raised when a catalog file is malformed or violates an invariant."""


class Phase(IntEnum):
    """The seven kill-chain phases, totally ordered by ordinal."""

    RECON = 0
    WEAPON = 1
    DELIVERY = 2
    EXPLOIT = 3
    INSTALL = 4
    C2 = 5
    OBJECTIVES = 6

    @property
    def label(self) -> str:
        """Lowercase wire name, as used in catalog and prior files."""
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Phase":
        try:
            return cls[label.upper()]
        except KeyError:
            valid = ", ".join(p.label for p in cls)
            raise CatalogError(f"unknown phase {label!r}; expected one of: {valid}") from None

    @property
    def is_terminal(self) -> bool:
        return self is Phase.OBJECTIVES

    def successor(self) -> "Phase | None":
        """Next phase in the chain, or None past objectives."""
        if self.is_terminal:
            return None
        return Phase(self.value + 1)


PHASES: tuple[Phase, ...] = tuple(Phase)

_ID_PATTERN = re.compile(r"^T\d{4}(\.\d{3})?$")

# Uninformative midpoint for score fields absent from the catalog file.
DEFAULT_SCORE = 0.5


@dataclass(frozen=True)
class Technique:
    """One catalogued adversary behavior.

    detection_score feeds the stealth term, detection_coverage the
    detection penalty, and mitigation_score the mitigation penalty; all
    three live in [0, 1] and are supplied by the catalog author.
    """

    id: str
    name: str
    phase: Phase
    description: str = ""
    detection_score: float = DEFAULT_SCORE
    mitigation_score: float = DEFAULT_SCORE
    detection_coverage: float = DEFAULT_SCORE

    def __post_init__(self):
        if not _ID_PATTERN.match(self.id):
            raise CatalogError(f"technique id {self.id!r} does not match T####(.###)")
        for fname in ("detection_score", "mitigation_score", "detection_coverage"):
            value = getattr(self, fname)
            if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
                raise CatalogError(f"technique {self.id}: {fname}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class Catalog:
    """Validated, phase-indexed technique set."""

    techniques: tuple[Technique, ...]
    by_phase: dict[Phase, tuple[str, ...]] = field(repr=False)
    _by_id: dict[str, Technique] = field(repr=False)

    def __len__(self) -> int:
        return len(self.techniques)

    def __contains__(self, technique_id: str) -> bool:
        return technique_id in self._by_id

    def get(self, technique_id: str) -> Technique:
        try:
            return self._by_id[technique_id]
        except KeyError:
            raise CatalogError(f"unknown technique id {technique_id!r}") from None

    def ids_in_phase(self, phase: Phase) -> tuple[str, ...]:
        return self.by_phase[phase]

    def to_records(self) -> list[dict]:
        """Serializable records in the catalog file schema."""
        return [
            {
                "id": t.id,
                "name": t.name,
                "phase": t.phase.label,
                "description": t.description,
                "detection_score": t.detection_score,
                "mitigation_score": t.mitigation_score,
                "detection_coverage": t.detection_coverage,
            }
            for t in self.techniques
        ]


def build_catalog(techniques: list[Technique]) -> Catalog:
    """Index and validate a technique list.

    Every phase must hold at least one technique and ids must be unique;
    the phase index partitions the technique set exactly.
    """
    by_id: dict[str, Technique] = {}
    for t in techniques:
        if t.id in by_id:
            raise CatalogError(f"duplicate technique id {t.id!r}")
        by_id[t.id] = t
    by_phase = {phase: tuple(t.id for t in techniques if t.phase is phase) for phase in PHASES}
    for phase in PHASES:
        if not by_phase[phase]:
            raise CatalogError(f"phase {phase.label!r} has no techniques")
    return Catalog(techniques=tuple(techniques), by_phase=by_phase, _by_id=by_id)


def _technique_from_record(record: dict, index: int) -> Technique:
    if not isinstance(record, dict):
        raise CatalogError(f"catalog entry {index} is not an object")
    for key in ("id", "name", "phase"):
        if key not in record:
            raise CatalogError(f"catalog entry {index} missing required key {key!r}")
    known = {
        "id",
        "name",
        "phase",
        "description",
        "detection_score",
        "mitigation_score",
        "detection_coverage",
    }
    unknown = set(record) - known
    if unknown:
        raise CatalogError(f"catalog entry {index} has unknown keys: {sorted(unknown)}")
    return Technique(
        id=record["id"],
        name=record["name"],
        phase=Phase.from_label(record["phase"]),
        description=record.get("description", ""),
        detection_score=float(record.get("detection_score", DEFAULT_SCORE)),
        mitigation_score=float(record.get("mitigation_score", DEFAULT_SCORE)),
        detection_coverage=float(record.get("detection_coverage", DEFAULT_SCORE)),
    )


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate a catalog from a JSON-array file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(records, list):
        raise CatalogError(f"{path}: top-level value must be a JSON array")
    techniques = [_technique_from_record(r, i) for i, r in enumerate(records)]
    return build_catalog(techniques)


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(catalog.to_records(), indent=2) + "\n", encoding="utf-8")


def techniques_in_phase(catalog: Catalog, phase: Phase) -> list[Technique]:
    """All techniques of one phase, in catalog order."""
    return [catalog.get(tid) for tid in catalog.by_phase[phase]]
