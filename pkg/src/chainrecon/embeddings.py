"""Unit-normalized embedding store and phase-conditioned priors.

Embedding files are JSON Lines, one vector per row; the reserved id
``__context__`` carries the report-level context vector. Vectors are kept
at full precision in memory and quantized to 32-bit on write.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import Catalog, Phase, PHASES

CONTEXT_ID = "__context__"


class EmbeddingError(Exception):
    """Raised for malformed embedding files or store misuse."""


def normalize(values: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm.

    Vectors already unit-length (within 1e-12) are returned unchanged so
    repeated normalization is bitwise idempotent.
    """
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError("cannot normalize a zero vector")
    if abs(norm - 1.0) < 1e-12:
        return vec
    return vec / norm


@dataclass(frozen=True)
class Embedding:
    """A unit vector keyed by technique id (or the context id)."""

    id: str
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity of two stored unit vectors, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise EmbeddingError(f"dimension mismatch: {a.id} has dim {a.dim}, {b.id} has dim {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


@dataclass
class EmbeddingStore:
    """All technique vectors for one run, plus an optional context vector."""

    technique_vectors: dict[str, Embedding]
    context: Embedding | None
    dim: int

    def get(self, technique_id: str) -> Embedding:
        try:
            return self.technique_vectors[technique_id]
        except KeyError:
            raise EmbeddingError(f"no embedding for technique id {technique_id!r}") from None

    def require_context(self) -> Embedding:
        if self.context is None:
            raise EmbeddingError(f"store has no context embedding (reserved id {CONTEXT_ID!r})")
        return self.context

    def context_cosine(self, technique_id: str) -> float:
        return cosine(self.require_context(), self.get(technique_id))

    def check_covers(self, catalog: Catalog) -> None:
        """Ensure every catalog technique has exactly one vector."""
        missing = [t.id for t in catalog.techniques if t.id not in self.technique_vectors]
        if missing:
            raise EmbeddingError(f"missing embeddings for catalog techniques: {missing}")


def build_store(vectors: dict[str, np.ndarray]) -> EmbeddingStore:
    """Assemble a store from raw id -> vector pairs, normalizing each."""
    technique_vectors: dict[str, Embedding] = {}
    context = None
    dim = None
    for vid, raw in vectors.items():
        vec = normalize(raw)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise EmbeddingError(f"embedding {vid!r} has dim {vec.shape[0]}, expected {dim}")
        emb = Embedding(id=vid, values=vec)
        if vid == CONTEXT_ID:
            context = emb
        else:
            technique_vectors[vid] = emb
    if dim is None:
        raise EmbeddingError("no embeddings given")
    return EmbeddingStore(technique_vectors=technique_vectors, context=context, dim=int(dim))


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingStore:
    """Load a JSON-Lines embedding file, normalizing every vector.

    All rows must share one dimension (and match expected_dim when given);
    zero vectors and duplicate ids are rejected.
    """
    technique_vectors: dict[str, Embedding] = {}
    context = None
    dim = expected_dim
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(row, dict) or "id" not in row or "vec" not in row:
                raise EmbeddingError(f"{path}:{lineno}: row must be an object with 'id' and 'vec'")
            vid = row["id"]
            if vid in seen:
                raise EmbeddingError(f"{path}:{lineno}: duplicate embedding id {vid!r}")
            seen.add(vid)
            raw = np.asarray(row["vec"], dtype=np.float64)
            if raw.ndim != 1 or raw.shape[0] == 0:
                raise EmbeddingError(f"{path}:{lineno}: vector for {vid!r} is not a flat list")
            if dim is None:
                dim = int(raw.shape[0])
            elif raw.shape[0] != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: embedding {vid!r} has dim {raw.shape[0]}, expected {dim}"
                )
            if float(np.linalg.norm(raw)) == 0.0:
                raise EmbeddingError(f"{path}:{lineno}: embedding {vid!r} has zero norm")
            emb = Embedding(id=vid, values=normalize(raw))
            if vid == CONTEXT_ID:
                context = emb
            else:
                technique_vectors[vid] = emb
    if dim is None:
        raise EmbeddingError(f"{path}: file contains no embeddings")
    return EmbeddingStore(technique_vectors=technique_vectors, context=context, dim=int(dim))


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store back to JSON Lines at 32-bit precision."""
    with open(path, "w", encoding="utf-8") as handle:
        entries = list(store.technique_vectors.values())
        if store.context is not None:
            entries.append(store.context)
        for emb in entries:
            vec32 = emb.values.astype(np.float32)
            handle.write(json.dumps({"id": emb.id, "vec": [float(x) for x in vec32]}) + "\n")


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


@dataclass(frozen=True)
class PhasePriors:
    """Per-phase probability distributions over that phase's techniques."""

    per_phase: dict[Phase, dict[str, float]] = field(repr=False)

    def prior(self, phase: Phase, technique_id: str) -> float:
        row = self.per_phase[phase]
        try:
            return row[technique_id]
        except KeyError:
            raise EmbeddingError(
                f"no prior for technique {technique_id!r} in phase {phase.label!r}"
            ) from None

    def row(self, phase: Phase) -> dict[str, float]:
        return self.per_phase[phase]


def compute_phase_priors(
    store: EmbeddingStore, catalog: Catalog, temperature: float = 5.0
) -> PhasePriors:
    """Softmax of temperature-scaled context cosines within each phase.

    Temperature 0 yields a uniform prior per phase; higher values sharpen
    toward the techniques most similar to the context vector.
    """
    store.require_context()
    per_phase: dict[Phase, dict[str, float]] = {}
    for phase in PHASES:
        ids = catalog.by_phase[phase]
        scores = np.array([temperature * store.context_cosine(tid) for tid in ids])
        probs = _stable_softmax(scores)
        per_phase[phase] = {tid: float(p) for tid, p in zip(ids, probs)}
    return PhasePriors(per_phase=per_phase)


def load_prior_override(path: str | Path, catalog: Catalog) -> PhasePriors:
    """Load externally produced phase priors and renormalize per phase.

    The file maps phase names to nonnegative weights over that phase's
    technique ids; ids omitted within a listed phase get probability 0.
    Every phase must be present with at least one positive weight.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EmbeddingError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise EmbeddingError(f"{path}: top-level value must be a JSON object")
    unknown_phases = set(data) - {p.label for p in PHASES}
    if unknown_phases:
        raise EmbeddingError(f"{path}: unknown phase names: {sorted(unknown_phases)}")
    per_phase: dict[Phase, dict[str, float]] = {}
    for phase in PHASES:
        weights = data.get(phase.label)
        if weights is None:
            raise EmbeddingError(f"{path}: phase {phase.label!r} missing from prior override")
        phase_ids = catalog.by_phase[phase]
        for tid, w in weights.items():
            if tid not in catalog:
                raise EmbeddingError(f"{path}: unknown technique id {tid!r} in phase {phase.label!r}")
            if catalog.get(tid).phase is not phase:
                raise EmbeddingError(
                    f"{path}: technique {tid!r} listed under {phase.label!r} "
                    f"belongs to {catalog.get(tid).phase.label!r}"
                )
            if not math.isfinite(w) or w < 0:
                raise EmbeddingError(f"{path}: weight for {tid!r} must be finite and >= 0")
        total = sum(weights.get(tid, 0.0) for tid in phase_ids)
        if total <= 0.0:
            raise EmbeddingError(f"{path}: phase {phase.label!r} has all-zero weight")
        per_phase[phase] = {tid: weights.get(tid, 0.0) / total for tid in phase_ids}
    return PhasePriors(per_phase=per_phase)
