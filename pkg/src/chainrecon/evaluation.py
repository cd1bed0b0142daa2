"""Behavioral evaluation: nearest-neighbor alignment and envelope geometry.

The alignment score measures how close each predicted technique lies to
an actor's historical behavior in embedding space. The envelope report
projects history and predictions to two dimensions and wraps the history
in a convex hull, producing plot data rather than rendered figures.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingStore, cosine


class EvaluationError(Exception):
    """Raised for degenerate or inconsistent evaluation inputs."""


@dataclass(frozen=True)
class ActorHistory:
    """A named actor and the set of techniques historically attributed to it."""

    actor: str
    technique_ids: frozenset[str]

    def __post_init__(self):
        if not self.actor:
            raise EvaluationError("actor name must be nonempty")
        if not self.technique_ids:
            raise EvaluationError(f"history for {self.actor!r} must be nonempty")
        for tid in self.technique_ids:
            if not isinstance(tid, str) or not tid:
                raise EvaluationError(f"history for {self.actor!r} has an invalid id: {tid!r}")

    @property
    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.technique_ids))


def load_history(path: str) -> ActorHistory:
    """Read `{"actor": ..., "techniques": [...]}` from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"{path}: malformed JSON at line {exc.lineno}") from None
    if not isinstance(obj, dict) or set(obj) != {"actor", "techniques"}:
        raise EvaluationError(f"{path}: expected keys 'actor' and 'techniques'")
    techniques = obj["techniques"]
    if not isinstance(techniques, list):
        raise EvaluationError(f"{path}: 'techniques' must be a list")
    return ActorHistory(actor=obj["actor"], technique_ids=frozenset(techniques))


def nnba(predicted: Iterable[str], history: ActorHistory, store: EmbeddingStore) -> float:
    """Mean over predictions of the minimum cosine distance to any history member.

    Predictions that literally appear in the history contribute an exact
    zero; iteration is over sorted ids so set ordering never affects the
    result.
    """
    predicted_ids = sorted(set(predicted))
    if not predicted_ids:
        raise EvaluationError("predicted set must be nonempty")
    history_ids = history.sorted_ids
    history_vecs = [store.get(tid) for tid in history_ids]
    distances = []
    for pid in predicted_ids:
        if pid in history.technique_ids:
            distances.append(0.0)
            continue
        vec = store.get(pid)
        distances.append(min(1.0 - cosine(vec, h) for h in history_vecs))
    return math.fsum(distances) / len(distances)


# --- geometry -------------------------------------------------------------------


def _as_array(vec) -> np.ndarray:
    values = getattr(vec, "values", vec)
    return np.asarray(values, dtype=np.float64)


@dataclass(frozen=True)
class PcaResult:
    """Centered projection onto the top principal directions."""

    projected: np.ndarray  # (n, k)
    components: np.ndarray  # (k, d), rows are unit loadings
    mean: np.ndarray  # (d,)
    explained_variance_ratio: np.ndarray  # (k,)

    def transform(self, vec) -> np.ndarray:
        return (_as_array(vec) - self.mean) @ self.components.T


def pca_project(vectors: Sequence, out_dims: int = 2) -> PcaResult:
    """Eigen-decomposition of the explicit covariance of the input set.

    Loadings follow a fixed sign convention: the first nonzero entry of
    each component is positive, so results are deterministic across runs.
    """
    matrix = np.array([_as_array(v) for v in vectors], dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 3:
        raise EvaluationError(f"need at least 3 vectors, got {matrix.shape[0] if matrix.ndim == 2 else 0}")
    n, dim = matrix.shape
    if dim < out_dims:
        raise EvaluationError(f"need dimension >= {out_dims}, got {dim}")
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    if not np.any(np.abs(centered) > 1e-12):
        raise EvaluationError("degenerate input: all vectors identical")
    covariance = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1][:out_dims]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        for entry in row:
            if abs(entry) > 1e-12:
                if entry < 0:
                    row *= -1.0
                break
    clamped = np.maximum(eigenvalues, 0.0)
    total = clamped.sum()
    if total <= 0.0:
        raise EvaluationError("degenerate input: zero total variance")
    ratios = clamped[order] / total
    return PcaResult(
        projected=centered @ components.T,
        components=components,
        mean=mean,
        explained_variance_ratio=ratios,
    )


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points: Sequence[tuple[float, float]]) -> list[int]:
    """Monotone-chain hull returning counterclockwise vertex indices.

    Collinear boundary points are excluded. Fewer than 3 points, or a
    fully collinear set, is a degenerate input.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    if len(pts) < 3:
        raise EvaluationError(f"need at least 3 points, got {len(pts)}")
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    lower: list[int] = []
    for i in order:
        while len(lower) >= 2 and _cross(pts[lower[-2]], pts[lower[-1]], pts[i]) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in reversed(order):
        while len(upper) >= 2 and _cross(pts[upper[-2]], pts[upper[-1]], pts[i]) <= 0:
            upper.pop()
        upper.append(i)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise EvaluationError("degenerate input: all points collinear")
    return hull


def point_in_convex_hull(
    point: tuple[float, float],
    hull_points: Sequence[tuple[float, float]],
    tolerance: float = 1e-9,
) -> bool:
    """Membership test for a counterclockwise convex polygon (boundary counts)."""
    count = len(hull_points)
    for i in range(count):
        if _cross(hull_points[i], hull_points[(i + 1) % count], point) < -tolerance:
            return False
    return True


# --- envelope report --------------------------------------------------------------


CENTROID_ID = "__centroid__"


@dataclass(frozen=True)
class ProjectedPoint:
    id: str
    x: float
    y: float
    tag: str  # history, predicted, or centroid
    source: str | None = None  # which predictor produced a predicted point


@dataclass(frozen=True)
class EnvelopeReport:
    """Plot data: projected points, the history hull, and variance ratios."""

    points: tuple[ProjectedPoint, ...]
    hull_indices: tuple[int, ...]  # indices into points, history entries only
    explained_variance_ratio: tuple[float, float] = field(default=(0.0, 0.0))


def envelope_report(
    history: ActorHistory,
    predicted_by_source: Mapping[str, Iterable[str]],
    store: EmbeddingStore,
) -> EnvelopeReport:
    """Project history and predictions together and hull the history.

    The projection is fit on the union of all involved embeddings so
    predicted points need no out-of-sample convention; the centroid is
    the mean of the projected history points.
    """
    history_ids = history.sorted_ids
    source_names = sorted(predicted_by_source)
    predictions = {name: sorted(set(predicted_by_source[name])) for name in source_names}
    fit_ids = sorted(set(history_ids).union(*(predictions[name] for name in source_names)))
    fit_result = pca_project([store.get(tid) for tid in fit_ids])

    points: list[ProjectedPoint] = []
    history_xy: list[tuple[float, float]] = []
    for tid in history_ids:
        x, y = fit_result.transform(store.get(tid))
        points.append(ProjectedPoint(id=tid, x=float(x), y=float(y), tag="history"))
        history_xy.append((float(x), float(y)))
    for name in source_names:
        for tid in predictions[name]:
            x, y = fit_result.transform(store.get(tid))
            points.append(
                ProjectedPoint(id=tid, x=float(x), y=float(y), tag="predicted", source=name)
            )
    cx = math.fsum(p[0] for p in history_xy) / len(history_xy)
    cy = math.fsum(p[1] for p in history_xy) / len(history_xy)
    points.append(ProjectedPoint(id=CENTROID_ID, x=cx, y=cy, tag="centroid"))

    hull = convex_hull_2d(history_xy)
    ratios = fit_result.explained_variance_ratio
    return EnvelopeReport(
        points=tuple(points),
        hull_indices=tuple(hull),
        explained_variance_ratio=(float(ratios[0]), float(ratios[1])),
    )


def export_envelope_csv(report: EnvelopeReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "tag", "x", "y"])
        for point in report.points:
            writer.writerow([point.id, point.tag, str(point.x), str(point.y)])


def export_envelope_json(report: EnvelopeReport, path: str) -> None:
    obj = {
        "points": [
            {
                "id": p.id,
                "tag": p.tag,
                "source": p.source,
                "x": p.x,
                "y": p.y,
            }
            for p in report.points
        ],
        "hull_indices": list(report.hull_indices),
        "explained_variance_ratio": list(report.explained_variance_ratio),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
