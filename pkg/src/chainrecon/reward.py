"""Multi-objective scoring of partial kill-chain paths.

A path is scored as a weighted signed sum of five positive components
(relevance, cohesion, transition plausibility, prior coverage, stealth)
and three penalties (detection, mitigation, prior over-reliance). All
component functions are pure; identical inputs give bitwise-identical
breakdowns.
"""

import math
from dataclasses import dataclass, fields

from .catalog import Catalog, Phase
from .embeddings import EmbeddingStore, PhasePriors, cosine


class RewardError(Exception):
    """Raised when a path cannot be scored against the given context."""


@dataclass(frozen=True)
class PartialPath:
    """An ordered prefix of a kill chain: one technique per visited phase.

    Phases must strictly increase by ordinal; a full chain runs recon
    through objectives.
    """

    steps: tuple[tuple[Phase, str], ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise RewardError("a partial path needs at least one step")
        ordinals = [phase.value for phase, _ in self.steps]
        for prev, nxt in zip(ordinals, ordinals[1:]):
            if nxt <= prev:
                raise RewardError(f"path phases must strictly increase, got ordinals {ordinals}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def technique_ids(self) -> tuple[str, ...]:
        return tuple(tid for _, tid in self.steps)

    def extended(self, phase: Phase, technique_id: str) -> "PartialPath":
        return PartialPath(self.steps + ((phase, technique_id),))


def make_path(steps) -> PartialPath:
    """Build a PartialPath from any iterable of (phase, technique id)."""
    return PartialPath(tuple((Phase(p), tid) for p, tid in steps))


@dataclass(frozen=True)
class RewardWeights:
    """Mixing weights for the signed reward sum; all default to 1."""

    w_rel: float = 1.0
    w_coh: float = 1.0
    w_trans: float = 1.0
    w_cov: float = 1.0
    w_stealth: float = 1.0
    w_det: float = 1.0
    w_mit: float = 1.0
    w_prior: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise RewardError(f"{f.name}={value!r} must be finite and >= 0")
        if self.w_rel + self.w_coh + self.w_trans + self.w_cov + self.w_stealth <= 0:
            raise RewardError("at least one positive-component weight must be > 0")

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-component scores plus the weighted signed total.

    log_trans is the summed log transition probability, recorded for
    diagnostics only; the total uses the raw product form.
    """

    rel: float
    coh: float
    trans: float
    cov: float
    stealth: float
    det_pen: float
    mit_pen: float
    prior_pen: float
    total: float
    log_trans: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_membership(path: PartialPath, catalog: Catalog) -> None:
    for phase, tid in path.steps:
        technique = catalog.get(tid)
        if technique.phase is not phase:
            raise RewardError(
                f"technique {tid} belongs to phase {technique.phase.label!r}, "
                f"not {phase.label!r}"
            )


def relevance(path: PartialPath, store: EmbeddingStore) -> float:
    """Mean cosine between the context vector and each step's technique."""
    context = store.require_context()
    sims = [cosine(context, store.get(tid)) for tid in path.technique_ids]
    return sum(sims) / len(sims)


def cohesion(path: PartialPath, store: EmbeddingStore) -> float:
    """Mean cosine between consecutive techniques; 1 for single-step paths."""
    ids = path.technique_ids
    if len(ids) == 1:
        return 1.0
    sims = [cosine(store.get(a), store.get(b)) for a, b in zip(ids, ids[1:])]
    return sum(sims) / len(sims)


def transition_plausibility(path: PartialPath, kernel) -> float:
    """Product of kernel probabilities along the path; 1 for a single step."""
    ids = path.technique_ids
    product = 1.0
    for a, b in zip(ids, ids[1:]):
        product *= kernel.probability(a, b)
    return product


def log_transition_plausibility(path: PartialPath, kernel) -> float:
    ids = path.technique_ids
    return sum(math.log(kernel.probability(a, b)) for a, b in zip(ids, ids[1:]))


def coverage(path: PartialPath, priors: PhasePriors) -> float:
    """Mean phase-prior probability of the chosen techniques."""
    values = [priors.prior(phase, tid) for phase, tid in path.steps]
    return sum(values) / len(values)


def _logistic(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def stealth(path: PartialPath, catalog: Catalog) -> float:
    """One minus the mean logistic-squashed detection score."""
    _check_membership(path, catalog)
    values = [_logistic(catalog.get(tid).detection_score) for tid in path.technique_ids]
    return 1.0 - sum(values) / len(values)


def detection_penalty(path: PartialPath, catalog: Catalog) -> float:
    """Mean detection coverage over the path's techniques."""
    _check_membership(path, catalog)
    values = [catalog.get(tid).detection_coverage for tid in path.technique_ids]
    return sum(values) / len(values)


def mitigation_penalty(path: PartialPath, catalog: Catalog) -> float:
    """Mean mitigation score over the path's techniques."""
    _check_membership(path, catalog)
    values = [catalog.get(tid).mitigation_score for tid in path.technique_ids]
    return sum(values) / len(values)


def prior_penalty(path: PartialPath, priors: PhasePriors) -> float:
    """Mean complement of the phase prior; always 1 - coverage."""
    values = [1.0 - priors.prior(phase, tid) for phase, tid in path.steps]
    return sum(values) / len(values)


@dataclass(frozen=True)
class ScoringContext:
    """Everything needed to score a path, bundled for the search layers."""

    catalog: Catalog
    store: EmbeddingStore
    kernel: "object"  # TransitionKernel; typed loosely to avoid an import cycle
    priors: PhasePriors
    weights: RewardWeights


def total_reward(
    path: PartialPath, ctx: ScoringContext, weights: RewardWeights | None = None
) -> RewardBreakdown:
    """Score a path with every component and the weighted signed total."""
    w = weights if weights is not None else ctx.weights
    rel = relevance(path, ctx.store)
    coh = cohesion(path, ctx.store)
    trans = transition_plausibility(path, ctx.kernel)
    cov = coverage(path, ctx.priors)
    ste = stealth(path, ctx.catalog)
    det = detection_penalty(path, ctx.catalog)
    mit = mitigation_penalty(path, ctx.catalog)
    pri = prior_penalty(path, ctx.priors)
    total = (
        w.w_rel * rel
        + w.w_coh * coh
        + w.w_trans * trans
        + w.w_cov * cov
        + w.w_stealth * ste
        - w.w_det * det
        - w.w_mit * mit
        - w.w_prior * pri
    )
    return RewardBreakdown(
        rel=rel,
        coh=coh,
        trans=trans,
        cov=cov,
        stealth=ste,
        det_pen=det,
        mit_pen=mit,
        prior_pen=pri,
        total=total,
        log_trans=log_transition_plausibility(path, ctx.kernel),
    )
