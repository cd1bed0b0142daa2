"""Similarity-softmax transition kernel and discounted rollout values.

Transitions exist only between adjacent phases: each non-terminal
technique gets one stochastic row over the techniques of the next phase,
softmaxed from temperature-scaled embedding cosines. Rollout values are
Monte Carlo estimates of the discounted sum of per-step rewards along
kernel-sampled forward trajectories.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .catalog import Catalog, Phase, PHASES
from .embeddings import EmbeddingStore, cosine, _stable_softmax
from .reward import PartialPath, RewardWeights, ScoringContext, total_reward


class KernelError(Exception):
    """Raised for kernel construction or lookup failures."""


# A step reward maps (prefix so far, next step) to an immediate reward.
StepReward = Callable[[PartialPath, tuple[Phase, str]], float]


@dataclass(frozen=True)
class TransitionKernel:
    """Per-technique stochastic rows over the successor phase.

    Row key order is fixed at build time and drives inverse-CDF sampling,
    so a kernel is reproducible from its serialized form.
    """

    alpha: float
    rows: dict[str, dict[str, float]] = field(repr=False)

    def row(self, technique_id: str) -> dict[str, float]:
        try:
            return self.rows[technique_id]
        except KeyError:
            raise KernelError(f"kernel has no row for technique {technique_id!r}") from None

    def probability(self, technique_id: str, next_id: str) -> float:
        row = self.row(technique_id)
        try:
            return row[next_id]
        except KeyError:
            raise KernelError(
                f"kernel row for {technique_id!r} has no entry for {next_id!r}"
            ) from None

    def to_json_obj(self) -> dict:
        return {"alpha": self.alpha, "rows": {tid: dict(row) for tid, row in self.rows.items()}}


def build_kernel(catalog: Catalog, store: EmbeddingStore, alpha: float = 4.0) -> TransitionKernel:
    """Softmax rows of alpha-scaled cosines toward every next-phase technique.

    Rows are numerically stabilized by max subtraction; terminal-phase
    techniques get no row.
    """
    if alpha < 0:
        raise KernelError(f"alpha must be >= 0, got {alpha}")
    store.check_covers(catalog)
    rows: dict[str, dict[str, float]] = {}
    for phase in PHASES:
        nxt = phase.successor()
        if nxt is None:
            continue
        successor_ids = catalog.by_phase[nxt]
        for tid in catalog.by_phase[phase]:
            source = store.get(tid)
            scores = np.array([alpha * cosine(source, store.get(u)) for u in successor_ids])
            probs = _stable_softmax(scores)
            rows[tid] = {u: float(p) for u, p in zip(successor_ids, probs)}
    return TransitionKernel(alpha=alpha, rows=rows)


def save_kernel(kernel: TransitionKernel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(kernel.to_json_obj(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_kernel(path: str | Path) -> TransitionKernel:
    """Load a kernel export, checking row stochasticity."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or "alpha" not in data or "rows" not in data:
        raise KernelError(f"{path}: expected an object with 'alpha' and 'rows'")
    rows = {}
    for tid, row in data["rows"].items():
        total = sum(row.values())
        if abs(total - 1.0) > 1e-6:
            raise KernelError(f"{path}: row for {tid!r} sums to {total}, expected 1")
        if any(p < 0 for p in row.values()):
            raise KernelError(f"{path}: row for {tid!r} has a negative entry")
        rows[tid] = {k: float(v) for k, v in row.items()}
    return TransitionKernel(alpha=float(data["alpha"]), rows=rows)


@dataclass(frozen=True)
class RolloutConfig:
    """Discounted-rollout settings; horizon counts path steps, not edges."""

    gamma: float = 0.9
    num_rollouts: int = 64
    horizon: int = 7
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise KernelError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.num_rollouts < 1:
            raise KernelError(f"num_rollouts must be >= 1, got {self.num_rollouts}")
        if not 1 <= self.horizon <= 7:
            raise KernelError(f"horizon must be in 1..7, got {self.horizon}")


def _sample_from_row(row: dict[str, float], rng: np.random.Generator) -> str:
    # Inverse-CDF walk over stored row order keeps sampling reproducible.
    u = rng.random()
    cumulative = 0.0
    last = None
    for tid, p in row.items():
        cumulative += p
        last = tid
        if u < cumulative:
            return tid
    return last  # rounding residue at the top of the CDF


def sample_rollout(
    kernel: TransitionKernel,
    start: tuple[Phase, str],
    cfg: RolloutConfig,
    rng: np.random.Generator,
) -> PartialPath:
    """Sample forward phase-by-phase until objectives or the horizon."""
    phase, tid = start
    steps = [(phase, tid)]
    while len(steps) < cfg.horizon:
        current_phase, current_id = steps[-1]
        nxt = current_phase.successor()
        if nxt is None:
            break
        next_id = _sample_from_row(kernel.row(current_id), rng)
        steps.append((nxt, next_id))
    return PartialPath(tuple(steps))


def incremental_step_reward(
    ctx: ScoringContext, weights: RewardWeights | None = None
) -> StepReward:
    """Per-transition reward as the increment of the total path reward.

    Appending a step changes the path total; the difference is the
    immediate reward, which telescopes back to the full-path reward when
    undiscounted.
    """

    def step(prefix: PartialPath, nxt: tuple[Phase, str]) -> float:
        extended = prefix.extended(*nxt)
        return total_reward(extended, ctx, weights).total - total_reward(prefix, ctx, weights).total

    return step


def constant_step_reward(value: float) -> StepReward:
    def step(prefix: PartialPath, nxt: tuple[Phase, str]) -> float:
        return value

    return step


def chain_payoff_reward(
    ctx: ScoringContext, weights: RewardWeights | None = None
) -> StepReward:
    """Zero per transition; the completed chain's total reward at the end.

    Interior transitions contribute nothing, so the rollout value of a
    state estimates the (discounted) total reward of chains completed from
    it. That keeps values from different depths on the same scale as
    full-chain rewards, which matters when they are compared against
    terminal payoffs during search.
    """

    def step(prefix: PartialPath, nxt: tuple[Phase, str]) -> float:
        if nxt[0] is Phase.OBJECTIVES:
            return total_reward(prefix.extended(*nxt), ctx, weights).total
        return 0.0

    return step


def rollout_value(
    kernel: TransitionKernel,
    start: tuple[Phase, str],
    cfg: RolloutConfig,
    step_reward: StepReward,
) -> float:
    """Monte Carlo mean of discounted step rewards over sampled rollouts.

    Deterministic for a fixed seed; rollout returns are summed then
    divided so aggregation is order-independent.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    total = 0.0
    for _ in range(cfg.num_rollouts):
        path = sample_rollout(kernel, start, cfg, rng)
        discount = 1.0
        value = 0.0
        for k in range(1, len(path)):
            prefix = PartialPath(path.steps[:k])
            value += discount * step_reward(prefix, path.steps[k])
            discount *= cfg.gamma
        total += value
    return total / cfg.num_rollouts
