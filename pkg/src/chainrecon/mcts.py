"""PUCT tree search over phase-ordered technique chains.

Each simulation selects a path by the PUCT rule, evaluates the leaf with
a policy-value evaluator, expands it with priors blending the evaluator
policy and the MDP kernel row, and backpropagates the leaf value. At
terminal leaves the completed chain's total reward is backpropagated
instead, grounding search in the reward model. The most-visited path is
the inferred kill chain.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import Catalog, Phase, PHASES
from .embeddings import EmbeddingStore, PhasePriors
from .mdp import RolloutConfig, TransitionKernel, chain_payoff_reward, rollout_value
from .pvn import PvnWeights, PvnOutput, forward as pvn_forward, heuristic_evaluate
from .reward import PartialPath, ScoringContext, total_reward

EPS = 1e-12


class SearchError(Exception):
    """Raised for inconsistent search inputs."""


@dataclass
class SearchNode:
    """One tree node: a (phase, technique) state plus PUCT statistics."""

    state: tuple[Phase, str] | None  # None marks the synthetic pre-recon root
    prior: float = 1.0
    visit_count: int = 0
    total_value: float = 0.0
    children: dict[str, "SearchNode"] = field(default_factory=dict)
    expanded: bool = False
    terminal_value: float | None = None

    @property
    def mean_value(self) -> float:
        if self.visit_count == 0:
            return 0.0
        return self.total_value / self.visit_count


@dataclass(frozen=True)
class SearchConfig:
    """Search budget, exploration constant, and prior blend weights."""

    simulations: int = 2000
    c_puct: float = 1.5
    beta1: float = 1.0
    beta2: float = 1.0
    rng_seed: int = 0
    evaluator: str = "heuristic"  # or "trained-pvn"
    dirichlet_frac: float = 0.0  # root exploration noise, off by default
    dirichlet_alpha: float = 0.3

    def __post_init__(self):
        if self.simulations < 1:
            raise SearchError(f"simulations must be >= 1, got {self.simulations}")
        if self.c_puct <= 0:
            raise SearchError(f"c_puct must be positive, got {self.c_puct}")
        if self.beta1 < 0 or self.beta2 < 0 or self.beta1 + self.beta2 <= 0:
            raise SearchError("beta1 and beta2 must be >= 0 with beta1 + beta2 > 0")
        if self.evaluator not in ("heuristic", "trained-pvn"):
            raise SearchError(f"unknown evaluator {self.evaluator!r}")
        if not 0.0 <= self.dirichlet_frac < 1.0:
            raise SearchError(f"dirichlet_frac must be in [0, 1), got {self.dirichlet_frac}")


def puct_score(node: SearchNode, parent_visits: int, c_puct: float) -> float:
    """Mean value plus the prior-weighted exploration bonus."""
    exploration = c_puct * node.prior * math.sqrt(parent_visits) / (1 + node.visit_count)
    return node.mean_value + exploration


def blend_priors(pi: np.ndarray, p_mdp: np.ndarray, beta1: float, beta2: float) -> np.ndarray:
    """Log-linear pool of evaluator policy and kernel row, renormalized."""
    pi = np.asarray(pi, dtype=np.float64)
    p_mdp = np.asarray(p_mdp, dtype=np.float64)
    if pi.shape != p_mdp.shape:
        raise SearchError(f"prior length mismatch: {pi.shape} vs {p_mdp.shape}")
    logits = beta1 * np.log(np.maximum(pi, EPS)) + beta2 * np.log(np.maximum(p_mdp, EPS))
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def backpropagate(path_nodes: list[SearchNode], leaf_value: float) -> None:
    """Push one evaluation up the selected path."""
    for node in path_nodes:
        node.visit_count += 1
        node.total_value += leaf_value


# --- evaluators ---------------------------------------------------------------


class HeuristicEvaluator:
    """Prior-policy evaluator with memoized rollout values.

    Stands in for an untrained network: the policy is the phase prior over
    the candidates and the value is the mean rollout value under the
    chain-payoff step reward, so leaf estimates stay commensurate with the
    terminal payoffs backed up from completed chains.
    """

    def __init__(self, ctx: ScoringContext, rollout_cfg: RolloutConfig):
        self._priors = ctx.priors
        self._kernel = ctx.kernel
        self._rollout_cfg = rollout_cfg
        self._step_reward = chain_payoff_reward(ctx)
        self._cache: dict[tuple[Phase, str], float] = {}

    def _value(self, phase: Phase, tid: str) -> float:
        key = (phase, tid)
        if key not in self._cache:
            self._cache[key] = rollout_value(
                self._kernel, key, self._rollout_cfg, self._step_reward
            )
        return self._cache[key]

    def evaluate(self, phase: Phase, candidate_ids: tuple[str, ...]) -> PvnOutput:
        candidates = [(phase, tid) for tid in candidate_ids]
        return heuristic_evaluate(None, candidates, self._priors, self._value)


class PvnEvaluator:
    """Trained-network evaluator over the stored context and candidates."""

    def __init__(self, weights: PvnWeights, store: EmbeddingStore):
        self._weights = weights
        self._store = store

    def evaluate(self, phase: Phase, candidate_ids: tuple[str, ...]) -> PvnOutput:
        context = self._store.require_context()
        candidates = [self._store.get(tid) for tid in candidate_ids]
        return pvn_forward(self._weights, context, candidates)


# --- search -------------------------------------------------------------------


@dataclass
class SearchResult:
    path: PartialPath
    visit_distribution: dict[str, float]  # root children, catalog order
    trace: list[dict]
    root: SearchNode


def _next_phase(node: SearchNode) -> Phase | None:
    if node.state is None:
        return Phase.RECON
    return node.state[0].successor()


def _is_terminal(node: SearchNode, catalog: Catalog) -> bool:
    nxt = _next_phase(node)
    return nxt is None or not catalog.by_phase[nxt]


def _select_child(node: SearchNode, c_puct: float) -> SearchNode:
    best_tid = None
    best_score = -math.inf
    for tid, child in node.children.items():
        score = puct_score(child, node.visit_count, c_puct)
        if score > best_score or (score == best_score and (best_tid is None or tid < best_tid)):
            best_score = score
            best_tid = tid
    return node.children[best_tid]


def _expand(
    node: SearchNode,
    catalog: Catalog,
    kernel: TransitionKernel,
    evaluator,
    cfg: SearchConfig,
    rng: np.random.Generator | None = None,
    is_root: bool = False,
) -> PvnOutput:
    """Create all children of a non-terminal node with blended priors."""
    nxt = _next_phase(node)
    candidate_ids = catalog.by_phase[nxt]
    evaluation = evaluator.evaluate(nxt, candidate_ids)
    if node.state is None:
        # the synthetic root has no predecessor technique; use a flat
        # structural prior so the blend reduces to the evaluator policy
        p_mdp = np.full(len(candidate_ids), 1.0 / len(candidate_ids))
    else:
        row = kernel.row(node.state[1])
        p_mdp = np.array([row[tid] for tid in candidate_ids])
    blended = blend_priors(evaluation.policy, p_mdp, cfg.beta1, cfg.beta2)
    if is_root and cfg.dirichlet_frac > 0.0 and rng is not None:
        noise = rng.dirichlet(np.full(len(candidate_ids), cfg.dirichlet_alpha))
        blended = (1.0 - cfg.dirichlet_frac) * blended + cfg.dirichlet_frac * noise
    for tid, p in zip(candidate_ids, blended):
        node.children[tid] = SearchNode(state=(nxt, tid), prior=float(p))
    node.expanded = True
    return evaluation


def _steps_from(prefix: PartialPath | None, path_nodes: list[SearchNode]) -> tuple:
    # path_nodes[0] is the root: either synthetic or the prefix's last step,
    # which prefix.steps already contains
    steps = list(prefix.steps) if prefix is not None else []
    steps.extend(node.state for node in path_nodes[1:])
    return tuple(steps)


def search(
    catalog: Catalog,
    kernel: TransitionKernel,
    priors: PhasePriors,
    evaluator,
    cfg: SearchConfig,
    ctx: ScoringContext,
    prefix: PartialPath | None = None,
) -> SearchResult:
    """Run the full simulation budget and extract the most-visited chain.

    The root is a synthetic pre-recon node unless a prefix is given, in
    which case search continues the chain from the prefix's last step.
    Deterministic for fixed inputs and seed; ties break toward the
    lexicographically lowest technique id.
    """
    del priors  # reachable through the evaluator; kept for call-shape symmetry
    root_state = prefix.steps[-1] if prefix is not None else None
    root = SearchNode(state=root_state)
    if _is_terminal(root, catalog):
        raise SearchError("search root is already at the terminal phase")
    rng = np.random.default_rng(cfg.rng_seed)
    trace: list[dict] = []

    for sim in range(cfg.simulations):
        node = root
        path_nodes = [root]
        while node.expanded:
            node = _select_child(node, cfg.c_puct)
            path_nodes.append(node)
        record: dict = {
            "simulation": sim,
            "edges": [n.state[1] for n in path_nodes if n is not root],
        }
        if _is_terminal(node, catalog):
            if node.terminal_value is None:
                chain = PartialPath(_steps_from(prefix, path_nodes))
                node.terminal_value = total_reward(chain, ctx).total
            value = node.terminal_value
            record["leaf"] = {"kind": "terminal"}
        else:
            evaluation = _expand(
                node, catalog, kernel, evaluator, cfg, rng=rng, is_root=node is root
            )
            value = evaluation.value
            record["leaf"] = {
                "kind": "expanded",
                "candidates": list(node.children.keys()),
                "policy": [float(p) for p in evaluation.policy],
                "blended": [child.prior for child in node.children.values()],
            }
        backpropagate(path_nodes, value)
        record["value"] = value
        trace.append(record)

    path = _extract_path(root, prefix, catalog, kernel, evaluator, cfg)
    total_visits = sum(child.visit_count for child in root.children.values())
    visit_distribution = {
        tid: (child.visit_count / total_visits if total_visits > 0 else 0.0)
        for tid, child in root.children.items()
    }
    return SearchResult(path=path, visit_distribution=visit_distribution, trace=trace, root=root)


def _extract_path(
    root: SearchNode,
    prefix: PartialPath | None,
    catalog: Catalog,
    kernel: TransitionKernel,
    evaluator,
    cfg: SearchConfig,
) -> PartialPath:
    """Follow max-visit children to the terminal phase.

    Nodes never expanded during simulation are expanded here (without
    backpropagation) so the chain always completes; their all-zero visit
    counts fall back to the id tie-break.
    """
    steps = list(prefix.steps) if prefix is not None else []
    node = root
    while not _is_terminal(node, catalog):
        if not node.expanded:
            _expand(node, catalog, kernel, evaluator, cfg)
        best_tid = None
        best_visits = -1
        for tid, child in node.children.items():
            if child.visit_count > best_visits or (
                child.visit_count == best_visits and tid < best_tid
            ):
                best_visits = child.visit_count
                best_tid = tid
        node = node.children[best_tid]
        steps.append(node.state)
    return PartialPath(tuple(steps))


def path_statistics(result: SearchResult, prefix: PartialPath | None = None) -> list[dict]:
    """Per-step N and Q along the extracted chain (new steps only)."""
    skip = len(prefix.steps) if prefix is not None else 0
    node = result.root
    stats = []
    for phase, tid in result.path.steps[skip:]:
        node = node.children[tid]
        stats.append(
            {"phase": phase.label, "technique": tid, "N": node.visit_count, "Q": node.mean_value}
        )
    return stats


def merge_trees(roots: list[SearchNode]) -> SearchNode:
    """Sum visit statistics over root-parallel trees with shared structure."""
    if not roots:
        raise SearchError("nothing to merge")
    merged = SearchNode(state=roots[0].state, prior=roots[0].prior)
    merged.visit_count = sum(r.visit_count for r in roots)
    merged.total_value = sum(r.total_value for r in roots)
    merged.expanded = any(r.expanded for r in roots)
    merged.terminal_value = roots[0].terminal_value
    child_ids: list[str] = []
    for r in roots:
        for tid in r.children:
            if tid not in child_ids:
                child_ids.append(tid)
    for tid in child_ids:
        merged.children[tid] = merge_trees([r.children[tid] for r in roots if tid in r.children])
    return merged


def root_parallel_search(
    catalog: Catalog,
    kernel: TransitionKernel,
    priors: PhasePriors,
    evaluator,
    cfg: SearchConfig,
    ctx: ScoringContext,
    jobs: int,
    prefix: PartialPath | None = None,
) -> SearchResult:
    """Independent trees on shifted seeds, merged by summing visit counts."""
    if jobs < 1:
        raise SearchError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1:
        return search(catalog, kernel, priors, evaluator, cfg, ctx, prefix=prefix)
    results = [
        search(catalog, kernel, priors, evaluator, replace(cfg, rng_seed=cfg.rng_seed + j),
               ctx, prefix=prefix)
        for j in range(jobs)
    ]
    merged_root = merge_trees([r.root for r in results])
    path = _extract_path(merged_root, prefix, catalog, kernel, evaluator, cfg)
    total_visits = sum(child.visit_count for child in merged_root.children.values())
    visit_distribution = {
        tid: (child.visit_count / total_visits if total_visits > 0 else 0.0)
        for tid, child in merged_root.children.items()
    }
    trace = []
    for j, r in enumerate(results):
        for record in r.trace:
            trace.append({"job": j, **record})
    return SearchResult(
        path=path, visit_distribution=visit_distribution, trace=trace, root=merged_root
    )


# --- training data --------------------------------------------------------------


@dataclass(frozen=True)
class TrainingSample:
    """One self-play decision: visit targets plus a rollout value target."""

    context: object  # the context embedding used for this episode
    phase: Phase
    candidate_ids: tuple[str, ...]
    pi_target: np.ndarray
    v_target: float


def generate_training_data(
    catalog: Catalog,
    kernel: TransitionKernel,
    priors: PhasePriors,
    evaluator,
    cfg: SearchConfig,
    num_episodes: int,
    ctx: ScoringContext,
    rollout_cfg: RolloutConfig,
) -> list[TrainingSample]:
    """Per-phase re-search over self-play episodes.

    Each phase decision emits the root visit distribution as the policy
    target and the chain-payoff rollout value of the chosen state as the
    value target, matching the value definition the heuristic evaluator
    searches with; moves are sampled by visit share for diversity.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    step_fn = chain_payoff_reward(ctx)
    value_memo: dict[tuple[Phase, str], float] = {}
    context = ctx.store.context
    samples: list[TrainingSample] = []
    for _ in range(num_episodes):
        prefix: PartialPath | None = None
        for phase in PHASES:
            result = search(catalog, kernel, priors, evaluator, cfg, ctx, prefix=prefix)
            candidate_ids = tuple(result.visit_distribution.keys())
            pi_target = np.array(list(result.visit_distribution.values()))
            chosen = candidate_ids[int(rng.choice(len(candidate_ids), p=pi_target))]
            state = (phase, chosen)
            if state not in value_memo:
                value_memo[state] = rollout_value(kernel, state, rollout_cfg, step_fn)
            samples.append(
                TrainingSample(
                    context=context,
                    phase=phase,
                    candidate_ids=candidate_ids,
                    pi_target=pi_target,
                    v_target=value_memo[state],
                )
            )
            prefix = prefix.extended(*state) if prefix is not None else PartialPath((state,))
    return samples


# --- exports --------------------------------------------------------------------


def trace_to_json_obj(result: SearchResult) -> dict:
    return {"simulations": result.trace}


def tree_to_dot(root: SearchNode, max_nodes: int = 500) -> str:
    """Graphviz rendering of the search tree: nodes id/N/Q, edges P."""
    lines = ["digraph search {", "  node [shape=box, fontname=monospace];"]
    counter = 0

    def visit(node: SearchNode, dot_id: str) -> None:
        nonlocal counter
        label = node.state[1] if node.state is not None else "root"
        lines.append(f'  {dot_id} [label="{label}/{node.visit_count}/{node.mean_value:.3f}"];')
        for tid, child in node.children.items():
            counter += 1
            if counter > max_nodes:
                return
            child_id = f"n{counter}"
            lines.append(f'  {dot_id} -> {child_id} [label="{child.prior:.3f}"];')
            visit(child, child_id)

    visit(root, "n0")
    lines.append("}")
    return "\n".join(lines) + "\n"
