"""Shared corpus builders, brute-force oracles, and acceptance reporting."""

import itertools

import numpy as np

import chainrecon as cr
from chainrecon.catalog import PHASES, Phase, Technique


def make_corpus(seed: int, dim: int = 8, sizes=None, with_context: bool = True):
    """Random catalog plus unit-vector store; sizes gives techniques per phase."""
    rng = np.random.default_rng(seed)
    if sizes is None:
        sizes = [int(s) for s in rng.integers(2, 4, size=7)]
    techniques = []
    vectors = {}
    if with_context:
        vectors["__context__"] = cr.normalize(rng.normal(size=dim))
    for i, phase in enumerate(PHASES):
        for k in range(sizes[i]):
            tid = f"T1{i:01d}{k:02d}"
            techniques.append(
                Technique(
                    id=tid,
                    name=f"tech {tid}",
                    phase=phase,
                    description=f"behavior {tid}",
                    detection_score=float(rng.uniform(0, 1)),
                    mitigation_score=float(rng.uniform(0, 1)),
                    detection_coverage=float(rng.uniform(0, 1)),
                )
            )
            vectors[tid] = cr.normalize(rng.normal(size=dim))
    return cr.build_catalog(techniques), cr.build_store(vectors)


def make_scoring(catalog, store, alpha: float = 4.0, temperature: float = 5.0,
                 weights=None) -> cr.ScoringContext:
    kernel = cr.build_kernel(catalog, store, alpha=alpha)
    priors = cr.compute_phase_priors(store, catalog, temperature)
    return cr.ScoringContext(
        catalog=catalog,
        store=store,
        kernel=kernel,
        priors=priors,
        weights=weights if weights is not None else cr.RewardWeights(),
    )


def planted_instance(seed: int):
    """Tiny instance with one clearly best technique per phase.

    The favored technique's vector is pulled toward the context and its
    penalty scores are low; distractors are orthogonal to the context with
    high penalties, so the best full chain leads by a wide reward margin.
    """
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 4, size=7)
    hot = [int(rng.integers(0, s)) for s in sizes]
    dim = 8
    context = cr.normalize(rng.normal(size=dim))
    techniques = []
    vectors = {"__context__": context}
    for i, phase in enumerate(PHASES):
        for k in range(sizes[i]):
            tid = f"T1{i:01d}{k:02d}"
            if k == hot[i]:
                vec = cr.normalize(context + 0.4 * rng.normal(size=dim))
                det, mit, cov = (float(rng.uniform(0.0, 0.25)) for _ in range(3))
            else:
                raw = rng.normal(size=dim)
                raw = raw - np.dot(raw, context) * context
                vec = cr.normalize(raw)
                det, mit, cov = (float(rng.uniform(0.5, 1.0)) for _ in range(3))
            techniques.append(
                Technique(
                    id=tid,
                    name=f"tech {tid}",
                    phase=phase,
                    description=f"behavior {tid}",
                    detection_score=det,
                    mitigation_score=mit,
                    detection_coverage=cov,
                )
            )
            vectors[tid] = vec
    catalog = cr.build_catalog(techniques)
    store = cr.build_store(vectors)
    ctx = make_scoring(catalog, store, alpha=1.0, temperature=2.0)
    return catalog, store, ctx


def brute_force_best(catalog, ctx):
    """Exhaustive argmax of total_reward over all full chains."""
    best_total = -np.inf
    second = -np.inf
    best_combo = None
    for combo in itertools.product(*[catalog.by_phase[p] for p in PHASES]):
        path = cr.make_path(list(zip(PHASES, combo)))
        total = cr.total_reward(path, ctx).total
        if total > best_total:
            second, best_total, best_combo = best_total, total, combo
        elif total > second:
            second = total
    return best_combo, best_total, best_total - second


def assert_visit_conservation(root, simulations: int):
    """Root holds every simulation; each expanded node's children hold N - 1."""
    assert root.visit_count == simulations

    def walk(node):
        if not node.children:
            return
        child_sum = sum(c.visit_count for c in node.children.values())
        assert child_sum == node.visit_count - 1, (child_sum, node.visit_count)
        for child in node.children.values():
            if child.expanded:
                walk(child)

    walk(root)


def finite_difference_grads(weights, context, candidates, pi_target, v_target,
                            lambda_v, step=1e-5):
    """Central finite differences of the joint loss for every tensor."""
    from chainrecon.pvn import forward, loss as loss_fn

    alphazero = weights.config.alphazero_loss

    def at_current():
        out = forward(weights, context, candidates)
        return loss_fn(out, pi_target, v_target, lambda_v, alphazero)

    fd = {}
    for name, arr in weights.tensors.items():
        grad = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = grad.ravel()
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            plus = at_current()
            flat[idx] = original - step
            minus = at_current()
            flat[idx] = original
            gflat[idx] = (plus - minus) / (2.0 * step)
        fd[name] = grad
    return fd


def max_block_relative_error(analytic: dict, numeric: dict) -> float:
    worst = 0.0
    for name in analytic:
        a, f = analytic[name], numeric[name]
        scale = max(1e-6, float(np.abs(a).max()), float(np.abs(f).max()))
        worst = max(worst, float(np.abs(a - f).max()) / scale)
    return worst


def synthetic_batch(seed: int, input_dim: int, samples: int = 6, max_candidates: int = 4):
    """Seeded (context, candidates, pi_target, v_target) tuples."""
    rng = np.random.default_rng(seed)
    batch = []
    for _ in range(samples):
        context = cr.normalize(rng.normal(size=input_dim))
        count = int(rng.integers(2, max_candidates + 1))
        candidates = [cr.normalize(rng.normal(size=input_dim)) for _ in range(count)]
        raw = rng.uniform(0.1, 1.0, size=count)
        pi_target = raw / raw.sum()
        v_target = float(rng.uniform(-1.0, 1.0))
        batch.append((context, candidates, pi_target, v_target))
    return batch


def write_corpus_files(directory, seed: int = 0, dim: int = 8, sizes=None):
    """Write a catalog JSON and embeddings JSONL pair for CLI runs."""
    catalog, store = make_corpus(seed=seed, dim=dim, sizes=sizes)
    catalog_path = str(directory / "catalog.json")
    embeddings_path = str(directory / "embeddings.jsonl")
    cr.save_catalog(catalog, catalog_path)
    cr.save_embeddings(store, embeddings_path)
    return catalog_path, embeddings_path, catalog, store


def brute_force_hull(points) -> list[int]:
    """O(n^3) hull: keep directed edges with every other point strictly left."""
    pts = [(float(x), float(y)) for x, y in points]
    n = len(pts)
    successor = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ox, oy = pts[i]
            ax, ay = pts[j]
            if all(
                (ax - ox) * (pts[k][1] - oy) - (ay - oy) * (pts[k][0] - ox) > 0
                for k in range(n)
                if k != i and k != j
            ):
                successor[i] = j
    start = min(successor)
    cycle = [start]
    current = successor[start]
    while current != start:
        cycle.append(current)
        current = successor[current]
    return cycle


def rotate_to_min(cycle: list[int]) -> list[int]:
    pivot = cycle.index(min(cycle))
    return cycle[pivot:] + cycle[:pivot]


# --- acceptance reporting ------------------------------------------------------

_CRITERION_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    _CRITERION_LINES.append(f"[{name}] {status}: {detail}")
