"""Command-line pipelines over the inference engine.

One subcommand per stage: kernel export, chain inference, self-play
data generation, network training, and behavioral evaluation. All data
goes to files; logs go to standard error. Every command that writes an
output also writes an effective-config echo next to it so runs can be
reproduced exactly.
"""

import argparse
import dataclasses
import json
import os
import sys

from .catalog import Catalog, CatalogError, load_catalog
from .config import ConfigError, EngineConfig, load_engine_config, save_engine_config
from .embeddings import (
    EmbeddingError,
    EmbeddingStore,
    compute_phase_priors,
    load_embeddings,
    load_prior_override,
)
from .evaluation import (
    EvaluationError,
    envelope_report,
    export_envelope_csv,
    export_envelope_json,
    load_history,
    nnba,
)
from .mcts import (
    HeuristicEvaluator,
    PvnEvaluator,
    SearchError,
    generate_training_data,
    path_statistics,
    root_parallel_search,
    trace_to_json_obj,
    tree_to_dot,
)
from .mdp import KernelError, build_kernel, save_kernel
from .pvn import PvnError, init_weights, load_weights, save_weights, train_step
from .reward import PartialPath, RewardError, ScoringContext, total_reward

_VALIDATION_ERRORS = (
    CatalogError,
    ConfigError,
    EmbeddingError,
    EvaluationError,
    KernelError,
    PvnError,
    RewardError,
    SearchError,
)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(config: EngineConfig, out_path: str) -> None:
    base, _ = os.path.splitext(out_path)
    save_engine_config(config, base + ".config.json")


def _load_config(args) -> EngineConfig:
    config = load_engine_config(getattr(args, "config", None))
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = config.with_seed(seed)
    return config


def _load_corpus(args) -> tuple[EngineConfig, Catalog, EmbeddingStore]:
    config = _load_config(args)
    catalog = load_catalog(args.catalog)
    store = load_embeddings(args.embeddings)
    store.check_covers(catalog)
    return config, catalog, store


def _load_priors(args, config: EngineConfig, catalog: Catalog, store: EmbeddingStore):
    if getattr(args, "priors", None):
        return load_prior_override(args.priors, catalog)
    return compute_phase_priors(store, catalog, config.prior_temperature)


def _build_scoring(args, config, catalog, store) -> ScoringContext:
    priors = _load_priors(args, config, catalog, store)
    kernel = build_kernel(catalog, store, config.alpha)
    return ScoringContext(
        catalog=catalog, store=store, kernel=kernel, priors=priors,
        weights=config.reward_weights,
    )


def _make_evaluator(args, config: EngineConfig, ctx: ScoringContext):
    """Pick the leaf evaluator; a --weights file implies the trained network."""
    weights_path = getattr(args, "weights", None)
    wants_pvn = config.search.evaluator == "trained-pvn" or weights_path
    if wants_pvn:
        if not weights_path:
            raise SearchError("the trained-pvn evaluator requires --weights")
        weights = load_weights(weights_path)
        if weights.config.input_dim != ctx.store.dim:
            raise PvnError(
                f"weights expect input_dim {weights.config.input_dim}, "
                f"embeddings have dim {ctx.store.dim}"
            )
        config = dataclasses.replace(
            config, search=dataclasses.replace(config.search, evaluator="trained-pvn")
        )
        return PvnEvaluator(weights, ctx.store), config
    return HeuristicEvaluator(ctx, config.rollout), config


def _chain_technique_ids(path: str) -> list[str]:
    """Extract technique ids from an inferred-chain JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"{path}: malformed JSON at line {exc.lineno}") from None
    if not isinstance(entries, list):
        raise EvaluationError(f"{path}: expected a JSON array of chain entries")
    ids = []
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict) or "technique" not in entry:
            raise EvaluationError(f"{path}: entry {index} has no 'technique' key")
        ids.append(entry["technique"])
    if not ids:
        raise EvaluationError(f"{path}: chain file is empty")
    return ids


# --- subcommand handlers -----------------------------------------------------------


def cmd_kernel(args) -> int:
    config, catalog, store = _load_corpus(args)
    kernel = build_kernel(catalog, store, config.alpha)
    save_kernel(kernel, args.out)
    _echo_config(config, args.out)
    _log(f"kernel: {len(kernel.rows)} rows written to {args.out}")
    return 0


def cmd_infer(args) -> int:
    config, catalog, store = _load_corpus(args)
    store.require_context()
    ctx = _build_scoring(args, config, catalog, store)
    evaluator, config = _make_evaluator(args, config, ctx)
    result = root_parallel_search(
        catalog, ctx.kernel, ctx.priors, evaluator, config.search, ctx, jobs=args.jobs
    )
    stats = path_statistics(result)
    entries = []
    for index, stat in enumerate(stats):
        prefix = PartialPath(result.path.steps[: index + 1])
        entry = dict(stat)
        entry["reward"] = total_reward(prefix, ctx).to_dict()
        entries.append(entry)
    _write_json(entries, args.out)
    _echo_config(config, args.out)
    if args.trace:
        _write_json(trace_to_json_obj(result), args.trace)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(tree_to_dot(result.root))
    chain = " -> ".join(tid for _, tid in result.path.steps)
    _log(f"infer: {chain}")
    _log(f"infer: total reward {entries[-1]['reward']['total']:.6f}, chain in {args.out}")
    return 0


def cmd_rollout_data(args) -> int:
    config, catalog, store = _load_corpus(args)
    store.require_context()
    ctx = _build_scoring(args, config, catalog, store)
    evaluator, config = _make_evaluator(args, config, ctx)
    samples = generate_training_data(
        catalog, ctx.kernel, ctx.priors, evaluator, config.search,
        args.episodes, ctx, config.rollout,
    )
    obj = {
        "samples": [
            {
                "phase": sample.phase.label,
                "candidates": list(sample.candidate_ids),
                "pi_target": [float(p) for p in sample.pi_target],
                "v_target": sample.v_target,
            }
            for sample in samples
        ]
    }
    _write_json(obj, args.out)
    _echo_config(config, args.out)
    _log(f"rollout-data: {len(samples)} samples from {args.episodes} episodes in {args.out}")
    return 0


def cmd_train(args) -> int:
    import numpy as np

    config, catalog, store = _load_corpus(args)
    context = store.require_context()
    with open(args.data, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PvnError(f"{args.data}: malformed JSON at line {exc.lineno}") from None
    if not isinstance(data, dict) or "samples" not in data or not data["samples"]:
        raise PvnError(f"{args.data}: expected a nonempty 'samples' array")
    batch = []
    for sample in data["samples"]:
        candidates = [store.get(tid) for tid in sample["candidates"]]
        pi_target = np.asarray(sample["pi_target"], dtype=np.float64)
        batch.append((context, candidates, pi_target, float(sample["v_target"])))
    pvn_cfg = config.pvn.resolved(store.dim)
    config = dataclasses.replace(config, pvn=pvn_cfg)
    weights = init_weights(pvn_cfg)
    for epoch in range(args.epochs):
        weights, mean_loss = train_step(weights, batch, pvn_cfg)
        _log(f"train: epoch {epoch} loss {mean_loss:.6f}")
    save_weights(weights, args.out)
    _echo_config(config, args.out)
    _log(f"train: {args.epochs} epochs on {len(batch)} samples, weights in {args.out}")
    return 0


def _predicted_ids(args) -> list[str]:
    if args.chain:
        return _chain_technique_ids(args.chain)
    if args.ids:
        ids = [tid.strip() for tid in args.ids.split(",") if tid.strip()]
        if not ids:
            raise EvaluationError("--ids must list at least one technique id")
        return ids
    raise EvaluationError("provide a predicted set via --chain or --ids")


def cmd_eval_nnba(args) -> int:
    store = load_embeddings(args.embeddings)
    history = load_history(args.history)
    predicted = _predicted_ids(args)
    score = nnba(predicted, history, store)
    print(score)
    if args.out:
        _write_json({"actor": history.actor, "source": args.source, "score": score}, args.out)
        _log(f"eval nnba: result in {args.out}")
    return 0


def cmd_eval_envelope(args) -> int:
    store = load_embeddings(args.embeddings)
    history = load_history(args.history)
    predicted_by_source = {}
    for spec_arg in args.predicted or []:
        name, _, path = spec_arg.partition("=")
        if not name or not path:
            raise EvaluationError(f"--predicted expects NAME=CHAIN_FILE, got {spec_arg!r}")
        predicted_by_source[name] = _chain_technique_ids(path)
    report = envelope_report(history, predicted_by_source, store)
    export_envelope_json(report, args.out)
    if args.csv:
        export_envelope_csv(report, args.csv)
    _log(
        f"eval envelope: {len(report.points)} points, "
        f"{len(report.hull_indices)} hull vertices in {args.out}"
    )
    return 0


# --- parser ------------------------------------------------------------------------


def _add_corpus_flags(parser, with_priors: bool = False, with_weights: bool = False):
    parser.add_argument("--catalog", required=True, help="technique catalog JSON")
    parser.add_argument("--embeddings", required=True, help="embedding JSONL")
    parser.add_argument("--config", default=None, help="engine config JSON (defaults apply)")
    parser.add_argument("--seed", type=int, default=None, help="override all component seeds")
    if with_priors:
        parser.add_argument("--priors", default=None, help="phase-prior override JSON")
    if with_weights:
        parser.add_argument("--weights", default=None, help="trained network weights JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainrecon",
        description="Kill-chain inference engine: kernel, search, training, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="export the transition kernel")
    _add_corpus_flags(p_kernel)
    p_kernel.add_argument("--out", required=True, help="kernel JSON output")
    p_kernel.set_defaults(handler=cmd_kernel)

    p_infer = sub.add_parser("infer", help="search for the most plausible chain")
    _add_corpus_flags(p_infer, with_priors=True, with_weights=True)
    p_infer.add_argument("--out", required=True, help="chain JSON output")
    p_infer.add_argument("--trace", default=None, help="per-simulation trace JSON output")
    p_infer.add_argument("--dot", default=None, help="search-tree graph text output")
    p_infer.add_argument("--jobs", type=int, default=1, help="root-parallel search trees")
    p_infer.set_defaults(handler=cmd_infer)

    p_data = sub.add_parser("rollout-data", help="generate self-play training data")
    _add_corpus_flags(p_data, with_priors=True, with_weights=True)
    p_data.add_argument("--out", required=True, help="training data JSON output")
    p_data.add_argument("--episodes", type=int, default=1, help="self-play episodes")
    p_data.set_defaults(handler=cmd_rollout_data)

    p_train = sub.add_parser("train", help="train the policy-value network")
    _add_corpus_flags(p_train)
    p_train.add_argument("--data", required=True, help="training data JSON from rollout-data")
    p_train.add_argument("--out", required=True, help="weights JSON output")
    p_train.add_argument("--epochs", type=int, default=1, help="full-batch descent steps")
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("eval", help="behavioral evaluation")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)

    p_nnba = eval_sub.add_parser("nnba", help="nearest-neighbor behavioral alignment score")
    p_nnba.add_argument("--embeddings", required=True, help="embedding JSONL")
    p_nnba.add_argument("--history", required=True, help="actor history JSON")
    p_nnba.add_argument("--chain", default=None, help="inferred chain JSON as the predicted set")
    p_nnba.add_argument("--ids", default=None, help="comma-separated predicted technique ids")
    p_nnba.add_argument("--source", default="chain", help="label recorded in the result JSON")
    p_nnba.add_argument("--out", default=None, help="result JSON output")
    p_nnba.set_defaults(handler=cmd_eval_nnba)

    p_env = eval_sub.add_parser("envelope", help="behavioral envelope plot data")
    p_env.add_argument("--embeddings", required=True, help="embedding JSONL")
    p_env.add_argument("--history", required=True, help="actor history JSON")
    p_env.add_argument(
        "--predicted", action="append", default=None,
        help="NAME=CHAIN_FILE, repeatable, one per prediction source",
    )
    p_env.add_argument("--out", required=True, help="envelope JSON output")
    p_env.add_argument("--csv", default=None, help="envelope CSV output")
    p_env.set_defaults(handler=cmd_eval_envelope)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _VALIDATION_ERRORS as exc:
        _log(f"error: {exc}")
        return 1
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return 2
    except ValueError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
