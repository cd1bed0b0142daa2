"""Transition kernel construction, rollout sampling, and discounted values."""

import math

import numpy as np
import pytest

import chainrecon as cr
from chainrecon.catalog import PHASES, Phase
from chainrecon.mdp import (
    KernelError,
    RolloutConfig,
    _sample_from_row,
    build_kernel,
    chain_payoff_reward,
    constant_step_reward,
    incremental_step_reward,
    load_kernel,
    rollout_value,
    sample_rollout,
    save_kernel,
)
from chainrecon.reward import PartialPath, total_reward

from support import make_corpus, make_scoring


def _single_chain():
    """One technique per phase: every kernel row is a point mass."""
    catalog, store = make_corpus(seed=0, sizes=[1] * 7)
    return catalog, store


def test_rows_are_stochastic_and_cover_successor_phase():
    catalog, store = make_corpus(seed=1)
    kernel = build_kernel(catalog, store, alpha=4.0)
    for phase in PHASES[:-1]:
        nxt = phase.successor()
        for tid in catalog.by_phase[phase]:
            row = kernel.row(tid)
            assert tuple(row) == catalog.by_phase[nxt]
            assert abs(sum(row.values()) - 1.0) < 1e-12
            assert all(p > 0 for p in row.values())


def test_terminal_techniques_have_no_rows():
    catalog, store = make_corpus(seed=1)
    kernel = build_kernel(catalog, store)
    for tid in catalog.by_phase[Phase.OBJECTIVES]:
        with pytest.raises(KernelError, match="no row"):
            kernel.row(tid)


def test_rows_match_independent_softmax():
    catalog, store = make_corpus(seed=2)
    alpha = 3.0
    kernel = build_kernel(catalog, store, alpha=alpha)
    tid = catalog.by_phase[Phase.RECON][0]
    successors = catalog.by_phase[Phase.WEAPON]
    source = store.get(tid).values
    # independent oracle: raw exp / sum without max shifting
    exps = [math.exp(alpha * float(np.dot(source, store.get(u).values))) for u in successors]
    total = sum(exps)
    row = kernel.row(tid)
    for u, e in zip(successors, exps):
        assert abs(row[u] - e / total) < 1e-9


def test_zero_alpha_rows_are_uniform():
    catalog, store = make_corpus(seed=3)
    kernel = build_kernel(catalog, store, alpha=0.0)
    for tid, row in kernel.rows.items():
        uniform = 1.0 / len(row)
        for p in row.values():
            assert abs(p - uniform) < 1e-12


def test_alpha_sharpens_toward_the_nearest_successor():
    catalog, store = make_corpus(seed=4)
    tid = catalog.by_phase[Phase.DELIVERY][0]
    peaks = []
    for alpha in (0.5, 2.0, 8.0):
        row = build_kernel(catalog, store, alpha=alpha).row(tid)
        peaks.append(max(row.values()))
    assert peaks[0] < peaks[1] < peaks[2]


def test_negative_alpha_rejected():
    catalog, store = make_corpus(seed=4)
    with pytest.raises(KernelError, match="alpha"):
        build_kernel(catalog, store, alpha=-1.0)


def test_probability_lookup_errors_name_the_ids():
    catalog, store = make_corpus(seed=5)
    kernel = build_kernel(catalog, store)
    recon = catalog.by_phase[Phase.RECON][0]
    with pytest.raises(KernelError, match="T9999"):
        kernel.probability("T9999", recon)
    with pytest.raises(KernelError, match="no entry"):
        kernel.probability(recon, recon)  # same-phase id is not in the row


def test_kernel_file_round_trip(tmp_path):
    catalog, store = make_corpus(seed=6)
    kernel = build_kernel(catalog, store, alpha=2.5)
    path = tmp_path / "kernel.json"
    save_kernel(kernel, path)
    loaded = load_kernel(path)
    assert loaded.alpha == kernel.alpha
    for tid, row in kernel.rows.items():
        for u, p in row.items():
            assert abs(loaded.rows[tid][u] - p) < 1e-12


def test_load_kernel_rejects_non_stochastic_rows(tmp_path):
    path = tmp_path / "kernel.json"
    path.write_text('{"alpha": 1.0, "rows": {"T1000": {"T1100": 0.5}}}')
    with pytest.raises(KernelError, match="sums to"):
        load_kernel(path)


class _FixedRng:
    """Stand-in generator yielding preset uniform draws."""

    def __init__(self, values):
        self._values = list(values)

    def random(self):
        return self._values.pop(0)


def test_sample_from_row_walks_the_inverse_cdf():
    row = {"a": 0.2, "b": 0.3, "c": 0.5}
    assert _sample_from_row(row, _FixedRng([0.1])) == "a"
    assert _sample_from_row(row, _FixedRng([0.2])) == "b"  # boundary goes right
    assert _sample_from_row(row, _FixedRng([0.49])) == "b"
    assert _sample_from_row(row, _FixedRng([0.51])) == "c"
    assert _sample_from_row(row, _FixedRng([0.999999])) == "c"


def test_rollout_respects_horizon_and_terminal_phase():
    catalog, store = make_corpus(seed=7)
    kernel = build_kernel(catalog, store)
    start = (Phase.RECON, catalog.by_phase[Phase.RECON][0])
    rng = np.random.default_rng(0)
    short = sample_rollout(kernel, start, RolloutConfig(horizon=3), rng)
    assert len(short) == 3
    rng = np.random.default_rng(0)
    full = sample_rollout(kernel, start, RolloutConfig(horizon=7), rng)
    assert len(full) == 7
    assert full.steps[-1][0] is Phase.OBJECTIVES
    late = sample_rollout(kernel, (Phase.C2, catalog.by_phase[Phase.C2][0]),
                          RolloutConfig(horizon=7), np.random.default_rng(0))
    assert len(late) == 2  # objectives reached before the horizon


def test_rollouts_are_deterministic_per_seed():
    catalog, store = make_corpus(seed=8)
    ctx = make_scoring(catalog, store)
    cfg = RolloutConfig(gamma=0.9, num_rollouts=16, horizon=7, rng_seed=42)
    start = (Phase.RECON, catalog.by_phase[Phase.RECON][0])
    step = incremental_step_reward(ctx)
    assert rollout_value(ctx.kernel, start, cfg, step) == rollout_value(
        ctx.kernel, start, cfg, step
    )


def test_constant_reward_closed_form_matches_geometric_sum():
    catalog, store = _single_chain()
    kernel = build_kernel(catalog, store)
    start = (Phase.RECON, catalog.by_phase[Phase.RECON][0])
    for horizon in range(1, 8):
        cfg = RolloutConfig(gamma=0.5, num_rollouts=4, horizon=horizon)
        value = rollout_value(kernel, start, cfg, constant_step_reward(1.0))
        transitions = horizon - 1
        expected = sum(0.5**k for k in range(transitions))
        assert value == expected


def test_three_transition_constant_reward_value():
    catalog, store = _single_chain()
    kernel = build_kernel(catalog, store)
    start = (Phase.RECON, catalog.by_phase[Phase.RECON][0])
    cfg = RolloutConfig(gamma=0.5, num_rollouts=8, horizon=4)
    assert rollout_value(kernel, start, cfg, constant_step_reward(1.0)) == 1.75


def test_incremental_rewards_telescope_to_the_path_total():
    catalog, store = make_corpus(seed=9)
    ctx = make_scoring(catalog, store)
    step = incremental_step_reward(ctx)
    path = cr.make_path([(p, catalog.by_phase[p][0]) for p in PHASES])
    undiscounted = 0.0
    for k in range(1, len(path)):
        undiscounted += step(PartialPath(path.steps[:k]), path.steps[k])
    start_total = total_reward(PartialPath(path.steps[:1]), ctx).total
    full_total = total_reward(path, ctx).total
    assert abs(undiscounted - (full_total - start_total)) < 1e-9


def test_chain_payoff_pays_only_at_the_final_transition():
    catalog, store = make_corpus(seed=10)
    ctx = make_scoring(catalog, store)
    step = chain_payoff_reward(ctx)
    prefix = cr.make_path([(p, catalog.by_phase[p][0]) for p in PHASES[:3]])
    assert step(prefix, (Phase.EXPLOIT, catalog.by_phase[Phase.EXPLOIT][0])) == 0.0
    almost = cr.make_path([(p, catalog.by_phase[p][0]) for p in PHASES[:-1]])
    last = (Phase.OBJECTIVES, catalog.by_phase[Phase.OBJECTIVES][0])
    full = almost.extended(*last)
    assert step(almost, last) == total_reward(full, ctx).total


def test_chain_payoff_rollout_discounts_the_full_chain_total():
    catalog, store = _single_chain()
    ctx = make_scoring(catalog, store)
    cfg = RolloutConfig(gamma=0.9, num_rollouts=4, horizon=7)
    start = (Phase.RECON, catalog.by_phase[Phase.RECON][0])
    value = rollout_value(ctx.kernel, start, cfg, chain_payoff_reward(ctx))
    full = cr.make_path([(p, catalog.by_phase[p][0]) for p in PHASES])
    expected = 0.9**5 * total_reward(full, ctx).total
    assert abs(value - expected) < 1e-12


def test_rollout_config_validation():
    with pytest.raises(KernelError, match="gamma"):
        RolloutConfig(gamma=1.0)
    with pytest.raises(KernelError, match="gamma"):
        RolloutConfig(gamma=-0.1)
    with pytest.raises(KernelError, match="horizon"):
        RolloutConfig(horizon=0)
    with pytest.raises(KernelError, match="horizon"):
        RolloutConfig(horizon=8)
    with pytest.raises(KernelError, match="num_rollouts"):
        RolloutConfig(num_rollouts=0)
