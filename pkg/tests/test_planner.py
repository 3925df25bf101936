import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import models, random_belief, random_model
from fmp.discretization import EpsilonSchedule, grid_cell_count_log10
from fmp.errors import MemoryBudgetExceeded
from fmp.model import PomdpModel, exact_expectimax_value
from fmp.planner import PlanConfig, backward_induction, build_tree, depth_stats, plan
from fmp.spaces import SamplingConfig, TabularSpace


def space_of(model):
    return TabularSpace(model)


def test_single_branch_chain_collapses():
    T = np.tile(np.array([[0.7, 0.3], [0.4, 0.6]]), (3, 1, 1))
    m = PomdpModel(T, np.ones((2, 1)), np.zeros((2, 3)), 1.0, 0.9)
    tree = build_tree(space_of(m), [0.5, 0.5], EpsilonSchedule.constant(0.1, 2))
    assert [s.nodes for s in depth_stats(tree)] == [1, 1, 1]


@given(models(max_states=2, max_actions=3, max_obs=3), st.integers(1, 4))
def test_coarsest_grid_on_two_states(case, h):
    m, b = case
    if m.num_states != 2:
        return
    tree = build_tree(space_of(m), b, EpsilonSchedule.constant(1.0, h))
    for lvl in tree.levels[1:]:
        assert len(lvl) <= 3
        assert not np.any(np.all(lvl.keys == 0, axis=1))


def _distinct_posteriors(m, b, h):
    levels = [[np.asarray(b)]]
    for _ in range(h):
        nxt = []
        for belief in levels[-1]:
            for a in range(m.num_actions):
                marg = belief @ m.transition[a]
                for o in range(m.num_observations):
                    joint = marg * m.observation[:, o]
                    if joint.sum() > 0:
                        nxt.append(joint / joint.sum())
        levels.append(nxt)
    return [len(np.unique(np.round(np.array(lv), 12), axis=0)) for lv in levels]


def test_fine_grid_keeps_distinct_posteriors():
    rng = np.random.default_rng(3)
    for _ in range(5):
        m = random_model(rng, 3, 2, 2)
        b = random_belief(rng, 3)
        # at 1e-4 two of the 64 depth-3 posteriors can share a cell, so go finer
        tree = build_tree(space_of(m), b, EpsilonSchedule.constant(1e-7, 3))
        assert [len(lv) for lv in tree.levels] == _distinct_posteriors(m, b, 3)


def test_single_backup_value():
    m = PomdpModel(np.ones((1, 1, 1)), np.ones((1, 1)), np.ones((1, 1)), 1.0, 0.9)
    res = plan(space_of(m), [1.0], PlanConfig(schedule=EpsilonSchedule.constant(0.5, 1)))
    assert res.value == pytest.approx(1.0)
    assert res.action == 0


@given(models(), st.floats(0, 2), st.integers(1, 3))
def test_leaf_value_shift(case, c, h):
    m, b = case
    sched = EpsilonSchedule.constant(0.25, h)
    tree = build_tree(space_of(m), b, sched)
    v0 = backward_induction(tree, m.discount, 0.0)
    vc = backward_induction(tree, m.discount, c)
    assert vc.value - v0.value == pytest.approx(m.discount**h * c, abs=1e-9)
    for d, (a, b_) in enumerate(zip(v0.values, vc.values)):
        np.testing.assert_allclose(b_ - a, m.discount ** (h - d) * c, atol=1e-9)


def test_fine_grid_matches_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = random_model(rng, 3, 2, 2)
        b = random_belief(rng, 3)
        res = plan(space_of(m), b, PlanConfig(schedule=EpsilonSchedule.constant(1e-9, 3)))
        exact, _ = exact_expectimax_value(m, b, 3)
        assert abs(res.value - exact) <= 1e-6


def test_horizon_zero():
    m = random_model(np.random.default_rng(0), 3, 2, 2)
    res = plan(space_of(m), [1 / 3] * 3, PlanConfig(schedule=EpsilonSchedule((0.2,)), leaf_value=1.5))
    assert res.value == 1.5 and res.action == 0


def test_ties_go_to_lowest_action():
    m = PomdpModel(np.ones((3, 1, 1)), np.ones((1, 1)), np.ones((1, 3)), 1.0, 0.9)
    assert plan(space_of(m), [1.0], PlanConfig(schedule=EpsilonSchedule.constant(0.5, 2))).action == 0


def test_constant_schedule_returns_legal_action():
    m = random_model(np.random.default_rng(5), 4, 3, 3, gamma=0.95)
    res = plan(space_of(m), [0.25] * 4, PlanConfig(schedule=EpsilonSchedule.constant(0.2, 5)))
    assert 0 <= res.action < 3
    assert len(res.stats) == 6


@pytest.mark.parametrize("mode", ["exact", "sample"])
def test_plan_is_deterministic(mode):
    m = random_model(np.random.default_rng(9), 4, 3, 3, gamma=0.9)
    cfg = PlanConfig(schedule=EpsilonSchedule.constant(0.2, 3), sampling=SamplingConfig(mode, 4, 1))
    a = plan(space_of(m), [0.25] * 4, cfg)
    b = plan(space_of(m), [0.25] * 4, cfg)
    assert (a.action, a.value, a.stats) == (b.action, b.value, b.stats)


def test_target_error_config_uses_derived_schedule():
    m = random_model(np.random.default_rng(2), 3, 2, 2)
    res = plan(space_of(m), [1 / 3] * 3, PlanConfig(target_error=0.5))
    assert [s.eps for s in res.stats] == pytest.approx([1 / 12, 1 / 6, 1 / 3, 2 / 3])


def test_coarse_grid_stats_within_cell_bound():
    rng = np.random.default_rng(4)
    m = random_model(rng, 2, 3, 3, gamma=0.9)
    res = plan(space_of(m), [0.5, 0.5], PlanConfig(schedule=EpsilonSchedule.constant(1.0, 4)))
    assert all(s.nodes <= 4 for s in res.stats)


@given(models(max_states=4, max_actions=3, max_obs=3), st.sampled_from([1.0, 0.5, 0.25, 0.2]))
def test_nodes_never_exceed_grid_cells(case, eps):
    m, b = case
    tree = build_tree(space_of(m), b, EpsilonSchedule.constant(eps, 3))
    for s in depth_stats(tree):
        assert s.nodes <= round(10 ** grid_cell_count_log10(s.eps, tree.dim))


@given(models(max_states=4, max_actions=3, max_obs=3))
def test_edge_probabilities_sum_to_one(case):
    m, b = case
    tree = build_tree(space_of(m), b, EpsilonSchedule.constant(0.25, 3))
    for d in range(tree.horizon):
        for e in tree.edges[d]:
            np.testing.assert_allclose(e.prob.sum(axis=1), 1.0, atol=1e-6)
            assert e.child.max() < len(tree.levels[d + 1])


def test_sampled_edges_have_equal_weights():
    m = random_model(np.random.default_rng(1), 4, 2, 4)
    tree = build_tree(space_of(m), [0.25] * 4, EpsilonSchedule.constant(0.2, 2),
                      sampling=SamplingConfig("sample", 5, 0))
    for d in range(2):
        for e in tree.edges[d]:
            assert np.all(e.prob == 0.2)


@given(models(max_states=4, max_actions=2, max_obs=3), st.floats(0, 2))
def test_values_within_reward_range(case, leaf):
    m, b = case
    vmax = m.reward_max / (1 - m.discount)
    leaf = min(leaf, vmax)
    tree = build_tree(space_of(m), b, EpsilonSchedule.constant(0.2, 3))
    res = backward_induction(tree, m.discount, leaf)
    for v in res.values:
        assert np.all(v >= -1e-12) and np.all(v <= vmax + 1e-12)


def test_dedup_soundness_on_fine_grid():
    rng = np.random.default_rng(8)
    for _ in range(10):
        m = random_model(rng, 3, 2, 2)
        b = random_belief(rng, 3)
        sched = EpsilonSchedule.constant(1e-6, 3)
        with_merge = backward_induction(build_tree(space_of(m), b, sched), m.discount)
        without = backward_induction(build_tree(space_of(m), b, sched, dedup=False), m.discount)
        assert with_merge.value == pytest.approx(without.value, abs=1e-12)
        assert with_merge.action == without.action


def test_monotone_refinement_over_seeds():
    rng = np.random.default_rng(2024)
    errors = {eps: [] for eps in (0.4, 0.2, 0.1, 0.05)}
    for _ in range(100):
        m = random_model(rng, 3, 2, 2)
        b = random_belief(rng, 3)
        exact, _ = exact_expectimax_value(m, b, 3)
        for eps in errors:
            v = plan(space_of(m), b, PlanConfig(schedule=EpsilonSchedule.constant(eps, 3))).value
            errors[eps].append(abs(v - exact))
    means = [np.mean(errors[e]) for e in (0.4, 0.2, 0.1, 0.05)]
    assert all(a >= b for a, b in zip(means, means[1:])), means


def test_memory_cap():
    m = random_model(np.random.default_rng(0), 4, 3, 3)
    with pytest.raises(MemoryBudgetExceeded):
        build_tree(space_of(m), [0.25] * 4, EpsilonSchedule.constant(1e-6, 3), max_nodes=10)


def test_member_representative_keeps_exact_posteriors():
    m = random_model(np.random.default_rng(6), 3, 2, 2)
    tree = build_tree(space_of(m), [1 / 3] * 3, EpsilonSchedule.constant(0.25, 2),
                      representative="member")
    for lvl in tree.levels[1:]:
        np.testing.assert_allclose(lvl.beliefs.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        build_tree(space_of(m), [1 / 3] * 3, EpsilonSchedule.constant(0.25, 2), representative="x")


def test_tree_accessors():
    m = random_model(np.random.default_rng(6), 3, 2, 2)
    tree = build_tree(space_of(m), [1 / 3] * 3, EpsilonSchedule.constant(0.25, 2))
    backward_induction(tree, m.discount)
    assert tree.root.depth == 0 and tree.root.value is not None
    edges = list(tree.iter_edges(0))
    assert {e.action for e in edges} == {0, 1}
    for a in range(2):
        assert sum(e.obs_probability for e in edges if e.action == a) == pytest.approx(1.0)
    node = tree.node(1, 0)
    assert node.key.resolution == 0.25
