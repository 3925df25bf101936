import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmp.envs import (
    RandomPomdpSpec,
    RockSampleSpec,
    TabularEnv,
    env_step,
    generate_random_pomdp,
    rocksample_env,
)
from fmp.envs.random_pomdp import support_size
from fmp.envs.rocksample import (
    EAST,
    FIRST_CHECK,
    NORTH,
    OBS_BAD,
    OBS_GOOD,
    OBS_NONE,
    SAMPLE,
    SOUTH,
    WEST,
    FactoredRockBelief,
    RockState,
    factored_filter,
    load_rock_layout,
    standard_layout,
)
from fmp.errors import InvalidAction, TerminalState
from fmp.model import PomdpModel, validate_model

# ---------------------------------------------------------------- random POMDP


def test_high_sparsity_gives_deterministic_transitions():
    m = generate_random_pomdp(RandomPomdpSpec(4, 0.9, seed=3))
    assert np.all(np.count_nonzero(m.transition, axis=2) == 1)


@given(st.integers(1, 25), st.sampled_from([0.1, 0.3, 0.6, 0.9]), st.integers(0, 10**6))
def test_generated_models_validate(S, sp, seed):
    m = generate_random_pomdp(RandomPomdpSpec(S, sp, seed=seed))
    assert validate_model(m).ok
    assert m.num_observations == S and m.num_actions == 4
    m_support = support_size(S, sp)
    assert np.all(np.count_nonzero(m.transition, axis=2) == m_support)
    assert np.all(np.count_nonzero(m.observation, axis=1) == m_support)


def test_generation_is_deterministic():
    a = generate_random_pomdp(RandomPomdpSpec(12, 0.3, seed=5))
    b = generate_random_pomdp(RandomPomdpSpec(12, 0.3, seed=5))
    assert a == b
    assert a != generate_random_pomdp(RandomPomdpSpec(12, 0.3, seed=6))


def test_sparsity_monotone():
    def nonzeros(sp):
        return np.mean([np.count_nonzero(generate_random_pomdp(RandomPomdpSpec(20, sp, seed=s)).transition)
                        for s in range(10)])
    counts = [nonzeros(sp) for sp in (0.1, 0.3, 0.6, 0.9)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_tabular_env_with_point_masses():
    T = np.array([[[0, 1], [1, 0]]], float)
    Z = np.eye(2)
    env = TabularEnv(PomdpModel(T, Z, np.array([[0.2], [0.7]]), 1.0, 0.9), initial=[1.0, 0.0])
    rng = np.random.default_rng(0)
    s = env.reset(rng)
    assert s == 0
    for _ in range(5):
        s2, o, r = env_step(env, s, 0, rng)
        assert s2 == 1 - s and o == s2
        assert r == (0.2 if s == 0 else 0.7)
        s = s2

# ---------------------------------------------------------------- RockSample


def small_spec(k=3, n=5):
    positions = ((1, 1), (3, 2), (2, 4))[:k]
    return RockSampleSpec(n, k, rock_positions=positions, start=(0, 2))


def test_action_counts():
    for n, k, a in [(7, 8, 13), (11, 11, 16), (15, 15, 20)]:
        assert rocksample_env(RockSampleSpec(n, k, layout="standard")).num_actions == a


def test_standard_layouts_bundled():
    assert standard_layout(7, 8) == ((2, 0), (0, 1), (3, 1), (6, 3), (2, 4), (3, 4), (5, 5), (1, 6))
    assert len(standard_layout(11, 11)) == 11
    assert standard_layout(5, 5) is None


def test_layout_file(tmp_path):
    f = tmp_path / "rocks.txt"
    f.write_text("# two rocks\n1 2\n3 0\n")
    assert load_rock_layout(f) == ((1, 2), (3, 0))
    f.write_text("1 2 3\n")
    with pytest.raises(ValueError, match="line 1"):
        load_rock_layout(f)


def test_sensor_accuracy():
    env = rocksample_env(small_spec())
    assert env.space.accuracy(1, 1, 0) == 1.0
    far = RockSampleSpec(30, 1, rock_positions=((20, 0),), start=(0, 0))
    assert rocksample_env(far).space.accuracy(0, 0, 0) == pytest.approx(0.75)


def test_check_updates():
    space = rocksample_env(small_spec()).space
    b = FactoredRockBelief(1, 1, (0.5, 0.5, 0.5)).to_row()
    res = factored_filter(space, b, FIRST_CHECK, OBS_GOOD)
    assert res.posterior[3] == 1.0
    far = rocksample_env(RockSampleSpec(30, 1, rock_positions=((20, 0),), start=(0, 0))).space
    res = factored_filter(far, FactoredRockBelief(0, 0, (0.5,)).to_row(), FIRST_CHECK, OBS_GOOD)
    assert res.posterior[3] == pytest.approx(0.75)


def test_moves_leave_rock_beliefs():
    space = rocksample_env(small_spec()).space
    b = FactoredRockBelief(2, 2, (0.1, 0.6, 0.9)).to_row()
    for a in (NORTH, SOUTH, EAST, WEST):
        post = factored_filter(space, b, a, OBS_NONE).posterior
        np.testing.assert_array_equal(post[3:], b[3:])


def test_walls_and_exit():
    env = rocksample_env(small_spec())
    rng = np.random.default_rng(0)
    s = RockState(0, 4, (True, False, True))
    assert env.step(s, NORTH, rng)[0] == s
    assert env.step(s, WEST, rng)[0] == s
    edge = RockState(4, 0, (True, False, True))
    assert env.step(edge, SOUTH, rng)[0] == edge
    nxt, o, r = env.step(edge, EAST, rng)
    assert nxt.terminal and r == 10.0
    with pytest.raises(TerminalState):
        env_step(env, nxt, NORTH, rng)


def test_sampling_rocks():
    env = rocksample_env(small_spec())
    rng = np.random.default_rng(0)
    s = RockState(1, 1, (True, False, True))
    s2, _, r = env.step(s, SAMPLE, rng)
    assert r == 10.0 and s2.rocks == (False, False, True)
    assert env.step(s2, SAMPLE, rng)[2] == -10.0
    assert env.step(RockState(0, 0, s.rocks), SAMPLE, rng)[2] == -10.0
    with pytest.raises(InvalidAction):
        env.step(s, FIRST_CHECK + 3, rng)


def test_planner_rewards_are_rescaled():
    env = rocksample_env(small_spec())
    space = env.space
    b = FactoredRockBelief(1, 1, (0.75, 0.5, 0.5)).to_row()
    res = factored_filter(space, b, SAMPLE, OBS_NONE)
    # 0.75 * 10 + 0.25 * -10 = 5 -> (5 + 10) / 20
    assert res.expected_reward == pytest.approx(0.75)
    assert res.posterior[3] == 0.0
    assert env.scaling.to_original(res.expected_reward) == pytest.approx(5.0)


def _joint_oracle(space, x, y, probs, a, o):
    """Exact filter over the 2^k rock configurations (independent of the factored code)."""
    k = len(probs)
    configs = list(itertools.product([False, True], repeat=k))
    prior = np.array([np.prod([p if g else 1 - p for p, g in zip(probs, c)]) for c in configs])
    post = np.zeros(len(configs))
    reward = 0.0
    index = {c: j for j, c in enumerate(configs)}
    for j, c in enumerate(configs):
        w = prior[j]
        if a == SAMPLE:
            rock = [i for i, (rx, ry) in enumerate(space.rocks) if (rx, ry) == (x, y)]
            if rock:
                i = rock[0]
                reward += w * (10.0 if c[i] else -10.0)
                c2 = list(c)
                c2[i] = False
                post[index[tuple(c2)]] += w
            else:
                reward += w * -10.0
                post[j] += w
        elif a >= FIRST_CHECK:
            i = a - FIRST_CHECK
            dist = np.hypot(x - space.rocks[i][0], y - space.rocks[i][1])
            acc = 0.5 * (1 + 2 ** (-dist / 20.0))
            says_good = o == OBS_GOOD
            like = acc if c[i] == says_good else 1 - acc
            post[j] += w * like
        else:
            post[j] += w
    eta = post.sum()
    post /= eta
    marg = [sum(post[j] for j, c in enumerate(configs) if c[i]) for i in range(k)]
    return np.array(marg), eta, (reward + 10.0) / 20.0 if a == SAMPLE else None


@pytest.mark.parametrize("k", [1, 2, 3])
def test_factored_filter_matches_joint(k):
    space = rocksample_env(small_spec(k)).space
    rng = np.random.default_rng(k)
    for _ in range(300):
        x, y = (int(v) for v in rng.integers(0, 5, size=2))
        if rng.random() < 0.3:
            x, y = (int(v) for v in space.rocks[rng.integers(k)])
        probs = tuple(rng.random(k))
        a = int(rng.integers(space.num_actions))
        if a == EAST and x == 4:
            continue  # exit: rock beliefs no longer matter
        b = FactoredRockBelief(x, y, probs).to_row()
        obs = [OBS_NONE] if a < FIRST_CHECK else [OBS_GOOD, OBS_BAD]
        for o in obs:
            marg, eta, reward = _joint_oracle(space, x, y, probs, a, o)
            res = factored_filter(space, b, a, o)
            np.testing.assert_allclose(res.posterior[3:], marg, atol=1e-12, rtol=0)
            assert abs(res.obs_probability - eta) <= 1e-12
            if reward is not None:
                assert abs(res.expected_reward - reward) <= 1e-12


def test_observation_support_sums_to_one():
    space = rocksample_env(small_spec()).space
    b = FactoredRockBelief(2, 3, (0.3, 0.8, 0.5)).to_row()
    for a in range(space.num_actions):
        assert sum(p for _, p in space.observation_support(b, a)) == pytest.approx(1.0)


def test_terminal_belief_is_absorbing():
    space = rocksample_env(small_spec()).space
    b = FactoredRockBelief(4, 2, (0.3, 0.8, 0.5)).to_row()
    post = factored_filter(space, b, EAST, OBS_NONE)
    assert post.posterior[2] == 1.0 and post.expected_reward == 1.0
    again = factored_filter(space, post.posterior, SAMPLE, OBS_NONE)
    assert again.expected_reward == 0.5
    np.testing.assert_array_equal(again.posterior, post.posterior)


def test_episode_rewards_bounded():
    env = rocksample_env(RockSampleSpec(7, 8, layout="standard"))
    rng = np.random.default_rng(1)
    s = env.reset(rng)
    for _ in range(200):
        if env.is_terminal(s):
            break
        s, _, r = env.step(s, int(rng.integers(env.num_actions)), rng)
        assert 0.0 <= env.scaling.to_planner(r) <= env.space.reward_max


def test_random_layout_is_seeded():
    a = RockSampleSpec(7, 8, seed=4).resolved_positions()
    assert a == RockSampleSpec(7, 8, seed=4).resolved_positions()
    assert len(set(a)) == 8
