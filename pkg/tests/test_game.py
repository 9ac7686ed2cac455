import numpy as np
import pytest

from minefair import FixedUniform, Scenario, TieBreak, fairness_from_delays
from minefair.game import (
    GroupPartition,
    Speed,
    StrategyProfile,
    group_delay_matrix,
    group_utility,
    partition_groups,
    solve_game,
)

FF = StrategyProfile(Speed.FAST, Speed.FAST)
FS = StrategyProfile(Speed.FAST, Speed.SLOW)
SF = StrategyProfile(Speed.SLOW, Speed.FAST)
SS = StrategyProfile(Speed.SLOW, Speed.SLOW)


def test_partition_boundary_tie():
    assert partition_groups(np.array([0.5, 0.5])).large.tolist() == [True, False]


def test_partition_prefix():
    assert partition_groups(np.array([0.4, 0.3, 0.2, 0.1])).large.tolist() == [True, True, False, False]
    assert partition_groups(np.array([0.1, 0.2, 0.3, 0.4])).large.tolist() == [False, False, True, True]


def test_partition_index_tiebreak():
    p = partition_groups(np.array([0.1, 0.3, 0.3, 0.3]))
    assert p.large.tolist() == [False, True, True, False]


def test_partition_bitcoin(bitcoin):
    # Foundry USA (0.29) + AntPool (0.24) = 0.53 is the first prefix >= 0.5
    p = partition_groups(bitcoin.alpha)
    assert p.members().tolist() == [0, 1]
    assert [bitcoin.labels[i] for i in p.members()] == ["Foundry USA", "AntPool"]


def test_group_delays():
    p = GroupPartition(np.array([True, True, False, False, False]))
    ff = group_delay_matrix(p, FF, 3, 6)
    assert ff.tolist() == [[0, 3, 6, 6, 6], [3, 0, 6, 6, 6], [6, 6, 0, 3, 3], [6, 6, 3, 0, 3], [6, 6, 3, 3, 0]]
    ss = group_delay_matrix(p, SS, 3, 6)
    assert np.all(ss[~np.eye(5, dtype=bool)] == 6) and np.all(np.diag(ss) == 0)
    fs = group_delay_matrix(p, FS, 3, 6)
    assert fs[0, 1] == 3 and fs[2, 3] == 6 and fs[0, 2] == 6


def test_zero_delays_all_equilibria():
    sc = Scenario(np.array([0.4, 0.3, 0.2, 0.1]), 600.0, FixedUniform(0.0))
    out = solve_game(sc, fast_d=0.0, slow_d=0.0)
    assert all(abs(x) <= 1e-14 for u in out.utilities.values() for x in u)
    assert set(out.equilibria) == {FF, FS, SF, SS}


@pytest.mark.parametrize("rule", list(TieBreak))
def test_bitcoin_game(bitcoin, rule):
    out = solve_game(bitcoin.replace(tie_break=rule))
    assert out.equilibria == (FF,)
    ul, us = out.utilities[FF]
    assert ul > us
    # zero-sum across the two groups
    for u_l, u_s in out.utilities.values():
        assert abs(u_l * out.large_share + u_s * (1 - out.large_share)) <= 1e-10
    # switching own group to fast never hurts
    u = out.utilities
    assert u[FS][0] >= u[SS][0] and u[FF][0] >= u[SF][0]
    assert u[SF][1] >= u[SS][1] and u[FF][1] >= u[FS][1]


def test_utility_variants():
    alpha = np.array([0.5, 0.3, 0.2])
    mp = np.array([0.01, -0.004, -0.006])
    mask = np.array([True, False, False])
    assert group_utility(alpha, mp, ~mask) == pytest.approx(-0.02)
    assert group_utility(alpha, mp, ~mask, "sum_mp") == pytest.approx(-0.01)
    assert group_utility(alpha, mp, ~mask, "sum_mpr") == pytest.approx(-0.004 / 0.3 - 0.006 / 0.2)
    with pytest.raises(ValueError):
        group_utility(alpha, mp, mask, "median")


def test_game_uses_grouped_engine(bitcoin):
    out = solve_game(bitcoin)
    p = partition_groups(bitcoin.alpha)
    rep = fairness_from_delays(bitcoin.alpha, group_delay_matrix(p, FS), 600.0, bitcoin.tie_break)
    assert out.utilities[FS][0] == pytest.approx(rep.mp[p.large].sum() / bitcoin.alpha[p.large].sum(), rel=1e-12)


def test_equilibrium_exists_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(5):
        alpha = rng.dirichlet(np.ones(12))
        out = solve_game(Scenario(alpha, 600.0, FixedUniform(6.0)), fast_d=rng.uniform(0, 5), slow_d=rng.uniform(5, 40))
        assert len(out.equilibria) >= 1
