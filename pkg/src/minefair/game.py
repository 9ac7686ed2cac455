"""Two-group game over intra-group block propagation speed."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .engine import fairness_from_delays
from .scenario import Scenario


class Speed(enum.Enum):
    FAST = "fast"
    SLOW = "slow"


@dataclass(frozen=True, eq=False)
class GroupPartition:
    large: np.ndarray  # bool mask

    @property
    def small(self) -> np.ndarray:
        return ~self.large

    def members(self, large: bool = True) -> np.ndarray:
        return np.flatnonzero(self.large if large else self.small)


@dataclass(frozen=True)
class StrategyProfile:
    intra_large: Speed
    intra_small: Speed


@dataclass(frozen=True)
class GameOutcome:
    utilities: dict  # StrategyProfile -> (utility_large, utility_small)
    equilibria: tuple
    large_share: float

    def table_rows(self):
        for prof, (ul, us) in self.utilities.items():
            yield prof.intra_large.value, prof.intra_small.value, ul, us, prof in self.equilibria


def partition_groups(alpha) -> GroupPartition:
    """Large group = shortest prefix of miners sorted by share (desc, then
    index) whose combined share reaches one half."""
    alpha = np.asarray(alpha, dtype=float)
    order = np.lexsort((np.arange(alpha.size), -alpha))
    cum = np.cumsum(alpha[order])
    # tolerance so that [0.5, 0.5] stops at the first miner
    cut = int(np.searchsorted(cum, 0.5 - 1e-12)) + 1
    large = np.zeros(alpha.size, dtype=bool)
    large[order[:cut]] = True
    return GroupPartition(large)


def group_delay_matrix(partition: GroupPartition, profile: StrategyProfile, fast_d: float = 3.0, slow_d: float = 6.0) -> np.ndarray:
    large = partition.large
    n = large.size
    out = np.full((n, n), float(slow_d))
    if profile.intra_large is Speed.FAST:
        out[np.ix_(large, large)] = fast_d
    if profile.intra_small is Speed.FAST:
        small = partition.small
        out[np.ix_(small, small)] = fast_d
    np.fill_diagonal(out, 0.0)
    return out


def group_utility(alpha, mp, mask, kind: str = "group_mpr") -> float:
    if kind == "group_mpr":
        return float(mp[mask].sum() / alpha[mask].sum())
    if kind == "sum_mp":
        return float(mp[mask].sum())
    if kind == "sum_mpr":
        return float((mp[mask] / alpha[mask]).sum())
    raise ValueError(f"unknown utility {kind!r}")


def solve_game(scenario: Scenario, partition: GroupPartition | None = None, fast_d: float = 3.0,
               slow_d: float = 6.0, utility: str = "group_mpr", tol: float = 1e-12) -> GameOutcome:
    """Evaluate the four profiles and mark pure Nash equilibria.

    A cell is an equilibrium when neither group gains more than ``tol`` by
    switching its own intra-group speed.  Inter-group delays stay at ``slow_d``.
    """
    alpha = scenario.alpha
    partition = partition_groups(alpha) if partition is None else partition
    util = {}
    for ls, ss in itertools.product(Speed, Speed):
        prof = StrategyProfile(ls, ss)
        delays = group_delay_matrix(partition, prof, fast_d, slow_d)
        rep = fairness_from_delays(alpha, delays, scenario.block_interval, scenario.tie_break)
        util[prof] = (group_utility(alpha, rep.mp, partition.large, utility),
                      group_utility(alpha, rep.mp, partition.small, utility))

    def flip(s):
        return Speed.SLOW if s is Speed.FAST else Speed.FAST

    eq = []
    for prof, (ul, us) in util.items():
        dev_l = util[StrategyProfile(flip(prof.intra_large), prof.intra_small)][0]
        dev_s = util[StrategyProfile(prof.intra_large, flip(prof.intra_small))][1]
        if dev_l <= ul + tol and dev_s <= us + tol:
            eq.append(prof)
    return GameOutcome(util, tuple(eq), float(alpha[partition.large].sum()))
