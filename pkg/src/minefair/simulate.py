"""Monte Carlo of the round model, used as an independent check on the engine.

Each round, given the current initiator ``j``:

1. the next block's miner ``k`` is drawn proportionally to hashrate;
2. with probability ``F[j, k]`` the round forks, otherwise ``j``'s block is
   credited and ``k`` opens the next round;
3. on a fork exactly one of ``j``, ``k`` is credited, and the miner of the
   block after that (drawn again proportionally to hashrate) opens the next
   round.

Fork resolution uses ``W[j, k]`` as a coin by default.  With ``race=True``
the tie is re-enacted instead: the resolving block's miner is drawn, and if it
is a third party its side is decided by the tie-break rule (for first-seen,
by comparing arrival times at a sampled fork time).

Randomness comes from numpy's PCG64 (``np.random.default_rng(seed)``); each
round consumes one row of five uniforms, drawn in fixed-size chunks, so a
given ``(scenario, rounds, seed, race)`` always replays bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .engine import FairnessReport, fork_matrix, win_matrix
from .scenario import Scenario, TieBreak, realize_delays

CHUNK = 1 << 18

_RULE_CODE = {TieBreak.FIRST_SEEN: 0, TieBreak.RANDOM: 1, TieBreak.LAST_GENERATED: 2}


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario
    rounds: int
    seed: int = 0
    race: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")


@dataclass(frozen=True, eq=False)
class SimResult:
    rounds: int
    main_chain_blocks: np.ndarray
    round_initiations: np.ndarray
    fork_events: int

    @property
    def total_main_chain_blocks(self) -> int:
        return int(self.main_chain_blocks.sum())

    @property
    def fork_rate(self) -> float:
        return self.fork_events / self.rounds

    @property
    def r(self) -> np.ndarray:
        return self.main_chain_blocks / self.total_main_chain_blocks

    @property
    def pi(self) -> np.ndarray:
        return self.round_initiations / self.rounds

    @property
    def r_se(self) -> np.ndarray:
        # binomial approximation; rounds are Markov-dependent but only weakly
        r = self.r
        return np.sqrt(r * (1 - r) / self.total_main_chain_blocks)

    @property
    def pi_se(self) -> np.ndarray:
        p = self.pi
        return np.sqrt(p * (1 - p) / self.rounds)

    def to_csv(self) -> str:
        lines = ["miner_id,main_chain_blocks,round_initiations,r,r_se,pi,pi_se"]
        r, r_se, pi, pi_se = self.r, self.r_se, self.pi, self.pi_se
        for i in range(self.main_chain_blocks.size):
            lines.append(
                f"{i},{int(self.main_chain_blocks[i])},{int(self.round_initiations[i])},"
                f"{float(r[i])!r},{float(r_se[i])!r},{float(pi[i])!r},{float(pi_se[i])!r}"
            )
        return "\n".join(lines) + "\n"


@numba.njit(cache=True)
def _pick(cum, u):
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return min(idx, cum.size - 1)


@numba.njit(cache=True)
def _run_chunk(state, u, cum, F, W, delays, T, race, rule, blocks, inits):
    forks = 0
    for row in range(u.shape[0]):
        j = state
        inits[j] += 1
        k = _pick(cum, u[row, 0])
        if u[row, 1] < F[j, k]:
            forks += 1
            if race:
                m = _pick(cum, u[row, 2])
                if m == j:
                    winner = j
                elif m == k:
                    winner = k
                elif rule == 0:
                    # fork time tau ~ Exp(1/T) conditioned on tau < T_jk
                    span = -np.expm1(-delays[j, k] / T)
                    tau = -T * np.log1p(-u[row, 4] * span)
                    winner = j if delays[j, m] < tau + delays[k, m] else k
                elif rule == 1:
                    winner = j if u[row, 4] < 0.5 else k
                else:
                    winner = k
            else:
                winner = j if u[row, 2] < W[j, k] else k
            blocks[winner] += 1
            state = _pick(cum, u[row, 3])
        else:
            blocks[j] += 1
            state = k
    return state, forks


def simulate(config: SimConfig) -> SimResult:
    sc = config.scenario
    n = sc.n_miners
    delays = realize_delays(sc.delays, n)
    F = fork_matrix(delays, sc.block_interval)
    W = win_matrix(sc.alpha, delays, sc.block_interval, sc.tie_break)
    cum = np.cumsum(sc.alpha)
    rng = np.random.default_rng(int(config.seed))
    blocks = np.zeros(n, dtype=np.int64)
    inits = np.zeros(n, dtype=np.int64)
    state = int(_pick(cum, rng.random()))
    forks = 0
    left = config.rounds
    while left > 0:
        size = min(CHUNK, left)
        u = rng.random((size, 5))
        state, f = _run_chunk(state, u, cum, F, W, delays, float(sc.block_interval),
                              config.race, _RULE_CODE[sc.tie_break], blocks, inits)
        forks += f
        left -= size
    return SimResult(config.rounds, blocks, inits, int(forks))


def empirical_report(result: SimResult, alpha) -> FairnessReport:
    if result.total_main_chain_blocks <= 0:
        raise ValueError("no main-chain blocks recorded")
    return FairnessReport.from_shares(alpha, result.pi, result.r)


def max_se_deviation(result: SimResult, report: FairnessReport) -> float:
    """Largest ``|r_engine - r_empirical|`` across miners, in standard errors."""
    se = result.r_se
    gap = np.abs(report.r - result.r)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, gap / se, np.where(gap > 0, np.inf, 0.0))
    return float(z.max())


def expected_fork_rate(alpha, pi, F) -> float:
    alpha = np.asarray(alpha, dtype=float)
    return float(np.asarray(pi) @ (F @ alpha))
