"""Exact round-model quantities: F, W, pi, r, MP, MPR.

A round runs from the first block at height h to the first block at height
h+1.  If miner j initiates and miner k mines next, a fork happens with
probability ``F[j, k] = 1 - exp(-T[j, k] / T)`` (k had not yet seen j's
block).  On a fork the round's reward goes to j with probability ``W[j, k]``
and to k otherwise; whoever mines the following block initiates the next
round.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import ConvergenceError
from .scenario import FixedUniform, Scenario, TieBreak, realize_delays

PI_TOL = 1e-13
PI_MAX_ITER = 10**6


def fork_matrix(delays: np.ndarray, T: float) -> np.ndarray:
    F = -np.expm1(-np.asarray(delays, dtype=float) / T)
    np.fill_diagonal(F, 0.0)
    return F


def _closed_form_win(alpha: np.ndarray, rule: TieBreak) -> np.ndarray:
    a_i = alpha[:, None]
    a_j = alpha[None, :]
    if rule is TieBreak.FIRST_SEEN:
        W = np.broadcast_to(1.0 - a_j, (alpha.size, alpha.size))
    elif rule is TieBreak.RANDOM:
        W = (1.0 - a_j + a_i) / 2.0
    else:
        W = np.broadcast_to(a_i, (alpha.size, alpha.size))
    return np.array(W, dtype=float)


@numba.njit(cache=True, fastmath=True)
def _first_seen_race(alpha, delays, T, W):
    # Miner i starts the round at time 0; j forks at tau ~ Exp(1/T) truncated
    # to (0, T_ij).  Third party k follows i iff T_ik < tau + T_jk, which has
    # probability (clip(exp(-(T_ik - T_jk)/T), e_t, 1) - e_t) / (1 - e_t)
    # with e_t = exp(-T_ij/T).  exp(-(T_ik - T_jk)/T) is split as
    # exp(-T_ik/T) * exp(T_jk/T) so the inner loop is branch-free.
    n = alpha.size
    total = alpha.sum()
    ahead = np.exp(-delays / T)
    behind = np.exp(delays / T)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            t = delays[i, j]
            third = total - alpha[i] - alpha[j]
            acc = 0.0
            if t <= 0.0:
                for k in range(n):
                    if k != i and k != j and delays[i, k] <= delays[j, k]:
                        acc += alpha[k]
            else:
                e_t = np.exp(-t / T)
                part = 0.0
                for k in range(n):
                    x = ahead[i, k] * behind[j, k]
                    part += alpha[k] * (min(max(x, e_t), 1.0) - e_t)
                for k in (i, j):
                    x = ahead[i, k] * behind[j, k]
                    part -= alpha[k] * (min(max(x, e_t), 1.0) - e_t)
                acc = part / -np.expm1(-t / T)
            acc = min(max(acc, 0.0), third)
            W[i, j] = alpha[i] + acc
    return W


def _off_diagonal_uniform(delays: np.ndarray) -> bool:
    n = delays.shape[0]
    off = delays[~np.eye(n, dtype=bool)]
    return off.size == 0 or bool(np.all(off == off[0]))


def win_matrix(alpha, delays: np.ndarray, T: float, rule: TieBreak | str, method: str = "auto") -> np.ndarray:
    """Probability ``W[i, j]`` that i's round-opening block survives a fork by j.

    Uniform off-diagonal delays give the closed forms
    ``1 - a_j`` (first-seen), ``(1 - a_j + a_i)/2`` (random), ``a_i``
    (last-generated).  Otherwise a one-round race is used: i and j mine on
    their own blocks, and each third party k sides with i under first-seen
    iff i's block reaches k first, averaged over the fork time.  Under the
    random rule third parties split evenly and under last-generated they all
    follow j, so those two rules do not depend on the delays.

    ``method`` is ``"auto"``, ``"closed"`` or ``"race"``; ``"race"`` forces
    the general computation even for uniform delays.
    """
    alpha = np.asarray(alpha, dtype=float)
    rule = TieBreak.parse(rule)
    W = _closed_form_win(alpha, rule)
    if rule is not TieBreak.FIRST_SEEN or method == "closed":
        return W
    delays = np.ascontiguousarray(delays, dtype=float)
    if method == "auto" and _off_diagonal_uniform(delays):
        return W
    if delays.max() / T > 700:
        raise ValueError("delays exceed 700 block intervals; fork rates are 1 and the race is meaningless")
    return _first_seen_race(alpha, delays, float(T), W)


def transition_matrix(alpha, F: np.ndarray) -> np.ndarray:
    """Row-stochastic ``P[j, i] = P(next initiator i | initiator j)``."""
    alpha = np.asarray(alpha, dtype=float)
    s = F @ alpha
    return alpha[None, :] * (1.0 - F + s[:, None])


def stationary_round_initiation(alpha, F: np.ndarray, tol: float | None = None, max_iter: int | None = None) -> np.ndarray:
    """Fixed point of the initiator chain, iterated from ``pi = alpha``.

    Each step is ``pi'_i = a_i * (sum(pi) - (F^T pi)_i + pi . s)`` with
    ``s = F @ alpha``; the two products are numpy dot products, so results are
    reproducible for a fixed numpy/BLAS build.
    """
    tol = PI_TOL if tol is None else tol
    max_iter = PI_MAX_ITER if max_iter is None else max_iter
    alpha = np.asarray(alpha, dtype=float)
    F = np.asarray(F, dtype=float)
    s = F @ alpha
    Ft = np.ascontiguousarray(F.T)
    pi = alpha.copy()
    for _ in range(max_iter):
        nxt = alpha * (pi.sum() - Ft @ pi + pi @ s)
        delta = np.max(np.abs(nxt - pi))
        pi = nxt
        if delta < tol:
            return pi / pi.sum()
    raise ConvergenceError(f"round-initiation iteration did not converge in {max_iter} steps (last change {delta:.3e})")


def reward_shares(alpha, pi, F: np.ndarray, W: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    pi = np.asarray(pi, dtype=float)
    lost = F * (1.0 - W)
    kept = pi * (1.0 - lost @ alpha)
    won = alpha * (lost.T @ pi)
    return kept + won


@dataclass(frozen=True, eq=False)
class FairnessReport:
    alpha: np.ndarray
    pi: np.ndarray
    r: np.ndarray
    mp: np.ndarray
    mpr: np.ndarray
    fingerprint: str = ""

    @classmethod
    def from_shares(cls, alpha, pi, r, fingerprint: str = "") -> "FairnessReport":
        alpha = np.asarray(alpha, dtype=float)
        r = np.asarray(r, dtype=float)
        mp = r - alpha
        return cls(alpha, np.asarray(pi, dtype=float), r, mp, mp / alpha, fingerprint)

    @property
    def n_miners(self) -> int:
        return self.alpha.size

    def rows(self):
        for i in range(self.n_miners):
            yield i, self.alpha[i], self.pi[i], self.r[i], self.mp[i], self.mpr[i]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["miner_id", "alpha", "pi", "reward_share", "mp", "mpr"])
        for i, *vals in self.rows():
            w.writerow([i, *(repr(float(v)) for v in vals)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def fairness_from_delays(alpha, delays: np.ndarray, T: float, rule, fingerprint: str = "") -> FairnessReport:
    alpha = np.asarray(alpha, dtype=float)
    F = fork_matrix(delays, T)
    W = win_matrix(alpha, delays, T, rule)
    pi = stationary_round_initiation(alpha, F)
    r = reward_shares(alpha, pi, F, W)
    return FairnessReport.from_shares(alpha, pi, r, fingerprint)


def fairness_report(scenario: Scenario, seed: int | None = None) -> FairnessReport:
    delays = realize_delays(scenario.delays, scenario.n_miners, seed)
    return fairness_from_delays(scenario.alpha, delays, scenario.block_interval, scenario.tie_break, scenario.fingerprint())


def fixed_delay_report(scenario: Scenario, d: float) -> FairnessReport:
    return fairness_report(scenario.replace(delays=FixedUniform(d)))
