"""First-order closed forms and the linear-fit diagnostics that check them."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FitError

# Beyond this d/T the first-order formulas have not been checked against the
# exact model.
VALIDATED_DT = 0.1


@dataclass(frozen=True)
class TheoryPrediction:
    f: float
    slope_2f: float
    zero_point_sum_sq: float
    mpr: np.ndarray


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    correlation: float

    @property
    def zero_point(self) -> float:
        return -self.intercept / self.slope


def fork_probability(d: float, T: float) -> float:
    return float(-np.expm1(-d / T))


def predict_mpr(alpha, d: float, T: float) -> TheoryPrediction:
    """``MPR_i = 2f (a_i - sum a^2)``, the same for every tie-break rule."""
    if d < 0 or T <= 0:
        raise ValueError(f"need d >= 0 and T > 0, got d={d}, T={T}")
    if d / T > VALIDATED_DT:
        warnings.warn(f"d/T = {d / T:.3g} is outside the validated range (<= {VALIDATED_DT})", stacklevel=2)
    alpha = np.asarray(alpha, dtype=float)
    f = fork_probability(d, T)
    hhi = float(alpha @ alpha)
    return TheoryPrediction(f=f, slope_2f=2 * f, zero_point_sum_sq=hhi, mpr=2 * f * (alpha - hhi))


def predict_round_initiation(alpha, f: float) -> np.ndarray:
    # First-order expansion of the initiator fixed point with pi_j -> a_j
    # substituted on the right-hand side.
    alpha = np.asarray(alpha, dtype=float)
    return alpha + alpha * f * (alpha - alpha @ alpha)


def naive_mpr(alpha, f: float) -> np.ndarray:
    """Profit rate if round initiation is assumed to equal hashrate share.

    Exactly half of :func:`predict_mpr`: the fork effect on who opens rounds
    contributes as much as the fork losses themselves.
    """
    alpha = np.asarray(alpha, dtype=float)
    return f * (alpha - alpha @ alpha)


def fit_line(alpha, mpr) -> LinearFit:
    alpha = np.asarray(alpha, dtype=float)
    mpr = np.asarray(mpr, dtype=float)
    if np.ptp(alpha) == 0:
        raise FitError("all hashrates are equal; the MPR line is undefined")
    x = alpha - alpha.mean()
    y = mpr - mpr.mean()
    sxx = x @ x
    sxy = x @ y
    syy = y @ y
    slope = sxy / sxx
    intercept = mpr.mean() - slope * alpha.mean()
    corr = sxy / np.sqrt(sxx * syy) if syy > 0 else float("nan")
    return LinearFit(float(slope), float(intercept), float(np.clip(corr, -1.0, 1.0)))


def fit_mpr_line(report) -> LinearFit:
    """Ordinary least squares of MPR against hashrate share over all miners."""
    return fit_line(report.alpha, report.mpr)


def zero_point_identity_check(report) -> float:
    """Relative gap between the fitted zero crossing and ``sum a^2``."""
    alpha = np.asarray(report.alpha, dtype=float)
    hhi = float(alpha @ alpha)
    if np.ptp(alpha) == 0:
        # every miner sits at a_i = 1/N = sum a^2
        return 0.0
    fit = fit_mpr_line(report)
    return abs(fit.zero_point - hhi) / hhi
