"""Cox partial likelihood for a single binary covariate (HFRT vs CRT).

Because the covariate is binary, the denominator at each event time is
``n_crt + n_hfrt * exp(beta)`` where the n's count subjects at risk in each
arm. All three quantities below are evaluated from that closed form, in
log-sum-exp style so that |beta| in the hundreds stays finite.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .dataset import Dataset


class Ties(str, enum.Enum):
    BRESLOW = "breslow"
    EFRON = "efron"


class DegenerateLikelihoodWarning(UserWarning):
    """The dataset has no events, so the partial likelihood is identically 1."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, result: "MleResult"):
        super().__init__(message)
        self.result = result


class SeparationError(ConvergenceError):
    """Monotone partial likelihood: no finite maximiser exists."""


@dataclass(frozen=True)
class MleResult:
    beta_hat: float
    standard_error: float
    iterations: int
    converged: bool

    @property
    def hazard_ratio(self) -> float:
        return math.exp(self.beta_hat)


@dataclass(frozen=True)
class _Terms:
    # log L(beta) = beta * hfrt_deaths - sum_j weight_j * log(a_j + b_j exp(beta))
    hfrt_deaths: float
    log_a: np.ndarray
    log_b: np.ndarray
    weight: np.ndarray


def _terms(dataset: Dataset, ties: Ties) -> _Terms:
    # Dataset is immutable, so the expanded terms are memoised on the instance.
    cache = dataset.__dict__.setdefault("_cox_terms", {})
    ties = Ties(ties)
    if ties in cache:
        return cache[ties]
    rt = dataset.risk_table
    if ties is Ties.BRESLOW:
        a, b = rt.at_risk_crt, rt.at_risk_hfrt
        w = rt.deaths_crt + rt.deaths_hfrt
    else:
        a_parts, b_parts = [], []
        for n0, n1, d0, d1 in zip(rt.at_risk_crt, rt.at_risk_hfrt, rt.deaths_crt, rt.deaths_hfrt):
            d = int(d0 + d1)
            r = np.arange(d)
            a_parts.append(n0 - r * d0 / d)
            b_parts.append(n1 - r * d1 / d)
        a = np.concatenate(a_parts) if a_parts else np.zeros(0)
        b = np.concatenate(b_parts) if b_parts else np.zeros(0)
        w = np.ones_like(a)
    with np.errstate(divide="ignore"):
        terms = _Terms(float(rt.deaths_hfrt.sum()), np.log(a), np.log(b), w)
    cache[ties] = terms
    return terms


def _check_degenerate(dataset: Dataset) -> bool:
    if dataset.n_events == 0:
        warnings.warn(
            "dataset has no events: degenerate likelihood (log L = 0)",
            DegenerateLikelihoodWarning,
            stacklevel=3,
        )
        return True
    return False


def _prob_hfrt(t: _Terms, beta):
    # weight of the HFRT arm within each risk set
    return expit(np.asarray(beta, dtype=float)[..., None] + t.log_b - t.log_a)


def log_partial_likelihood(dataset: Dataset, beta, ties: Ties = Ties.BRESLOW):
    """log L(beta); accepts a scalar or an array of beta values."""
    beta_arr = np.asarray(beta, dtype=float)
    if _check_degenerate(dataset):
        return _like(beta, np.zeros_like(beta_arr))
    t = _terms(dataset, ties)
    log_den = np.logaddexp(t.log_a, t.log_b + beta_arr[..., None])
    out = beta_arr * t.hfrt_deaths - log_den @ t.weight
    return _like(beta, out)


def score(dataset: Dataset, beta, ties: Ties = Ties.BRESLOW):
    """d/dbeta log L(beta)."""
    beta_arr = np.asarray(beta, dtype=float)
    if _check_degenerate(dataset):
        return _like(beta, np.zeros_like(beta_arr))
    t = _terms(dataset, ties)
    out = t.hfrt_deaths - _prob_hfrt(t, beta_arr) @ t.weight
    return _like(beta, out)


def observed_information(dataset: Dataset, beta, ties: Ties = Ties.BRESLOW):
    """-d²/dbeta² log L(beta): summed risk-set variances of the group indicator."""
    beta_arr = np.asarray(beta, dtype=float)
    if _check_degenerate(dataset):
        return _like(beta, np.zeros_like(beta_arr))
    t = _terms(dataset, ties)
    p = _prob_hfrt(t, beta_arr)
    out = (p * (1.0 - p)) @ t.weight
    return _like(beta, out)


def _like(beta, value):
    return float(value) if np.ndim(beta) == 0 else value


def score_limits(dataset: Dataset, ties: Ties = Ties.BRESLOW) -> tuple[float, float]:
    """Limits of the score as beta -> -inf and beta -> +inf."""
    t = _terms(dataset, ties)
    at_minus = t.hfrt_deaths - t.weight[np.isneginf(t.log_a)].sum()
    at_plus = t.hfrt_deaths - t.weight[np.isfinite(t.log_b)].sum()
    return float(at_minus), float(at_plus)


def mle(
    dataset: Dataset,
    ties: Ties = Ties.BRESLOW,
    *,
    score_tol: float = 1e-10,
    step_tol: float = 1e-12,
    max_iter: int = 100,
    beta_bound: float = 50.0,
) -> MleResult:
    """Maximum partial likelihood estimate by damped Newton-Raphson from 0.

    Raises SeparationError when the likelihood is monotone (the score never
    changes sign, or an iterate leaves ``[-beta_bound, beta_bound]``).
    Hitting ``max_iter`` without meeting either tolerance returns
    ``converged=False``.
    """
    if dataset.n_events == 0:
        raise ValueError("mle needs at least one event")
    lo, hi = score_limits(dataset, ties)
    # score is non-increasing; a root exists only if it crosses zero
    if hi >= 0 or lo <= 0:
        direction = "+inf" if hi >= 0 else "-inf"
        res = MleResult(math.copysign(math.inf, hi if hi >= 0 else -1.0), math.inf, 0, False)
        raise SeparationError(
            f"monotone partial likelihood: estimate diverges to {direction} "
            "(separated groups or no events in one arm)",
            res,
        )

    beta = 0.0
    ll = log_partial_likelihood(dataset, beta, ties)
    for it in range(1, max_iter + 1):
        u = score(dataset, beta, ties)
        info = observed_information(dataset, beta, ties)
        if abs(u) < score_tol:
            return MleResult(beta, 1.0 / math.sqrt(info), it - 1, True)
        step = u / info
        new_beta = beta + step
        new_ll = log_partial_likelihood(dataset, new_beta, ties)
        halvings = 0
        # halve only on a real decrease, not on rounding noise near the optimum
        while new_ll < ll - 1e-12 * (1.0 + abs(ll)) and halvings < 60:
            step /= 2.0
            new_beta = beta + step
            new_ll = log_partial_likelihood(dataset, new_beta, ties)
            halvings += 1
        if abs(new_beta) > beta_bound:
            res = MleResult(new_beta, math.inf, it, False)
            raise SeparationError(f"|beta| exceeded {beta_bound} during Newton iterations", res)
        beta, ll = new_beta, new_ll
        if abs(step) < step_tol:
            info = observed_information(dataset, beta, ties)
            return MleResult(beta, 1.0 / math.sqrt(info), it, True)
    info = observed_information(dataset, beta, ties)
    return MleResult(beta, 1.0 / math.sqrt(info), max_iter, False)
