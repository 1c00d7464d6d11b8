"""Posterior inference for the log hazard ratio.

Two independent routes to the same posterior: trapezoid quadrature on a
mode-centred grid (deterministic, used as the reference) and adaptive
random-walk Metropolis.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cox
from .cox import Ties
from .dataset import Dataset
from .priors import LogHrPrior, grad_log_density_beta, log_density_beta

_MASK64 = (1 << 64) - 1


class InferenceError(RuntimeError):
    pass


class Method(str, enum.Enum):
    QUADRATURE = "quadrature"
    MCMC = "mcmc"


@dataclass(frozen=True)
class Diagnostics:
    rhat: float
    ess: float
    acceptance_rate: float


@dataclass(frozen=True)
class PosteriorSummary:
    pr_hr_gt_1: float
    median_hr: float
    hr_2_5: float
    hr_97_5: float
    method: Method
    diagnostics: Diagnostics | None = None
    mode_beta: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.hr_2_5 <= self.median_hr <= self.hr_97_5:
            raise InferenceError("credible interval does not bracket the median")

    def to_record(self, prior_label: str) -> dict:
        d = self.diagnostics
        return {
            "prior_label": prior_label,
            "method": Method(self.method).value,
            "pr_hr_gt_1": self.pr_hr_gt_1,
            "median_hr": self.median_hr,
            "hr_2_5": self.hr_2_5,
            "hr_97_5": self.hr_97_5,
            "rhat": d.rhat if d else None,
            "ess": d.ess if d else None,
        }


def log_posterior(dataset: Dataset, prior: LogHrPrior, beta, ties: Ties = Ties.BRESLOW):
    """Unnormalised log posterior of beta: log partial likelihood plus log prior."""
    return cox.log_partial_likelihood(dataset, beta, ties) + log_density_beta(prior, beta)


def _quiet(fn, *args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", cox.DegenerateLikelihoodWarning)
        return fn(*args)


def posterior_mode(dataset: Dataset, prior: LogHrPrior, ties: Ties = Ties.BRESLOW, tol: float = 1e-12) -> float:
    """Maximiser of the (strictly concave) log posterior by damped Newton."""
    def grad(b):
        return _quiet(cox.score, dataset, b, ties) + grad_log_density_beta(prior, b)

    def curv(b):
        return _quiet(cox.observed_information, dataset, b, ties) + 1.0 / prior.sigma**2

    def lp(b):
        return _quiet(log_posterior, dataset, prior, b, ties)

    b = prior.mu
    cur = lp(b)
    for _ in range(200):
        g = grad(b)
        if abs(g) < tol:
            break
        step = g / curv(b)
        new = lp(b + step)
        while new < cur - 1e-12 * (1.0 + abs(cur)) and abs(step) > 1e-300:
            step /= 2.0
            new = lp(b + step)
        b, cur = b + step, new
        if abs(step) < tol * max(1.0, abs(b)):
            break
    return float(b)


@dataclass(frozen=True)
class PosteriorGrid:
    beta: np.ndarray
    density: np.ndarray  # normalised on the grid
    cdf: np.ndarray
    mode: float

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.beta))

    def cdf_at(self, b: float) -> float:
        return float(np.interp(b, self.beta, self.cdf, left=0.0, right=1.0))

    def quantile(self, p: float) -> float:
        return float(np.interp(p, self.cdf, self.beta))


def posterior_grid(
    dataset: Dataset,
    prior: LogHrPrior,
    ties: Ties = Ties.BRESLOW,
    grid_halfwidth_sigmas: float = 12.0,
    step: float = 1e-3,
    tail_drop: float = 40.0,
    max_points: int = 20_000_000,
) -> PosteriorGrid:
    """Normalised posterior density on an evenly spaced beta grid.

    The grid is centred on the posterior mode with half-width
    ``grid_halfwidth_sigmas`` curvature standard deviations, then widened on
    either side until the log density there is ``tail_drop`` below the peak.
    """
    mode = posterior_mode(dataset, prior, ties)
    info = _quiet(cox.observed_information, dataset, mode, ties) + 1.0 / prior.sigma**2
    width = grid_halfwidth_sigmas / math.sqrt(info)
    peak = _quiet(log_posterior, dataset, prior, mode, ties)
    lo_w = hi_w = width
    while _quiet(log_posterior, dataset, prior, mode - lo_w, ties) > peak - tail_drop:
        lo_w *= 2.0
    while _quiet(log_posterior, dataset, prior, mode + hi_w, ties) > peak - tail_drop:
        hi_w *= 2.0
    k_lo, k_hi = math.ceil(lo_w / step), math.ceil(hi_w / step)
    if k_lo + k_hi + 1 > max_points:
        raise InferenceError(f"quadrature grid would need {k_lo + k_hi + 1} points")
    beta = mode + step * np.arange(-k_lo, k_hi + 1)
    lp = _quiet(log_posterior, dataset, prior, beta, ties)
    if not np.all(np.isfinite(lp)):
        raise InferenceError("non-finite log posterior on the quadrature grid")
    w = np.exp(lp - peak)
    # trapezoid cumulative integral
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * step)])
    total = cum[-1]
    if not total > 0:
        raise InferenceError("zero posterior mass on the quadrature grid")
    return PosteriorGrid(beta=beta, density=w / total, cdf=cum / total, mode=mode)


def quadrature_posterior(
    dataset: Dataset,
    prior: LogHrPrior,
    ties: Ties = Ties.BRESLOW,
    grid_halfwidth_sigmas: float = 12.0,
    step: float = 1e-3,
) -> PosteriorSummary:
    g = posterior_grid(dataset, prior, ties, grid_halfwidth_sigmas, step)
    return PosteriorSummary(
        pr_hr_gt_1=1.0 - g.cdf_at(0.0),
        median_hr=math.exp(g.quantile(0.5)),
        hr_2_5=math.exp(g.quantile(0.025)),
        hr_97_5=math.exp(g.quantile(0.975)),
        method=Method.QUADRATURE,
        mode_beta=g.mode,
    )


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    iterations: int = 5000
    warmup: int = 2000
    seed: int = 0
    initial_step: float = 0.5
    target_acceptance: float = 0.44

    def __post_init__(self):
        if self.chains < 1 or self.iterations < 1 or self.warmup < 1:
            raise ValueError("chains, iterations and warmup must be positive")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must lie in (0, 1)")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def chain_seed(master: int, chain: int) -> int:
    return splitmix64((master + chain) & _MASK64)


@dataclass(frozen=True)
class PosteriorSamples:
    draws: np.ndarray  # (chains, iterations), post-warmup beta
    diagnostics: Diagnostics
    step_sizes: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1)


def split_rhat(draws: np.ndarray) -> float:
    """Split-chain potential scale reduction factor."""
    draws = np.atleast_2d(draws)
    half = draws.shape[1] // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain for split R-hat")
    split = np.concatenate([draws[:, :half], draws[:, -half:]], axis=0)
    n = split.shape[1]
    w = split.var(axis=1, ddof=1).mean()
    b = n * split.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0 if b == 0 else math.inf
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = len(x)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(draws: np.ndarray) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence truncation."""
    draws = np.atleast_2d(draws)
    m, n = draws.shape
    if n < 4:
        raise ValueError("need at least 4 draws per chain")
    acov = np.stack([_autocov(c) for c in draws])
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    if w == 0:
        return float(m * n)
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += draws.mean(axis=1).var(ddof=1)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum consecutive pairs while positive, enforcing monotone decrease
    total = 0.0
    prev = math.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = -1.0 + 2.0 * total
    tau = max(tau, 1.0 / math.log10(m * n))
    return float(m * n / tau)


def sample_posterior(
    dataset: Dataset,
    prior: LogHrPrior,
    ties: Ties = Ties.BRESLOW,
    config: SamplerConfig = SamplerConfig(),
) -> PosteriorSamples:
    """Adaptive random-walk Metropolis on beta.

    Each chain has its own generator seeded through splitmix64. The log step
    size follows a Robbins-Monro recursion toward ``target_acceptance``
    during warmup and is frozen afterwards. Chains are advanced in lockstep
    purely for speed; the draws are the same as running them one by one.
    """
    c = config
    n_total = c.warmup + c.iterations
    no_events = dataset.n_events == 0
    if not no_events:
        terms = cox._terms(dataset, ties)

    def target(b: np.ndarray) -> np.ndarray:
        # runaway proposals overflow to -inf/nan and are rejected below
        with np.errstate(over="ignore", invalid="ignore"):
            lp = log_density_beta(prior, b)
            if no_events:
                return lp
            log_den = np.logaddexp(terms.log_a, terms.log_b + b[:, None])
            return lp + b * terms.hfrt_deaths - log_den @ terms.weight

    rngs = [np.random.default_rng(chain_seed(c.seed, k)) for k in range(c.chains)]
    cur = np.empty(c.chains)
    for k, rng in enumerate(rngs):
        for _ in range(100):
            b0 = rng.normal(prior.mu, prior.sigma)
            if np.isfinite(target(np.array([b0])))[0]:
                break
        else:
            raise InferenceError(f"chain {k}: non-finite target at 100 initial draws")
        cur[k] = b0
    noise = np.stack([rng.standard_normal(n_total) for rng in rngs])
    log_u = np.log(np.stack([rng.random(n_total) for rng in rngs]))

    log_step = np.full(c.chains, math.log(c.initial_step))
    lp_cur = target(cur)
    out = np.empty((c.chains, c.iterations))
    warm_accepts = np.zeros(c.chains, dtype=int)
    accepts = np.zeros(c.chains, dtype=int)
    for t in range(n_total):
        prop = cur + np.exp(log_step) * noise[:, t]
        lp_prop = target(prop)
        with np.errstate(invalid="ignore"):
            log_alpha = np.where(np.isfinite(lp_prop), lp_prop - lp_cur, -np.inf)
        accept = log_u[:, t] < log_alpha
        cur = np.where(accept, prop, cur)
        lp_cur = np.where(accept, lp_prop, lp_cur)
        if t < c.warmup:
            warm_accepts += accept
            alpha = np.exp(np.minimum(log_alpha, 0.0))
            log_step += (t + 1) ** -0.6 * (alpha - c.target_acceptance)
        else:
            accepts += accept
            out[:, t - c.warmup] = cur
    if np.any(warm_accepts == 0):
        bad = [int(k) for k in np.flatnonzero(warm_accepts == 0)]
        raise InferenceError(f"chain(s) {bad}: every warmup proposal was rejected")
    if out.shape[1] >= 4:
        diag = Diagnostics(
            rhat=split_rhat(out),
            ess=effective_sample_size(out),
            acceptance_rate=float(accepts.sum() / (c.chains * c.iterations)),
        )
    else:
        diag = Diagnostics(math.nan, math.nan, float(accepts.sum() / (c.chains * c.iterations)))
    return PosteriorSamples(draws=out, diagnostics=diag, step_sizes=np.exp(log_step))


def summarize(samples, min_draws: int = 100) -> PosteriorSummary:
    """Table-style summary from beta draws (an array or PosteriorSamples).

    Quantiles of exp(beta) use linear interpolation between order statistics
    (R type 7).
    """
    diagnostics = None
    if isinstance(samples, PosteriorSamples):
        diagnostics = samples.diagnostics
        beta = samples.flat
    else:
        beta = np.asarray(samples, dtype=float).reshape(-1)
    if beta.size == 0 or beta.size < min_draws:
        raise InferenceError(f"need at least {min_draws} draws, got {beta.size}")
    hr = np.exp(beta)
    lo, med, hi = np.quantile(hr, [0.025, 0.5, 0.975], method="linear")
    return PosteriorSummary(
        pr_hr_gt_1=float(np.mean(beta > 0)),
        median_hr=float(med),
        hr_2_5=float(lo),
        hr_97_5=float(hi),
        method=Method.MCMC,
        diagnostics=diagnostics,
    )


def analyze(
    dataset: Dataset,
    prior: LogHrPrior,
    ties: Ties = Ties.BRESLOW,
    method: Method = Method.QUADRATURE,
    config: SamplerConfig = SamplerConfig(),
) -> PosteriorSummary:
    if Method(method) is Method.QUADRATURE:
        return quadrature_posterior(dataset, prior, ties)
    return summarize(sample_posterior(dataset, prior, ties, config))
