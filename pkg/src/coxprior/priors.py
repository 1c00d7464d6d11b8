"""Log-normal hazard-ratio priors.

A prior ``HR ~ LogNormal(mu, sigma)`` is the same object as
``beta = log HR ~ Normal(mu, sigma**2)``; ``sigma`` is always a standard
deviation.
"""
from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import asdict, dataclass

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Kind(str, enum.Enum):
    INFORMATIVE = "Informative"
    NONINFORMATIVE = "NonInformative"


class Source(str, enum.Enum):
    CHATGPT = "ChatGPT"
    GEMINI = "Gemini"
    GROK = "Grok"
    CUSTOM = "Custom"


class PriorError(ValueError):
    pass


@dataclass(frozen=True)
class LogHrPrior:
    mu: float
    sigma: float
    label: str = "custom"
    kind: Kind = Kind.INFORMATIVE
    source: Source = Source.CUSTOM

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise PriorError("mu must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise PriorError("sigma must be positive")
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "source", Source(self.source))

    def negated(self) -> "LogHrPrior":
        """The same prior expressed with the reference group swapped."""
        return LogHrPrior(-self.mu, self.sigma, self.label, self.kind, self.source)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["source"] = self.source.value
        return {k: d[k] for k in ("label", "source", "kind", "mu", "sigma")}


@dataclass(frozen=True)
class PriorSummary:
    median_hr: float
    hr_lower_95: float
    hr_upper_95: float


# (source, kind, mu, sigma) as published for the three chatbots
_PRESETS = [
    (Source.CHATGPT, Kind.INFORMATIVE, 0.431, 0.30),
    (Source.CHATGPT, Kind.NONINFORMATIVE, 0.0, 1.0),
    (Source.GEMINI, Kind.INFORMATIVE, 0.095, 0.18),
    (Source.GEMINI, Kind.NONINFORMATIVE, 0.0, 2.0),
    (Source.GROK, Kind.INFORMATIVE, 0.068, 0.093),
    (Source.GROK, Kind.NONINFORMATIVE, 0.0, 31.62),
]


def preset_name(source: Source, kind: Kind) -> str:
    suffix = "informative" if kind is Kind.INFORMATIVE else "noninformative"
    return f"{source.value.lower()}-{suffix}"


def preset_priors() -> list[LogHrPrior]:
    return [LogHrPrior(mu, sigma, preset_name(src, kind), kind, src) for src, kind, mu, sigma in _PRESETS]


def preset(name: str) -> LogHrPrior:
    for p in preset_priors():
        if p.label == name.lower():
            return p
    raise PriorError(f"unknown preset {name!r}")


PRESET_NAMES = tuple(p.label for p in preset_priors())

_LITERAL = re.compile(r"^lognormal:([^,]+),([^,]+)$", re.IGNORECASE)


def parse_prior_literal(text: str) -> LogHrPrior:
    """Resolve ``lognormal:MU,SIGMA`` or a preset name to a prior."""
    text = text.strip()
    m = _LITERAL.match(text)
    if m is None:
        if text.lower() in PRESET_NAMES:
            return preset(text)
        raise PriorError(
            f"cannot parse prior {text!r}; expected lognormal:MU,SIGMA or one of {', '.join(PRESET_NAMES)}"
        )
    try:
        mu, sigma = float(m.group(1)), float(m.group(2))
    except ValueError:
        raise PriorError(f"non-numeric prior parameters in {text!r}") from None
    return LogHrPrior(mu, sigma, label=text, kind=Kind.INFORMATIVE, source=Source.CUSTOM)


def load_priors(path) -> list[LogHrPrior]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    try:
        return [
            LogHrPrior(
                mu=float(d["mu"]),
                sigma=float(d["sigma"]),
                label=str(d["label"]),
                kind=Kind(d.get("kind", Kind.INFORMATIVE.value)),
                source=Source(d.get("source", Source.CUSTOM.value)),
            )
            for d in data
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise PriorError(f"invalid prior file {path}: {exc}") from exc


def dump_priors(priors, fh=None) -> str:
    text = json.dumps([p.to_dict() for p in priors], indent=2) + "\n"
    if fh is not None:
        fh.write(text)
    return text


# Rational approximation of the standard normal quantile (P. J. Acklam),
# followed by one Halley correction against erfc.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_ppf(p: float) -> float:
    """Standard normal quantile function."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly between 0 and 1, got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # Halley step; use the upper tail for p > 1/2 to keep relative accuracy
    if p <= 0.5:
        e = normal_cdf(x) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def hr_quantile(prior: LogHrPrior, p: float) -> float:
    return math.exp(prior.mu + prior.sigma * normal_ppf(p))


def prior_summary(prior: LogHrPrior) -> PriorSummary:
    return PriorSummary(
        median_hr=hr_quantile(prior, 0.5),
        hr_lower_95=hr_quantile(prior, 0.025),
        hr_upper_95=hr_quantile(prior, 0.975),
    )


def log_density_beta(prior: LogHrPrior, beta):
    """Log Normal(mu, sigma^2) density of beta; scalar or array."""
    z = (np.asarray(beta, dtype=float) - prior.mu) / prior.sigma
    out = -0.5 * z * z - math.log(prior.sigma) - LOG_SQRT_2PI
    return float(out) if np.ndim(beta) == 0 else out


def grad_log_density_beta(prior: LogHrPrior, beta):
    return -(np.asarray(beta, dtype=float) - prior.mu) / prior.sigma**2


def hr_density(prior: LogHrPrior, hr):
    """LogNormal density on the hazard-ratio scale."""
    hr = np.asarray(hr, dtype=float)
    return np.exp(log_density_beta(prior, np.log(hr))) / hr


def density_curve(prior: LogHrPrior, hr_min: float, hr_max: float, points: int) -> list[tuple[float, float]]:
    """(hr, density) pairs on an evenly spaced grid over [hr_min, hr_max]."""
    if not (0 < hr_min < hr_max) or not math.isfinite(hr_max):
        raise PriorError(f"invalid HR range [{hr_min}, {hr_max}]")
    if points < 2:
        raise PriorError("points must be at least 2")
    grid = np.linspace(hr_min, hr_max, points)
    return list(zip(grid.tolist(), np.atleast_1d(hr_density(prior, grid)).tolist()))
