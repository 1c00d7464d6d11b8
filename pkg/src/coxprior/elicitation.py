"""Hazard-ratio prior elicitation from chat-completion models."""
from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass

import httpx

from .priors import Kind, LogHrPrior, PriorError, Source, hr_quantile

ELICITATION_PROMPT = """\
You are a radiation oncologist assisting a biostatistician in the Bayesian analysis of a Cox survival model of glioblastoma data from an adult population.
The Cox model compares two groups using the hazard ratio.
1. The name of the treatment group is called "group." There are two groups, called HFRT and CRT. HFRT is a treatment with the radiation fractionation schedule having fewer, larger fractions. CRT is a treatment standard using radiation.
2. The variable "time_os_months" is the survival time in months.
3. The binary (0/1) event variable is called "event", with 1 = dead and 0 = censored.
You, the radiation oncologist, has to develop the prior distribution for a hazard ratio of HFRT and CRT, where CRT is the reference group, using glioblastoma literature.

The response should include:
1. The results of review of the information on HFRT and CRT trials in the glioblastoma literature.
2. An informative log-normal prior for the hazard ratio (which is on the log scale)
3. A justification of the informative prior using the information on HFRT and CRT trials in the glioblastoma literature.
4. A non-informative log-normal prior for the hazard ratio (which is on the log scale), to compare to the informative one.
"""

STRUCTURED_CLAUSE = """
In addition to the items above, end your response with a fenced ```json code block containing exactly these four numeric fields, where mu is the mean and sigma the standard deviation of the Normal distribution of the log hazard ratio:
```json
{"mu_informative": <number>, "sigma_informative": <number>, "mu_noninformative": <number>, "sigma_noninformative": <number>}
```
"""

BLOCK_FIELDS = ("mu_informative", "sigma_informative", "mu_noninformative", "sigma_noninformative")


def build_prompt() -> str:
    return ELICITATION_PROMPT + STRUCTURED_CLAUSE


class ElicitationError(RuntimeError):
    def __init__(self, message: str, transcript: str = ""):
        super().__init__(message)
        self.transcript = transcript


class ProviderConfigError(ElicitationError):
    pass


class ProviderHTTPError(ElicitationError):
    def __init__(self, message: str, status_code: int, transcript: str = ""):
        super().__init__(message, transcript)
        self.status_code = status_code


class ProviderTimeoutError(ElicitationError):
    pass


class EnvelopeError(ElicitationError):
    pass


class PriorParseError(ElicitationError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    model_name: str
    base_url: str = ""
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 0.0
    timeout_seconds: int = 120
    mock: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise ProviderConfigError("temperature must be >= 0")
        if self.timeout_seconds <= 0:
            raise ProviderConfigError("timeout_seconds must be positive")
        if not self.mock and not (self.base_url and self.model_name):
            raise ProviderConfigError("base_url and model_name are required unless mock is set")

    @classmethod
    def from_file(cls, path) -> "ProviderConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if any(k in data for k in ("api_key", "key", "token")):
            raise ProviderConfigError(
                "provider files must name the key's environment variable (api_key_env), not hold the key"
            )
        try:
            return cls(**data)
        except TypeError as exc:
            raise ProviderConfigError(f"invalid provider file {path}: {exc}") from None


_MOCK_RESPONSES = {
    "chatgpt": """\
1. Literature review (canned offline response; no literature was consulted).
Randomised comparisons of hypofractionated and conventional schedules in adult
glioblastoma report hazard ratios for death close to one, with wide intervals.

2. Informative prior: HR ~ LogNormal(μ = 0.431, σ = 0.30), i.e. log HR ~ Normal(0.431, 0.30²).

3. Justification: the centre encodes a modest excess hazard for HFRT relative to
CRT, and the spread keeps hazard ratios below one plausible.

4. Non-informative prior: HR ~ LogNormal(μ = 0, σ = 1), centred on no difference.

```json
{"mu_informative": 0.431, "sigma_informative": 0.30, "mu_noninformative": 0, "sigma_noninformative": 1}
```
""",
    "gemini": """\
1. Literature review (canned offline response; no literature was consulted).
Pooled trial evidence suggests similar survival for the two fractionation schedules.

2. Informative prior: HR ~ LogNormal(μ = 0.095, σ = 0.18).

3. Justification: a small shift above one with a tight spread reflects
near-equivalence with slight uncertainty toward harm.

4. Non-informative prior: HR ~ LogNormal(μ = 0, σ = 2).

```json
{"mu_informative": 0.095, "sigma_informative": 0.18, "mu_noninformative": 0, "sigma_noninformative": 2}
```
""",
    "grok": """\
1. Literature review (canned offline response; no literature was consulted).
Most comparisons report overlapping survival curves for HFRT and CRT.

2. Informative prior: HR ~ LogNormal(mu = 0.068, sigma = 0.093).

3. Justification: a hazard ratio near 1.07 with a narrow band matches the
consistency of the reported estimates.

4. Non-informative prior: HR ~ LogNormal(mu = 0, sigma = 31.62), a diffuse
choice (variance 1000 on the log scale).

```json
{"mu_informative": 0.068, "sigma_informative": 0.093, "mu_noninformative": 0, "sigma_noninformative": 31.62}
```
""",
}

MOCK_MODELS = tuple(_MOCK_RESPONSES)


def _endpoint(base_url: str) -> str:
    url = base_url.rstrip("/")
    return url if url.endswith("/chat/completions") else url + "/chat/completions"


def extract_message_text(envelope) -> str:
    """Pull the assistant text out of the common chat-completion envelopes."""
    if not isinstance(envelope, dict):
        raise KeyError("envelope is not an object")
    if "choices" in envelope:  # OpenAI-compatible (also xAI and Gemini's compatibility endpoint)
        content = envelope["choices"][0]["message"]["content"]
    elif "candidates" in envelope:  # Gemini native
        content = "".join(p.get("text", "") for p in envelope["candidates"][0]["content"]["parts"])
    elif "content" in envelope and isinstance(envelope["content"], list):  # content-block style
        content = "".join(b.get("text", "") for b in envelope["content"] if b.get("type") == "text")
    else:
        raise KeyError("no choices/candidates/content in envelope")
    if not isinstance(content, str) or not content:
        raise KeyError("empty assistant message")
    return content


def elicit_with_transcript(
    provider: ProviderConfig, prompt: str, client: httpx.Client | None = None
) -> tuple[str, str]:
    """Run one elicitation and return (assistant text, full transcript)."""
    if provider.mock:
        key = provider.model_name.lower()
        if key not in _MOCK_RESPONSES:
            raise ProviderConfigError(f"no canned response for {provider.model_name!r}; use one of {MOCK_MODELS}")
        text = _MOCK_RESPONSES[key]
        return text, f"=== REQUEST (mock {key}) ===\n{prompt}\n=== RESPONSE ===\n{text}"

    api_key = os.environ.get(provider.api_key_env)
    if not api_key:
        raise ProviderConfigError(f"environment variable {provider.api_key_env} is not set")
    url = _endpoint(provider.base_url)
    body = {
        "model": provider.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": provider.temperature,
    }
    request_text = f"=== REQUEST ===\nPOST {url}\n{json.dumps(body, indent=2, ensure_ascii=False)}\n"
    own_client = client is None
    client = client or httpx.Client()
    try:
        resp = client.post(
            url,
            json=body,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=provider.timeout_seconds,
        )
    except httpx.TimeoutException as exc:
        raise ProviderTimeoutError(f"request timed out after {provider.timeout_seconds}s", request_text) from exc
    except httpx.HTTPError as exc:
        raise ProviderHTTPError(f"transport error: {exc}", 0, request_text) from exc
    finally:
        if own_client:
            client.close()
    transcript = request_text + f"=== RESPONSE {resp.status_code} ===\n{resp.text}\n"
    if not resp.is_success:
        raise ProviderHTTPError(f"HTTP {resp.status_code} from provider", resp.status_code, transcript)
    try:
        text = extract_message_text(resp.json())
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise EnvelopeError(f"malformed response envelope: {exc}", transcript) from None
    return text, transcript + f"=== ASSISTANT TEXT ===\n{text}"


def elicit(provider: ProviderConfig, prompt: str, client: httpx.Client | None = None) -> str:
    return elicit_with_transcript(provider, prompt, client)[0]


@dataclass(frozen=True)
class ElicitationResult:
    informative: LogHrPrior
    noninformative: LogHrPrior
    literature_summary: str
    justification: str
    raw_transcript: str
    provider: str


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_BLOCK = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)
_PROSE = re.compile(
    rf"LogNormal\s*\(\s*(?:μ|mu)\s*=\s*({_NUM})\s*,\s*(?:σ|sigma)\s*=\s*({_NUM})\s*\)",
    re.IGNORECASE,
)


def _source_for(label: str) -> Source:
    for s in Source:
        if s.value.lower() == label.lower():
            return s
    return Source.CUSTOM


def _make_prior(mu_txt: str, sigma_txt: str, label: str, kind: Kind, source: Source, transcript: str) -> LogHrPrior:
    try:
        mu, sigma = float(mu_txt), float(sigma_txt)
    except (TypeError, ValueError):
        raise PriorParseError(f"non-numeric prior parameters {mu_txt!r}, {sigma_txt!r}", transcript) from None
    if not (math.isfinite(mu) and math.isfinite(sigma)):
        raise PriorParseError("non-finite prior parameters", transcript)
    try:
        return LogHrPrior(mu, sigma, label, kind, source)
    except PriorError as exc:
        raise PriorParseError(f"invalid {kind.value} prior: {exc}", transcript) from None


def _from_block(text: str):
    for m in _BLOCK.finditer(text):
        try:
            # keep numerals as written so nothing is reformatted
            data = json.loads(m.group(1), parse_float=str, parse_int=str)
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict) and all(k in data for k in BLOCK_FIELDS):
            return [str(data[k]) for k in BLOCK_FIELDS], m.start()
    return None, None


def parse_response(text: str, source_label: str) -> ElicitationResult:
    """Extract the informative and non-informative priors from a model reply.

    The fenced JSON block is preferred; otherwise ``LogNormal(mu = X, sigma = Y)``
    statements in the prose are used, the first being the informative prior
    and a later one with mu = 0 the non-informative prior.
    """
    source = _source_for(source_label)
    base = source_label.lower()
    fields, block_at = _from_block(text)
    matches = list(_PROSE.finditer(text))
    if fields is None:
        if not matches:
            raise PriorParseError("no prior found in response", text)
        inf_m = matches[0]
        non_m = next((m for m in matches[1:] if float(m.group(1)) == 0.0), None)
        if non_m is None:
            raise PriorParseError("no non-informative (mu = 0) prior found in response", text)
        fields = [inf_m.group(1), inf_m.group(2), non_m.group(1), non_m.group(2)]
    informative = _make_prior(fields[0], fields[1], f"{base}-informative", Kind.INFORMATIVE, source, text)
    noninformative = _make_prior(fields[2], fields[3], f"{base}-noninformative", Kind.NONINFORMATIVE, source, text)

    # free-text sections around the prior statements
    first = matches[0].start() if matches else block_at
    literature = _strip_item(text[:first])
    if len(matches) >= 2:
        justification = _strip_item(text[matches[0].end():matches[1].start()])
    else:
        justification = ""
    return ElicitationResult(informative, noninformative, literature, justification, text, source_label)


def _strip_item(chunk: str) -> str:
    lines = [ln for ln in chunk.strip().splitlines()]
    # drop a trailing heading line that introduces the prior statement
    if lines and lines[-1].rstrip().endswith(":"):
        lines = lines[:-1]
    if lines and re.match(r"^\s*\d+\.\s*[^.]*prior[^.]*$", lines[-1], re.IGNORECASE):
        lines = lines[:-1]
    return "\n".join(lines).strip()


@dataclass(frozen=True)
class SanityBounds:
    median_lo: float = 0.25
    median_hi: float = 4.0
    sigma_inf_max: float = 1.0


def sanity_check(result: ElicitationResult, bounds: SanityBounds = SanityBounds()) -> list[str]:
    """Plausibility warnings for expert review; an empty list means nothing stood out."""
    warnings = []
    inf, non = result.informative, result.noninformative
    median = hr_quantile(inf, 0.5)
    if median > bounds.median_hi:
        warnings.append(f"informative median HR {median:.2f} exceeds {bounds.median_hi}: implausibly large harm")
    elif median < bounds.median_lo:
        warnings.append(f"informative median HR {median:.2f} below {bounds.median_lo}: implausibly large benefit")
    if inf.sigma > bounds.sigma_inf_max:
        warnings.append(
            f"informative sigma {inf.sigma} exceeds {bounds.sigma_inf_max}: too diffuse to be informative"
        )
    if non.sigma < inf.sigma:
        warnings.append(
            f"non-informative sigma {non.sigma} is narrower than informative sigma {inf.sigma}"
        )
    return warnings
