import json
import re

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coxprior.elicitation import (
    ELICITATION_PROMPT,
    MOCK_MODELS,
    EnvelopeError,
    ElicitationResult,
    PriorParseError,
    ProviderConfig,
    ProviderConfigError,
    ProviderHTTPError,
    ProviderTimeoutError,
    build_prompt,
    elicit,
    elicit_with_transcript,
    extract_message_text,
    parse_response,
    sanity_check,
)
from coxprior.priors import Kind, LogHrPrior, Source

ELICITED = {
    "chatgpt": ((0.431, 0.30), (0.0, 1.0)),
    "gemini": ((0.095, 0.18), (0.0, 2.0)),
    "grok": ((0.068, 0.093), (0.0, 31.62)),
}


def test_prompt_anchors():
    p = build_prompt()
    assert "You are a radiation oncologist assisting a biostatistician" in p
    assert "time_os_months" in p
    assert p.startswith(ELICITATION_PROMPT)
    assert build_prompt() == p
    for n in range(1, 5):
        assert re.search(rf"^{n}\. ", ELICITATION_PROMPT, re.MULTILINE)
    for field in ("mu_informative", "sigma_informative", "mu_noninformative", "sigma_noninformative"):
        assert field in p
    assert "where CRT is the reference group" in p


def test_mock_responses_embed_table_values():
    chat = elicit(ProviderConfig("chatgpt", mock=True), build_prompt())
    assert "LogNormal(μ = 0.431, σ = 0.30)" in chat
    grok = elicit(ProviderConfig("grok", mock=True), build_prompt())
    assert "sigma = 31.62" in grok


@pytest.mark.parametrize("model", MOCK_MODELS)
def test_mock_round_trip(model):
    res = parse_response(elicit(ProviderConfig(model, mock=True), build_prompt()), model)
    (mi, si), (mn, sn) = ELICITED[model]
    assert (res.informative.mu, res.informative.sigma) == (mi, si)
    assert (res.noninformative.mu, res.noninformative.sigma) == (mn, sn)
    assert res.informative.kind is Kind.INFORMATIVE and res.noninformative.kind is Kind.NONINFORMATIVE
    assert res.informative.source is Source(res.provider.capitalize() if model != "chatgpt" else "ChatGPT")
    assert res.literature_summary.startswith("1. Literature review")
    assert "Justification" in res.justification


@pytest.mark.parametrize("model", MOCK_MODELS)
def test_prose_fallback(model):
    text = elicit(ProviderConfig(model, mock=True), build_prompt())
    prose_only = re.sub(r"```json.*?```", "", text, flags=re.DOTALL)
    res = parse_response(prose_only, model)
    (mi, si), (mn, sn) = ELICITED[model]
    assert (res.informative.mu, res.informative.sigma, res.noninformative.mu, res.noninformative.sigma) == (mi, si, mn, sn)


def numerals_in(text):
    return set(re.findall(r"[-+]?\d+\.?\d*", text))


@pytest.mark.parametrize("model", MOCK_MODELS)
def test_no_fabricated_numerals(model):
    text = elicit(ProviderConfig(model, mock=True), build_prompt())
    res = parse_response(text, model)
    for v in (res.informative.mu, res.informative.sigma, res.noninformative.mu, res.noninformative.sigma):
        assert any(float(n) == v for n in numerals_in(text))
    assert res.raw_transcript == text


def test_no_prior_found():
    with pytest.raises(PriorParseError, match="no prior found") as exc:
        parse_response("I cannot help with that request.", "chatgpt")
    assert exc.value.transcript == "I cannot help with that request."


def test_negative_sigma_rejected():
    text = '```json\n{"mu_informative": 0.4, "sigma_informative": -0.3, "mu_noninformative": 0, "sigma_noninformative": 1}\n```'
    with pytest.raises(PriorParseError, match="sigma"):
        parse_response(text, "chatgpt")


def test_non_finite_rejected():
    text = '```json\n{"mu_informative": 1e999, "sigma_informative": 0.3, "mu_noninformative": 0, "sigma_noninformative": 1}\n```'
    with pytest.raises(PriorParseError, match="non-finite"):
        parse_response(text, "gemini")


def test_missing_noninformative_in_prose():
    with pytest.raises(PriorParseError, match="non-informative"):
        parse_response("Use LogNormal(mu = 0.2, sigma = 0.4).", "grok")


@given(
    st.decimals(min_value=-2, max_value=2, places=3),
    st.decimals(min_value="0.001", max_value=5, places=3),
    st.decimals(min_value="0.001", max_value=50, places=2),
)
def test_block_numerals_preserved(mu, sigma, sigma_ni):
    text = (
        "Some preamble.\n```json\n"
        f'{{"mu_informative": {mu}, "sigma_informative": {sigma}, "mu_noninformative": 0, "sigma_noninformative": {sigma_ni}}}'
        "\n```\n"
    )
    res = parse_response(text, "custom-model")
    assert res.informative.mu == float(str(mu)) and res.informative.sigma == float(str(sigma))
    assert res.noninformative.sigma == float(str(sigma_ni))
    assert res.informative.source is Source.CUSTOM


def _result(inf, non):
    return ElicitationResult(LogHrPrior(*inf), LogHrPrior(*non, kind=Kind.NONINFORMATIVE), "", "", "", "test")


def test_sanity_check():
    chat = parse_response(elicit(ProviderConfig("chatgpt", mock=True), ""), "chatgpt")
    assert sanity_check(chat) == []
    big = sanity_check(_result((2.0, 0.2), (0.0, 1.0)))
    assert len(big) == 1 and "implausibly large harm" in big[0] and "7.39" in big[0]
    small = sanity_check(_result((-2.0, 0.2), (0.0, 1.0)))
    assert "benefit" in small[0]
    order = sanity_check(_result((0.1, 0.3), (0.0, 0.1)))
    assert len(order) == 1 and "narrower" in order[0]
    wide = sanity_check(_result((0.1, 1.5), (0.0, 2.0)))
    assert len(wide) == 1 and "sigma" in wide[0]


@pytest.mark.parametrize("model", MOCK_MODELS)
def test_mock_presets_pass_sanity_check(model):
    res = parse_response(elicit(ProviderConfig(model, mock=True), ""), model)
    assert sanity_check(res) == []


# --- live path against an in-process transport -----------------------------

def live_config(**kw):
    base = dict(model_name="gpt-test", base_url="https://llm.example/v1", api_key_env="TEST_LLM_KEY")
    base.update(kw)
    return ProviderConfig(**base)


def canned_envelope(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def test_live_request_shape(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-secret")
    seen = {}

    def handler(request: httpx.Request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json=canned_envelope(elicit(ProviderConfig("gemini", mock=True), "")))

    client = httpx.Client(transport=httpx.MockTransport(handler))
    text, transcript = elicit_with_transcript(live_config(), build_prompt(), client)
    assert seen["url"] == "https://llm.example/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-secret"
    assert seen["body"] == {
        "model": "gpt-test",
        "messages": [{"role": "user", "content": build_prompt()}],
        "temperature": 0.0,
    }
    assert "sk-secret" not in transcript
    assert text in transcript and "=== RESPONSE 200 ===" in transcript
    assert parse_response(text, "gemini").informative.sigma == 0.18


def test_missing_key_fails_before_network(monkeypatch):
    monkeypatch.delenv("TEST_LLM_KEY", raising=False)

    def handler(request):
        raise AssertionError("network must not be touched")

    with pytest.raises(ProviderConfigError, match="TEST_LLM_KEY"):
        elicit(live_config(), "hi", httpx.Client(transport=httpx.MockTransport(handler)))


def test_http_error_status(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "k")
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(429, text="rate limited")))
    with pytest.raises(ProviderHTTPError) as exc:
        elicit(live_config(), "hi", client)
    assert exc.value.status_code == 429 and "rate limited" in exc.value.transcript


def test_timeout(monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "k")

    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(ProviderTimeoutError) as exc:
        elicit(live_config(timeout_seconds=3), "hi", httpx.Client(transport=httpx.MockTransport(handler)))
    assert "POST https://llm.example/v1/chat/completions" in exc.value.transcript


@pytest.mark.parametrize("body", [{"unexpected": 1}, {"choices": []}, "not json"])
def test_malformed_envelope(monkeypatch, body):
    monkeypatch.setenv("TEST_LLM_KEY", "k")
    resp = (lambda r: httpx.Response(200, text=body)) if isinstance(body, str) else (lambda r: httpx.Response(200, json=body))
    with pytest.raises(EnvelopeError) as exc:
        elicit(live_config(), "hi", httpx.Client(transport=httpx.MockTransport(resp)))
    assert exc.value.transcript


def test_envelope_adapters():
    assert extract_message_text(canned_envelope("a")) == "a"
    assert extract_message_text({"candidates": [{"content": {"parts": [{"text": "b"}, {"text": "c"}]}}]}) == "bc"
    assert extract_message_text({"content": [{"type": "text", "text": "d"}]}) == "d"


def test_provider_config_validation(tmp_path):
    with pytest.raises(ProviderConfigError):
        ProviderConfig(model_name="m")  # live config without base_url
    with pytest.raises(ProviderConfigError):
        ProviderConfig(model_name="m", mock=True, temperature=-1)
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"model_name": "m", "base_url": "https://x", "api_key": "sk-1"}))
    with pytest.raises(ProviderConfigError, match="api_key_env"):
        ProviderConfig.from_file(path)
    path.write_text(json.dumps({"model_name": "m", "base_url": "https://x", "api_key_env": "K"}))
    cfg = ProviderConfig.from_file(path)
    assert cfg.temperature == 0 and cfg.timeout_seconds == 120


def test_unknown_mock_model():
    with pytest.raises(ProviderConfigError):
        elicit(ProviderConfig("claude", mock=True), "")
