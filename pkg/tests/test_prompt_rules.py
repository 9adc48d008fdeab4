import json

import numpy as np
import pytest

from amrule.catalog import Product
from amrule.prompt_rules import (
    NEGATIVE,
    POSITIVE,
    HttpLMClient,
    PromptUnavailableError,
    ProtocolError,
    StubLMClient,
    TransportError,
    build_prompt,
    embed_pair_prompt,
    fill_template,
    predict_mask,
    propose_prompt_rule,
    truncate_description,
)

POWER_TOOL_DESC = ("The Milwaukee M18 FUEL 1/2 in. Hammer Drill is the industry's "
                   "most powerful brushless battery powered drill, delivering up "
                   "to 60% more power.")
BATTERY_DESC = ("The Milwaukee M18 REDLITHIUM XC 5.0 Ah Battery Pack delivers up "
                "to 2.5X more runtime, 20% more power and 2X more recharges than "
                "standard lithium-ion batteries.")

EXPECTED_PROMPT = (
    "Power tool: " + POWER_TOOL_DESC + " Battery: " + BATTERY_DESC +
    " The power tool is compatible with the battery because their "
    "brand names are [MASK].")


def power_tool():
    return Product("t1", "tools", "Power tool", {"brand name": None},
                   POWER_TOOL_DESC)


def battery():
    return Product("t2", "batteries", "Battery", {"brand name": None},
                   BATTERY_DESC)


def test_prompt_matches_published_template_example():
    prompt = build_prompt(power_tool(), battery(), "brand names", POSITIVE)
    assert prompt == EXPECTED_PROMPT


def test_negative_polarity_wording():
    prompt = build_prompt(power_tool(), battery(), "brand names", NEGATIVE)
    assert "is not compatible with" in prompt


def test_empty_description_is_unavailable():
    blank = Product("x", "tools", "Thing", {}, "   ")
    with pytest.raises(PromptUnavailableError):
        build_prompt(blank, battery(), "brand names", POSITIVE)


def test_truncation_to_sentence_boundary():
    text = "First sentence. Second sentence is long. Third tail"
    cut = truncate_description(text, 30)
    assert cut == "First sentence."
    assert truncate_description(text, 500) == text
    # no boundary under the limit: hard cut
    assert truncate_description("abcdefghij", 4) == "abcd"


def test_long_description_truncated_via_client_limit():
    filler = " ".join(f"word{i}" for i in range(400)) + "."
    long_desc = "Short head sentence. " + filler
    client = StubLMClient(max_prompt_chars=120)
    anchor = Product("a", "c", "A", {}, long_desc)
    prompt = build_prompt(anchor, battery(), "brand", POSITIVE, client=client)
    assert "Short head sentence." in prompt
    assert "word399" not in prompt


def test_stub_same_brand_tokens_predict_same():
    a = Product("a", "tools", "Power tool", {}, "A drill by brand milwaukee for pros.")
    b = Product("b", "batteries", "Battery", {}, "A pack by brand milwaukee for drills.")
    prompt = build_prompt(a, b, "brand", POSITIVE)
    token, prob = predict_mask(StubLMClient(), prompt)
    assert token == "same"
    assert abs(prob - 0.9) < 1e-12
    # oracle: direct lookup of the stub's token rule, bypassing the argmax path
    stub = StubLMClient()
    assert stub._adjacent_value("brand", a.description) == "milwaukee"
    assert stub._adjacent_value("brand", b.description) == "milwaukee"


def test_stub_different_brand_tokens_predict_different():
    a = Product("a", "t", "Tool", {}, "Made by brand alpha today.")
    b = Product("b", "b", "Pack", {}, "Made by brand beta today.")
    prompt = build_prompt(a, b, "brand", POSITIVE)
    token, _ = predict_mask(StubLMClient(), prompt)
    assert token == "different"


class UniformClient:
    def fill_mask(self, prompt):
        return ["t0", "t1", "t2", "t3"], [0.25, 0.25, 0.25, 0.25]

    def embed(self, text):
        return [1.0, 0.0]


class BrokenClient:
    def fill_mask(self, prompt):
        return ["a", "b"], [0.25, 0.25]


def test_uniform_distribution_breaks_tie_to_lowest_id():
    token, prob = predict_mask(UniformClient(), "anything [MASK].")
    assert token == "t0"
    assert prob == 0.25


def test_malformed_distribution_is_protocol_error():
    with pytest.raises(ProtocolError):
        predict_mask(BrokenClient(), "x [MASK].")


def test_mask_slot_validation():
    with pytest.raises(PromptUnavailableError):
        predict_mask(StubLMClient(), "no mask here")
    with pytest.raises(PromptUnavailableError):
        predict_mask(StubLMClient(), "[MASK] and [MASK]")


def test_propose_prompt_rule_binds_token_text_embedding():
    cand = propose_prompt_rule(StubLMClient(), power_tool(), battery(),
                               "brand names", mu=0.3, polarity=POSITIVE,
                               iteration=4, rule_id="r04-01")
    rule = cand.rule
    assert rule.kind == "prompt"
    assert rule.attribute == "brand names"
    assert rule.token in StubLMClient.VOCAB
    assert rule.prompt_text == fill_template(EXPECTED_PROMPT, rule.token)
    assert rule.mu == 0.3
    assert len(rule.embedding) == 64
    assert abs(np.linalg.norm(rule.embedding) - 1.0) < 1e-9


def test_propose_prompt_rule_deterministic():
    a, b = power_tool(), battery()
    r1 = propose_prompt_rule(StubLMClient(), a, b, "brand names", 0.1, POSITIVE, 1, "x")
    r2 = propose_prompt_rule(StubLMClient(), a, b, "brand names", 0.1, POSITIVE, 1, "x")
    assert r1.rule.embedding == r2.rule.embedding
    assert r1.rule.token == r2.rule.token


def test_stub_embedding_identity_cosine():
    stub = StubLMClient()
    e1 = np.array(stub.embed("brand milwaukee drill pack"))
    e2 = np.array(stub.embed("brand milwaukee drill pack"))
    cos = float(e1 @ e2 / (np.linalg.norm(e1) * np.linalg.norm(e2)))
    assert abs(cos - 1.0) < 1e-9


def test_embed_pair_prompt_uses_compatible_polarity():
    a = Product("a", "t", "Tool", {}, "Made by brand alpha today.")
    b = Product("b", "b", "Pack", {}, "Made by brand alpha tonight.")
    vec = embed_pair_prompt(StubLMClient(), a, b, "brand")
    assert vec.shape == (64,)


def test_http_client_protocol_and_retries():
    import httpx

    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content)
        if request.url.path == "/v1/fill_mask":
            assert "prompt" in payload
            return httpx.Response(200, json={"tokens": ["same", "different"],
                                             "probs": [0.7, 0.3]})
        if request.url.path == "/v1/embed":
            return httpx.Response(200, json={"vector": [0.6, 0.8]})
        return httpx.Response(404)

    client = HttpLMClient("http://lm.test", transport=httpx.MockTransport(handler))
    tokens, probs = client.fill_mask("x [MASK].")
    assert tokens == ["same", "different"]
    assert client.embed("abc") == [0.6, 0.8]
    assert client.embedding_dim == 2

    def failing(request):
        calls["n"] += 1
        raise httpx.ConnectError("down", request=request)

    dead = HttpLMClient("http://lm.test", retries=2,
                        transport=httpx.MockTransport(failing))
    with pytest.raises(TransportError) as err:
        dead.fill_mask("x [MASK].")
    assert err.value.retries == 2
    assert calls["n"] == 3  # initial try + 2 retries
