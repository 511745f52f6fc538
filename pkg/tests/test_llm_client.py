import json

import httpx
import pytest

from gnas.llm_client import (
    APIError,
    ConfigurationError,
    HttpBackend,
    LLMClient,
    LLMConfig,
    ScriptedBackend,
    ScriptExhausted,
    TransportError,
    complete,
    make_mock_greedy,
    make_mock_random,
)
from gnas.prompting import build_gnas_prompt, parse_architectures

SECRET = "sk-test-very-secret-value"


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv("GNAS_LLM_API_KEY", SECRET)


def ok_body(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


def backend_with(responses, cfg=None):
    """HttpBackend over a mock transport replaying ``responses`` in order."""
    calls, sleeps = [], []

    def handler(request):
        calls.append(request)
        item = responses[min(len(calls) - 1, len(responses) - 1)]
        if isinstance(item, Exception):
            raise item
        status, body = item
        return httpx.Response(status, json=body)

    cfg = cfg or LLMConfig(retries=3, backoff=0.5)
    return HttpBackend(cfg, httpx.MockTransport(handler), sleeps.append), calls, sleeps


def test_http_success(key, space):
    be, calls, _ = backend_with([(200, ok_body("hello"))])
    client = LLMClient(be, be.cfg)
    assert client.complete(build_gnas_prompt("Cora", space, 10)) == "hello"
    req = calls[0]
    assert str(req.url) == "https://api.openai.com/v1/chat/completions"
    payload = json.loads(req.content)
    assert payload["model"] == "gpt-4" and payload["temperature"] == 0.0
    assert [m["role"] for m in payload["messages"]] == ["system", "user"]
    assert req.headers["authorization"] == f"Bearer {SECRET}"


def test_retry_then_success_with_backoff(key, space):
    be, calls, sleeps = backend_with([(503, {}), (429, {}), httpx.ConnectError("down"), (200, ok_body("x"))])
    client = LLMClient(be, be.cfg)
    assert client.complete(build_gnas_prompt("Cora", space, 10)) == "x"
    assert len(calls) == 4
    assert sleeps == [0.5, 1.0, 2.0]
    assert client.transcripts[0].attempt_count == 4


def test_retries_exhausted(key, space):
    be, calls, _ = backend_with([(500, {})], LLMConfig(retries=2, backoff=0.0))
    with pytest.raises(TransportError) as err:
        LLMClient(be, be.cfg).complete(build_gnas_prompt("Cora", space, 10))
    assert len(calls) == 3 and err.value.last_status == 500


def test_client_error_not_retried(key, space):
    be, calls, _ = backend_with([(401, {"error": "bad key"})])
    with pytest.raises(APIError) as err:
        LLMClient(be, be.cfg).complete(build_gnas_prompt("Cora", space, 10))
    assert err.value.status == 401 and len(calls) == 1


def test_missing_key(monkeypatch, space):
    monkeypatch.delenv("GNAS_LLM_API_KEY", raising=False)
    be, calls, _ = backend_with([(200, ok_body("x"))])
    with pytest.raises(ConfigurationError):
        LLMClient(be, be.cfg).complete(build_gnas_prompt("Cora", space, 10))
    assert calls == []


def test_secret_never_in_transcript_or_logs(key, space, caplog):
    be, _, _ = backend_with([(500, {}), (200, ok_body("fine"))])
    client = LLMClient(be, be.cfg)
    with caplog.at_level("DEBUG"):
        client.complete(build_gnas_prompt("Cora", space, 10))
    dumped = json.dumps([t.to_dict() for t in client.transcripts])
    assert SECRET not in dumped and SECRET not in caplog.text


def test_min_interval(key, space):
    be, _, sleeps = backend_with([(200, ok_body("a"))], LLMConfig(min_interval=60.0))
    client = LLMClient(be, be.cfg)
    client.complete(build_gnas_prompt("Cora", space, 1))
    client.complete(build_gnas_prompt("Cora", space, 1))
    assert len(sleeps) == 1 and 59 < sleeps[0] <= 60


def test_config_validation():
    with pytest.raises(ValueError):
        LLMConfig(temperature=-1)
    assert LLMConfig().nonstandard_settings == []
    assert LLMConfig(temperature=0.7).nonstandard_settings == ["temperature=0.7"]


def test_scripted_playback(space, tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(["one", "two"]))
    be = ScriptedBackend(p)
    prompt = build_gnas_prompt("Cora", space, 10)
    transcripts = []
    assert complete(be, LLMConfig(), prompt, transcripts) == "one"
    assert complete(be, LLMConfig(), prompt) == "two"
    with pytest.raises(ScriptExhausted):
        complete(be, LLMConfig(), prompt)
    assert transcripts[0].latency_ms == 0.0 and transcripts[0].backend == "scripted"


def test_scripted_bad_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"not": "a list"}')
    with pytest.raises(ConfigurationError):
        ScriptedBackend(p)


def test_greedy_mock_walks_rank_index(space, fixture_table):
    be = make_mock_greedy(fixture_table, "space-1")
    client = LLMClient(be)
    prompt = build_gnas_prompt("Cora", space, 10)
    first, _ = parse_architectures(client.complete(prompt), space, 10)
    second, _ = parse_architectures(client.complete(prompt), space, 10)
    assert [a.key for a in first + second] == list(fixture_table.rank_index[:20])


def test_random_mock_seeded(space):
    prompt = build_gnas_prompt("Cora", space, 10)
    t1 = LLMClient(make_mock_random(space, 3)).complete(prompt)
    t2 = LLMClient(make_mock_random(space, 3)).complete(prompt)
    assert t1 == t2
    archs, _ = parse_architectures(t1, space, 10)
    assert len(archs) == 10


def test_threaded_mode_accumulates(space):
    be = ScriptedBackend(["a", "b"])
    client = LLMClient(be, LLMConfig(threaded=True))
    seen = []
    orig = be.complete
    be.complete = lambda req: (seen.append(len(req.messages)), orig(req))[1]
    prompt = build_gnas_prompt("Cora", space, 10)
    client.complete(prompt)
    client.complete(prompt)
    assert seen == [2, 4]


def test_fresh_mode_is_stateless(space):
    be = ScriptedBackend(["a", "b"])
    client = LLMClient(be)
    seen = []
    orig = be.complete
    be.complete = lambda req: (seen.append(len(req.messages)), orig(req))[1]
    prompt = build_gnas_prompt("Cora", space, 10)
    client.complete(prompt)
    client.complete(prompt)
    assert seen == [2, 2]
