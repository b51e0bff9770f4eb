import json
import threading

import pytest
import requests

from golden import CROND_EVENT
from provsem.augment import (
    SYSTEM_PROMPT, RemoteChatProvider, TemplateChatProvider, build_prompt, explain_event, explain_events,
    normalized_from_fields, seed_cache, template_explain, worked_examples,
)
from provsem.cache import DiskCache, content_key
from provsem.errors import AugmentationError, ContentError, CredentialError, ProviderError
from provsem.events import EventClass
from provsem.remote import API_KEY_ENV, OpenAIClient, TransportError, api_key_from_env


def test_content_key_is_length_prefixed():
    assert content_key("ab", "c") != content_key("a", "bc")
    assert content_key("x") == content_key("x")


def test_disk_cache_roundtrip(tmp_path):
    c = DiskCache(tmp_path)
    assert c.get("ab12") is None and "ab12" not in c
    c.put("ab12", {"v": 1})
    assert c.get("ab12") == {"v": 1} and "ab12" in c and len(c) == 1
    assert c.path_for("ab12").parent.name == "ab"
    assert not list(tmp_path.rglob("*.part"))


def test_disk_cache_concurrent_writers_leave_one_value(tmp_path):
    c = DiskCache(tmp_path)
    threads = [threading.Thread(target=c.put, args=("k1", {"writer": i, "pad": "x" * 5000})) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    rec = c.get("k1")
    assert rec["pad"] == "x" * 5000 and 0 <= rec["writer"] < 16


def test_prompt_user_text_is_sorted_json_of_fields():
    ev = normalized_from_fields(CROND_EVENT)
    req = build_prompt(ev, "gpt-4o")
    assert req.system_text == SYSTEM_PROMPT
    assert req.user_text == json.dumps(CROND_EVENT, sort_keys=True)
    assert req.event_fields() == CROND_EVENT
    assert [m["role"] for m in req.messages()] == ["system", "user"]


def test_request_key_depends_on_model_and_fields():
    ev = normalized_from_fields(CROND_EVENT)
    other = normalized_from_fields(dict(CROND_EVENT, evt_args="bash"))
    keys = {build_prompt(ev, "gpt-4o").request_key, build_prompt(ev, "other").request_key,
            build_prompt(other, "gpt-4o").request_key}
    assert len(keys) == 3


def test_template_covers_identity_syscall_and_context():
    text = template_explain(normalized_from_fields(
        {"proc_name": "vim", "type": "read", "fd_filename": "/etc/localtime", "user_name": "alice",
         "user_shell": "/bin/bash"})).text
    assert "read system call" in text
    assert "text editor" in text
    assert "timezone" in text
    assert "alice" in text
    assert "suspicious" not in text


def test_template_flags_memory_change_under_restricted_shell():
    ev = normalized_from_fields({"proc_name": "echo", "type": "mprotect", "fd_filename": "<NA>",
                                 "user_name": "www-data", "user_shell": "/usr/sbin/nologin"})
    assert ev.event_class is EventClass.OTHER
    text = template_explain(ev).text
    assert "restricted shell" in text
    assert "suspicious" in text


def test_template_unknown_process_falls_back():
    text = template_explain(normalized_from_fields({"proc_name": "zzq", "type": "weirdcall"})).text
    assert "an application named zzq" in text


class FakeProvider:
    kind = "remote"

    def __init__(self, reply="A paragraph.\n\nSecond part.", fail=False):
        self.model_id = "fake"
        self.reply = reply
        self.fail = fail
        self.calls = 0

    def complete(self, req):
        self.calls += 1
        if self.fail:
            raise ProviderError("boom")
        return self.reply


def test_explain_event_caches_and_collapses_paragraphs(tmp_path):
    cache = DiskCache(tmp_path)
    p = FakeProvider()
    req = build_prompt(normalized_from_fields(CROND_EVENT), p.model_id)
    first = explain_event(req, p, cache)
    second = explain_event(req, p, cache)
    assert p.calls == 1
    assert first.text == second.text == "A paragraph. Second part."
    assert not first.cached and second.cached
    assert cache.get(req.request_key)["request"]["messages"][0]["content"] == SYSTEM_PROMPT


def test_provider_failure_carries_request_key():
    p = FakeProvider(fail=True)
    req = build_prompt(normalized_from_fields(CROND_EVENT), p.model_id)
    with pytest.raises(AugmentationError) as info:
        explain_event(req, p, None)
    assert info.value.request_key == req.request_key


def test_empty_reply_is_a_content_error():
    p = FakeProvider(reply="   ")
    with pytest.raises(ContentError):
        explain_event(build_prompt(normalized_from_fields(CROND_EVENT), "fake"), p, None)


def test_explain_events_one_call_per_distinct_request(tmp_path):
    evs = [normalized_from_fields(dict(CROND_EVENT, evt_args=a)) for a in ["sh", "ls", "sh", "ls", "cat"]]
    p = FakeProvider()
    out = explain_events(evs, p, DiskCache(tmp_path), max_workers=4)
    assert len(out) == 5 and p.calls == 3
    assert out[0].event_key == out[2].event_key != out[1].event_key


def test_seeded_cache_serves_worked_examples_without_calls(tmp_path):
    cache = DiskCache(tmp_path)
    data = worked_examples()
    assert seed_cache(cache) == len(data["explanations"])
    assert seed_cache(cache) == 0
    p = FakeProvider()
    p.model_id = data["model_id"]
    evs = [normalized_from_fields(item["event"]) for item in data["explanations"]]
    out = explain_events(evs, p, cache)
    assert p.calls == 0
    assert all(x.cached and x.provider == "remote" for x in out)
    assert "DHCP" in out[1].text


def test_template_provider_counts_calls():
    t = TemplateChatProvider()
    explain_events([normalized_from_fields(CROND_EVENT)], t, None)
    assert t.calls == 1


# --- HTTP client --------------------------------------------------------------

class Resp:
    def __init__(self, status, body=None):
        self.status_code = status
        self._body = body
        self.text = json.dumps(body)

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class Session:
    def __init__(self, responses):
        self.responses = list(responses)
        self.payloads = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.payloads.append((url, json, headers))
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


CHAT_OK = {"choices": [{"message": {"content": "ok text"}}]}


def test_client_retries_transient_failures():
    s = Session([requests.ConnectionError("down"), Resp(429), Resp(503), Resp(200, CHAT_OK)])
    c = OpenAIClient("http://x/v1/", api_key="k", backoff=0, session=s)
    assert c.chat("m", [{"role": "user", "content": "hi"}], 0.0, 10) == "ok text"
    url, payload, headers = s.payloads[-1]
    assert url == "http://x/v1/chat/completions"
    assert payload["temperature"] == 0.0 and payload["max_tokens"] == 10
    assert headers["Authorization"] == "Bearer k"


def test_client_gives_up_after_retries():
    s = Session([Resp(500)] * 4)
    with pytest.raises(TransportError):
        OpenAIClient("http://x", api_key="k", backoff=0, max_retries=3, session=s).chat("m", [])
    assert not s.responses


def test_client_does_not_retry_client_errors():
    s = Session([Resp(400, {"error": "bad"}), Resp(200, CHAT_OK)])
    with pytest.raises(ProviderError):
        OpenAIClient("http://x", api_key="k", backoff=0, session=s).chat("m", [])
    assert len(s.responses) == 1


def test_embeddings_are_reordered_by_index():
    body = {"data": [{"index": 1, "embedding": [0.0, 1.0]}, {"index": 0, "embedding": [1.0, 0.0]}]}
    c = OpenAIClient("http://x", api_key="k", session=Session([Resp(200, body)]))
    assert c.embeddings("m", ["a", "b"], 2) == [[1.0, 0.0], [0.0, 1.0]]


def test_remote_chat_provider_uses_client():
    s = Session([Resp(200, CHAT_OK)])
    p = RemoteChatProvider(OpenAIClient("http://x", api_key="k", session=s), "gpt-4o")
    req = build_prompt(normalized_from_fields(CROND_EVENT), "gpt-4o")
    assert explain_event(req, p, None).text == "ok text"
    assert s.payloads[0][1]["messages"] == req.messages()


def test_missing_key_is_a_credential_error(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    with pytest.raises(CredentialError):
        api_key_from_env()
    monkeypatch.setenv(API_KEY_ENV, "secret")
    assert api_key_from_env() == "secret"
