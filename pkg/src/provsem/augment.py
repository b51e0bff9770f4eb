"""Explanatory text for normalized events: prompt building, providers, caching.

Two providers share one contract (``complete(PromptRequest) -> str``):
a remote OpenAI-compatible chat endpoint and an offline template explainer
that assembles a paragraph from bundled lookup tables.
"""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .cache import DiskCache, content_key
from .errors import AugmentationError, ContentError, ProviderError
from .events import NA, RawEvent, classify_event
from .normalize import BASE_FIELDS, CLASS_FIELDS, EventClass, NormalizedEvent
from .remote import OpenAIClient

logger = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "here is a json object where the keys are sysdig event fields and the values are the data "
    "for the corresponding keys. Please generate only the final summary of the meaning of this "
    "event and the event type as a paragraph"
)

TEMPLATE_MODEL_ID = "template-v1"


@dataclass(frozen=True)
class PromptRequest:
    system_text: str
    user_text: str
    model_id: str

    @property
    def request_key(self) -> str:
        return content_key(self.system_text, self.user_text, self.model_id)

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]

    def event_fields(self) -> dict:
        return json.loads(self.user_text)


@dataclass(frozen=True)
class Explanation:
    event_key: str
    text: str
    provider: str
    model_id: str
    cached: bool


def user_json(fields: dict) -> str:
    return json.dumps(fields, sort_keys=True, ensure_ascii=False)


def build_prompt(e: NormalizedEvent, model_id: str) -> PromptRequest:
    return PromptRequest(SYSTEM_PROMPT, user_json(e.fields), model_id)


def _one_paragraph(text: str) -> str:
    return " ".join(text.split())


# --- template explainer -------------------------------------------------------

@lru_cache(maxsize=None)
def _table(name: str) -> dict:
    return json.loads(resources.files("provsem.data").joinpath(name).read_text(encoding="utf-8"))


def _path_hint(path: str) -> str | None:
    for needle, hint in _table("context.json")["paths"]:
        if needle in path:
            return hint
    return None


def _suspicion_reasons(e: NormalizedEvent) -> list[str]:
    ctx = _table("context.json")
    f = e.fields
    reasons = []
    syscall = f["type"]
    shell = f.get("user_shell")
    user = f.get("user_name")
    restricted = shell in ctx["restricted_shells"]
    service_user = user in ctx["service_users"]
    if syscall in ctx["memory_syscalls"]:
        reasons.append("changing memory mappings or permissions can indicate code injection or in-memory payloads")
    if restricted and (e.event_class is EventClass.PROCESS or syscall in ctx["memory_syscalls"]):
        reasons.append(
            f"the account {user} has the restricted shell {shell} and is not expected to drive interactive activity"
        )
    if e.event_class is EventClass.PROCESS:
        args = (f.get("evt_args") or "").split()
        launched = args[0].rsplit("/", 1)[-1] if args else ""
        if (service_user or restricted) and (launched in ctx["interpreters"] or f["proc_name"] in ctx["interpreters"]):
            reasons.append("a service account launching an interpreter or network tool is a common sign of remote code execution")
    fd = f.get("fd_filename") or ""
    if fd != NA and any(s in fd for s in ctx["sensitive_paths"]) and (service_user or restricted):
        reasons.append(f"a service account touching {fd} is unusual")
    port = f.get("server_port")
    if port is not None and str(port) in ("4444", "1389"):
        reasons.append(f"port {port} is frequently used by attack tooling")
    return reasons


def template_explain(e: NormalizedEvent) -> Explanation:
    """Deterministic paragraph covering syscall meaning, software identity,
    execution context and, when a rule fires, possible suspiciousness."""
    syscalls = _table("syscalls.json")
    identities = _table("processes.json")
    ctx = _table("context.json")
    f = e.fields
    proc, syscall = f["proc_name"], f["type"]
    parts = []

    desc = syscalls.get(syscall)
    if desc:
        parts.append(f"This event is a {syscall} system call, which {desc}.")
    else:
        parts.append(f"This event is a {syscall} system call.")

    identity = identities.get(proc)
    parts.append(f"The process involved is {proc}, {identity}." if identity else f"The process involved is an application named {proc}.")

    user, shell = f.get("user_name"), f.get("user_shell")
    if user and shell:
        kind = "restricted shell" if shell in ctx["restricted_shells"] else "shell"
        parts.append(f"It runs as the user {user} with the {kind} {shell}.")
    elif user:
        parts.append(f"It runs as the user {user}.")

    cls = e.event_class
    if cls is EventClass.FILE:
        fd = f["fd_filename"]
        hint = _path_hint(fd)
        parts.append(f"The target file is {fd}, {hint}." if hint else f"The target file is {fd}.")
    elif cls is EventClass.PROCESS:
        args = f.get("evt_args")
        if args and args != NA:
            prog = args.split()[0].rsplit("/", 1)[-1]
            ident = identities.get(prog)
            tail = f", {ident}" if ident else ""
            parts.append(f"The program started by this call is {args}{tail}, so a new program or script is being launched.")
        else:
            parts.append("No arguments were recorded, so the launched program is the process itself.")
    elif cls is EventClass.NETWORK:
        verb = {
            "recvfrom": "receives data", "recvmsg": "receives data", "sendto": "sends data",
            "sendmsg": "sends data", "connect": "opens a connection", "accept": "accepts a connection",
            "accept4": "accepts a connection",
        }.get(syscall, "communicates")
        net = f.get("net_type") or "the network"
        sentence = f"The process {verb} over {net}"
        if f.get("client_ip") or f.get("server_ip"):
            sentence += f" between client {f.get('client_ip', 'unknown')} and server {f.get('server_ip', 'unknown')}"
        port = f.get("server_port")
        if port is not None:
            hint = ctx["ports"].get(str(port))
            sentence += f" on port {port}" + (f", {hint}" if hint else "")
        parts.append(sentence + ".")
    else:
        parts.append("No file or network endpoint is attached, so the operation is not directly associated with a file.")

    reasons = _suspicion_reasons(e)
    if reasons:
        parts.append(
            "This could be part of a legitimate operation, but it is potentially suspicious because "
            + "; ".join(reasons) + "."
        )
    text = " ".join(parts)
    return Explanation(content_key(user_json(f)), text, "template", TEMPLATE_MODEL_ID, False)


def normalized_from_fields(fields: dict) -> NormalizedEvent:
    """Rebuild a NormalizedEvent from the retained-field mapping carried in a prompt."""
    attr = {("syscall_type" if k == "type" else k): v for k, v in fields.items()}
    cls = classify_event(RawEvent(**attr))
    allowed = set(BASE_FIELDS) | set(CLASS_FIELDS[cls])
    return NormalizedEvent({k: v for k, v in fields.items() if k in allowed}, cls)


# --- providers ---------------------------------------------------------------

class TemplateChatProvider:
    kind = "template"

    def __init__(self):
        self.model_id = TEMPLATE_MODEL_ID
        self.calls = 0

    def complete(self, req: PromptRequest) -> str:
        self.calls += 1
        return template_explain(normalized_from_fields(req.event_fields())).text


class RemoteChatProvider:
    kind = "remote"

    def __init__(self, client: OpenAIClient, model_id: str = "gpt-4o", temperature: float = 0.0, max_tokens: int | None = 400):
        self.client = client
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.calls = 0

    def complete(self, req: PromptRequest) -> str:
        self.calls += 1
        return self.client.chat(req.model_id, req.messages(), self.temperature, self.max_tokens)


def explain_event(req: PromptRequest, provider, cache: DiskCache | None) -> Explanation:
    """Cache first; on a miss call the provider once and store before returning."""
    key = req.request_key
    event_key = content_key(req.user_text)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return Explanation(event_key, _one_paragraph(hit["response"]), hit.get("provider", provider.kind), req.model_id, True)
    try:
        raw = provider.complete(req)
    except ProviderError as exc:
        raise AugmentationError(f"provider failed: {exc}", key) from exc
    text = _one_paragraph(raw or "")
    if not text:
        raise ContentError(f"empty explanation for request {key}")
    if cache is not None:
        cache.put(key, {
            "request": {"model": req.model_id, "messages": req.messages()},
            "response": raw,
            "provider": provider.kind,
        })
    return Explanation(event_key, text, provider.kind, req.model_id, False)


def explain_events(events: list[NormalizedEvent], provider, cache: DiskCache | None, max_workers: int = 8) -> list[Explanation]:
    """Explain many events, at most one provider call per distinct request key.

    Remote calls run with up to ``max_workers`` requests in flight; output order
    follows ``events``.
    """
    reqs = [build_prompt(e, provider.model_id) for e in events]
    unique: dict[str, PromptRequest] = {}
    for r in reqs:
        unique.setdefault(r.request_key, r)

    results: dict[str, Explanation] = {}
    lock = threading.Lock()

    def work(r: PromptRequest):
        exp = explain_event(r, provider, cache)
        with lock:
            results[r.request_key] = exp

    if provider.kind == "remote" and max_workers > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for fut in [pool.submit(work, r) for r in unique.values()]:
                fut.result()
    else:
        for r in unique.values():
            work(r)
    return [results[r.request_key] for r in reqs]


def worked_examples() -> dict:
    return _table("worked_examples.json")


def seed_cache(cache: DiskCache) -> int:
    """Store the bundled request/response pairs; returns how many were written."""
    data = worked_examples()
    n = 0
    for item in data["explanations"]:
        req = build_prompt(normalized_from_fields(item["event"]), data["model_id"])
        if req.request_key not in cache:
            cache.put(req.request_key, {
                "request": {"model": req.model_id, "messages": req.messages()},
                "response": item["response"],
                "provider": "remote",
            })
            n += 1
    return n
