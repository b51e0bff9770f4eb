"""Sysdig-style event records: parsing, validation, classification, corpus loading."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path

from .errors import IngestError, ParseError, SchemaError

logger = logging.getLogger(__name__)

NA = "<NA>"

LABELS = ("benign", "adversary", "unlabeled")

# Syscall -> class tables. Maintained config: extend as new capture sources appear.
PROCESS_SYSCALLS = frozenset({"execve", "execveat", "clone", "clone3", "fork", "vfork"})
NETWORK_SYSCALLS = frozenset(
    {
        "recvfrom", "sendto", "connect", "accept", "accept4", "recvmsg", "sendmsg",
        "recvmmsg", "sendmmsg", "socket", "bind", "listen", "getsockname", "getpeername",
        "shutdown",
    }
)

NETWORK_FIELDS = ("net_type", "client_ip", "server_ip", "server_port")

# JSON key -> attribute name. "type" is the sysdig field name for the syscall.
_JSON_TO_ATTR = {
    "proc_name": "proc_name",
    "type": "syscall_type",
    "fd_filename": "fd_filename",
    "user_name": "user_name",
    "user_shell": "user_shell",
    "evt_args": "evt_args",
    "net_type": "net_type",
    "client_ip": "client_ip",
    "server_ip": "server_ip",
    "server_port": "server_port",
    "scenario_id": "scenario_id",
    "label": "label",
}
_ATTR_TO_JSON = {v: k for k, v in _JSON_TO_ATTR.items()}


class EventClass(str, Enum):
    FILE = "FileEvent"
    PROCESS = "ProcessEvent"
    NETWORK = "NetworkEvent"
    OTHER = "OtherEvent"


@dataclass(frozen=True)
class RawEvent:
    proc_name: str
    syscall_type: str
    fd_filename: str | None = None
    user_name: str | None = None
    user_shell: str | None = None
    evt_args: str | None = None
    net_type: str | None = None
    client_ip: str | None = None
    server_ip: str | None = None
    server_port: int | None = None
    scenario_id: str | None = None
    label: str | None = None

    def __post_init__(self):
        for name in ("proc_name", "syscall_type"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise SchemaError(f"field {_ATTR_TO_JSON[name]!r} must be a non-empty string", _ATTR_TO_JSON[name])
        port = self.server_port
        if port is not None and (isinstance(port, bool) or not isinstance(port, int) or not 0 <= port <= 65535):
            raise SchemaError(f"server_port out of range: {port!r}", "server_port")
        if self.label is not None and self.label not in LABELS:
            raise SchemaError(f"unknown label {self.label!r}", "label")

    def to_dict(self) -> dict:
        """JSON-ready mapping using the sysdig field names; absent fields omitted."""
        return {_ATTR_TO_JSON[k]: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class EventCorpus:
    events: list[RawEvent]
    source_path: str
    ingest_stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.events)


def _coerce_port(value):
    if value is None or value == NA:
        return None
    if isinstance(value, str) and value.strip().isdigit():
        return int(value.strip())
    return value


def _coerce_str(name: str, value):
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return str(value)
    if not isinstance(value, str):
        raise SchemaError(f"field {name!r} must be a string, got {type(value).__name__}", name)
    return value


def parse_event_record(line: str | bytes, unknown: Counter | None = None) -> RawEvent:
    """Parse one JSON object into a :class:`RawEvent`.

    Unknown keys are ignored; if ``unknown`` is given, their names are counted there.
    The literal ``"<NA>"`` is kept verbatim.
    """
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        offset = len(line[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", 0)

    kwargs = {}
    for key, value in obj.items():
        attr = _JSON_TO_ATTR.get(key)
        if attr is None:
            if unknown is not None:
                unknown[key] += 1
            continue
        if attr == "server_port":
            kwargs[attr] = _coerce_port(value)
        else:
            kwargs[attr] = _coerce_str(key, value)
    for required in ("proc_name", "type"):
        if required not in obj:
            raise SchemaError(f"missing required field {required!r}", required)
    return RawEvent(**kwargs)


def _present(value) -> bool:
    return value is not None and value != "" and value != NA


def classify_event(e: RawEvent) -> EventClass:
    """Precedence: Process > Network > File > Other."""
    syscall = e.syscall_type.lower()
    if syscall in PROCESS_SYSCALLS:
        return EventClass.PROCESS
    if syscall in NETWORK_SYSCALLS or any(_present(getattr(e, f)) for f in NETWORK_FIELDS):
        return EventClass.NETWORK
    if _present(e.fd_filename):
        return EventClass.FILE
    return EventClass.OTHER


def _corpus_stats(events: list[RawEvent]) -> dict:
    by_class = Counter(classify_event(e).value for e in events)
    by_label = Counter(e.label or "unlabeled" for e in events)
    return {
        "total": len(events),
        "by_class": {c.value: by_class.get(c.value, 0) for c in EventClass},
        "by_label": {lab: by_label.get(lab, 0) for lab in LABELS},
    }


def load_corpus(path: str | Path, max_failure_rate: float = 0.01) -> EventCorpus:
    """Read a JSONL export; one event per non-blank line, file order preserved.

    Raises IngestError when more than ``max_failure_rate`` of lines fail.
    """
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from None

    events: list[RawEvent] = []
    bad: list[tuple[int, str]] = []
    unknown: Counter = Counter()
    n_lines = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        n_lines += 1
        try:
            events.append(parse_event_record(raw, unknown))
        except (ParseError, SchemaError, UnicodeDecodeError) as exc:
            bad.append((lineno, str(exc)))

    if n_lines and len(bad) / n_lines > max_failure_rate:
        listing = "; ".join(f"line {n}: {msg}" for n, msg in bad[:10])
        raise IngestError(
            f"{len(bad)} of {n_lines} lines failed ({len(bad) / n_lines:.1%} > {max_failure_rate:.0%}): {listing}"
        )
    if bad:
        logger.warning("%s: skipped %d malformed lines", path, len(bad))

    stats = _corpus_stats(events)
    stats["lines"] = n_lines
    stats["errors"] = [{"line": n, "error": msg} for n, msg in bad]
    stats["unknown_fields"] = dict(sorted(unknown.items()))
    return EventCorpus(events=events, source_path=str(path), ingest_stats=stats)


def write_events(events, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(e.to_json() + "\n")


RAW_FIELDS = tuple(_ATTR_TO_JSON[f.name] for f in fields(RawEvent))
