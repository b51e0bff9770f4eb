"""Path normalization, per-class field projection, dedup and overlap removal."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SamplingError, SchemaError
from .events import NA, EventClass, RawEvent, classify_event

TMP_TOKEN = "<tmpfile>"
PID_TOKEN = "<pid>"
HASH_TOKEN = "hash value"

DEFAULT_TEMP_EXTENSIONS = (".tmp", ".temp", ".swp", ".swx")

_HEX = re.compile(r"[0-9a-fA-F]+")
_HASH_LENGTHS = frozenset({32, 40, 64})
_PROC_PID = re.compile(r"^(/proc/)(\d+)(?=/|$)")
_PROC_TASK = re.compile(r"^(/proc/[^/]+/task/)(\d+)(?=/|$)")
# mkstemp style names: "tmp" followed by a random alphanumeric tail
_RANDOM_TEMP = re.compile(r"^tmp([A-Za-z0-9_]{6,})$")


def _is_temp_basename(name: str, extensions: tuple[str, ...]) -> bool:
    if not name or name == TMP_TOKEN:
        return False
    lower = name.lower()
    for ext in extensions:
        if lower.endswith(ext) and len(lower) > len(ext):
            return True
        # trailing random suffix after a temp extension, e.g. "x.tmp.4Fq9" or "x.swp~"
        idx = lower.rfind(ext + ".")
        if idx > 0 and re.fullmatch(r"[a-z0-9]{1,12}", lower[idx + len(ext) + 1 :]):
            return True
        if lower.endswith(ext + "~") and len(lower) > len(ext) + 1:
            return True
    m = _RANDOM_TEMP.match(name)
    if m:
        # the tail must mix letters and digits, which keeps words like "tmpfiles.d" out
        tail = m.group(1)
        return any(c.isdigit() for c in tail) and any(c.isalpha() for c in tail)
    return False


def _is_hash_component(part: str) -> bool:
    return len(part) in _HASH_LENGTHS and _HEX.fullmatch(part) is not None


def normalize_path(path: str, temp_extensions: tuple[str, ...] = DEFAULT_TEMP_EXTENSIONS) -> str:
    """Generalize temp-file names, /proc PIDs and hash-like components.

    Rules run in order: temp basename -> ``<tmpfile>``, ``/proc/<digits>`` -> ``/proc/<pid>``,
    32/40/64-char hex component -> ``hash value``. Anything else is returned unchanged.
    """
    if not path or path == NA:
        return path
    head, sep, base = path.rpartition("/")
    if _is_temp_basename(base, temp_extensions):
        path = head + sep + TMP_TOKEN
    path = _PROC_PID.sub(lambda m: m.group(1) + PID_TOKEN, path)
    path = _PROC_TASK.sub(lambda m: m.group(1) + PID_TOKEN, path)
    parts = path.split("/")
    if any(_is_hash_component(p) for p in parts):
        path = "/".join(HASH_TOKEN if _is_hash_component(p) else p for p in parts)
    return path


BASE_FIELDS = ("proc_name", "type", "fd_filename", "user_name", "user_shell")
CLASS_FIELDS = {
    EventClass.PROCESS: ("evt_args",),
    EventClass.NETWORK: ("net_type", "client_ip", "server_ip", "server_port"),
    EventClass.FILE: (),
    EventClass.OTHER: (),
}


@dataclass(frozen=True)
class NormalizedEvent:
    """An event reduced to the fields its class carries.

    ``fields`` maps sysdig field names to values; ``scenario_id`` is metadata and
    does not take part in the canonical key.
    """

    fields: dict
    event_class: EventClass
    scenario_id: str | None = None

    def __post_init__(self):
        allowed = set(BASE_FIELDS) | set(CLASS_FIELDS[self.event_class])
        extra = set(self.fields) - allowed
        if extra:
            raise SchemaError(f"fields {sorted(extra)} do not belong to {self.event_class.value}")
        if not self.fields.get("proc_name") or not self.fields.get("type"):
            raise SchemaError("normalized event needs proc_name and type")

    @property
    def canonical_key(self) -> str:
        return canonical_json(self.fields)

    @property
    def key_digest(self) -> str:
        return hashlib.sha256(self.canonical_key.encode("utf-8")).hexdigest()

    def __getattr__(self, name):
        # attribute access for retained fields, e.g. ev.proc_name / ev.syscall_type
        if name == "syscall_type":
            name = "type"
        f = self.__dict__.get("fields", {})
        if name in BASE_FIELDS or any(name in v for v in CLASS_FIELDS.values()):
            return f.get(name)
        raise AttributeError(name)

    def __hash__(self):
        return hash(self.canonical_key)

    def to_record(self, label: str | None = None) -> dict:
        rec = {"event": self.fields, "event_class": self.event_class.value}
        if self.scenario_id is not None:
            rec["scenario_id"] = self.scenario_id
        if label is not None:
            rec["label"] = label
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> NormalizedEvent:
        return cls(dict(rec["event"]), EventClass(rec["event_class"]), rec.get("scenario_id"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def to_normalized_event(e: RawEvent, temp_extensions: tuple[str, ...] = DEFAULT_TEMP_EXTENSIONS) -> NormalizedEvent:
    cls = classify_event(e)
    raw = e.to_dict()
    kept = {}
    for name in BASE_FIELDS + CLASS_FIELDS[cls]:
        if name in raw:
            kept[name] = raw[name]
    if "fd_filename" in kept:
        kept["fd_filename"] = normalize_path(kept["fd_filename"], temp_extensions)
    return NormalizedEvent(kept, cls, e.scenario_id)


@dataclass
class LabeledEventSet:
    events: list[NormalizedEvent]
    labels: list[str]
    scenario_ids: list[str | None]
    split_tag: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.events) == len(self.labels) == len(self.scenario_ids)):
            raise SchemaError("events, labels and scenario_ids must have equal length")
        keys = [e.canonical_key for e in self.events]
        if len(set(keys)) != len(keys):
            raise SchemaError("canonical keys must be unique within a labeled set")

    def __len__(self) -> int:
        return len(self.events)

    def subset(self, indices, split_tag: str | None = None) -> LabeledEventSet:
        idx = [int(i) for i in indices]
        return LabeledEventSet(
            [self.events[i] for i in idx],
            [self.labels[i] for i in idx],
            [self.scenario_ids[i] for i in idx],
            split_tag,
        )

    def counts(self) -> dict:
        return {lab: self.labels.count(lab) for lab in ("benign", "adversary")}

    def write(self, path: str | Path, manifest: dict | None = None) -> dict:
        """Write JSONL plus a ``<name>.manifest.json`` sidecar; returns the manifest."""
        path = Path(path)
        lines = [
            canonical_json(ev.to_record(label)) for ev, label in zip(self.events, self.labels)
        ]
        body = "".join(line + "\n" for line in lines)
        path.write_text(body, encoding="utf-8")
        man = {
            "count": len(self),
            "counts": self.counts(),
            "split_tag": self.split_tag,
            "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
            **self.meta,
            **(manifest or {}),
        }
        path.with_suffix(".manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
        return man

    @classmethod
    def read(cls, path: str | Path) -> LabeledEventSet:
        events, labels, scen = [], [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                ev = NormalizedEvent.from_record(rec)
                events.append(ev)
                labels.append(rec["label"])
                scen.append(ev.scenario_id)
        return cls(events, labels, scen)


def _unique(events: list[NormalizedEvent]) -> list[NormalizedEvent]:
    seen = set()
    out = []
    for ev in events:
        k = ev.canonical_key
        if k not in seen:
            seen.add(k)
            out.append(ev)
    return out


def dedup_and_filter(
    benign: list[NormalizedEvent],
    adversary: list[NormalizedEvent],
    benign_sample: int | None,
    seed: int,
) -> LabeledEventSet:
    """Deduplicate both sides, drop adversary events also seen as benign, sample benign.

    Overlap is exact canonical-key equality against the full benign pool (before sampling).
    ``benign_sample=None`` keeps every unique benign event.
    """
    benign_u = _unique(benign)
    benign_keys = {ev.canonical_key for ev in benign_u}
    adversary_u = [ev for ev in _unique(adversary) if ev.canonical_key not in benign_keys]

    if benign_sample is not None:
        if benign_sample > len(benign_u):
            raise SamplingError(f"benign_sample={benign_sample} exceeds {len(benign_u)} unique benign events")
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(benign_u), size=benign_sample, replace=False))
        benign_u = [benign_u[i] for i in chosen]

    events = benign_u + adversary_u
    labels = ["benign"] * len(benign_u) + ["adversary"] * len(adversary_u)
    return LabeledEventSet(
        events,
        labels,
        [ev.scenario_id for ev in events],
        meta={
            "seed": seed,
            "benign_sample": benign_sample,
            "adversary_removed_overlap": len(_unique(adversary)) - len(adversary_u),
        },
    )
