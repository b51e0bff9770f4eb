import json
from collections import Counter

import pytest

from golden import CROND_EVENT
from provsem.errors import IngestError, ParseError, SchemaError
from provsem.events import (
    NA, EventClass, RawEvent, classify_event, load_corpus, parse_event_record, write_events,
)


def test_parse_listing_record_keeps_na_verbatim():
    e = parse_event_record(json.dumps(CROND_EVENT))
    assert e.proc_name == "crond"
    assert e.syscall_type == "execve"
    assert e.fd_filename == NA
    assert e.evt_args == "sh"
    assert classify_event(e) is EventClass.PROCESS
    assert json.loads(e.to_json()) == CROND_EVENT


def test_network_record_and_port_coercion():
    line = json.dumps({"proc_name": "dhclient", "type": "recvfrom", "net_type": "ipv4",
                       "client_ip": "IP2", "server_ip": "IP1", "server_port": "67"})
    e = parse_event_record(line)
    assert e.server_port == 67
    assert classify_event(e) is EventClass.NETWORK


def test_malformed_json_reports_byte_offset():
    line = '{"proc_name": "ä", "type": }'
    with pytest.raises(ParseError) as info:
        parse_event_record(line)
    # the offending "}" sits after a two-byte character
    assert info.value.offset == len(line[: line.index("}")].encode("utf-8"))


@pytest.mark.parametrize("missing", ["proc_name", "type"])
def test_missing_required_field_is_named(missing):
    rec = dict(CROND_EVENT)
    del rec[missing]
    with pytest.raises(SchemaError) as info:
        parse_event_record(json.dumps(rec))
    assert info.value.field == missing


@pytest.mark.parametrize("port", [-1, 65536, "http"])
def test_bad_port_rejected(port):
    with pytest.raises(SchemaError):
        parse_event_record(json.dumps({"proc_name": "a", "type": "connect", "server_port": port}))


def test_unknown_fields_are_counted_and_ignored():
    unknown = Counter()
    rec = dict(CROND_EVENT, evt_time=123, container_id="abc")
    e = parse_event_record(json.dumps(rec), unknown)
    assert unknown == {"evt_time": 1, "container_id": 1}
    assert not hasattr(e, "evt_time")


@pytest.mark.parametrize(
    "kw, expected",
    [
        (dict(syscall_type="execve", fd_filename="/bin/sh", server_ip="1.2.3.4"), EventClass.PROCESS),
        (dict(syscall_type="openat", fd_filename="/etc/x", server_ip="1.2.3.4"), EventClass.NETWORK),
        (dict(syscall_type="connect"), EventClass.NETWORK),
        (dict(syscall_type="openat", fd_filename="/etc/x"), EventClass.FILE),
        (dict(syscall_type="openat", fd_filename=NA), EventClass.OTHER),
        (dict(syscall_type="mprotect"), EventClass.OTHER),
    ],
)
def test_classification_precedence(kw, expected):
    assert classify_event(RawEvent("p", **kw)) is expected


def _corpus(tmp_path, n_good, n_bad):
    lines = [json.dumps({"proc_name": f"p{i}", "type": "read", "fd_filename": f"/f{i}", "label": "benign"})
             for i in range(n_good)]
    lines += ["{not json"] * n_bad
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(lines) + "\n\n")
    return path


def test_load_corpus_tolerates_one_percent(tmp_path):
    corpus = load_corpus(_corpus(tmp_path, 99, 1))
    assert len(corpus) == 99
    assert corpus.ingest_stats["lines"] == 100
    assert corpus.ingest_stats["errors"][0]["line"] == 100
    assert corpus.ingest_stats["by_class"]["FileEvent"] == 99


def test_load_corpus_rejects_above_one_percent(tmp_path):
    with pytest.raises(IngestError) as info:
        load_corpus(_corpus(tmp_path, 98, 2))
    assert "line 99" in str(info.value)


def test_write_then_load_roundtrip(tmp_path):
    events = [RawEvent("a", "read", "/x", "u", "/bin/sh", label="benign"),
              RawEvent("b", "connect", NA, "u", "/bin/sh", net_type="ipv4", server_port=80, label="adversary",
                       scenario_id="S1")]
    write_events(events, tmp_path / "e.jsonl")
    assert load_corpus(tmp_path / "e.jsonl").events == events
