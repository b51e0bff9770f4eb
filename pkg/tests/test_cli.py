import json
import shutil

import pytest

import provsem.pipeline as pipeline_mod
from provsem.artifacts import load_json, sha256_file
from provsem.augment import TemplateChatProvider
from provsem.cli import main
from provsem.embed import LocalHashProvider

SMALL = {"reduce": {"k": 32}, "detect": {"gbdt": {"n_rounds": 30}, "mlp": {"epochs": 10}}, "audit": {"per_label": 50}}


def synth(tmp_path, benign=150, adversary=150, extra=None):
    work = tmp_path / "w"
    assert main(["synth", "--out", str(work), "--benign", str(benign), "--adversary", str(adversary)]) == 0
    cfg = json.loads((work / "config.json").read_text())
    for key, value in (extra or SMALL).items():
        cfg.setdefault(key, {}).update(value)
    (work / "config.json").write_text(json.dumps(cfg))
    return work


def artifact_hashes(out):
    return {str(p.relative_to(out)): sha256_file(p) for p in sorted(out.rglob("*"))
            if p.is_file() and "cache" not in p.relative_to(out).parts}


@pytest.fixture
def counting(monkeypatch):
    calls = {"chat": 0, "embed": 0}

    class Chat(TemplateChatProvider):
        def complete(self, *a, **k):
            calls["chat"] += 1
            return super().complete(*a, **k)

    class Embed(LocalHashProvider):
        def embed(self, texts):
            calls["embed"] += 1
            return super().embed(texts)

    monkeypatch.setattr(pipeline_mod, "make_chat_provider", lambda s: Chat())
    monkeypatch.setattr(pipeline_mod, "make_embed_provider", lambda s: Embed(s.width))
    return calls


@pytest.mark.slow
def test_pipeline_golden_path_and_warm_rerun(tmp_path, capsys, counting):
    work = synth(tmp_path)
    cfg = str(work / "config.json")
    assert main(["pipeline", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "supervised_mlp" in out and "unseen_attack" in out and "audit: done" in out
    assert counting["chat"] > 0 and counting["embed"] > 0
    first = artifact_hashes(work / "out")
    for rel in ("reports/summary.csv", "reports/unseen_attack_roc.png", "audit/projection.csv", "audit/analogies.json"):
        assert rel in first

    for rel in ("events.manifest.json", "explanations/manifest.json", "models/manifest.json", "reports/manifest.json"):
        man = load_json(work / "out" / rel)
        assert {"config_hash", "seeds", "inputs", "outputs", "stage_key"} <= set(man)
        for name, sha in man["outputs"].items():
            assert sha256_file(work / "out" / name) == sha

    # unchanged inputs: every stage is a no-op
    assert main(["pipeline", "--config", cfg]) == 0
    assert capsys.readouterr().out.count("up to date") == 8

    # forced rerun on a warm cache: no provider calls and identical bytes
    counting.update(chat=0, embed=0)
    assert main(["pipeline", "--config", cfg, "--force"]) == 0
    assert counting == {"chat": 0, "embed": 0}
    assert artifact_hashes(work / "out") == first

    # a fresh output directory that shares the cache also makes no calls
    shutil.copytree(work / "out" / "cache", tmp_path / "shared")
    cfg2 = json.loads((work / "config.json").read_text())
    cfg2["cache_dir"] = str(tmp_path / "shared")
    (work / "c2.json").write_text(json.dumps(cfg2))
    assert main(["pipeline", "--config", str(work / "c2.json"), "--out", str(tmp_path / "o2")]) == 0
    assert counting == {"chat": 0, "embed": 0}
    assert artifact_hashes(tmp_path / "o2") == first


def test_stage_rerun_after_config_change(tmp_path, capsys):
    work = synth(tmp_path, 40, 40)
    cfg = str(work / "config.json")
    for stage in ("ingest", "normalize", "explain", "embed"):
        assert main([stage, "--config", cfg]) == 0
    capsys.readouterr()
    assert main(["embed", "--config", cfg]) == 0
    assert capsys.readouterr().out.strip() == "embed: up to date"
    data = json.loads((work / "config.json").read_text())
    data["embed"]["width"] = 256
    (work / "config.json").write_text(json.dumps(data))
    assert main(["embed", "--config", cfg]) == 0
    assert capsys.readouterr().out.strip() == "embed: done"
    assert load_json(work / "out" / "embeddings.json")["width"] == 256


def test_missing_upstream_manifest_is_a_data_error(tmp_path, capsys):
    work = synth(tmp_path, 20, 20)
    assert main(["reduce", "--config", str(work / "config.json")]) == 1
    assert "embeddings.json" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"reduce": {"nope": 1}}))
    assert main(["pipeline", "--config", str(p)]) == 2
    assert "config.reduce.nope" in capsys.readouterr().err
    assert main(["pipeline", "--config", str(tmp_path / "absent.json")]) == 2


def test_remote_explain_without_key_exits_2(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("PROVSEM_API_KEY", raising=False)
    work = synth(tmp_path, 20, 20, {"explain": {"provider": "remote"}})
    assert main(["pipeline", "--config", str(work / "config.json")]) == 2
    assert "PROVSEM_API_KEY" in capsys.readouterr().err
    # stages before explain completed and need no credentials
    assert (work / "out" / "normalized.manifest.json").exists()
    assert not (work / "out" / "explanations" / "manifest.json").exists()


def test_unreadable_input_is_a_data_error(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"inputs": ["missing.jsonl"]}))
    assert main(["ingest", "--config", str(p)]) == 1
