"""Stage runner: ingest -> normalize -> explain -> embed -> reduce -> train -> evaluate -> audit.

Each stage reads its upstream manifest, writes its artifacts and then its own
manifest. A stage whose config section, input hashes and output hashes match
the stored manifest is skipped.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .artifacts import MANIFEST_VERSION, config_hash, dump_json, load_json, sha256_file
from .augment import (
    RemoteChatProvider, TemplateChatProvider, explain_events, normalized_from_fields, seed_cache,
    worked_examples,
)
from .cache import DiskCache
from .config import PipelineConfig
from .detect import DEFAULT_GRID, GbdtConfig, MlpConfig, OutlierConfig, load_model, save_model
from .embed import LocalHashProvider, RemoteEmbeddingProvider, cosine_distance_matrix, embed_texts, load_matrix, save_matrix
from .errors import ConfigError, IngestError, StageError
from .evaluation import (
    MODE_DETECTOR, MODES, DetectorSettings, ExperimentReport, binary_labels, evaluate_model,
    experiment_indices, fit_detector,
)
from .events import load_corpus, write_events
from .normalize import LabeledEventSet, dedup_and_filter, to_normalized_event
from .quality import analogy_residual, project_2d
from .reduce import classical_mds, default_gamma, kpca_fit_transform
from .remote import OpenAIClient, api_key_from_env

logger = logging.getLogger(__name__)

STAGES = ("ingest", "normalize", "explain", "embed", "reduce", "train", "evaluate", "audit")


# --- provider factories (tests swap these out) -------------------------------

def make_chat_provider(section):
    if section.provider == "template":
        return TemplateChatProvider()
    client = OpenAIClient(section.base_url, api_key_from_env(), max_retries=section.max_retries)
    return RemoteChatProvider(client, section.model_id, section.temperature, section.max_tokens)


def make_embed_provider(section):
    if section.provider == "local_hash":
        return LocalHashProvider(section.width)
    client = OpenAIClient(section.base_url, api_key_from_env(), max_retries=section.max_retries)
    return RemoteEmbeddingProvider(client, section.model_id, section.width)


def detector_settings(cfg: PipelineConfig) -> DetectorSettings:
    d = cfg.detect
    grid = DEFAULT_GRID if d.grid == "default" else d.grid
    return DetectorSettings(
        mlp=MlpConfig(hidden=tuple(d.mlp.hidden), epochs=d.mlp.epochs, learning_rate=d.mlp.learning_rate,
                      batch_size=d.mlp.batch_size, validation_fraction=d.mlp.validation_fraction),
        gbdt=GbdtConfig(max_depth=d.gbdt.max_depth, n_rounds=d.gbdt.n_rounds,
                        learning_rate=d.gbdt.learning_rate, max_bins=d.gbdt.max_bins),
        gbdt_grid=grid,
        outliers=OutlierConfig(scorers=tuple(d.outliers.scorers), knn_k=d.outliers.knn_k, lof_k=d.outliers.lof_k,
                               hbos_bins=d.outliers.hbos_bins, hbos_max_dims=d.outliers.hbos_max_dims),
    )


@dataclass
class StageResult:
    stage: str
    manifest: dict
    skipped: bool


class Pipeline:
    # stage -> (manifest path, upstream stages, config sections)
    LAYOUT = {
        "ingest": ("events.manifest.json", (), ("inputs", "normalize")),
        "normalize": ("normalized.manifest.json", ("ingest",), ("normalize",)),
        "explain": ("explanations/manifest.json", ("normalize",), ("explain",)),
        "embed": ("embeddings.json", ("explain",), ("embed",)),
        "reduce": ("reduced.json", ("embed",), ("reduce",)),
        "train": ("models/manifest.json", ("reduce", "normalize"), ("detect", "evaluate")),
        "evaluate": ("reports/manifest.json", ("train", "reduce", "normalize"), None),  # None: whole config
        "audit": ("audit/manifest.json", ("embed", "normalize"), ("explain", "embed", "audit")),
    }

    def __init__(self, cfg: PipelineConfig, out: str | Path | None = None, force: bool = False):
        self.cfg = cfg
        self.out = Path(out) if out is not None else cfg.resolve(cfg.output_dir)
        self.cache = DiskCache(cfg.resolve(cfg.cache_dir) if cfg.cache_dir else self.out / "cache")
        self.force = force
        self._chat = None
        self._embedder = None

    # providers are built on first use so stages that never call them need no credentials
    @property
    def chat(self):
        if self._chat is None:
            self._chat = make_chat_provider(self.cfg.explain)
        return self._chat

    @property
    def embedder(self):
        if self._embedder is None:
            self._embedder = make_embed_provider(self.cfg.embed)
        return self._embedder

    def path(self, rel: str) -> Path:
        return self.out / rel

    # --- manifest plumbing ---------------------------------------------------

    def _stage_config(self, stage: str) -> dict:
        sections = self.LAYOUT[stage][2]
        d = self.cfg.to_dict()
        if sections is None:
            return {"full": self.cfg.hash}
        return {s: d[s] for s in sections}

    def _upstream_hashes(self, stage: str) -> dict:
        if stage == "ingest":
            hashes = {}
            if not self.cfg.inputs:
                raise ConfigError("config.inputs: at least one input file is required")
            for p in self.cfg.inputs:
                try:
                    hashes[p] = sha256_file(self.cfg.resolve(p))
                except OSError as exc:
                    raise IngestError(f"cannot read input {p}: {exc.strerror or exc}") from None
            return hashes
        hashes = {}
        for up in self.LAYOUT[stage][1]:
            man_path = self.path(self.LAYOUT[up][0])
            if not man_path.exists():
                raise StageError(f"stage {stage!r} needs the {up!r} manifest {man_path}, which is absent; run `{up}` first")
            for rel in load_json(man_path)["outputs"]:
                f = self.path(rel)
                if not f.exists():
                    raise StageError(f"artifact {f} listed in {man_path} is missing; rerun `{up}`")
                hashes[rel] = sha256_file(f)
        return hashes

    def _up_to_date(self, man_path: Path, key: str) -> dict | None:
        if self.force or not man_path.exists():
            return None
        try:
            man = load_json(man_path)
        except (OSError, json.JSONDecodeError):
            return None
        if man.get("stage_key") != key:
            return None
        for rel, digest in man.get("outputs", {}).items():
            f = self.path(rel)
            if not f.exists() or sha256_file(f) != digest:
                return None
        return man

    def run_stage(self, stage: str) -> StageResult:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        man_rel = self.LAYOUT[stage][0]
        man_path = self.path(man_rel)
        inputs = self._upstream_hashes(stage)
        stage_cfg = self._stage_config(stage)
        stage_cfg_hash = config_hash(stage_cfg)
        key = config_hash({"stage": stage, "config": stage_cfg_hash, "inputs": inputs})
        existing = self._up_to_date(man_path, key)
        if existing is not None:
            logger.info("%s: up to date, skipped", stage)
            return StageResult(stage, existing, True)

        man_path.parent.mkdir(parents=True, exist_ok=True)
        outputs, seeds, extra = getattr(self, f"_run_{stage}")()
        manifest = {
            **extra,
            "stage": stage,
            "manifest_version": MANIFEST_VERSION,
            "config_hash": stage_cfg_hash,
            "seeds": seeds,
            "inputs": inputs,
            "outputs": {rel: sha256_file(self.path(rel)) for rel in outputs},
            "stage_key": key,
        }
        dump_json(manifest, man_path)
        logger.info("%s: wrote %d artifacts", stage, len(outputs))
        return StageResult(stage, manifest, False)

    def run_all(self, stages=STAGES) -> list[StageResult]:
        return [self.run_stage(s) for s in stages]

    # --- loaders ---------------------------------------------------------------

    def _dataset(self) -> LabeledEventSet:
        return LabeledEventSet.read(self.path("normalized.jsonl"))

    def _explanation_texts(self) -> list[str]:
        with open(self.path("explanations/explanations.jsonl"), encoding="utf-8") as fh:
            return [json.loads(line)["text"] for line in fh if line.strip()]

    # --- stages ------------------------------------------------------------------

    def _run_ingest(self):
        events, per_input = [], {}
        for p in self.cfg.inputs:
            corpus = load_corpus(self.cfg.resolve(p), self.cfg.normalize.max_failure_rate)
            events.extend(corpus.events)
            per_input[p] = corpus.ingest_stats
        self.out.mkdir(parents=True, exist_ok=True)
        write_events(events, self.path("events.jsonl"))
        return ["events.jsonl"], {}, {"count": len(events), "per_input": per_input}

    def _run_normalize(self):
        ncfg = self.cfg.normalize
        corpus = load_corpus(self.path("events.jsonl"), ncfg.max_failure_rate)
        exts = tuple(ncfg.temp_extensions)
        benign, adversary, unlabeled = [], [], 0
        for e in corpus.events:
            if e.label == "benign":
                benign.append(to_normalized_event(e, exts))
            elif e.label == "adversary":
                adversary.append(to_normalized_event(e, exts))
            else:
                unlabeled += 1
        ds = dedup_and_filter(benign, adversary, ncfg.benign_sample, ncfg.seed)
        man = ds.write(self.path("normalized.jsonl"))
        man.update(unlabeled_dropped=unlabeled, raw_benign=len(benign), raw_adversary=len(adversary))
        return ["normalized.jsonl"], {"normalize": ncfg.seed}, man

    def _run_explain(self):
        ds = self._dataset()
        if self.cfg.explain.seed_worked_examples:
            seed_cache(self.cache)
        provider = self.chat
        before = getattr(provider, "calls", 0)
        exps = explain_events(ds.events, provider, self.cache, self.cfg.explain.max_workers)
        logger.info("explain: %d events, %d provider calls", len(exps), getattr(provider, "calls", 0) - before)
        rel = "explanations/explanations.jsonl"
        with open(self.path(rel), "w", encoding="utf-8") as fh:
            for i, x in enumerate(exps):
                rec = {"index": i, "event_key": x.event_key, "provider": x.provider, "model_id": x.model_id, "text": x.text}
                fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        return [rel], {}, {"count": len(exps), "model_id": provider.model_id, "provider": provider.kind}

    def _run_embed(self):
        texts = self._explanation_texts()
        provider = self.embedder
        before = getattr(provider, "calls", 0)
        m = embed_texts(texts, provider, self.cache, self.cfg.embed.batch_size)
        logger.info("embed: %d texts, %d provider calls", len(texts), getattr(provider, "calls", 0) - before)
        man = save_matrix(m.values, self.path("embeddings.bin"), m.provenance)
        return ["embeddings.bin"], {}, man

    def _run_reduce(self):
        X, _ = load_matrix(self.path("embeddings.bin"))
        rcfg = self.cfg.reduce
        gamma = rcfg.gamma if rcfg.gamma is not None else default_gamma(X, rcfg.gamma_heuristic)
        k = min(rcfg.k, X.shape[0] - 1)
        model, Z = kpca_fit_transform(X, gamma, k)
        model.save(self.path("models/kpca"))
        man = save_matrix(Z, self.path("reduced.bin"), {"gamma": gamma, "k_requested": rcfg.k, "k": model.k,
                                                       "warning": model.warning}, dtype="<f8")
        outs = ["reduced.bin", "models/kpca/kpca.json", "models/kpca/kpca.bin"]
        return outs, {}, man

    def _run_train(self):
        ds = self._dataset()
        Z, _ = load_matrix(self.path("reduced.bin"))
        ecfg = self.cfg.evaluate
        settings = detector_settings(self.cfg)
        y = binary_labels(ds.labels)
        outs, trained = [], {}
        for mode in ecfg.modes:
            if mode not in MODES:
                raise ConfigError(f"config.evaluate.modes: unknown mode {mode!r}")
            train, test = experiment_indices(
                mode, ds.labels, ds.scenario_ids, train_fraction=ecfg.train_fraction, seed=ecfg.seed,
                scenario=ecfg.unseen_scenario, test_size=ecfg.unseen_test_size,
            )
            model = fit_detector(MODE_DETECTOR[mode], Z[train], y[train], settings, ecfg.seed)
            d = f"models/{mode}"
            save_model(model, self.path(d))
            dump_json({"train": train.tolist(), "test": test.tolist()}, self.path(f"{d}/split.json"))
            outs += [f"{d}/model.json", f"{d}/model.bin", f"{d}/split.json"]
            trained[mode] = {"detector": MODE_DETECTOR[mode], "n_train": int(train.size), "n_test": int(test.size)}
        return outs, {"evaluate": ecfg.seed}, {"modes": trained}

    def _run_evaluate(self):
        ds = self._dataset()
        Z, _ = load_matrix(self.path("reduced.bin"))
        ecfg = self.cfg.evaluate
        y = binary_labels(ds.labels)
        dataset = {
            "normalized_sha256": sha256_file(self.path("normalized.jsonl")),
            "reduced_sha256": sha256_file(self.path("reduced.bin")),
            "counts": ds.counts(),
        }
        outs, rows = [], []
        for mode in ecfg.modes:
            d = f"models/{mode}"
            model = load_model(self.path(d))
            split = load_json(self.path(f"{d}/split.json"))
            test = np.asarray(split["test"], dtype=np.int64)
            metrics, roc = evaluate_model(model, Z[test], y[test])
            extra = {"scenario": ecfg.unseen_scenario} if mode == "unseen_attack" else {}
            report = ExperimentReport(mode, metrics, roc, self.cfg.hash, ecfg.seed, len(split["train"]),
                                      int(test.size), dataset, extra)
            dump_json(report.to_dict(), self.path(f"reports/{mode}.json"))
            outs.append(f"reports/{mode}.json")
            if roc is not None:
                roc.write_csv(self.path(f"reports/{mode}_roc.csv"))
                plotting.plot_roc(roc, self.path(f"reports/{mode}_roc.png"), title=mode.replace("_", " "))
                outs += [f"reports/{mode}_roc.csv", f"reports/{mode}_roc.png"]
            rows.append([mode, report.n_train, report.n_test, metrics.accuracy, metrics.precision,
                         metrics.recall, metrics.f1, roc.auc if roc is not None else ""])
        with open(self.path("reports/summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "n_train", "n_test", "accuracy", "precision", "recall", "f1", "auc"])
            w.writerows(rows)
        outs.append("reports/summary.csv")
        return outs, {"evaluate": ecfg.seed}, {"config_hash_full": self.cfg.hash}

    def _run_audit(self):
        acfg = self.cfg.audit
        ds = self._dataset()
        X, _ = load_matrix(self.path("embeddings.bin"))
        per_label = acfg.per_label
        if per_label is not None:
            per_label = min([per_label] + list(ds.counts().values()))
        proj = project_2d(X, [e.key_digest[:16] for e in ds.events], ds.labels, per_label, acfg.seed)
        proj.write_csv(self.path("audit/projection.csv"))
        plotting.plot_projection(proj, self.path("audit/projection.png"))

        quads = worked_examples()["analogy_quads"]
        results, uniq = [], {}
        for quad in quads:
            events = [normalized_from_fields(f) for f in quad["events"]]
            texts = [x.text for x in explain_events(events, self.chat, self.cache, 1)]
            vecs = embed_texts(texts, self.embedder, self.cache, self.cfg.embed.batch_size).values
            res = analogy_residual(*vecs, tolerance=acfg.tolerance, name=quad["name"])
            results.append(res.to_dict())
            for ev, v in zip(events, vecs):
                uniq.setdefault(ev.canonical_key, (ev, v))
        dump_json({"tolerance": acfg.tolerance, "embedding": self.embedder.model_id, "quads": results},
                  self.path("audit/analogies.json"))

        names = [f"{ev.fields['proc_name']} {ev.fields['type']} {ev.fields.get('fd_filename', '')}".strip()
                 for ev, _ in uniq.values()]
        V = np.array([v for _, v in uniq.values()])
        coords = classical_mds(cosine_distance_matrix(V), 2)
        with open(self.path("audit/analogy_mds.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y"])
            for name, (x, y) in zip(names, coords.points[:, :2]):
                w.writerow([name, repr(float(x)), repr(float(y))])
        plotting.plot_named_points(coords.points, names, self.path("audit/analogy_mds.png"))
        outs = ["audit/projection.csv", "audit/projection.png", "audit/analogies.json",
                "audit/analogy_mds.csv", "audit/analogy_mds.png"]
        return outs, {"audit": acfg.seed}, {"projection_rows": len(proj.keys), "stress": proj.coords.stress}
