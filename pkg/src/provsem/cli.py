"""Command-line entry point.

    provsem synth --out work/
    provsem pipeline --config work/config.json
    provsem explain --config work/config.json --force

Exit codes: 0 success, 1 data error, 2 config or credential error, 3 provider error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .artifacts import dump_json, load_json
from .config import load_config
from .errors import ProvsemError
from .pipeline import STAGES, Pipeline
from .synthetic import HELD_OUT_SCENARIO, write_synthetic

logger = logging.getLogger("provsem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provsem", description="Provenance event explanation, embedding and detection pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name, help="run all stages in order" if name == "pipeline" else f"run the {name} stage")
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--out", help="artifact directory (overrides output_dir in the config)")
        p.add_argument("--force", action="store_true", help="rerun even when the stage manifest is current")

    p = sub.add_parser("synth", help="write a synthetic two-population corpus and a matching config")
    p.add_argument("--out", required=True, help="directory for corpus.jsonl and config.json")
    p.add_argument("--benign", type=int, default=1000)
    p.add_argument("--adversary", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events = write_synthetic(out / "corpus.jsonl", args.benign, args.adversary, args.seed)
    cfg_path = out / "config.json"
    if not cfg_path.exists():
        dump_json({
            "version": 1,
            "inputs": ["corpus.jsonl"],
            "output_dir": "out",
            "explain": {"provider": "template"},
            "embed": {"provider": "local_hash"},
            "evaluate": {"unseen_scenario": HELD_OUT_SCENARIO},
        }, cfg_path)
    print(f"wrote {len(events)} events to {out / 'corpus.jsonl'}; config at {cfg_path}")
    return 0


def _print_summary(pipe: Pipeline) -> None:
    man_path = pipe.path("reports/manifest.json")
    if not man_path.exists():
        return
    for rel in load_json(man_path)["outputs"]:
        if rel.endswith(".json"):
            rep = load_json(pipe.path(rel))
            m = rep["metrics"]
            auc = rep["roc"]["auc"] if rep["roc"] else float("nan")
            print(f"{rep['mode']:<22} acc={m['accuracy']:.4f} prec={m['precision']:.4f} "
                  f"rec={m['recall']:.4f} f1={m['f1']:.4f} auc={auc:.4f}")


def run(command: str, args) -> int:
    if command == "synth":
        return _synth(args)
    cfg = load_config(args.config)
    pipe = Pipeline(cfg, args.out, args.force)
    stages = STAGES if command == "pipeline" else (command,)
    for res in pipe.run_all(stages):
        print(f"{res.stage}: {'up to date' if res.skipped else 'done'}")
    if command in ("pipeline", "evaluate"):
        _print_summary(pipe)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args.command, args)
    except ProvsemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
