"""Command-line entry point: run or validate experiment configurations.

Exit codes: 0 success, 1 pipeline failure or blocked run, 2 config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .diophantine import ResonantFrequencyError


def build_parser():
    parser = argparse.ArgumentParser(prog="kamtorus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("config", help="path to a TOML experiment file")
    run_p.add_argument("--out", default="out", help="output directory for report.json and CSV tables")
    run_p.add_argument("--strict", action="store_true", help="block on violated admissibility conditions")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")

    val_p = sub.add_parser("validate", help="check admissibility conditions only")
    val_p.add_argument("config", help="path to a TOML experiment file")
    val_p.add_argument("--strict", action="store_true", help="exit 1 if any condition fails")
    val_p.add_argument("--out", default=None, help="optional directory for validate.json")
    return parser


def _validate(args):
    cfg = experiments.load_config(args.config)
    try:
        conditions = experiments.validate_experiment(cfg)
    except ResonantFrequencyError as exc:
        conditions = [
            {
                "id": "frequency-nonresonant",
                "ok": False,
                "value": 0.0,
                "threshold": 0.0,
                "detail": f"exact resonance witnessed at k = {list(exc.k)}",
            }
        ]
    payload = {
        "config": str(args.config),
        "conditions": conditions,
        "all_ok": all(c["ok"] for c in conditions),
    }
    text = json.dumps(experiments._jsonable(payload), sort_keys=True, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate.json").write_text(text + "\n")
    if args.strict and not payload["all_ok"]:
        return 1
    return 0


def _run(args):
    cfg = experiments.load_config(args.config)
    try:
        report = experiments.run_experiment(cfg, args.out, strict=args.strict, seed=args.seed)
    except experiments.BlockedError as exc:
        diag = {"error": "blocked", "conditions": exc.conditions}
        print(json.dumps(experiments._jsonable(diag), sort_keys=True, indent=2), file=sys.stderr)
        return 1
    except ResonantFrequencyError as exc:
        diag = {"error": "resonant frequency", "witness_k": list(exc.k)}
        print(json.dumps(diag, sort_keys=True, indent=2), file=sys.stderr)
        return 1
    except (ArithmeticError, ValueError) as exc:
        if isinstance(exc, experiments.ConfigError):
            raise
        diag = {"error": type(exc).__name__, "detail": str(exc)}
        print(json.dumps(diag, sort_keys=True, indent=2), file=sys.stderr)
        return 1
    summary = {"mode": report["mode"], "out": str(args.out), "blocked": report["blocked"]}
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        return _run(args)
    except experiments.ConfigError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}, sort_keys=True, indent=2), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
