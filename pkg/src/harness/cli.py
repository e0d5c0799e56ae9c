"""Command line: run, sweep, growth, audit, signatures"""

from __future__ import annotations
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from config import LOG_LEVEL, OUTPUT_DIR, REPLAY_MEAN_INTERVAL
from devsim.models import TraceError
from harness.audit import audit, write_audit
from harness.discovery import signature_discovery_report, write_discovery
from harness.growth import chain_growth_report
from harness.io import load_experiment_config, write_table
from harness.runner import run_repetitions
from harness.sweep import breaking_point_sweep, sweep_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _fractions(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid fraction list: {text!r}")


def _labels(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sereniot", description="Collaborative IoT whitelisting simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Run an experiment for every configured seed")
    r.add_argument("--config", type=Path, required=True, help="KEY=VALUE experiment file")
    r.add_argument("--seed", type=int, help="Run only this seed")
    r.add_argument("--out", type=Path, help="Output directory")

    s = sub.add_parser("sweep", help="EXFIL breaking-point sweep")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--fractions", type=_fractions, default=[0.2, 0.4, 0.45, 0.55, 0.6, 0.8])
    s.add_argument("--repetitions", type=int, default=5)
    s.add_argument("--workers", type=int, default=None, help="Parallel worker processes")
    s.add_argument("--out", type=Path)

    g = sub.add_parser("growth", help="Chain growth table of an export")
    g.add_argument("--export", type=Path, required=True, help="Export directory of a run")
    g.add_argument("--bucket", type=float, default=3600.0, help="Bucket width in simulated seconds")
    g.add_argument("--device-types", type=int, default=None, help="Device types for the size projection")
    g.add_argument("--out", type=Path)

    a = sub.add_parser("audit", help="Rejected forks and signature timelines of an export")
    a.add_argument("--export", type=Path, required=True)
    a.add_argument("--events", type=Path, default=None, help="events.jsonl (defaults to the run directory)")
    a.add_argument("--out", type=Path)

    d = sub.add_parser("signatures", help="Signature discovery curves of device traces")
    d.add_argument("--devices", type=_labels, default=None, help="Comma-separated labels or trace files (default: all bundled)")
    d.add_argument("--duration", type=float, default=3600.0, help="Replay window in simulated seconds")
    d.add_argument("--bucket", type=float, default=60.0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--mean-interval", type=float, default=REPLAY_MEAN_INTERVAL, help="Mean seconds between packets")
    d.add_argument("--out", type=Path)
    return p


def _cmd_run(args) -> int:
    config = load_experiment_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seeds": [args.seed]})
    for report in run_repetitions(config, output_dir=args.out):
        admitted = report.attack.admitted if report.attack else False
        converged = sum(1 for c in report.chains if c.converged)
        print(
            f"{report.name} seed {report.seed}: {len(report.chains)} chains "
            f"({converged} converged), control height {report.control.height}, attack admitted: {admitted}"
        )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_experiment_config(args.config)
    result = breaking_point_sweep(config, args.fractions, args.repetitions, args.workers)
    out = Path(args.out or OUTPUT_DIR) / config.name
    write_table([r.model_dump() for r in result.rows], out / "sweep.csv")
    (out / "sweep.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    print(sweep_table(result).to_string(index=False))
    print(f"monotone: {result.monotone}, midpoint: {result.midpoint}")
    return EXIT_OK


def _cmd_growth(args) -> int:
    report = chain_growth_report(args.export, bucket=args.bucket, device_types=args.device_types)
    out = Path(args.out or args.export.parent)
    write_table([r.model_dump() for r in report.rows], out / "growth.csv")
    (out / "growth.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(json.dumps(report.model_dump(exclude={"rows"}), indent=2))
    return EXIT_OK


def _cmd_audit(args) -> int:
    report = audit(args.export, args.events)
    out = Path(args.out or args.export.parent / "audit")
    write_audit(report, out)
    print(
        f"{len(report.rejected_forks)} rejected forks, {report.stale_forks} stale forks, "
        f"{len(report.signatures)} signatures, {len(report.errors)} errors"
    )
    for e in report.errors:
        print(f"  error: {e}")
    return EXIT_OK


def _cmd_signatures(args) -> int:
    report = signature_discovery_report(args.devices, args.duration, args.bucket, args.seed, args.mean_interval)
    out = Path(args.out or OUTPUT_DIR) / "discovery"
    write_discovery(report, out)
    print(pd.DataFrame([t.model_dump() for t in report.totals]).to_string(index=False))
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "growth": _cmd_growth,
    "audit": _cmd_audit,
    "signatures": _cmd_signatures,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, TraceError, FileNotFoundError, ValueError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_CONFIG
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
