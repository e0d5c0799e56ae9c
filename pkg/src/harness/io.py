"""Experiment config files and report writers"""

from __future__ import annotations
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from dotenv import dotenv_values

from harness.models import ExperimentConfig, MetricsReport

logger = logging.getLogger(__name__)

LIST_KEYS = {"devices", "seeds"}
ATTACK_PREFIX = "attack_"


def parse_config_values(values: Dict[str, Optional[str]]) -> dict:
    """KEY=VALUE pairs (case-insensitive) to ExperimentConfig fields"""
    data: dict = {}
    attack: dict = {}
    for key, raw in values.items():
        if raw is None or not str(raw).strip():
            continue
        k = key.strip().lower()
        v = str(raw).strip()
        if k.startswith(ATTACK_PREFIX):
            attack[k[len(ATTACK_PREFIX):]] = v
        elif k in LIST_KEYS:
            data[k] = [s.strip() for s in v.split(",") if s.strip()]
        else:
            data[k] = v
    if attack:
        data["attack"] = attack
    return data


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Parse a dotenv-style experiment file; raises pydantic.ValidationError on bad values"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = ExperimentConfig(**parse_config_values(dotenv_values(path)))
    logger.info(f"Loaded experiment config {cfg.name} from {path}")
    return cfg


def write_table(rows: List[dict], path: Path, columns: Optional[List[str]] = None) -> Path:
    df = pd.DataFrame(rows, columns=columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)
    return path


def write_report(report: MetricsReport, out_dir: Path) -> Dict[str, str]:
    """report.json plus chains.csv, sentinels.csv and growth.csv"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "chains": write_table([c.model_dump() for c in report.chains], out_dir / "chains.csv"),
        "sentinels": write_table([s.model_dump() for s in report.sentinels], out_dir / "sentinels.csv"),
        "growth": write_table([g.model_dump() for g in report.growth], out_dir / "growth.csv"),
    }
    paths = {k: v.name for k, v in files.items()}
    report.artifacts.update(paths)
    (out_dir / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return paths
