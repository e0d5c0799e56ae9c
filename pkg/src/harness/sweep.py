"""Breaking-point sweep over attacker fractions"""

from __future__ import annotations
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit

from devsim.models import AttackKind
from harness.models import AttackConfig, ExperimentConfig, SweepResult, SweepRow
from harness.runner import run_experiment

logger = logging.getLogger(__name__)

MONOTONE_TOLERANCE = 0.2


def _admitted(args: Tuple[dict, int]) -> bool:
    config_data, seed = args
    config = ExperimentConfig.model_validate(config_data)
    report = run_experiment(config, seed=seed, write=False)
    return bool(report.attack and report.attack.admitted)


def sweep_configs(base: ExperimentConfig, fractions: Sequence[float], repetitions: int) -> List[Tuple[float, dict, int]]:
    """(fraction, config, seed) for every run of the sweep"""
    template = base.attack or AttackConfig()
    seeds = list(base.seeds) if len(base.seeds) >= repetitions else [base.seeds[0] + r for r in range(repetitions)]
    jobs = []
    for f in fractions:
        attack = template.model_copy(update={"kind": AttackKind.EXFIL, "fraction": float(f)})
        cfg = base.model_copy(update={"attack": attack, "record_events": False})
        for seed in seeds[:repetitions]:
            jobs.append((float(f), cfg.model_dump(mode="json"), seed))
    return jobs


def is_monotone(probabilities: Sequence[float], tolerance: float = MONOTONE_TOLERANCE) -> bool:
    """Non-decreasing up to repetition noise"""
    return all(b >= a - tolerance for a, b in zip(probabilities, probabilities[1:]))


def _logistic(x, midpoint, slope):
    return 1.0 / (1.0 + np.exp(-slope * (x - midpoint)))


def fit_midpoint(fractions: Sequence[float], probabilities: Sequence[float]) -> Optional[float]:
    """Fraction at which a fitted logistic curve crosses 1/2"""
    x, y = np.asarray(fractions, dtype=float), np.asarray(probabilities, dtype=float)
    if len(x) < 3 or y.min() == y.max():
        return None
    try:
        (midpoint, slope), _ = curve_fit(_logistic, x, y, p0=(0.5, 20.0), maxfev=5000)
    except (RuntimeError, ValueError):
        return None
    if slope <= 0 or not 0.0 <= midpoint <= 1.0:
        return None
    return round(float(midpoint), 4)


def breaking_point_sweep(
    base: ExperimentConfig,
    fractions: Sequence[float],
    repetitions: int,
    workers: Optional[int] = None,
) -> SweepResult:
    """EXFIL admission frequency per attacker fraction"""
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie within [0, 1]")
    fractions = sorted(set(float(f) for f in fractions))
    jobs = sweep_configs(base, fractions, repetitions)
    logger.info(f"Sweep: {len(fractions)} fractions x {repetitions} repetitions = {len(jobs)} runs")
    args = [(cfg, seed) for _, cfg, seed in jobs]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_admitted, args))
    else:
        outcomes = [_admitted(a) for a in args]

    df = pd.DataFrame({"fraction": [f for f, _, _ in jobs], "admitted": outcomes})
    agg = df.groupby("fraction")["admitted"].agg(["count", "sum"]).reset_index()
    rows = [
        SweepRow(
            fraction=float(r.fraction),
            runs=int(r["count"]),
            admitted=int(r["sum"]),
            probability=round(float(r["sum"]) / float(r["count"]), 4),
        )
        for _, r in agg.iterrows()
    ]
    probs = [r.probability for r in rows]
    return SweepResult(
        kind=AttackKind.EXFIL,
        sentinels=base.sentinels,
        repetitions=repetitions,
        rows=rows,
        monotone=is_monotone(probs),
        midpoint=fit_midpoint([r.fraction for r in rows], probs),
    )


def sweep_table(result: SweepResult) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in result.rows])
