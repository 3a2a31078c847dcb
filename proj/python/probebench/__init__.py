"""Python bindings for the probebench scoring engine."""

import json
import os

from ._probebench import (
    Error,
    EvalConfig,
    ProbeKind,
    TaskQuality,
    TaskWeights,
    classification_metrics,
    final_ranking,
    load_config,
    mae,
    mse,
    parse_config,
    quality_score,
    r_squared,
    rank_values,
    roc_auc,
    run_cli,
    task_weights,
)
from . import _probebench

__all__ = [
    "Error",
    "EvalConfig",
    "ProbeKind",
    "TaskQuality",
    "TaskWeights",
    "classification_metrics",
    "evaluate_submission",
    "final_ranking",
    "leaderboard",
    "load_config",
    "mae",
    "mse",
    "parse_config",
    "quality_score",
    "r_squared",
    "rank_trajectory",
    "rank_values",
    "roc_auc",
    "run_cli",
    "task_weights",
]


def evaluate_submission(submission, annotations, output_dir, config, method, phase, workers=0):
    """Score one submission file; returns the stored record and output paths."""
    out = _probebench._evaluate(
        os.fspath(submission), os.fspath(annotations), os.fspath(output_dir), config, method, phase, workers
    )
    return {
        "record": json.loads(out["record"]),
        "experiment_dir": out["experiment_dir"],
        "leaderboard": out["leaderboard"],
    }


def leaderboard(output_dir, phase, weighted=True, ghost=False, epsilon=0.02):
    """Leaderboard of `phase` rebuilt from the scoring database in output_dir."""
    return json.loads(_probebench._leaderboard(os.fspath(output_dir), phase, weighted, ghost, epsilon))


def rank_trajectory(output_dir, phase, weighted=True, ghost=False, epsilon=0.02):
    """Ranks of every method after each submission of `phase`, in order."""
    return json.loads(_probebench._trajectory(os.fspath(output_dir), phase, weighted, ghost, epsilon))
