"""
Report Files
CSV tables and JSON reports, every float written with 12 significant digits
"""

import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

SIGNIFICANT_DIGITS = 12


def fmt(x: Any) -> str:
    """Table cell text: 12 significant digits for floats, lowercase booleans"""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIGNIFICANT_DIGITS}g}"
    if isinstance(x, Enum):
        return str(x.value)
    if x is None:
        return ""
    return str(x)


def clean(obj: Any) -> Any:
    """JSON-ready copy with floats rounded to 12 significant digits"""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])
    return path


def write_report(path: Union[str, Path], report: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(clean(report), indent=2) + "\n")
    return path


STATE_HEADER = ("node", "edge", "s", "re", "im")
SWEEP_HEADER = ("mu", "E_ground", "E_constant", "is_constant", "gap", "iterations")
BRANCH_HEADER = ("arclength", "mu", "lambda", "dist_inf", "E")
STUDY_HEADER = ("ell", "lambda2", "mu1", "bound_pi_half_ok", "bound_pi_ok")
TRACE_HEADER = ("t", "mass", "energy", "d_H1")
EIGEN_HEADER = ("index", "eigenvalue", "residual")
STABILITY_HEADER = ("mu", "mu1", "min_tangent_eig", "n_negative_L1", "n_negative_H", "verdict")
