"""CSV tables and the JSON run summary.

Floats are written with 17 significant digits so that values read back
from a CSV equal the in-memory doubles exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .collapse import CalibrationMap, EnsembleStats
from .dynamics import Trajectory
from .errors import NHCollapseError
from .spectral import BranchPath, EPReport, SurfaceGrid

SCHEMA_VERSION = "1"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Enum):
        return str(x.value)
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


@dataclass
class CsvTable:
    header: list[str]
    rows: list[Sequence]

    def __post_init__(self):
        for i, r in enumerate(self.rows):
            if len(r) != len(self.header):
                raise ValueError(f"row {i} has {len(r)} fields, header has {len(self.header)}")

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([fmt(x) for x in r])

    @classmethod
    def read(cls, path) -> CsvTable:
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            rows = [[float(x) if _numeric(x) else x for x in row] for row in r]
        return cls(header, rows)

    def column(self, name: str) -> np.ndarray:
        j = self.header.index(name)
        return np.array([r[j] for r in self.rows])


def _numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def trajectory_table(traj: Trajectory, labels: Sequence[str] | None = None) -> CsvTable:
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    dim = traj.states.shape[1]
    labels = list(labels) if labels else [str(i + 1) for i in range(dim)]
    header = ["t"]
    for lab in labels:
        header += [f"re_psi_{lab}", f"im_psi_{lab}"]
    header += ["norm"] + [f"P_{lab}" for lab in labels]
    if traj.eigen_weights is not None:
        header += [f"w_{i + 1}" for i in range(dim)]
    rows = []
    for k in range(len(traj)):
        row: list = [traj.times[k]]
        for a in traj.states[k]:
            row += [a.real, a.imag]
        row.append(traj.norms[k])
        row += list(traj.relative_populations[k])
        if traj.eigen_weights is not None:
            row += list(traj.eigen_weights[k])
        rows.append(row)
    return CsvTable(header, rows)


def write_trajectory_csv(traj: Trajectory, path, labels: Sequence[str] | None = None) -> None:
    """One row per recorded step: t, amplitudes, norm, populations, eigen-weights."""
    trajectory_table(traj, labels).write(path)


def write_surface_csv(grid: SurfaceGrid, path) -> None:
    """Long format: ``re_z, im_z, sheet, re_lambda, im_lambda``; 2 rows per grid point."""
    rows = []
    for j, y in enumerate(grid.im_axis):
        for k, x in enumerate(grid.re_axis):
            for s in range(2):
                lam = grid.sheets[s, j, k]
                rows.append([x, y, s + 1, lam.real, lam.imag])
    CsvTable(["re_z", "im_z", "sheet", "re_lambda", "im_lambda"], rows).write(path)


def write_branch_csv(bp: BranchPath, path) -> None:
    rows = [
        [k, z.real, z.imag, s[0].real, s[0].imag, s[1].real, s[1].imag]
        for k, (z, s) in enumerate(zip(bp.z, bp.sheets))
    ]
    header = ["k", "re_z", "im_z", "re_lambda_1", "im_lambda_1", "re_lambda_2", "im_lambda_2"]
    CsvTable(header, rows).write(path)


def write_trials_csv(stats: EnsembleStats, path) -> None:
    rows = [
        [i, r.trial_seed, r.born_draw, r.orientation, r.outcome, r.dominance, r.collapsed]
        for i, r in enumerate(stats.trials)
    ]
    header = ["trial", "seed", "born_draw", "orientation", "outcome", "dominance", "collapsed"]
    CsvTable(header, rows).write(path)


# -- JSON ------------------------------------------------------------------


def jsonable(obj: Any):
    """Convert numpy scalars/arrays, complex numbers and enums for ``json``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def calibration_dict(calib: CalibrationMap | None = None, dominances: dict | None = None) -> dict:
    doms = calib.dominances if calib is not None else (dominances or {})
    out: dict = {
        "runs": [
            {"orientation": o, "start": j, "outcome": k, "dominance": d}
            for (o, j), (k, d) in sorted(doms.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
        ]
    }
    if calib is not None:
        out.update(
            preferred_state_cw=calib.preferred_state_cw,
            preferred_state_ccw=calib.preferred_state_ccw,
            fidelity_cw=calib.fidelity_cw,
            fidelity_ccw=calib.fidelity_ccw,
        )
    return jsonable(out)


def ensemble_dict(stats: EnsembleStats) -> dict:
    return jsonable(
        {
            "n_trials": stats.n_trials,
            "counts": stats.counts,
            "frequencies": stats.frequencies,
            "born_targets": stats.born_targets,
            "z_scores": stats.z_scores,
            "failed_trials": stats.failed_trials,
            "warning": stats.warning,
        }
    )


def ep_dict(rep: EPReport) -> dict:
    return jsonable(
        {
            "location": rep.location,
            "discriminant_residual": rep.discriminant_residual,
            "vector_overlap": rep.vector_overlap,
            "puiseux_exponent": rep.puiseux_exponent,
            "iterations": rep.iterations,
        }
    )


def summary_document(experiment: str, config: dict, results: dict, status: str = "ok",
                     error: NHCollapseError | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": "nhcollapse",
        "version": __version__,
        "experiment": experiment,
        "status": status,
        "config": config,
        "results": jsonable(results),
    }
    if error is not None:
        doc["error"] = {"type": type(error).__name__, "message": str(error), "exit_code": error.exit_code}
    return doc


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
