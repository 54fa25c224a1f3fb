"""Command line front end.

    nhcollapse <experiment> [--config FILE] [--out DIR] [--seed N] [--set key=value ...]

Each run writes its CSV files and ``summary.json`` into the output
directory, plus ``timing.json`` with the wall time (kept apart so that
repeated runs produce byte-identical summaries).  Exit status: 0 success,
2 configuration error, 3 numerical failure, 4 calibration failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .collapse import calibrate_orientation_map, classify, pulse_collapse_experiment, run_ensemble, run_loop
from .config import EXPERIMENTS, ExperimentConfig, parse_config
from .errors import CalibrationFailure, ConfigError, NHCollapseError
from .ham_models import EPLoop, closure_check
from .io import (
    calibration_dict,
    ensemble_dict,
    ep_dict,
    summary_document,
    write_branch_csv,
    write_json,
    write_surface_csv,
    write_trajectory_csv,
    write_trials_csv,
)
from .spectral import locate_ep, sample_surface, track_branches, winding_number

log = logging.getLogger("nhcollapse")


def _pulse(cfg: ExperimentConfig, out: Path) -> dict:
    t0, t1 = cfg.window()
    res = pulse_collapse_experiment(cfg.gain_loss_model(), cfg.psi0(), t0, t1, cfg.integrator())
    write_trajectory_csv(res.trajectory, out / "trajectory.csv", labels=("up", "down"))
    return {
        "favored_index": res.favored_index,
        "max_dominance": res.max_dominance,
        "t_max_dominance": res.t_max_dominance,
        "revival_time": res.revival_time,
    }


def _encircle(cfg: ExperimentConfig, out: Path) -> dict:
    setup = cfg.setup()
    fam = EPLoop(setup.gamma0, setup.loop)
    traj = run_loop(setup, setup.loop.orientation, track_eigenweights=True)
    write_trajectory_csv(traj, out / "trajectory.csv")
    outcome, dom = classify(traj.states[-1], setup.basis())
    return {
        "orientation": setup.loop.orientation,
        "outcome": outcome,
        "dominance": dom,
        "collapsed": dom >= setup.dominance_threshold,
        "closed": closure_check(fam, setup.loop.period, 1e-10),
        "loop_dt": setup.loop_dt,
    }


def _calibrate(cfg: ExperimentConfig, out: Path) -> dict:
    return {"calibration": calibration_dict(calibrate_orientation_map(cfg.setup()))}


def _born_stats(cfg: ExperimentConfig, out: Path) -> dict:
    setup = cfg.setup()
    calib = calibrate_orientation_map(setup)
    stats = run_ensemble(setup, calib, cfg["trials.n_trials"], cfg["trials.base_seed"])
    write_trials_csv(stats, out / "trials.csv")
    return {"calibration": calibration_dict(calib), "ensemble": ensemble_dict(stats)}


def _surface(cfg: ExperimentConfig, out: Path) -> dict:
    grid = sample_surface(
        cfg["gamma0"],
        (cfg["surface.re_min"], cfg["surface.re_max"]),
        (cfg["surface.im_min"], cfg["surface.im_max"]),
        cfg["surface.resolution"],
    )
    write_surface_csv(grid, out / "surface.csv")
    gap = grid.gap()
    j, k = np.unravel_index(np.argmin(gap), gap.shape)
    return {
        "rows": 2 * gap.size,
        "min_gap": float(gap[j, k]),
        "min_gap_at": complex(grid.re_axis[k], grid.im_axis[j]),
    }


def _ep_locate(cfg: ExperimentConfig, out: Path) -> dict:
    gamma0 = cfg["gamma0"]
    rep = locate_ep(gamma0, complex(cfg["ep.guess_re"], cfg["ep.guess_im"]))
    loop = cfg.loop()
    path = loop.sample(1025)
    bp = track_branches(gamma0, path)
    write_branch_csv(bp, out / "branches.csv")
    return {
        "ep": ep_dict(rep),
        "loop_winding": winding_number(path, rep.location),
        "loop_swaps_sheets": bp.swapped,
    }


RUNNERS = {
    "pulse-collapse": _pulse,
    "encircle": _encircle,
    "calibrate": _calibrate,
    "born-stats": _born_stats,
    "surface": _surface,
    "ep-locate": _ep_locate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nhcollapse", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", help="output directory (default: output.dir)")
    ap.add_argument("--seed", type=int, help="trials.base_seed")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config value (repeatable, dotted keys)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    updates: dict = {}
    if args.seed is not None:
        updates["trials"] = {"base_seed": args.seed}
    if args.out is not None:
        updates["output"] = {"dir": args.out}
    try:
        cfg = parse_config(args.config, args.overrides, experiment=args.experiment, updates=updates)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code

    out = Path(cfg["output.dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output directory: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    start = time.perf_counter()
    status, code, error, results = "ok", 0, None, {}
    try:
        results = RUNNERS[cfg.experiment](cfg, out)
    except CalibrationFailure as exc:
        status, code, error = "calibration_failure", exc.exit_code, exc
        results = {"calibration": calibration_dict(dominances=exc.dominances)}
    except NHCollapseError as exc:
        status, code, error = "error", exc.exit_code, exc
    except OSError as exc:
        print(f"config error: cannot write output: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    elapsed = time.perf_counter() - start

    write_json(summary_document(cfg.experiment, cfg.to_dict(), results, status, error), out / "summary.json")
    write_json({"elapsed_s": elapsed}, out / "timing.json")
    if error is not None:
        print(f"{status}: {error}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
