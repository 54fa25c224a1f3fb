"""Measurement by loop encirclement.

A measurement of the Hermitian observable ``gamma0*sx`` is modelled as a
slow traversal of a closed loop of ``gamma0*sx + z*sz`` around the
exceptional point at ``+i*gamma0``.  The loop orientation decides which
eigenstate survives.  The orientation itself is drawn with the Born
probability of the state it produces, so ensembles reproduce the usual
measurement statistics.

Outcomes are read in the eigenbasis of the loop's end point ``H(z(0))``.
When the loop starts on the real axis this is the observable itself; for
loops that start off the axis (the default circle of radius 0.5 around
``i`` starts at ``0.5i``) each end-point eigenvector is labelled with the observable
eigenindex it continues to along the straight segment ``s*z(0)``,
``s`` in [0, 1].
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, StateVector, Trajectory, as_state, evolve, propagator, weights_in_basis
from .errors import CalibrationFailure, ContractViolation, RangeError
from .ham_models import (
    SIGMA_X,
    EPLoop,
    GainLossModel,
    LoopSpec,
    Orientation,
    PulsedGainLoss,
    is_hermitian,
    z_hamiltonian,
)
from .spectral import eig2, locate_ep, track_branches, winding_number

log = logging.getLogger(__name__)

WORKERS_ENV = "NHCOLLAPSE_WORKERS"


def observable_basis(h0) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix, eigenvalues in descending order."""
    h0 = np.asarray(h0, dtype=complex)
    if not is_hermitian(h0, 1e-12):
        raise ContractViolation("Born weights need a Hermitian observable")
    vals, vecs = np.linalg.eigh(h0)
    return vals[::-1], vecs[:, ::-1]


def born_probabilities(psi0, h0) -> np.ndarray:
    """``|<E_i|psi0>|^2 / |psi0|^2`` over the eigenbasis of ``h0``."""
    psi0 = as_state(psi0)
    _, vecs = observable_basis(h0)
    p = np.abs(vecs.conj().T @ psi0.amplitudes) ** 2 / psi0.recorded_norm ** 2
    return p / p.sum()


def born_state(h0, p0: float) -> np.ndarray:
    """``sqrt(p0)*E_0 + sqrt(1-p0)*E_1`` for the two leading eigenvectors."""
    if not 0.0 <= p0 <= 1.0:
        raise RangeError("trials.born_target", f"must lie in [0, 1], got {p0}")
    _, vecs = observable_basis(h0)
    return math.sqrt(p0) * vecs[:, 0] + math.sqrt(1.0 - p0) * vecs[:, 1]


def outcome_basis(gamma0: float, z_end: complex, n: int = 257) -> np.ndarray:
    """End-point eigenvectors as columns, ordered like :func:`observable_basis`."""
    if abs(z_end) < 1e-14:
        return observable_basis(gamma0 * SIGMA_X)[1]
    branches = track_branches(gamma0, np.linspace(0.0, 1.0, n) * z_end)
    es = eig2(z_hamiltonian(gamma0, z_end))
    return es.vectors[:, branches.order[-1]]


@dataclass(frozen=True, eq=False)
class MeasurementSetup:
    gamma0: float = 1.0
    loop: LoopSpec = field(default_factory=LoopSpec)
    psi0: StateVector = field(default_factory=lambda: StateVector([1.0, 0.0]))
    dominance_threshold: float = 0.99
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        object.__setattr__(self, "psi0", as_state(self.psi0))
        if self.psi0.dim != 2:
            raise RangeError("psi0", "the loop family is two-level; psi0 needs 2 amplitudes")
        if not 0.5 < self.dominance_threshold <= 1.0:
            raise RangeError("trials.dominance_threshold", f"must lie in (0.5, 1], got {self.dominance_threshold}")
        if not self.gamma0 > 0:
            raise RangeError("gamma0", f"must be > 0, got {self.gamma0}")

    @property
    def observable(self) -> np.ndarray:
        return self.gamma0 * SIGMA_X

    @property
    def loop_dt(self) -> float:
        """Largest step not above ``integrator.dt`` that divides the period."""
        T = self.loop.period
        n = max(1, math.ceil(T / self.integrator.dt - 1e-9))
        return T / n

    def family(self, orientation: Orientation, repeats: int = 1) -> EPLoop:
        return EPLoop(self.gamma0, self.loop.with_orientation(orientation), repeats)

    def basis(self) -> np.ndarray:
        return outcome_basis(self.gamma0, self.loop.point_at_angle(0.0))


def encircled_eps(gamma0: float, loop: LoopSpec, n: int = 2048) -> list[complex]:
    """Exceptional points with nonzero winding number of ``loop``."""
    path = loop.sample(n)
    eps = [locate_ep(gamma0, 0.9j * gamma0).location, locate_ep(gamma0, -0.9j * gamma0).location]
    return [ep for ep in eps if winding_number(path, ep) != 0]


def classify(psi, basis) -> tuple[int, float]:
    w = weights_in_basis(psi, basis)
    k = int(np.argmax(w))
    return k, float(w[k])


def run_loop(setup: MeasurementSetup, orientation: Orientation, psi=None, repeats: int = 1,
             track_eigenweights: bool = False) -> Trajectory:
    fam = setup.family(orientation, repeats)
    cfg = IntegratorConfig(setup.loop_dt, setup.integrator.renormalize, setup.integrator.record_stride)
    return evolve(fam, setup.psi0 if psi is None else psi, 0.0, fam.duration, cfg, track_eigenweights)


@dataclass
class CalibrationMap:
    preferred_state_cw: int
    preferred_state_ccw: int
    fidelity_cw: float
    fidelity_ccw: float
    # (orientation, start index) -> (outcome, dominance)
    dominances: dict = field(default_factory=dict)

    def preferred(self, orientation: Orientation) -> int:
        if Orientation(orientation) is Orientation.CLOCKWISE:
            return self.preferred_state_cw
        return self.preferred_state_ccw


def calibrate_orientation_map(setup: MeasurementSetup) -> CalibrationMap:
    """Measure which observable eigenstate each orientation converts to.

    Both eigenstates of the observable are sent around the loop in both
    directions.  Raises :class:`CalibrationFailure` (carrying all four
    dominances) unless each orientation sends both starts to the same
    state with dominance above threshold and the two orientations differ.
    """
    enclosed = encircled_eps(setup.gamma0, setup.loop)
    if len(enclosed) != 1:
        raise CalibrationFailure(f"loop must encircle exactly one exceptional point, encircles {len(enclosed)}")

    _, starts = observable_basis(setup.observable)
    basis = setup.basis()
    orientations = (Orientation.CLOCKWISE, Orientation.ANTICLOCKWISE)
    doms = {
        (o, j): classify(run_loop(setup, o, starts[:, j]).states[-1], basis)
        for o in orientations
        for j in range(starts.shape[1])
    }
    preferred, fidelity = {}, {}
    for o in orientations:
        outs = {doms[(o, j)][0] for j in range(starts.shape[1])}
        fidelity[o] = min(doms[(o, j)][1] for j in range(starts.shape[1]))
        if len(outs) != 1 or fidelity[o] < setup.dominance_threshold:
            raise CalibrationFailure(
                f"{o.name.lower()} loop does not convert both eigenstates "
                f"(outcomes {sorted(outs)}, min dominance {fidelity[o]:.6f})",
                doms,
            )
        preferred[o] = outs.pop()
    cw, ccw = preferred[Orientation.CLOCKWISE], preferred[Orientation.ANTICLOCKWISE]
    if cw == ccw:
        raise CalibrationFailure("both orientations prefer the same state; no chirality", doms)
    return CalibrationMap(cw, ccw, fidelity[Orientation.CLOCKWISE], fidelity[Orientation.ANTICLOCKWISE], doms)


def sample_orientation(p_assigned_cw: float, u: float) -> Orientation:
    return Orientation.CLOCKWISE if u < p_assigned_cw else Orientation.ANTICLOCKWISE


@dataclass(frozen=True)
class TrialRecord:
    trial_seed: int
    born_draw: float
    orientation: Orientation
    outcome: int
    dominance: float
    collapsed: bool


def trial_seed(base_seed: int, index: int) -> int:
    """Seed of trial ``index``: counter-based child of ``base_seed``."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def run_trial(setup: MeasurementSetup, calib: CalibrationMap, seed: int, propagators=None, basis=None) -> TrialRecord:
    """One measurement: Born-weighted orientation draw, loop, readout.

    ``propagators`` (orientation -> loop evolution operator) and ``basis``
    may be supplied to skip re-integrating the loop; the result is the same
    up to rounding because the evolution is linear.
    """
    u = float(np.random.default_rng(seed).random())
    p = born_probabilities(setup.psi0, setup.observable)
    o = sample_orientation(float(p[calib.preferred_state_cw]), u)
    if propagators is not None:
        psi_t = propagators[o] @ setup.psi0.amplitudes
    else:
        psi_t = run_loop(setup, o).states[-1]
    if basis is None:
        basis = setup.basis()
    outcome, dom = classify(psi_t, basis)
    return TrialRecord(seed, u, o, outcome, dom, dom >= setup.dominance_threshold)


@dataclass
class EnsembleStats:
    n_trials: int
    counts: np.ndarray
    frequencies: np.ndarray
    born_targets: np.ndarray
    z_scores: np.ndarray
    failed_trials: int
    warning: str | None = None
    trials: list[TrialRecord] = field(default_factory=list, repr=False)


def _z_scores(freq, targets, n):
    z = np.zeros_like(targets)
    for i, (f, p) in enumerate(zip(freq, targets)):
        if n == 0:
            z[i] = np.nan
        elif 0.0 < p < 1.0:
            z[i] = (f - p) / math.sqrt(p * (1 - p) / n)
        else:
            z[i] = 0.0 if abs(f - p) < 1e-15 else math.inf
    return z


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def loop_propagators(setup: MeasurementSetup) -> dict:
    return {
        o: propagator(setup.family(o), 0.0, setup.loop.period, setup.loop_dt)
        for o in (Orientation.CLOCKWISE, Orientation.ANTICLOCKWISE)
    }


def run_ensemble(
    setup: MeasurementSetup,
    calib: CalibrationMap,
    n_trials: int,
    base_seed: int,
    workers: int | None = None,
) -> EnsembleStats:
    """Independent trials aggregated in trial-index order.

    The loop is integrated once per orientation; each trial applies the
    resulting evolution operator to ``psi0``.
    """
    if n_trials < 1:
        raise RangeError("trials.n_trials", f"must be >= 1, got {n_trials}")
    props = loop_propagators(setup)
    basis = setup.basis()

    def chunk(rng_):
        return [run_trial(setup, calib, trial_seed(base_seed, i), props, basis) for i in rng_]

    workers = workers or default_workers()
    if workers > 1 and n_trials > 256:
        bounds = np.linspace(0, n_trials, workers + 1).astype(int)
        ranges = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(workers) as ex:
            records = [r for part in ex.map(chunk, ranges) for r in part]
    else:
        records = chunk(range(n_trials))

    dim = setup.psi0.dim
    counts = np.zeros(dim, dtype=int)
    failed = 0
    for r in records:
        if r.collapsed:
            counts[r.outcome] += 1
        else:
            failed += 1
    n_ok = n_trials - failed
    freq = counts / n_ok if n_ok else np.full(dim, np.nan)
    targets = born_probabilities(setup.psi0, setup.observable)
    warning = None
    if failed > 0.01 * n_trials:
        warning = f"{failed} of {n_trials} trials did not collapse"
        log.warning(warning)
    return EnsembleStats(n_trials, counts, freq, targets, _z_scores(freq, targets, n_ok), failed, warning, records)


# -- pulsed gain/loss ------------------------------------------------------


@dataclass(eq=False)
class PulseCollapseResult:
    trajectory: Trajectory
    favored_index: int
    max_dominance: float
    t_max_dominance: float
    revival_time: float | None


def pulse_collapse_experiment(
    model: GainLossModel,
    psi0,
    t0: float = 0.0,
    t1: float = 10.0,
    cfg: IntegratorConfig | None = None,
) -> PulseCollapseResult:
    """Evolve under the Gaussian gain/loss pulse and summarise the collapse.

    The favoured component is the one with gain (spin up for ``Gamma >= 0``).
    Its largest relative population is searched in
    ``[center, center + 3*sigma]``; the revival time is the first recorded
    time after that window where every population lies in (0.05, 0.95).
    """
    cfg = cfg or IntegratorConfig(dt=1e-3)
    traj = evolve(PulsedGainLoss(model), psi0, t0, t1, cfg)
    fav = 0 if model.Gamma >= 0 else 1
    lo = model.pulse.center
    hi = model.pulse.center + 3 * model.pulse.sigma
    win = (traj.times >= lo) & (traj.times <= hi)
    if win.any():
        idx = np.flatnonzero(win)[np.argmax(traj.relative_populations[win, fav])]
        best, t_best = float(traj.relative_populations[idx, fav]), float(traj.times[idx])
    else:
        best, t_best = float("nan"), float("nan")
    after = traj.times > hi
    mixed = np.all((traj.relative_populations > 0.05) & (traj.relative_populations < 0.95), axis=1)
    hits = np.flatnonzero(after & mixed)
    revival = float(traj.times[hits[0]]) if len(hits) else None
    return PulseCollapseResult(traj, fav, best, t_best, revival)
