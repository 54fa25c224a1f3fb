"""Fixed-step RK4 integration of ``i dpsi/dt = H(t) psi`` (hbar = 1).

The integrator works for non-Hermitian ``H``.  Gain makes the norm grow
exponentially, so by default the state is rescaled to unit norm after
every step; all reported probabilities are relative populations and do
not depend on that rescaling.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateStateError,
    IllConditionedBasis,
    IntegrationOverflow,
    RangeError,
    StepRefinementFailure,
)
from .spectral import eig, max_overlap

log = logging.getLogger(__name__)

# amplitudes above this are rescaled even when renormalize=False
OVERFLOW_GUARD = 1e150


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    recorded_norm: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise RangeError("psi0", "amplitudes must be finite")
        n = float(np.linalg.norm(a))
        if n == 0.0:
            raise DegenerateStateError("state vector has zero norm")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "recorded_norm", n)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def normalized(self) -> StateVector:
        return StateVector(self.amplitudes / self.recorded_norm)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


def as_state(psi) -> StateVector:
    return psi if isinstance(psi, StateVector) else StateVector(psi)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-2
    renormalize: bool = True
    record_stride: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise RangeError("integrator.dt", f"must be > 0, got {self.dt}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise RangeError("integrator.record_stride", f"must be an integer >= 1, got {self.record_stride}")


@dataclass(eq=False)
class Trajectory:
    """Recorded time series.

    ``states`` has one row per recorded time.  ``norms`` holds the norm
    before any rescaling at that step (for renormalised runs this is the
    one-step growth factor).  ``events`` lists overflow-guard interventions.
    """

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    relative_populations: np.ndarray
    eigen_weights: np.ndarray | None = None
    events: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> StateVector:
        return StateVector(self.states[-1])


def relative_populations(psi) -> np.ndarray:
    a = np.asarray(psi.amplitudes if isinstance(psi, StateVector) else psi)
    w = np.abs(a) ** 2
    total = w.sum()
    if not total > 0:
        raise DegenerateStateError("zero total weight")
    return w / total


def eigenbasis_weights(psi, h, max_overlap_allowed: float = 1 - 1e-6) -> np.ndarray:
    """Relative weights of ``psi`` on the (possibly non-orthogonal) eigenvectors of ``h``.

    Solves ``psi = sum_i c_i v_i`` and returns ``|c_i|^2 / sum_j |c_j|^2`` in
    the eigenvalue order of :func:`nhcollapse.spectral.eig`.
    """
    es = eig(h)
    ov = max_overlap(es)
    if ov >= max_overlap_allowed:
        raise IllConditionedBasis(ov)
    return weights_in_basis(psi, es.vectors)


def weights_in_basis(psi, vectors) -> np.ndarray:
    a = np.asarray(psi.amplitudes if isinstance(psi, StateVector) else psi)
    c = np.linalg.solve(vectors, a)
    w = np.abs(c) ** 2
    return w / w.sum()


def _rk4(h, y, t, dt):
    # works for a state vector or for a matrix whose columns are states
    k1 = -1j * (h(t) @ y)
    hm = h(t + 0.5 * dt)
    k2 = -1j * (hm @ (y + 0.5 * dt * k1))
    k3 = -1j * (hm @ (y + 0.5 * dt * k2))
    k4 = -1j * (h(t + dt) @ (y + dt * k3))
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step(family, psi, t: float, dt: float) -> StateVector:
    """One classical Runge-Kutta step of ``dpsi/dt = -i H(t) psi``."""
    if not dt > 0:
        raise RangeError("dt", f"must be > 0, got {dt}")
    y = _rk4(family, np.asarray(as_state(psi).amplitudes), t, dt)
    if not np.all(np.isfinite(y)):
        raise IntegrationOverflow(t + dt)
    return StateVector(y)


def step_count(t0: float, t1: float, dt: float) -> int:
    if not t1 > t0:
        raise RangeError("t1", f"must exceed t0 ({t0}), got {t1}")
    n = round((t1 - t0) / dt)
    if n < 1 or abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, t1 - t0):
        raise RangeError("integrator.dt", f"(t1 - t0)/dt = {(t1 - t0) / dt} is not an integer")
    return n


def evolve(family, psi0, t0: float, t1: float, cfg: IntegratorConfig, track_eigenweights: bool = False) -> Trajectory:
    """Integrate from ``t0`` to ``t1`` with fixed step ``cfg.dt``.

    With ``track_eigenweights`` the weights on the instantaneous eigenvectors
    of ``family(t)`` are recorded too (NaN where the basis is near-defective).
    """
    psi0 = as_state(psi0)
    n = step_count(t0, t1, cfg.dt)
    dt = (t1 - t0) / n
    stride = int(cfg.record_stride)

    y = np.array(psi0.amplitudes)
    times, states, norms = [t0], [y.copy()], [psi0.recorded_norm]
    events: list[str] = []
    for k in range(n):
        t = t0 + k * dt
        y = _rk4(family, y, t, dt)
        t_new = t0 + (k + 1) * dt
        big = np.max(np.abs(y))
        if not np.isfinite(big):
            raise IntegrationOverflow(t_new)
        nrm = float(np.linalg.norm(y))
        if cfg.renormalize:
            y /= nrm
        elif big > OVERFLOW_GUARD:
            y /= nrm
            events.append(f"overflow guard: rescaled by {nrm:.6e} at t={t_new:.17g}")
            log.warning("overflow guard triggered at t=%g", t_new)
        if (k + 1) % stride == 0 or k == n - 1:
            times.append(t_new)
            states.append(y.copy())
            norms.append(nrm)

    states_arr = np.array(states)
    pops = np.abs(states_arr) ** 2
    pops /= pops.sum(axis=1, keepdims=True)
    weights = None
    if track_eigenweights:
        weights = np.full(pops.shape, np.nan)
        for i, (t, s) in enumerate(zip(times, states_arr)):
            try:
                weights[i] = eigenbasis_weights(s, family(t))
            except IllConditionedBasis:
                pass
    return Trajectory(np.array(times), states_arr, np.array(norms), pops, weights, events)


def propagator(family, t0: float, t1: float, dt: float, dim: int | None = None) -> np.ndarray:
    """Evolution operator over ``[t0, t1]`` up to an overall positive scale.

    Columns are evolved together and rescaled by one common factor per step,
    so ``U @ psi0`` is proportional to the state :func:`evolve` produces.
    """
    dim = dim or family.dim
    n = step_count(t0, t1, dt)
    dt = (t1 - t0) / n
    u = np.eye(dim, dtype=complex)
    for k in range(n):
        u = _rk4(family, u, t0 + k * dt, dt)
        s = np.linalg.norm(u)
        if not np.isfinite(s):
            raise IntegrationOverflow(t0 + (k + 1) * dt)
        u /= s
    return u


def convergence_run(
    family,
    psi0,
    t0: float,
    t1: float,
    cfg: IntegratorConfig,
    tol: float = 1e-8,
    max_halvings: int = 12,
    track_eigenweights: bool = False,
) -> tuple[Trajectory, float]:
    """Halve ``dt`` until runs at ``dt`` and ``dt/2`` agree to ``tol``.

    Agreement is measured on the normalised final states.  Returns the
    finer of the two agreeing runs and its step.
    """
    coarse = evolve(family, psi0, t0, t1, cfg, track_eigenweights)
    dt = cfg.dt
    for _ in range(max_halvings):
        dt /= 2
        fine = evolve(family, psi0, t0, t1, replace(cfg, dt=dt, record_stride=cfg.record_stride * 2), track_eigenweights)
        a = coarse.states[-1] / np.linalg.norm(coarse.states[-1])
        b = fine.states[-1] / np.linalg.norm(fine.states[-1])
        diff = float(np.max(np.abs(a - b)))
        log.debug("dt=%g diff=%.3e", dt, diff)
        if diff < tol:
            return fine, dt
        coarse = fine
    raise StepRefinementFailure(f"no convergence to {tol} after {max_halvings} halvings (last diff {diff:.3e})")
