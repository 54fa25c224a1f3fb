"""Parametric two-level Hamiltonian families.

Energies are dimensionless multiples of the hopping scale ``gamma0`` and
times are in units of hbar/gamma0.  Three families are provided:

* :class:`PulsedGainLoss` -- ``gamma0*sx + lambda(t) * diag(i*Gamma, -i*Gamma)``
  with a Gaussian switching function ``lambda(t)``;
* :class:`EPLoop` -- ``gamma0*sx + z(t)*sz`` where ``z(t)`` runs around a
  closed ellipse in the complex plane; the family has exceptional points
  at ``z = +-i*gamma0``;
* :class:`StaticMatrix` -- a constant matrix of any size up to 8.

A family is a callable ``t -> ndarray`` with a ``dim`` attribute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Union

import numpy as np

from .errors import DomainError, RangeError

MAX_DIM = 8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a square complex matrix of size 2..8."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise RangeError(name, f"expected a square matrix, got shape {m.shape}")
    if not 2 <= m.shape[0] <= MAX_DIM:
        raise RangeError(name, f"dimension must be in [2, {MAX_DIM}], got {m.shape[0]}")
    if not np.all(np.isfinite(m)):
        raise RangeError(name, "entries must be finite")
    return m


def is_hermitian(h: np.ndarray, tol: float = 1e-12) -> bool:
    h = np.asarray(h)
    return bool(np.max(np.abs(h - h.conj().T)) <= tol)


class Normalization(str, Enum):
    UNIT_AREA = "unit_area"
    UNIT_PEAK = "unit_peak"


class Orientation(str, Enum):
    CLOCKWISE = "cw"
    ANTICLOCKWISE = "ccw"

    @property
    def sign(self) -> int:
        return -1 if self is Orientation.CLOCKWISE else 1

    def reversed(self) -> Orientation:
        if self is Orientation.CLOCKWISE:
            return Orientation.ANTICLOCKWISE
        return Orientation.CLOCKWISE


@dataclass(frozen=True)
class PulseShape:
    center: float = 5.0
    sigma: float = 1.0
    normalization: Normalization = Normalization.UNIT_AREA
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise RangeError("pulse.sigma", f"must be > 0, got {self.sigma}")
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise RangeError("pulse.amplitude", f"must be >= 0, got {self.amplitude}")
        if not math.isfinite(self.center):
            raise RangeError("pulse.center", "must be finite")


def gaussian_pulse(pulse: PulseShape, t: float) -> float:
    """Switching function lambda(t) of the gain/loss pulse."""
    x = (t - pulse.center) / pulse.sigma
    g = math.exp(-0.5 * x * x)
    if pulse.normalization is Normalization.UNIT_AREA:
        g /= pulse.sigma * math.sqrt(2.0 * math.pi)
    return pulse.amplitude * g


@dataclass(frozen=True)
class GainLossModel:
    gamma0: float = 1.0
    Gamma: float = 15.0
    pulse: PulseShape = field(default_factory=PulseShape)

    def __post_init__(self):
        if not (math.isfinite(self.gamma0) and self.gamma0 > 0):
            raise RangeError("gamma0", f"must be > 0, got {self.gamma0}")
        if not math.isfinite(self.Gamma):
            raise RangeError("Gamma", "must be finite")

    @property
    def window(self) -> tuple[float, float]:
        """Interval outside which the pulse is below exp(-32) of its peak."""
        return (self.pulse.center - 8 * self.pulse.sigma, self.pulse.center + 8 * self.pulse.sigma)


def gain_loss_hamiltonian(model: GainLossModel, t: float) -> np.ndarray:
    # Gamma >= 0 is the documented physical range; a negative value is
    # accepted so the gain and loss can be exchanged.
    g = 1j * model.Gamma * gaussian_pulse(model.pulse, t)
    return np.array([[g, model.gamma0], [model.gamma0, -g]], dtype=complex)


def z_hamiltonian(gamma0: float, z: complex) -> np.ndarray:
    """``gamma0*sx + z*sz`` for a complex sz coefficient ``z``."""
    return np.array([[z, gamma0], [gamma0, -z]], dtype=complex)


@dataclass(frozen=True)
class LoopSpec:
    """Closed ellipse ``z(t)`` in the complex plane of the sz coefficient.

    The ellipse has semi-axes ``radius_major`` (along the direction
    ``exp(i*start_phase)``) and ``radius_minor``, is centred on ``center`` and
    is traversed once in ``period``.  The start point is
    ``center + radius_major*exp(i*start_phase)``.
    """

    center: complex = 1j
    radius_major: float = 0.5
    radius_minor: float = 0.5
    orientation: Orientation = Orientation.ANTICLOCKWISE
    # start below the centre, on the side facing the Hermitian axis
    start_phase: float = -math.pi / 2
    period: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "center", complex(self.center))
        if not (self.radius_minor > 0):
            raise RangeError("loop.radius_minor", f"must be > 0, got {self.radius_minor}")
        if not (self.radius_major >= self.radius_minor):
            raise RangeError(
                "loop.radius_major",
                f"must be >= radius_minor ({self.radius_minor}), got {self.radius_major}",
            )
        if not (math.isfinite(self.period) and self.period > 0):
            raise RangeError("loop.period", f"must be > 0, got {self.period}")

    def with_orientation(self, orientation: Orientation) -> LoopSpec:
        return LoopSpec(
            self.center, self.radius_major, self.radius_minor,
            Orientation(orientation), self.start_phase, self.period,
        )

    def point_at_angle(self, theta):
        """Contour point at parametric angle ``theta`` (array friendly)."""
        w = self.radius_major * np.cos(theta) + 1j * self.radius_minor * np.sin(theta)
        return self.center + np.exp(1j * self.start_phase) * w

    def sample(self, n: int, windings: int = 1) -> np.ndarray:
        """``n`` points along ``windings`` traversals, both ends included."""
        theta = self.orientation.sign * np.linspace(0.0, 2 * np.pi * windings, n)
        return self.point_at_angle(theta)


# Absolute slack for t at the ends of [0, T]; RK4 stage times can overshoot
# by a few ulps.
_T_SLACK = 1e-9


def loop_point(loop: LoopSpec, t: float) -> complex:
    if not (-_T_SLACK * loop.period <= t <= loop.period * (1 + _T_SLACK)):
        raise DomainError(f"t={t} outside loop domain [0, {loop.period}]")
    theta = loop.orientation.sign * 2.0 * math.pi * t / loop.period
    return complex(loop.point_at_angle(theta))


def ep_loop_hamiltonian(gamma0: float, loop: LoopSpec, t: float) -> np.ndarray:
    return z_hamiltonian(gamma0, loop_point(loop, t))


def exceptional_points(gamma0: float) -> tuple[complex, complex]:
    return (1j * gamma0, -1j * gamma0)


# -- families --------------------------------------------------------------


class HamiltonianFamily(Protocol):
    dim: int

    def __call__(self, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class PulsedGainLoss:
    model: GainLossModel
    dim: int = 2

    def __call__(self, t: float) -> np.ndarray:
        return gain_loss_hamiltonian(self.model, t)


@dataclass(frozen=True)
class EPLoop:
    """Loop family; ``repeats`` > 1 traverses the same contour again."""

    gamma0: float
    loop: LoopSpec
    repeats: int = 1
    dim: int = 2

    def __post_init__(self):
        if not (self.gamma0 > 0):
            raise RangeError("gamma0", f"must be > 0, got {self.gamma0}")
        if self.repeats < 1:
            raise RangeError("repeats", "must be >= 1")

    @property
    def duration(self) -> float:
        return self.repeats * self.loop.period

    def z(self, t: float) -> complex:
        T = self.loop.period
        if self.repeats > 1 and t > T:
            if t > self.duration * (1 + _T_SLACK):
                raise DomainError(f"t={t} outside loop domain [0, {self.duration}]")
            t = min(t - T * min(math.floor(t / T), self.repeats - 1), T)
        return loop_point(self.loop, t)

    def __call__(self, t: float) -> np.ndarray:
        return z_hamiltonian(self.gamma0, self.z(t))


@dataclass(frozen=True, eq=False)
class StaticMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.matrix


Family = Union[PulsedGainLoss, EPLoop, StaticMatrix]


def closure_check(family: HamiltonianFamily, T: float, tol: float, t0: float = 0.0) -> bool:
    """True when the family returns to its starting matrix at ``t0 + T``."""
    h0 = np.asarray(family(t0))
    h1 = np.asarray(family(t0 + T))
    return bool(np.max(np.abs(h1 - h0)) <= tol * np.max(np.abs(h0)))
