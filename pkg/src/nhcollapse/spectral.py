"""Eigenstructure of small non-Hermitian matrices.

Closed-form 2x2 diagonalisation, a LAPACK-backed general solver, location
of the exceptional points of ``gamma0*sx + z*sz`` and continuation of the
two eigenvalue sheets along paths and over grids in the complex z plane.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, RefinementNeeded, RootFindFailure, SolverFailure
from .ham_models import as_matrix, z_hamiltonian

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs; ``vectors[:, k]`` belongs to ``values[k]``.

    For a defective input (exact coalescence) the single eigendirection is
    repeated and ``defective`` is set.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    defective: bool = False

    @property
    def dim(self) -> int:
        return len(self.values)


def _residuals(h, values, vectors):
    return np.linalg.norm(h @ vectors - vectors * values, axis=0)


def _eigvec2(h, lam):
    a, b = h[0]
    c, d = h[1]
    # two candidate null vectors of (H - lam); keep the larger one
    u = np.array([b, lam - a])
    w = np.array([lam - d, c])
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    v, n = (u, nu) if nu >= nw else (w, nw)
    if n == 0.0:
        return None
    return v / n


def eig2(h) -> EigenSystem:
    """Closed-form eigensystem of a 2x2 matrix.

    Values are ``tr/2 + s`` and ``tr/2 - s`` with ``s`` the principal square
    root of ``(tr/2)**2 - det``, evaluated as ``(a-d)**2/4 + b*c``.
    """
    h = as_matrix(h, "H")
    if h.shape != (2, 2):
        raise RangeError("H", f"eig2 needs a 2x2 matrix, got {h.shape}")
    half_tr = 0.5 * (h[0, 0] + h[1, 1])
    disc = 0.25 * (h[0, 0] - h[1, 1]) ** 2 + h[0, 1] * h[1, 0]
    s = cmath.sqrt(disc)
    values = np.array([half_tr + s, half_tr - s])

    if s == 0:
        v = _eigvec2(h, half_tr)
        if v is None:
            # scalar matrix: every vector is an eigenvector
            vecs = np.eye(2, dtype=complex)
            return EigenSystem(values, vecs, _residuals(h, values, vecs), False)
        vecs = np.column_stack([v, v])
        return EigenSystem(values, vecs, _residuals(h, values, vecs), True)

    vecs = np.column_stack([_eigvec2(h, values[0]), _eigvec2(h, values[1])])
    return EigenSystem(values, vecs, _residuals(h, values, vecs), False)


def eig_general(h) -> EigenSystem:
    """Dense eigensolver for 2 <= dim <= 8 (LAPACK ``geev``)."""
    h = as_matrix(h, "H")
    try:
        values, vecs = np.linalg.eig(h)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"eigensolver did not converge: {exc}", float("nan")) from exc
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    res = _residuals(h, values, vecs)
    bound = 1e-8 * max(1.0, np.linalg.norm(h, 2))
    if np.max(res) >= bound:
        raise SolverFailure("eigenpair residual above contract", float(np.max(res)))
    return EigenSystem(values, vecs, res, False)


def eig(h) -> EigenSystem:
    h = np.asarray(h)
    return eig2(h) if h.shape == (2, 2) else eig_general(h)


def defectiveness_measure(h) -> float:
    """``|<v1|v2>|`` of the normalised eigenvectors; 1 at an exceptional point."""
    es = eig2(h)
    if es.defective:
        return 1.0
    v1, v2 = es.vectors.T
    return float(min(1.0, abs(np.vdot(v1, v2))))


def max_overlap(es: EigenSystem) -> float:
    """Largest pairwise eigenvector overlap (any dimension)."""
    if es.defective:
        return 1.0
    g = np.abs(es.vectors.conj().T @ es.vectors)
    np.fill_diagonal(g, 0.0)
    return float(g.max())


# -- exceptional points of gamma0*sx + z*sz ---------------------------------


def family_discriminant(gamma0: float, z):
    return gamma0 ** 2 + np.square(z)


def family_eigenvalues(gamma0: float, z):
    """Principal-branch pair ``(+sqrt(gamma0^2+z^2), -sqrt(...))``; vectorised."""
    r = np.sqrt(np.asarray(family_discriminant(gamma0, z), dtype=complex))
    return np.stack([r, -r])


@dataclass(frozen=True)
class EPReport:
    location: complex
    discriminant_residual: float
    vector_overlap: float
    puiseux_exponent: float
    iterations: int = 0


def puiseux_exponent(gamma0: float, z_ep: complex, radii=None, direction: complex = 1.0) -> float:
    """Slope of log|lambda1 - lambda2| against log|z - z_ep|."""
    if radii is None:
        radii = np.logspace(-4, -1, 13)
    gaps = []
    for r in radii:
        vals = eig2(z_hamiltonian(gamma0, z_ep + r * direction)).values
        gaps.append(abs(vals[0] - vals[1]))
    slope, _ = np.polyfit(np.log(radii), np.log(gaps), 1)
    return float(slope)


def locate_ep(
    gamma0: float,
    initial_guess: complex,
    tol: float = 1e-10,
    max_iter: int = 100,
    probe_distance: float = 1e-6,
) -> EPReport:
    """Newton iteration on the discriminant ``gamma0^2 + z^2`` of the loop family."""
    if not gamma0 > 0:
        raise RangeError("gamma0", f"must be > 0, got {gamma0}")
    z = complex(initial_guess)
    for it in range(1, max_iter + 1):
        d = gamma0 ** 2 + z * z
        dd = 2 * z
        if dd == 0:
            # stationary point of D; nudge off the real axis
            z += 1e-3j * gamma0
            continue
        step = d / dd
        z -= step
        if abs(gamma0 ** 2 + z * z) < tol and abs(step) < 1e-8 * max(1.0, abs(z)):
            break
    else:
        raise RootFindFailure("discriminant Newton iteration did not converge", z)

    residual = abs(gamma0 ** 2 + z * z)
    overlap = defectiveness_measure(z_hamiltonian(gamma0, z + probe_distance))
    p = puiseux_exponent(gamma0, z)
    return EPReport(z, residual, overlap, p, it)


# -- branch continuation ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class BranchPath:
    """Eigenvalue sheets continued along a path.

    ``sheets[k]`` holds the two values at ``z[k]`` in continuity order;
    ``order[k]`` maps each sheet to the index of :func:`eig2` at that point.
    """

    z: np.ndarray
    sheets: np.ndarray
    order: np.ndarray
    swapped: bool

    @property
    def samples(self):
        return [(z, s[0], s[1]) for z, s in zip(self.z, self.sheets)]


def _pair_costs(prev, cur):
    keep = abs(cur[0] - prev[0]) + abs(cur[1] - prev[1])
    swap = abs(cur[1] - prev[0]) + abs(cur[0] - prev[1])
    return keep, swap


def _ambiguous(a, b, rel):
    return abs(a - b) <= rel * max(a, b)


def track_branches(gamma0: float, path, rel_tol: float = 1e-3) -> BranchPath:
    """Continue the two eigenvalue sheets of ``gamma0*sx + z*sz`` along ``path``.

    Pairing at each step minimises the total eigenvalue jump; when both
    pairings are within ``rel_tol`` of each other the eigenvector overlaps
    decide, and if those are also indistinguishable the segment is reported.
    """
    path = np.asarray(path, dtype=complex)
    if path.ndim != 1 or len(path) < 16:
        raise RangeError("path", "need at least 16 samples")
    systems = [eig2(z_hamiltonian(gamma0, z)) for z in path]
    order = np.zeros((len(path), 2), dtype=int)
    order[0] = (0, 1)
    for k in range(1, len(path)):
        prev = systems[k - 1].values[order[k - 1]]
        cur = systems[k].values
        keep, swap = _pair_costs(prev, cur)
        if _ambiguous(keep, swap, rel_tol):
            pv = systems[k - 1].vectors[:, order[k - 1]]
            cv = systems[k].vectors
            ok = abs(np.vdot(pv[:, 0], cv[:, 0])) + abs(np.vdot(pv[:, 1], cv[:, 1]))
            os_ = abs(np.vdot(pv[:, 0], cv[:, 1])) + abs(np.vdot(pv[:, 1], cv[:, 0]))
            if _ambiguous(ok, os_, rel_tol):
                raise RefinementNeeded(k - 1)
            use_swap = os_ > ok
        else:
            use_swap = swap < keep
        order[k] = (1, 0) if use_swap else (0, 1)
    sheets = np.array([s.values[o] for s, o in zip(systems, order)])
    # same point reached again: compare which physical eigenvalue each sheet holds
    if abs(path[-1] - path[0]) <= 1e-12 * max(1.0, abs(path[0])):
        swapped = bool(
            abs(sheets[-1, 0] - sheets[0, 1]) < abs(sheets[-1, 0] - sheets[0, 0])
        )
    else:
        swapped = bool(order[-1, 0] != order[0, 0])
    return BranchPath(path, sheets, order, swapped)


def winding_number(path, point: complex) -> int:
    """Number of times a closed ``path`` winds anticlockwise about ``point``."""
    d = np.asarray(path, dtype=complex) - point
    dphi = np.angle(d[1:] / d[:-1])
    return int(round(dphi.sum() / (2 * np.pi)))


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Both eigenvalue sheets over a rectangular grid.

    ``sheets`` has shape ``(2, len(im_axis), len(re_axis))``; every row
    (fixed imaginary part) is continuity-ordered along the real axis.
    """

    re_axis: np.ndarray
    im_axis: np.ndarray
    sheets: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.re_axis[None, :] + 1j * self.im_axis[:, None]

    def gap(self) -> np.ndarray:
        return np.abs(self.sheets[0] - self.sheets[1])


def sample_surface(gamma0: float, re_range, im_range, resolution) -> SurfaceGrid:
    """Sample the Riemann surface of ``+-sqrt(gamma0^2 + z^2)`` on a grid."""
    if np.ndim(resolution) == 0:
        n_re = n_im = int(resolution)
    else:
        n_re, n_im = (int(r) for r in resolution)
    if min(n_re, n_im) < 16:
        raise RangeError("surface.resolution", "must be >= 16 per axis")
    re_axis = np.linspace(re_range[0], re_range[1], n_re)
    im_axis = np.linspace(im_range[0], im_range[1], n_im)
    z = re_axis[None, :] + 1j * im_axis[:, None]
    raw = family_eigenvalues(gamma0, z)
    sheets = raw.copy()
    for j in range(n_im):
        for k in range(1, n_re):
            prev = sheets[:, j, k - 1]
            cur = raw[:, j, k]
            keep, swap = _pair_costs(prev, cur)
            if swap < keep:
                sheets[:, j, k] = cur[::-1]
    return SurfaceGrid(re_axis, im_axis, sheets)
