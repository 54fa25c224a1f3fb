import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhcollapse.dynamics import (
    IntegratorConfig,
    StateVector,
    convergence_run,
    eigenbasis_weights,
    evolve,
    propagator,
    relative_populations,
    rk4_step,
    step_count,
)
from nhcollapse.errors import DegenerateStateError, IllConditionedBasis, RangeError, StepRefinementFailure
from nhcollapse.ham_models import EPLoop, LoopSpec, StaticMatrix, z_hamiltonian


class Swing:
    """Hermitian family ``H(z(t))`` with real ``z(t) = 0.5 cos t``."""

    dim = 2

    def __call__(self, t):
        return z_hamiltonian(1.0, 0.5 * math.cos(t))


class Reversed:
    """``H'(s) = -H(T - s)``: runs a Hermitian family backwards in time."""

    def __init__(self, fam, T):
        self.fam, self.T, self.dim = fam, T, fam.dim

    def __call__(self, s):
        return -self.fam(self.T - s)


def _rabi_exact(t):
    return math.cos(t) ** 2


def test_zero_hamiltonian_is_identity():
    psi = StateVector([0.6, 0.8j])
    traj = evolve(StaticMatrix(np.zeros((2, 2))), psi, 0.0, 1.0, IntegratorConfig(dt=0.01))
    np.testing.assert_array_equal(traj.states[-1], psi.amplitudes)
    assert len(traj) == 101


def test_rabi_oscillation_oracle():
    dt = 2 * math.pi / 6000
    traj = evolve(StaticMatrix([[0, 1], [1, 0]]), [1, 0], 0.0, 2 * math.pi, IntegratorConfig(dt=dt))
    err = np.abs(traj.relative_populations[:, 0] - np.cos(traj.times) ** 2)
    assert err.max() < 1e-8


def test_diagonal_gain_ratio():
    g, t = 0.7, 2.0
    fam = StaticMatrix([[1j * g, 0], [0, -1j * g]])
    traj = evolve(fam, np.array([1, 1]) / math.sqrt(2), 0.0, t, IntegratorConfig(dt=1e-3))
    p = traj.relative_populations[-1]
    assert p[0] / p[1] == pytest.approx(math.exp(4 * g * t), rel=1e-9)


def test_unitary_norm_without_renormalisation():
    traj = evolve(Swing(), [0.6, 0.8], 0.0, 6.0, IntegratorConfig(dt=1e-3, renormalize=False))
    np.testing.assert_allclose(np.linalg.norm(traj.states, axis=1), 1.0, atol=1e-10)


def test_energy_conserved_for_static_hermitian():
    h = np.array([[0.3, 1.0], [1.0, -0.3]])
    traj = evolve(StaticMatrix(h), [1, 0], 0.0, 5.0, IntegratorConfig(dt=1e-3, renormalize=False))
    e = np.einsum("ki,ij,kj->k", traj.states.conj(), h, traj.states).real
    assert np.ptp(e) < 1e-10


def test_time_reversal_returns_initial_state():
    T = 6.0
    fam = Swing()
    cfg = IntegratorConfig(dt=1e-3, renormalize=False)
    psi0 = np.array([0.6, 0.8j])
    fwd = evolve(fam, psi0, 0.0, T, cfg).states[-1]
    back = evolve(Reversed(fam, T), fwd, 0.0, T, cfg).states[-1]
    np.testing.assert_allclose(back, psi0, atol=1e-10)


cplx = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


@given(a=st.tuples(cplx, cplx), b=st.tuples(cplx, cplx), alpha=cplx, beta=cplx)
@settings(max_examples=30, deadline=None)
def test_rk4_step_is_linear(a, b, alpha, beta):
    a, b = np.array(a), np.array(b)
    combo = alpha * a + beta * b
    if min(np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(combo)) < 1e-3:
        return
    fam = StaticMatrix(z_hamiltonian(1.0, 0.4 + 0.8j))
    lhs = rk4_step(fam, combo, 0.0, 0.05).amplitudes
    rhs = alpha * rk4_step(fam, a, 0.0, 0.05).amplitudes + beta * rk4_step(fam, b, 0.0, 0.05).amplitudes
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(rhs).max()))


def test_renormalisation_does_not_change_populations():
    fam = EPLoop(1.0, LoopSpec(period=20.0))
    a = evolve(fam, [1, 0], 0.0, 20.0, IntegratorConfig(dt=1e-2, renormalize=True))
    b = evolve(fam, [1, 0], 0.0, 20.0, IntegratorConfig(dt=1e-2, renormalize=False))
    np.testing.assert_allclose(a.relative_populations, b.relative_populations, atol=1e-12)


def test_relative_populations_example():
    np.testing.assert_allclose(relative_populations([2j, 0, 1]), [0.8, 0.0, 0.2], atol=1e-15)
    with pytest.raises(DegenerateStateError):
        StateVector([0, 0])


def test_eigenbasis_weights_against_explicit_inverse():
    h = z_hamiltonian(1.0, 0.5j)
    psi = np.array([0.3 + 0.1j, -0.7])
    vals, vecs = np.linalg.eig(h)
    c = np.linalg.inv(vecs) @ psi
    oracle = np.abs(c) ** 2 / np.sum(np.abs(c) ** 2)
    got = eigenbasis_weights(psi, h)
    assert min(np.abs(got - oracle).max(), np.abs(got[::-1] - oracle).max()) < 1e-12


def test_eigenbasis_weights_near_defective():
    with pytest.raises(IllConditionedBasis):
        eigenbasis_weights([1, 0], z_hamiltonian(1.0, 1j * (1 - 1e-14)))


def test_eigenweights_tracked_along_loop():
    fam = EPLoop(1.0, LoopSpec(period=20.0))
    traj = evolve(fam, [1, 0], 0.0, 20.0, IntegratorConfig(dt=0.01, record_stride=50), track_eigenweights=True)
    assert traj.eigen_weights.shape == traj.relative_populations.shape
    np.testing.assert_allclose(traj.eigen_weights.sum(axis=1), 1.0, atol=1e-12)


def test_recording_stride_keeps_endpoints():
    traj = evolve(StaticMatrix(np.eye(2)), [1, 0], 0.0, 1.0, IntegratorConfig(dt=0.01, record_stride=30))
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(traj.times[1:4], [0.3, 0.6, 0.9], atol=1e-15)


def test_step_count_rejects_uneven_window():
    assert step_count(0.0, 1.0, 0.01) == 100
    with pytest.raises(RangeError):
        step_count(0.0, 1.0, 0.3)
    with pytest.raises(RangeError):
        step_count(1.0, 1.0, 0.1)


def test_convergence_run_rabi():
    fam = StaticMatrix([[0, 1], [1, 0]])
    traj, dt = convergence_run(fam, [1, 0], 0.0, 2 * math.pi, IntegratorConfig(dt=2 * math.pi / 100))
    assert dt < 2 * math.pi / 100
    assert abs(traj.relative_populations[-1, 0] - _rabi_exact(2 * math.pi)) < 1e-8


def test_convergence_run_trivial_case_stops_after_one_halving():
    _, dt = convergence_run(StaticMatrix(np.zeros((2, 2))), [1, 0], 0.0, 1.0, IntegratorConfig(dt=0.1))
    assert dt == 0.05


def test_convergence_run_stiff_needs_smaller_step():
    # a large level splitting oscillates fast and forces a finer step
    _, dt_stiff = convergence_run(StaticMatrix([[10, 1], [1, -10]]), [1, 1], 0.0, 1.0, IntegratorConfig(dt=0.1))
    _, dt_soft = convergence_run(StaticMatrix([[0.1, 1], [1, -0.1]]), [1, 1], 0.0, 1.0, IntegratorConfig(dt=0.1))
    assert dt_stiff < dt_soft


def test_convergence_run_gives_up():
    with pytest.raises(StepRefinementFailure):
        convergence_run(StaticMatrix([[0, 1], [1, 0]]), [1, 0], 0.0, 1.0, IntegratorConfig(dt=0.5),
                        tol=1e-30, max_halvings=2)


def test_overflow_guard_event():
    fam = StaticMatrix([[400j, 0], [0, -400j]])
    traj = evolve(fam, [1, 1], 0.0, 1.0, IntegratorConfig(dt=1e-3, renormalize=False))
    assert traj.events
    assert np.all(np.isfinite(traj.states))
    assert traj.relative_populations[-1, 0] == pytest.approx(1.0, abs=1e-15)


def test_propagator_matches_evolve():
    loop = LoopSpec(period=20.0)
    fam = EPLoop(1.0, loop)
    u = propagator(fam, 0.0, 20.0, 0.01)
    for psi0 in ([1, 0], [0, 1], [0.6, 0.8j]):
        direct = evolve(fam, psi0, 0.0, 20.0, IntegratorConfig(dt=0.01)).states[-1]
        via = u @ np.array(psi0, dtype=complex)
        via /= np.linalg.norm(via)
        # same ray: compare up to a global phase
        assert abs(abs(np.vdot(direct, via)) - 1) < 1e-10
