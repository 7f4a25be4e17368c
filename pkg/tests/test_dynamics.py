import numpy as np
import pytest

from modalkit.dynamics import (EquilibriumError, State, hamiltonian,
                               linearize, refine_equilibrium, rhs,
                               vector_field)
from modalkit.system import MechSystem

from conftest import make_linear_system


def test_state_validation():
    with pytest.raises(ValueError):
        State(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        State(np.array([np.nan]), np.array([0.0]))
    s = State.from_z(np.arange(4.0))
    assert s.q.tolist() == [0.0, 1.0] and s.p.tolist() == [2.0, 3.0]


def test_hamiltonian_zero_momentum_is_potential(dp_s1):
    q = np.array([0.2, -0.4])
    h = hamiltonian(dp_s1, State(q, np.zeros(2)))
    assert h == pytest.approx(dp_s1.potential(q), rel=1e-14)


def test_hamiltonian_even_in_momentum(dp_s1):
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = rng.uniform(-1, 1, 2)
        p = rng.uniform(-1, 1, 2)
        assert hamiltonian(dp_s1, State(q, p)) == pytest.approx(
            hamiltonian(dp_s1, State(q, -p)), rel=1e-14)


def test_hamiltonian_value_coupled_masses(cm_s1):
    # 0.5 * 0.4^2 / 0.4 + V_s1(0,0) = 0.2 - 11.772
    h = hamiltonian(cm_s1, State(np.zeros(2), np.array([0.4, 0.0])))
    assert h == pytest.approx(0.2 - 11.772, abs=1e-9)


def test_vector_field_zero_at_equilibrium(dp_s1):
    f = vector_field(dp_s1, State(np.zeros(2), np.zeros(2)))
    assert np.max(np.abs(f)) < 1e-12


def test_vector_field_constant_inertia_reduces_to_gradient(cm_a):
    rng = np.random.default_rng(5)
    z = rng.uniform(-1, 1, 4)
    f = vector_field(cm_a, z)
    m = cm_a.params["m"]
    assert np.allclose(f[:2], z[2:] / m, rtol=1e-14)
    assert np.allclose(f[2:], -cm_a.gradient(z[:2]), rtol=1e-12, atol=1e-14)


def _fd_hamiltonian_gradient(sys, z, h=1e-6):
    g = np.empty(z.size)
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h * max(1.0, abs(z[i]))
        g[i] = ((hamiltonian(sys, State.from_z(z + e))
                 - hamiltonian(sys, State.from_z(z - e))) / (2 * e[i]))
    return g


@pytest.mark.parametrize("fixture", ["dp_s1", "dp_a", "cm_s1", "quintuple"])
def test_energy_derivative_along_field_vanishes(fixture, request):
    # <dH/dz, f(z)> = 0; dH by finite differences, f analytic
    sys = request.getfixturevalue(fixture)
    f = rhs(sys)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        z = rng.uniform(-0.8, 0.8, 2 * sys.n)
        dH = _fd_hamiltonian_gradient(sys, z)
        scale = max(1.0, np.linalg.norm(dH) * np.linalg.norm(f(z)))
        assert abs(dH @ f(z)) / scale < 1e-9


def test_momentum_reversal_maps_field(dp_s1):
    rng = np.random.default_rng(13)
    for _ in range(100):
        z = rng.uniform(-1, 1, 4)
        fz = vector_field(dp_s1, z)
        zr = z.copy()
        zr[2:] *= -1
        fr = vector_field(dp_s1, zr)
        assert np.allclose(fr[:2], -fz[:2], rtol=1e-12, atol=1e-14)
        assert np.allclose(fr[2:], fz[2:], rtol=1e-12, atol=1e-14)


def test_linearize_block_structure():
    sys = make_linear_system((1.0, 4.0))
    A = linearize(sys, np.zeros(2))
    expected = np.zeros((4, 4))
    expected[:2, 2:] = np.eye(2)
    expected[2:, :2] = -np.diag([1.0, 4.0])
    assert np.allclose(A, expected, atol=1e-12)
    eigs = np.linalg.eigvals(A)
    assert np.allclose(sorted(np.abs(eigs.imag)), [1.0, 1.0, 2.0, 2.0],
                       atol=1e-12)
    assert np.max(np.abs(eigs.real)) < 1e-12


def test_linearize_double_pendulum_spectrum_imaginary(dp_s1):
    A = linearize(dp_s1, np.zeros(2))
    eigs = np.linalg.eigvals(A)
    assert np.max(np.abs(eigs.real)) < 1e-8
    # cross-check omega^2 against the dense characteristic polynomial of
    # M^-1 Hess V (quadratic formula for n = 2)
    M = dp_s1.inertia(np.zeros(2))
    H = dp_s1.hessian(np.zeros(2))
    B = np.linalg.solve(M, H)
    tr, det = np.trace(B), np.linalg.det(B)
    roots = np.roots([1.0, -tr, det])
    w_ref = np.sort(np.sqrt(roots.real))
    w_lin = np.sort(np.unique(np.round(np.abs(eigs.imag), 10)))
    assert np.allclose(w_lin, w_ref, rtol=1e-9)


def test_refine_equilibrium_shifted_minimum(dp_a):
    q_bar = refine_equilibrium(dp_a, np.array([0.0, np.pi / 2]))
    assert np.linalg.norm(dp_a.gradient(q_bar)) < 1e-12
    assert np.linalg.norm(q_bar - np.array([0.0, np.pi / 2])) > 1e-3


def test_refine_equilibrium_failure():
    sys = MechSystem(n=1, inertia=lambda q: np.eye(1),
                     potential=lambda q: float(q[0]),
                     grad_potential=lambda q: np.array([1.0]),
                     hess_potential=lambda q: np.array([[0.0]]))
    with pytest.raises(EquilibriumError):
        refine_equilibrium(sys, np.zeros(1))
