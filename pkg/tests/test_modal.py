import numpy as np
import pytest

from modalkit.modal import (ModalError, eigenspace_seed, modal_analysis,
                            resonance_check)
from modalkit.system import MechSystem

from conftest import make_linear_system


def test_diagonal_case_exact():
    report = modal_analysis(make_linear_system((1.0, 4.0)), np.zeros(2))
    assert report.omega_sq == pytest.approx([4.0, 1.0])
    assert abs(report.shape(1) @ np.array([0.0, 1.0])) == pytest.approx(1.0)
    assert abs(report.shape(2) @ np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert report.stable


def test_double_pendulum_against_characteristic_polynomial(dp_s1,
                                                           dp_s1_report):
    M = dp_s1.inertia(np.zeros(2))
    H = dp_s1.hessian(np.zeros(2))
    B = np.linalg.solve(M, H)
    roots = np.sort(np.roots([1.0, -np.trace(B), np.linalg.det(B)]).real)
    assert dp_s1_report.omega_sq == pytest.approx(roots[::-1], rel=1e-9)
    # generalized eigenpair residual
    for k in (1, 2):
        d = dp_s1_report.shape(k)
        w2 = dp_s1_report.omega_sq[k - 1]
        res = np.linalg.norm(H @ d - w2 * M @ d) / np.linalg.norm(H @ d)
        assert res < 1e-8


def _chain_matrices_from_positions(n=5, m=0.4, l=1.0, k=20.0, g=9.81):
    """Independent assembly of the 5-link chain matrices at q = 0 from
    Cartesian tip positions, by finite differences of energies."""
    def positions(q):
        th = np.cumsum(q)
        return np.cumsum(l * np.sin(th)), np.cumsum(-l * np.cos(th))

    def kinetic(q, qd, h=1e-6):
        xp, yp = positions(q + h * qd)
        xm, ym = positions(q - h * qd)
        vx = (xp - xm) / (2 * h)
        vy = (yp - ym) / (2 * h)
        return 0.5 * m * float(np.sum(vx**2 + vy**2))

    def potential(q):
        _, y = positions(q)
        y0 = -l * np.arange(1, n + 1)
        return 0.5 * k * float(q @ q) + m * g * float(np.sum(y - y0))

    q0 = np.zeros(n)
    M = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i], np.eye(n)[j]
            M[i, j] = kinetic(q0, ei + ej) - kinetic(q0, ei) - kinetic(q0, ej)
    H = np.zeros((n, n))
    h = 1e-4
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i] * h, np.eye(n)[j] * h
            H[i, j] = (potential(q0 + ei + ej) - potential(q0 + ei - ej)
                       - potential(q0 - ei + ej)
                       + potential(q0 - ei - ej)) / (4 * h * h)
    return M, H


def test_quintuple_spectrum_against_first_principles(quintuple,
                                                     quintuple_report):
    M, H = _chain_matrices_from_positions()
    assert np.allclose(M, quintuple.inertia(np.zeros(5)), atol=1e-8)
    ref = np.sort(np.linalg.eigvals(np.linalg.solve(M, H)).real)[::-1]
    assert quintuple_report.omega_sq == pytest.approx(ref, rel=1e-6)
    assert quintuple_report.stable


def test_quintuple_mutually_non_resonant(quintuple_report):
    assert quintuple_report.m_unique == 5
    assert all(quintuple_report.non_resonant)


def test_resonance_integer_ratio_disqualifies_slow_mode():
    report = modal_analysis(make_linear_system((1.0, 4.0)), np.zeros(2))
    # omega_sq (4, 1): the ratio 4/1 is an exact integer, so the slower
    # mode loses its uniqueness guarantee while the faster one keeps it
    assert report.m_unique == 1
    assert report.non_resonant.tolist() == [True, False]
    hit = [p for p in report.resonance if p.resonant]
    assert len(hit) == 1 and hit[0].ratio == pytest.approx(4.0)


def test_resonance_threshold_semantics():
    report = modal_analysis(make_linear_system((1.0, 2.000001)), np.zeros(2))
    loose = resonance_check(report, eps_int=1e-6)
    assert loose.m_unique == 1
    tight = resonance_check(report, eps_int=1e-9)
    assert tight.m_unique == 2


def test_near_unit_ratio_counts_as_resonant():
    report = modal_analysis(make_linear_system((1.0, 1.0 + 1e-9)),
                            np.zeros(2))
    assert resonance_check(report, 1e-6).m_unique == 0


def test_chart_scaling_leaves_spectrum_invariant(dp_s1, dp_s1_report):
    c = 2.8
    scaled = MechSystem(
        n=2,
        inertia=lambda q: dp_s1.inertia(q / c) / c**2,
        potential=lambda q: dp_s1.potential(q / c),
        grad_potential=lambda q: dp_s1.gradient(q / c) / c,
        hess_potential=lambda q: dp_s1.hessian(q / c) / c**2,
        inertia_partials=lambda q: dp_s1.partials(q / c) / c**3,
        name="scaled-dp")
    report = modal_analysis(scaled, np.zeros(2))
    assert report.omega_sq == pytest.approx(dp_s1_report.omega_sq, rel=1e-9)


def test_eigenspace_seed_geometry(dp_s1_report):
    seed = eigenspace_seed(dp_s1_report, 1, 0.05)
    assert np.allclose(seed.state.q,
                       dp_s1_report.q_bar + 0.05 * dp_s1_report.shape(1))
    assert np.all(seed.state.p == 0)
    assert seed.period == pytest.approx(2 * np.pi
                                        / np.sqrt(dp_s1_report.omega_sq[0]))
    assert seed.warning is None


def test_zero_amplitude_seed_is_equilibrium(dp_s1_report):
    seed = eigenspace_seed(dp_s1_report, 2, 0.0)
    assert np.allclose(seed.state.q, dp_s1_report.q_bar)


def test_resonant_seed_warns():
    report = modal_analysis(make_linear_system((1.0, 4.0)), np.zeros(2))
    with pytest.warns(UserWarning, match="resonant"):
        seed = eigenspace_seed(report, 2, 0.1)
    assert seed.warning is not None


def test_seed_mode_bounds(dp_s1_report):
    with pytest.raises(ModalError):
        eigenspace_seed(dp_s1_report, 3, 0.1)


def test_unstable_equilibrium_reported_not_fatal():
    saddle = MechSystem(
        n=2, inertia=lambda q: np.eye(2),
        potential=lambda q: 0.5 * (q[0] ** 2 - q[1] ** 2),
        grad_potential=lambda q: np.array([q[0], -q[1]]),
        hess_potential=lambda q: np.diag([1.0, -1.0]),
        inertia_partials=lambda q: np.zeros((2, 2, 2)))
    report = modal_analysis(saddle, np.zeros(2))
    assert not report.stable
    assert report.omega_sq[-1] < 0
    with pytest.raises(ModalError):
        report.omega(2)


def test_eigenspace_basis_shape(quintuple_report):
    basis = quintuple_report.eigenspaces[0]
    assert basis.shape == (10, 2)
    assert np.all(basis[5:, 0] == 0) and np.all(basis[:5, 1] == 0)
