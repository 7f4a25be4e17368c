import numpy as np
import pytest

from modalkit.continuation import ContinuationOptions, shoot_brake_orbit
from modalkit.dynamics import refine_equilibrium
from modalkit.integrator import IntegratorOptions, flow
from modalkit.modal import eigenspace_seed, modal_analysis
from modalkit.symmetry import (ChartMap, SymmetryError, SymmetrySpec,
                               check_spatial_symmetry,
                               check_trajectory_symmetry, equivariant_chart,
                               point_reflection, time_reversal,
                               validate_involution)
from modalkit.system import MechSystem


def _verdict(sys, q_guess):
    q_bar = refine_equilibrium(sys, q_guess)
    return check_spatial_symmetry(sys, point_reflection(q_bar))


def test_symmetric_systems_verdicts(dp_s1, cm_s1, quintuple):
    assert _verdict(dp_s1, np.zeros(2)).symmetric
    assert _verdict(cm_s1, np.zeros(2)).symmetric
    assert _verdict(quintuple, np.zeros(5)).symmetric


def test_asymmetric_potential_flagged_in_potential(dp_a):
    verdict = _verdict(dp_a, np.array([0.0, np.pi / 2]))
    assert not verdict.symmetric
    assert verdict.max_violation_v > 1e-3, "violation should sit in V"


def test_coupled_masses_asymmetric_variant(cm_a):
    verdict = _verdict(cm_a, np.array([0.0, np.pi / 2]))
    assert not verdict.symmetric
    assert verdict.max_violation_v > 1e-3
    assert verdict.max_violation_m <= 1e-9, "constant inertia stays even"


def test_shifted_spring_system_asymmetric_in_inertia(dp_s2):
    # the equilibrium sits at (0, pi/2); the potential is even there but
    # the inertia is not
    verdict = _verdict(dp_s2, np.array([0.0, np.pi / 2]))
    assert not verdict.symmetric
    assert verdict.max_violation_v <= 1e-9
    assert verdict.max_violation_m > 1e-3


def test_constant_inertia_even_potential_symmetric():
    sys = MechSystem(n=2, inertia=lambda q: np.diag([2.0, 3.0]),
                     potential=lambda q: float(np.cos(q[0]) + q[1] ** 4),
                     grad_potential=lambda q: np.array(
                         [-np.sin(q[0]), 4 * q[1] ** 3]),
                     hess_potential=lambda q: np.diag(
                         [-np.cos(q[0]), 12 * q[1] ** 2]))
    verdict = check_spatial_symmetry(sys, point_reflection(np.zeros(2)))
    assert verdict.symmetric


def test_involution_validation_rejects_non_involutive():
    spec = SymmetrySpec(kind="spatial", q_bar=np.zeros(1),
                        phi=lambda q: q + 1.0)
    with pytest.raises(SymmetryError):
        validate_involution(spec)


def test_equivariant_chart_one_dimensional_shift():
    c = 0.7
    chart = ChartMap(lambda x: x.copy(), n=1)
    y = equivariant_chart(chart, lambda x: 2 * c - x)
    xs = np.linspace(-2, 2, 17)
    for x in xs:
        assert y(np.array([x]))[0] == pytest.approx(x - c)


def test_equivariant_chart_idempotent_on_odd_charts():
    chart = ChartMap(lambda q: q + q**3, n=2)
    phi = lambda q: -q
    y = equivariant_chart(chart, phi)
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = rng.uniform(-1, 1, 2)
        assert np.allclose(y(q), chart(q), atol=1e-14)


def test_equivariant_chart_recenters_offset_coordinates(dp_s1):
    # a chart with shifted joint offsets: X(q) = q - a with a != q_bar
    a = np.array([0.3, -0.2])
    chart = ChartMap(lambda q: q - a, n=2)
    q_bar = np.zeros(2)
    phi = lambda q: 2 * q_bar - q
    y = equivariant_chart(chart, phi)
    rng = np.random.default_rng(1)
    for _ in range(100):
        q = rng.uniform(-1.5, 1.5, 2)
        assert np.allclose(y(np.asarray(phi(q))), -y(q), atol=1e-12)
    assert np.allclose(y(q_bar), np.zeros(2), atol=1e-14)
    assert np.allclose(y.jacobian(q_bar), chart.jacobian(q_bar), atol=1e-6)


@pytest.fixture(scope="module")
def dp_s1_orbit(dp_s1, dp_s1_report):
    opts = ContinuationOptions()
    seed = eigenspace_seed(dp_s1_report, 1, 0.05)
    energy = dp_s1.potential(seed.state.q) + 1.0
    return shoot_brake_orbit(dp_s1, seed.state.q * 3.0, seed.period,
                             energy=energy, report=dp_s1_report, opts=opts)


def test_brake_orbit_momentum_reversal_symmetry(dp_s1_orbit):
    residual = check_trajectory_symmetry(dp_s1_orbit.trajectory,
                                         time_reversal())
    assert residual < 1e-6


def test_brake_orbit_spatial_symmetry(dp_s1_report, dp_s1_orbit):
    residual = check_trajectory_symmetry(
        dp_s1_orbit.trajectory, point_reflection(dp_s1_report.q_bar))
    assert residual < 1e-6


def test_asymmetric_orbit_breaks_spatial_symmetry(dp_a):
    report = modal_analysis(dp_a, np.array([0.0, np.pi / 2]))
    seed = eigenspace_seed(report, 1, 0.05)
    energy = dp_a.potential(seed.state.q) + 1.0
    orbit = shoot_brake_orbit(dp_a, seed.state.q, seed.period,
                              energy=energy, report=report,
                              opts=ContinuationOptions())
    assert check_trajectory_symmetry(orbit.trajectory,
                                     time_reversal()) < 1e-6
    spatial = check_trajectory_symmetry(orbit.trajectory,
                                        point_reflection(report.q_bar))
    assert spatial > 1e-3


def test_open_trajectory_warns(dp_s1):
    traj = flow(dp_s1, np.array([0.3, 0.1, 0.0, 0.0]), 0.2,
                IntegratorOptions(dt=1e-3))
    with pytest.warns(UserWarning, match="closed"):
        check_trajectory_symmetry(traj, time_reversal())


def test_mapped_solutions_remain_solutions(dp_s1, dp_s1_report):
    # for an even system, the reflection of a solution solves the dynamics
    spec = point_reflection(dp_s1_report.q_bar)
    z0 = np.array([0.4, -0.2, 0.1, 0.05])
    opts = IntegratorOptions(dt=1e-3)
    direct = flow(dp_s1, z0, 1.0, opts)
    mapped = flow(dp_s1, spec.map_state(z0), 1.0, opts)
    assert np.max(np.abs(mapped.states
                         - spec.map_states(direct.states))) < 1e-7
