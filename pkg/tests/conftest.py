import numpy as np
import pytest

from modalkit import (build_coupled_masses, build_double_pendulum,
                      build_quintuple_pendulum, modal_analysis)
from modalkit.system import MechSystem


@pytest.fixture(scope="session")
def dp_s1():
    return build_double_pendulum(potential="s1")


@pytest.fixture(scope="session")
def dp_s2():
    return build_double_pendulum(potential="s2")


@pytest.fixture(scope="session")
def dp_a():
    return build_double_pendulum(potential="a")


@pytest.fixture(scope="session")
def cm_s1():
    return build_coupled_masses(potential="s1")


@pytest.fixture(scope="session")
def cm_a():
    return build_coupled_masses(potential="a")


@pytest.fixture(scope="session")
def quintuple():
    return build_quintuple_pendulum()


@pytest.fixture(scope="session")
def dp_s1_report(dp_s1):
    return modal_analysis(dp_s1, np.zeros(2))


@pytest.fixture(scope="session")
def quintuple_report(quintuple):
    return modal_analysis(quintuple, np.zeros(5))


def make_linear_system(omega_sq=(1.0, 2.7)):
    """Decoupled unit-mass oscillators: the analytic reference system."""
    w2 = np.asarray(omega_sq, dtype=float)
    n = w2.size
    eye = np.eye(n)
    zeros = np.zeros((n, n, n))
    return MechSystem(
        n=n,
        inertia=lambda q: eye.copy(),
        potential=lambda q: 0.5 * float(q @ (w2 * q)),
        grad_potential=lambda q: w2 * q,
        hess_potential=lambda q: np.diag(w2),
        inertia_partials=lambda q: zeros.copy(),
        name="linear-oscillators",
    )


@pytest.fixture(scope="session")
def linear_system():
    return make_linear_system()
