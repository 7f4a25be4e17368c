"""modalkit: nonlinear modal analysis of conservative mechanical systems.

Computes equilibrium mode spectra, shoots and continues families of periodic
brake orbits, and classifies them by their geometric and symmetry
properties.  See the README for the CLI and file formats.
"""

from .continuation import (BrakeOrbit, ContinuationOptions, ContinuationStall,
                           Generator, OrbitClassification, ShootingError,
                           classify_orbit, continue_generator,
                           equilibrium_passage_time, shoot_brake_orbit,
                           write_generator_csv)
from .dynamics import (EquilibriumError, State, hamiltonian, linearize,
                       phase_jacobian, refine_equilibrium, vector_field)
from .expressions import Expr, ExprError, parse_expression
from .integrator import (DriftBudgetExceeded, IntegrationError,
                         IntegratorOptions, Trajectory, default_step, flow,
                         flow_back)
from .modal import (ModalReport, ModeSeed, eigenspace_seed, modal_analysis,
                    resonance_check)
from .models import (build_coupled_masses, build_double_pendulum,
                     build_quintuple_pendulum)
from .symmetry import (ChartMap, SymmetrySpec, SymmetryVerdict,
                       check_spatial_symmetry, check_trajectory_symmetry,
                       equivariant_chart, point_reflection, time_reversal)
from .system import (IndefiniteInertiaError, MechSystem, SystemError,
                     SystemFormatError, eval_inertia, eval_potential,
                     fd_gradient, fd_hessian, fd_inertia_partials,
                     load_system)

__version__ = "0.1.0"

__all__ = [
    "BrakeOrbit", "ChartMap", "ContinuationOptions", "ContinuationStall",
    "DriftBudgetExceeded", "EquilibriumError", "Expr", "ExprError",
    "Generator", "IndefiniteInertiaError", "IntegrationError",
    "IntegratorOptions", "MechSystem", "ModalReport", "ModeSeed",
    "OrbitClassification", "ShootingError", "State", "SymmetrySpec",
    "SymmetryVerdict", "SystemError", "SystemFormatError", "Trajectory",
    "build_coupled_masses", "build_double_pendulum",
    "build_quintuple_pendulum", "check_spatial_symmetry",
    "check_trajectory_symmetry", "classify_orbit", "continue_generator",
    "default_step", "eigenspace_seed", "equilibrium_passage_time",
    "equivariant_chart", "eval_inertia", "eval_potential", "fd_gradient",
    "fd_hessian", "fd_inertia_partials", "flow", "flow_back", "hamiltonian",
    "linearize", "load_system", "modal_analysis", "parse_expression",
    "phase_jacobian", "point_reflection", "refine_equilibrium",
    "resonance_check", "shoot_brake_orbit", "time_reversal", "vector_field",
    "write_generator_csv",
]
