"""Quantum Hamilton-Jacobi trajectories for hydrogen-like bound states."""

__version__ = "0.1.0"

from .units import CONSTANTS, PhysicalConstants, UnitMode, UnitSystem, energy_of_state  # noqa: E402
from .basis import BoundState, CATALOG_STATES, Coordinate, SolutionPair, solution_pair  # noqa: E402
from .momenta import HiddenVariables, components, momentum, qshje_residual, reduced_action  # noqa: E402
from .quantum_dynamics import (Event, EventKind, IntegrationStall, IntegratorConfig, Trajectory,  # noqa: E402
                               TrajectoryState, angular_trajectory, integrate_spatial_orbit,
                               integrate_time_trajectory, velocity_field)
from .classical_dynamics import ClassicalParams, PurelyQuantumError, classical_orbit  # noqa: E402
from .analysis import (EjectionKind, EjectionResult, NodeCatalog, TrapZone, classify_ejection,  # noqa: E402
                       detect_nodes, hidden_ensemble, trap_zone)
from .residuals import (ResidualReport, verify_component_qshje, verify_full_qshje,  # noqa: E402
                        verify_metric_identities)
from .core import available_backends, default_backend  # noqa: E402

__all__ = [
    "__version__", "CONSTANTS", "PhysicalConstants", "UnitMode", "UnitSystem", "energy_of_state",
    "BoundState", "CATALOG_STATES", "Coordinate", "SolutionPair", "solution_pair",
    "HiddenVariables", "components", "momentum", "qshje_residual", "reduced_action",
    "Event", "EventKind", "IntegrationStall", "IntegratorConfig", "Trajectory", "TrajectoryState",
    "angular_trajectory", "integrate_spatial_orbit", "integrate_time_trajectory", "velocity_field",
    "ClassicalParams", "PurelyQuantumError", "classical_orbit",
    "EjectionKind", "EjectionResult", "NodeCatalog", "TrapZone", "classify_ejection", "detect_nodes",
    "hidden_ensemble", "trap_zone",
    "ResidualReport", "verify_component_qshje", "verify_full_qshje", "verify_metric_identities",
    "available_backends", "default_backend",
]
