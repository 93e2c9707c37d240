"""Catching-up time stepping for second-order evolution inclusions driven by BV clocks."""
from .errors import BoundViolation, DomainError, ValidationError
from .measure import BVClock, Partition, build_partition, lambda_density, nu_mass, rho_mass
from .scenario import Scenario, load, loads, validate
from .scheme import apriori_bounds, gronwall_bound, interpolate, run
from .solver import convergence_study, solve, verify

__all__ = [
    "BVClock", "BoundViolation", "DomainError", "Partition", "Scenario", "ValidationError",
    "apriori_bounds", "build_partition", "convergence_study", "gronwall_bound", "interpolate",
    "lambda_density", "load", "loads", "nu_mass", "rho_mass", "run", "solve", "validate", "verify",
]
__version__ = "0.1.0"
