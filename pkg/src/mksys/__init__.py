"""Finite Markov systems with place-dependent probabilities: simulation,
invariant measures, and numerical checks of pathwise ergodic limits."""

__version__ = "0.1.0"

from .errors import (ArityError, ChainError, ConfigReferenceError, ConvergenceError, DimError,
                     DomainError, MksysError, NumericError, ParseError, SizeError)
from .expr import eval_expr, parse_expr, to_source
from .config import parse_system_config
from .system import (MarkovSystem, apply_map, contraction_estimate, eval_prob, load_system,
                     parse_system, validate_system, vertex_of)
from .rng import CounterRNG, RngSeed
from .sampler import Cylinder, Trajectory, cylinder_logprob, enumerate_cylinders, sample_path, step
from .operator import Observable, ObservableFamily, apply_U_exact, apply_U_mc, cesaro_U
from .measures import (EmpiricalMeasure, UlamDensity, estimate_invariant, finite_orbit_invariant,
                       integrate, invariance_residual, ulam_invariant)
from .ergodic import (birkhoff_series, cylinder_M, entropy_integral, entropy_pathwise,
                      entropy_report, rhs_functional, stationarity_residual, birkhoff_report)
