"""Pseudospectral solver and verification harnesses for incompressible Navier-Stokes
equations on the periodic torus driven by transport (Kraichnan-type) noise."""

__version__ = "0.1.0"

from .errors import ConfigurationError, UnsupportedModeError
from .spectral import (SpectralField, TorusGrid, energy, enstrophy, forward_transform,
                       helmholtz_project, inverse_transform, q_solve)
from .spaces import (ParameterTuple, SerrinPair, WeightedTimeGrid, besov_norm, bessel_norm,
                     kappa_critical, serrin_exponents, validate_parameters,
                     weighted_time_norm)
from .noise import (BrownianDriver, NoiseFamily, NonlinearityPreset, ViscosityTensor,
                    ito_correction, synthesize_kraichnan)
from .solver import SolverConfig, TrajectoryRecord, rough_initial_data, run_trajectory
