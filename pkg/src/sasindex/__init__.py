"""Spectral and geometric index of s0-asymptotic solutions of the alpha-homogeneous n-body problem."""

from .config_space import MassSystem, Chart, build_chart, mass_inner, tensor_M
from .potential import (CentralConfiguration, BSReport, CollisionError, ConvergenceError, check_bs,
                        find_central_configuration, guess_configuration, hess_U_tilde, load_cc, save_cc)
from .mcgehee import (Constants, TrajectoryData, TrajectoryError, constants, constants_from, homothetic_parabolic,
                      ingest_trajectory, integrate_homothetic, integrate_newton, random_orthogonal_direction,
                      sundman_K, synthetic_perturbation, write_trajectory)
from .forms import (CoefficientPath, HamiltonianPath, LimitBlocks, assemble_coefficients, assemble_hamiltonian,
                    compute_sigma0, limit_blocks, limit_spectra)
from .symplectic import (LagrangianFrame, NotHyperbolicError, PropagationError, bnd_check, gap_distance,
                         hyperbolic_splitting, stable_path)
from .maslov import (LagrangianPath, MaslovError, MaslovResult, crossing_form, epsilon_rotation_index,
                     geometric_index, maslov_index, sigma_path_maslov)
from .morse import (Discretization, HypothesisError, IndexTheoremReport, relative_morse_index,
                    sigma_spectral_flow, spectral_index, verify_index_theorem)

__version__ = "0.1.0"
