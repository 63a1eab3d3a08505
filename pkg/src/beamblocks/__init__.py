"""beamblocks: time-periodic solutions of the forced nonlinear beam equation.

Spectral-Galerkin machinery for (omega^2 d_tt + Laplacian^2 + m) u =
eps dF/du + eps f on the (1+d)-torus: frequency clustering, resonant-band
reduction, cluster block diagonalization, small-divisor screening over
omega, and a damped staged iteration — validated against a brute-force
Newton solver on the full truncated system.
"""

from .beam import (BeamSymbol, f_band_lower_bound, gap_across_clusters,
                   gap_constant, invert_on_f)
from .clusters import ClusterPartition, build_partition, verify_partition
from .config import SolverConfig, parse_config, validate_config
from .errors import (BandError, BeamblocksError, CertificationError,
                     ConfigError, CutoffInconsistencyError,
                     CutoffResolutionError, ExcludedFrequencyError,
                     HomologicalDivisorError, NonContractionError, OracleError,
                     StagnationError, SymmetryError)
from .fields import (BandSplit, FourierField, ModeBasis, analyze, band_split,
                     dump_coeffs, dyadic_decompose, load_coeffs, make_basis,
                     project_f, project_h, random_field, sobolev_norm,
                     synthesize, truncate_Sk)
from .nonlin import (Nonlinearity, get_nonlinearity, grad_phi2, mult_matrix,
                     para_split, pde_residual, phi2_value)
from .conjugation import ConjugationResult, diagonalize, solve_homological
from .oracle import jacobian_fd_check, newton_solve
from .problem import Workspace, make_workspace
from .reduction import ReducedProblem, reduce_at, solve_f_band
from .screening import (BlockFamily, CutoffFamily, build_block_family,
                        build_cutoffs, build_shell_cutoff, fit_measure_slope,
                        measure_excluded, screen)
from .stages import SolverState, run

__version__ = "0.1.0"
