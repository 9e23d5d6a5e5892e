"""Numerical laboratory for media-perturbation scattering on periodic grids.

Discretizes generators H = M(x)^{-1} P(D) on periodic boxes, computes wave
operators as strong time limits and checks their isometry, intertwining and
completeness, and probes Schatten-class membership of weighted resolvents
by refinement-stable singular-value sums.
"""

from .errors import (ConfigurationError, DegenerateFitError, DenseCapError,
                     InsufficientDataError, PositivityError, ShapeError,
                     SolverError, SymbolEvalError, WavescatError)
from .grid import Grid, WeightField, make_grid, weight_field
from .symbols import (EllipticityReport, MatrixSymbol, builtin_symbol,
                      ellipticity_report, eval_symbol, hermiticity_defect,
                      min_abs_eigenvalue, polynomial_symbol)
from .media import (DecayReport, MediumField, builtin_medium, decay_report,
                    identity_medium, make_medium, weighted_inner,
                    weighted_norm)
from .operators import (GridOperator, IdentificationPair, ResolventSolve,
                        apply_free_resolvent, apply_multiplier,
                        bracket_power_operator, compose, dense_cap,
                        free_operator, identification_ops, materialize,
                        medium_operator, multiplication_operator,
                        perturbation_apply, resolvent_identity_residuals,
                        resolvent_operator, resolvent_solve)
from .schatten import (MembershipReport, SingularSpectrum,
                       compactness_defect, decay_exponent, membership_report,
                       operator_norm_estimate, partial_sum, schatten_norm,
                       schatten_threshold, singular_values,
                       weighted_resolvent_operator)
from .moeller import (PacketSpec, SpectralDecomposition, WaveOperatorResult,
                      evolve, gaussian_packet, geometric_times,
                      spectral_decomposition, spectral_filter,
                      trace_condition_report, wave_operator,
                      wrap_safe_horizon)
from .wave_equation import (ComparisonCurves, WaveState, compare_solutions,
                            energy, half_laplacian, leapfrog_reference,
                            lift_initial_data, system_medium, wave_system,
                            weighted_resolvent_hs_sq, zero_mode_energy)

__version__ = "0.1.0"
