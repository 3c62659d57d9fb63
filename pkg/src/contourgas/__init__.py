"""Numerical laboratory for one-cut log-gas ensembles on complex contours."""

from .numkit import (BranchTrack, ComplexPolynomial, WeightedGrid,
                     log_energy_form, make_grid, poly_normalize, track_arg)
from .contour import (Curve, CurveFamily, arc_mass, bilipschitz_check,
                      semicircle_cdf, semicircle_parametrization)
from .equilibrium import (InterpolationData, OneCutSolution,
                          interpolation_data, solve_one_cut)
from .operators import (DiscretizedOperator, complex_master_operator,
                        finite_hilbert_transform, real_master_operator)
from .fluctuations import (GaussianLaw, KernelPair, finite_rank_oracle,
                           fourier_kernels, fredholm_expectation,
                           gaussian_law, loop_equation_check,
                           one_stat_expansion, phase_kernels, wick_moments)
from .partition import (ExpansionReport, dt_lnZ, f_coefficients,
                        factorial_product_reduce, selberg_exact,
                        selberg_expansion, z_complex_quadrature,
                        z_real_quadrature)
from .sampler import (ParticleChain, concentration_scan,
                      edge_density_estimate, log_energy_distance,
                      make_chain, phase_expectation_mc, regularize,
                      sample_real_model)

__version__ = "0.1.0"
