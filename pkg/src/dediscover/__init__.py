"""Data-driven discovery of differential equations.

Sparse regression (STLS, STRidge, group STRidge, SR3) over candidate-term
libraries, bootstrap and spike-and-slab inclusion uncertainty, genetic
programming symbolic regression, and simulators for ground-truth data.
"""
from .data import CsvLayout, Dataset, DerivativeField, Grid, load_csv, save_csv
from .differentiation import (DiffConfig, central_difference, differentiate_dataset,
                              forward_difference, smoothed_poly_derivative)
from .library import (DesignMatrix, LibrarySpec, ResponseMatrix, build_library,
                      build_response, denormalize_coefficients, evaluate_descriptor,
                      normalize_columns)
from .simulate import (SimSpec, add_noise, diffusion_propagator, rk4_integrate, rk4_solve,
                       simulate, simulate_diffusion, true_coefficients, true_terms)
from .solvers import (CoefficientMatrix, SolverConfig, fit_group_stridge, fit_sr3,
                      fit_stls, fit_stridge, hyperparam_search, least_squares_ridge,
                      prox_l0, prox_l1, split_groups)
from .uncertainty import (EnsembleResult, PosteriorResult, SsvsConfig, bootstrap_ensemble,
                          enumerate_model_posterior, ssvs_gibbs)

__version__ = "0.1.0"
