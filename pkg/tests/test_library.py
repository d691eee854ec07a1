import numpy as np
import pytest

from dediscover import (CoefficientMatrix, Dataset, DesignMatrix, DiffConfig, Grid, LibrarySpec,
                        build_library, build_response, denormalize_coefficients,
                        differentiate_dataset, evaluate_descriptor, least_squares_ridge,
                        normalize_columns)
from dediscover.errors import (ConfigError, DegenerateColumnError, MissingInputError,
                               SchemaError, StateError)
from dediscover.library import monomial_exponents
from dediscover.simulate import rhs_function


def field(N=2, S=None, T=12, seed=0, covariates=False):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, T)
    xs = None if S is None else np.linspace(0, 1, S)
    vals = rng.standard_normal(((S or 1), T, N))
    cov = rng.standard_normal(((S or 1), T, 1)) if covariates else None
    return Dataset(Grid(t, xs), vals, covariates=cov, covariate_names=("w",) if covariates else ())


class TestSpec:
    def test_nothing_enabled(self):
        with pytest.raises(ConfigError):
            LibrarySpec(poly_degree=0, include_constant=False)

    def test_round_trip(self):
        spec = LibrarySpec(3, (1, 2), ("u1_x", "u1_xx"), ("u1_x",), True, False)
        assert LibrarySpec.from_dict(spec.to_dict()) == spec

    def test_interaction_must_reference_known_terms(self):
        with pytest.raises(ConfigError):
            LibrarySpec(derivative_terms=("u1_x",), interaction_with_derivatives=("u1_xx",))

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            LibrarySpec.from_dict({"degree": 2})


def test_degree_two_in_two_components():
    data = field(N=2)
    F = build_library(data, differentiate_dataset(data), LibrarySpec(poly_degree=2))
    assert F.descriptors == ("1", "u1", "u2", "u1^2", "u1·u2", "u2^2")


def test_monomial_count_is_binomial():
    from math import comb
    for n in range(1, 4):
        for d in range(0, 4):
            assert len(monomial_exponents(n, d)) + 1 == comb(n + d, d)


def test_full_pde_library_order():
    data = field(N=1, S=9)
    derivs = differentiate_dataset(data, DiffConfig(), (1,), (1, 2))
    spec = LibrarySpec(3, (1, 2), ("u1_x", "u1_xx"), True)
    F = build_library(data, derivs, spec)
    assert F.descriptors == ("1", "u1", "u1^2", "u1^3", "sin(u1)", "cos(u1)", "sin(2·u1)",
                             "cos(2·u1)", "u1_x", "u1_xx", "u1·u1_x", "u1·u1_xx",
                             "u1^2·u1_x", "u1^2·u1_xx", "u1^3·u1_x", "u1^3·u1_xx")
    assert F.shape == (9 * 12, 16)


def test_descriptors_reevaluate_to_columns():
    data = field(N=2, S=6, covariates=True)
    derivs = differentiate_dataset(data, DiffConfig(boundary="trim"), (1,), (1, 2))
    spec = LibrarySpec(2, (1, 0.5), ("u1_x", "u2_xx"), True, True)
    F = build_library(data, derivs, spec)
    for j, d in enumerate(F.descriptors):
        np.testing.assert_allclose(evaluate_descriptor(d, derivs), F.matrix[:, j], rtol=1e-12,
                                   atol=1e-12)


def test_rows_align_with_response_under_trim():
    data = field(N=1, S=8, T=20)
    derivs = differentiate_dataset(data, DiffConfig("smoothed_poly", 5, 2, "trim"), (1,), (2,))
    F = build_library(data, derivs, LibrarySpec(1, derivative_terms=("u1_xx",)))
    U = build_response(derivs)
    assert F.shape[0] == U.shape[0] == 4 * 16
    assert U.descriptors == ("d(u1)/dt",)


def test_missing_derivative():
    data = field(N=1, S=8)
    derivs = differentiate_dataset(data, DiffConfig(), (1,), (1,))
    with pytest.raises(MissingInputError):
        build_library(data, derivs, LibrarySpec(1, derivative_terms=("u1_xx",)))


def test_missing_covariates():
    data = field()
    with pytest.raises(MissingInputError):
        build_library(data, differentiate_dataset(data), LibrarySpec(1, include_covariates=True))


def test_deterministic():
    data = field(N=3)
    d = differentiate_dataset(data)
    a = build_library(data, d, LibrarySpec(3, (1,)))
    b = build_library(data, d, LibrarySpec(3, (1,)))
    assert a.descriptors == b.descriptors and a.matrix.tobytes() == b.matrix.tobytes()


def test_design_matrix_rejects_duplicates_and_nan():
    with pytest.raises(SchemaError):
        DesignMatrix(np.zeros((3, 2)), ("a", "a"))
    with pytest.raises(SchemaError):
        DesignMatrix(np.array([[np.nan]]), ("a",))


def test_lorenz_ols_residual(lorenz_spec, lorenz_data, lorenz_problem):
    F, _ = lorenz_problem
    rhs = rhs_function("lorenz63", lorenz_spec.parameters)
    U_t = np.array([rhs(u) for u in lorenz_data.values[0]])
    M = least_squares_ridge(F, U_t)
    resid = U_t - F.matrix @ M.values
    assert np.sqrt(np.mean(resid**2)) <= 1e-6 * np.abs(lorenz_data.values).max()


class TestNormalization:
    def test_three_four_five(self):
        F = normalize_columns(DesignMatrix(np.array([[1.0, 3.0], [1.0, 4.0]]), ("1", "u1")))
        np.testing.assert_allclose(F.matrix[:, 1], [0.6, 0.8])
        np.testing.assert_allclose(F.column_norms, [1.0, 5.0])
        np.testing.assert_array_equal(F.matrix[:, 0], 1.0)

    def test_unit_column_unchanged(self):
        col = np.array([0.6, 0.8])
        F = normalize_columns(DesignMatrix(col[:, None], ("u1",)))
        np.testing.assert_allclose(F.matrix[:, 0], col)

    def test_zero_column_named(self):
        with pytest.raises(DegenerateColumnError, match="u2"):
            normalize_columns(DesignMatrix(np.array([[1.0, 0.0], [2.0, 0.0]]), ("u1", "u2")))

    def test_denormalize(self):
        M = CoefficientMatrix(np.array([[10.0]]), np.array([[True]]), ("u1",))
        assert denormalize_coefficients(M, [5.0]).values[0, 0] == 2.0
        assert denormalize_coefficients(M, [1.0]).values[0, 0] == 10.0
        with pytest.raises(StateError):
            denormalize_coefficients(M, None)

    def test_ols_round_trip(self):
        rng = np.random.default_rng(3)
        F = DesignMatrix(rng.standard_normal((40, 5)) * [1, 10, 0.1, 5, 2], tuple("abcde"))
        U = rng.standard_normal((40, 2))
        raw = least_squares_ridge(F, U).values
        Fn = normalize_columns(F)
        back = denormalize_coefficients(least_squares_ridge(Fn, U), Fn.column_norms).values
        np.testing.assert_allclose(back, raw, atol=1e-8)
