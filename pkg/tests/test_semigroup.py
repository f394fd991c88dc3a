import numpy as np
import pytest

from gf_coefficients import CoefficientField
from gf_errors import EllipticityViolation
from gf_grid import DIRICHLET_ZERO, PERIODIC, EdgeField, Grid, GridFunction, divergence, gradient, gradient_norm, l2_norm
from gf_operator import assemble
from gf_operator_bounds import HEAT_CONSTANT, POISSON_SHARP, sup_grid_search
from gf_poisson import SPECTRAL, SUBORDINATION, SubordinationQuadrature
from gf_timegrid import TimeGrid

ALTERNATING = [1.0, -1.0, 1.0, -1.0]


def identity_operator(grid, **arguments):
    return assemble(grid, CoefficientField.identity(grid), **arguments)


def smooth_data(grid):
    x = np.arange(grid.shape[0]) / grid.shape[0]
    return GridFunction(grid, 1.0 + np.sin(2 * np.pi * x) + 0.3 * np.cos(4 * np.pi * x))


class TestAssembly:
    def test_periodic_square_eigenvalues(self):
        operator = identity_operator(Grid((4,), 1.0, PERIODIC))

        assert np.allclose(np.sort(operator.decomposition.eigenvalues), [0.0, 2.0, 2.0, 4.0], atol=1e-12)

    def test_matrix_is_exactly_symmetric(self, rng):
        grid = Grid((6, 5), 0.5, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))

        assert abs(operator.matrix - operator.matrix.T).max() == 0.0

    def test_decomposition_eigenpairs(self, rng):
        grid = Grid((5, 4), 0.5, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))
        decomposition = operator.decomposition
        vectors, values = decomposition.eigenvectors, decomposition.eigenvalues

        residual = np.linalg.norm(operator.matrix @ vectors - vectors * values, axis=0)
        assert np.all(residual <= 1e-10 * np.maximum(1.0, values))
        assert np.allclose(vectors.T @ vectors, np.eye(grid.size), atol=1e-10)
        assert np.all(values > 0)

        mode = GridFunction(grid, decomposition.eigenfunction(0, grid.cell_volume).reshape(grid.shape))
        assert l2_norm(mode) == pytest.approx(1.0, abs=1e-12)

    def test_constants_are_in_the_kernel(self, rng):
        grid = Grid((16,), 1.0, PERIODIC)
        operator = assemble(grid, CoefficientField.random_spd(grid, 5.0, rng))

        assert l2_norm(operator.apply(GridFunction.constant(grid, 3.0))) <= 1e-12

    def test_matches_divergence_of_flux(self, rng):
        grid = Grid((5, 6), 0.5, PERIODIC)
        field = CoefficientField.random_spd(grid, 4.0, rng)
        u = GridFunction(grid, rng.normal(size=grid.shape))

        expected = divergence(EdgeField(grid, field.apply(gradient(u).values)))
        assert np.allclose(assemble(grid, field).apply(u).values, expected.values, rtol=1e-12, atol=1e-10)

    def test_quadratic_form_is_coercive(self, rng):
        grid = Grid((7, 7), 0.5, DIRICHLET_ZERO)
        field = CoefficientField.random_spd(grid, 6.0, rng)
        u = GridFunction(grid, rng.normal(size=grid.shape))

        assert assemble(grid, field).quadratic_form(u) >= gradient_norm(u) / 6.0 * (1 - 1e-12)

    def test_grid_mismatch(self):
        field = CoefficientField.identity(Grid((4,), 1.0, PERIODIC))

        with pytest.raises(ValueError):
            assemble(Grid((5,), 1.0, PERIODIC), field)

    def test_violating_field_is_rejected(self):
        with pytest.raises(EllipticityViolation):
            CoefficientField.constant(Grid((4,), 1.0, PERIODIC), [[5.0]], ellipticity=2.0)


class TestHeat:
    def test_zero_time_is_the_identity(self):
        grid = Grid((4,), 1.0, PERIODIC)
        f = GridFunction(grid, ALTERNATING)

        assert identity_operator(grid).heat_apply(f, 0.0) is f

    def test_negative_time_is_rejected(self):
        grid = Grid((4,), 1.0, PERIODIC)

        with pytest.raises(ValueError):
            identity_operator(grid).heat_apply(GridFunction.zeros(grid), -1.0)

    def test_eigenvector_decay(self):
        grid = Grid((4,), 1.0, PERIODIC)
        state = identity_operator(grid).heat_apply(GridFunction(grid, ALTERNATING), 0.25)

        assert np.allclose(state.values, np.exp(-1.0) * np.array(ALTERNATING), atol=1e-12)

    def test_mass_is_conserved_on_periodic_grids(self, rng):
        grid = Grid((8, 8), 0.5, PERIODIC)
        operator = assemble(grid, CoefficientField.random_spd(grid, 5.0, rng))
        f = GridFunction(grid, rng.uniform(0, 1, grid.shape))

        assert operator.heat_apply(f, 0.7).values.sum() == pytest.approx(f.values.sum(), rel=1e-10)

    def test_positivity_and_contraction(self, rng):
        grid = Grid((32,), 1 / 16, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.checkerboard(grid, 10.0, block=4))
        f = GridFunction(grid, rng.uniform(0, 1, 32))

        for t in (1e-4, 1e-2, 1.0):
            state = operator.heat_apply(f, t)
            assert state.min() >= -1e-12
            assert l2_norm(state) <= l2_norm(f) * (1 + 1e-12)

    def test_crank_nicolson_matches_the_spectral_path(self, rng):
        grid = Grid((32,), 1.0, PERIODIC)
        field = CoefficientField.random_spd(grid, 2.0, rng)
        f = smooth_data(grid)

        spectral = assemble(grid, field).heat_apply(f, 0.5)
        stepped = assemble(grid, field, spectral_cap=0).heat_apply(f, 0.5)

        assert l2_norm(stepped - spectral) <= 1e-5 * l2_norm(spectral)

    def test_projection(self):
        f = GridFunction(Grid((4,), 1.0, PERIODIC), [1.0, 2.0, 3.0, 6.0])

        assert identity_operator(f.grid).kernel_projection(f).values.tolist() == [3.0] * 4
        assert identity_operator(Grid((4,), 1.0, DIRICHLET_ZERO)).kernel_projection(GridFunction(Grid((4,), 1.0, DIRICHLET_ZERO), f.values)).max() == 0.0


class TestPoisson:
    def test_eigenvector_decay(self):
        grid = Grid((4,), 1.0, PERIODIC)
        state = identity_operator(grid).poisson_apply(GridFunction(grid, ALTERNATING), 0.5)

        assert np.allclose(state.values, np.exp(-1.0) * np.array(ALTERNATING), atol=1e-12)

    def test_unknown_method(self):
        grid = Grid((4,), 1.0, PERIODIC)

        with pytest.raises(ValueError):
            identity_operator(grid).poisson_apply(GridFunction.zeros(grid), 1.0, "fourier")

    @pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
    def test_quadrature_is_a_probability_measure(self, t):
        quadrature = SubordinationQuadrature(t)

        assert np.all(quadrature.weights >= 0)
        assert quadrature.mass() == pytest.approx(1.0, abs=1e-12)
        assert quadrature.raw_mass == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
    def test_subordination_matches_the_spectral_path(self, t, rng):
        grid = Grid((64,), 1 / 64, PERIODIC)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))
        f = GridFunction(grid, rng.normal(size=64))

        spectral = operator.poisson_apply(f, t, SPECTRAL)
        subordinated = operator.poisson_apply(f, t, SUBORDINATION)

        assert l2_norm(subordinated - spectral) <= 1e-8 * l2_norm(spectral)

    def test_chained_subordination_matches_the_spectral_path(self):
        grid = Grid((16,), 1.0, PERIODIC)
        f = smooth_data(grid)

        spectral = identity_operator(grid).poisson_apply(f, 1.0, SPECTRAL)
        chained = identity_operator(grid, spectral_cap=0).poisson_apply(f, 1.0, SUBORDINATION)

        assert l2_norm(chained - spectral) <= 1e-5 * l2_norm(spectral)

    @pytest.mark.parametrize("cap", [4096, 0])
    def test_underflow_returns_the_projection(self, cap):
        grid = Grid((4,), 1.0, PERIODIC)
        f = GridFunction(grid, [2.0, 0.0, 2.0, 0.0])

        state = identity_operator(grid, spectral_cap=cap).poisson_apply(f, 1e4, SUBORDINATION)

        assert np.allclose(state.values, 1.0, atol=1e-10)


class TestHeatKernel:
    def test_column_equilibrates_to_the_uniform_density(self):
        grid = Grid((16,), 1 / 16, PERIODIC)
        column = identity_operator(grid).heat_kernel_column(3, 10.0)

        assert np.allclose(column.values, 1.0, atol=1e-8)

    def test_columns_are_positive_symmetric_and_normalized(self, rng):
        grid = Grid((32,), 1 / 32, PERIODIC)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))
        first = operator.heat_kernel_column(4, 1e-3)
        second = operator.heat_kernel_column(20, 1e-3)

        assert first.min() >= -1e-12
        assert first.values.sum() * grid.h == pytest.approx(1.0, abs=1e-10)
        assert first.values[20] == pytest.approx(second.values[4], abs=1e-10 * max(1.0, first.max()))

    def test_dirichlet_columns_lose_mass(self):
        grid = Grid((16,), 1 / 16, DIRICHLET_ZERO)
        column = identity_operator(grid).heat_kernel_column(8, 0.1)

        assert column.values.sum() * grid.h < 1.0

    def test_column_arguments(self):
        operator = identity_operator(Grid((4,), 1.0, PERIODIC))

        with pytest.raises(ValueError):
            operator.heat_kernel_column(0, 0.0)

        with pytest.raises(ValueError):
            operator.heat_kernel_column(4, 1.0)

    def test_identity_certificate(self):
        grid = Grid((32,), 1 / 16, PERIODIC)
        rows, report = identity_operator(grid).gaussian_certificate([grid.h**2, 0.1, 1.0], [0, 16])

        assert report.passed
        assert len(rows) == 6
        assert max(_["max_bound_ratio"] for _ in rows) <= 0.5 + 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_rough_coefficient_certificate(self, seed):
        grid = Grid((32,), 1 / 16, PERIODIC)
        rng = np.random.default_rng(seed)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))

        rows, report = operator.gaussian_certificate(list(np.geomspace(grid.h**2, 1.0, 5)), [0, int(rng.integers(32))])

        assert report.passed, report.details

    def test_certificate_on_a_dirichlet_checkerboard(self):
        grid = Grid((12, 12), 1 / 8, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.checkerboard(grid, 4.0, block=3))

        rows, report = operator.gaussian_certificate([grid.h**2, 0.1, 1.0], [0, 78])

        assert report.passed, report.details
        assert all(_["mass"] <= 1.0 + 1e-10 for _ in rows)


class TestBounds:
    def test_grid_search_constants(self):
        heat, argmax = sup_grid_search(lambda x: x * np.exp(-2 * x), 0.0, 5.0)

        assert heat == pytest.approx(HEAT_CONSTANT, abs=1e-12)
        assert argmax == pytest.approx(0.5, abs=1e-4)

        poisson, argmax = sup_grid_search(lambda x: x**2 * np.exp(-2 * x), 0.0, 5.0)

        assert poisson == pytest.approx(POISSON_SHARP, abs=1e-12)
        assert argmax == pytest.approx(1.0, abs=1e-4)

    def test_constant_data_is_trivially_bounded(self):
        grid = Grid((16,), 0.5, PERIODIC)
        report = identity_operator(grid).operator_bound_check(GridFunction.constant(grid, 2.0), 0.5)

        assert report.passed
        assert report.details["heat_ratio"] <= 1e-20

    @pytest.mark.parametrize("t", [1e-3, 0.1, 10.0])
    def test_random_data(self, t, rng):
        grid = Grid((64,), 1 / 16, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.random_spd(grid, 10.0, rng))

        report = operator.operator_bound_check(GridFunction(grid, rng.normal(size=64)), t)

        assert report.passed
        assert report.details["heat_ratio"] <= 1.0

    def test_dissipation(self, rng):
        grid = Grid((8, 8), 0.25, PERIODIC)
        operator = assemble(grid, CoefficientField.random_spd(grid, 5.0, rng))

        report = operator.dissipation_check(GridFunction(grid, rng.normal(size=grid.shape)), TimeGrid.geometric(1e-3, 2.0, 2.0))

        assert report.passed

    def test_single_mode_energy_decay(self):
        grid = Grid((4,), 1.0, PERIODIC)
        operator = identity_operator(grid)

        report = operator.dissipation_check(GridFunction(grid, ALTERNATING), TimeGrid.uniform(0.25, 1.0))

        heat = report.details["heat"]
        assert heat[0] == pytest.approx(8.0)
        assert heat[1] == pytest.approx(8.0 * np.exp(-2.0), rel=1e-12)

    @pytest.mark.parametrize("source", ["heat", "poisson"])
    def test_semigroup_law(self, source, rng):
        grid = Grid((32,), 1 / 16, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.random_spd(grid, 5.0, rng))

        assert operator.semigroup_law_error(GridFunction(grid, rng.normal(size=32)), 0.03, 0.07, source) <= 1e-9

    def test_unknown_semigroup(self):
        grid = Grid((4,), 1.0, PERIODIC)

        with pytest.raises(ValueError):
            identity_operator(grid).semigroup_law_error(GridFunction.zeros(grid), 0.1, 0.1, "wave")

    def test_hardy_littlewood_domination(self, rng):
        grid = Grid((64,), 1 / 16, DIRICHLET_ZERO)
        operator = assemble(grid, CoefficientField.checkerboard(grid, 10.0, block=4))
        f = GridFunction(grid, rng.uniform(0, 1, 64))

        for source in ("heat", "poisson"):
            report = operator.hardy_littlewood_domination(f, TimeGrid.geometric(1e-3, 2.0, 1.0), source)
            assert report.passed
            assert report.details["constant"] >= 1.0

    def test_l2_decay_ratio_is_finite(self, rng):
        grid = Grid((32,), 1 / 16, PERIODIC)
        operator = identity_operator(grid)

        assert 0 < operator.l2_decay_ratio(GridFunction(grid, rng.normal(size=32)), 0.1) < np.inf
