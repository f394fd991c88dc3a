import numpy as np
import pytest

from gf_coefficients import CoefficientField
from gf_errors import EllipticityViolation
from gf_grid import DIRICHLET_ZERO, PERIODIC, Grid
from gf_operator import assemble


def test_identity_field():
    field = CoefficientField.identity(Grid((4, 4), 1.0, PERIODIC))

    assert field.ellipticity == 1.0
    assert field.eigenvalue_bounds() == (1.0, 1.0)
    assert np.array_equal(field.matrix_at((2, 3)), np.eye(2))


@pytest.mark.parametrize("dim", [1, 2])
def test_checkerboard_stays_in_window(dim):
    grid = Grid((8,) * dim, 0.5, DIRICHLET_ZERO)
    field = CoefficientField.checkerboard(grid, 10.0, block=2)
    low, high = field.eigenvalue_bounds()

    assert low == pytest.approx(0.1)
    assert high == pytest.approx(10.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_random_spd_stays_in_window(dim, rng):
    grid = Grid((9,) * dim, 1.0, PERIODIC)
    field = CoefficientField.random_spd(grid, 5.0, rng)
    low, high = field.eigenvalue_bounds()

    assert low >= 0.2 * (1 - 1e-12)
    assert high <= 5.0 * (1 + 1e-12)


def test_random_spd_blocks_are_piecewise_constant(rng):
    grid = Grid((8,), 1.0, PERIODIC)
    field = CoefficientField.random_spd(grid, 3.0, rng, block=4)

    assert np.unique(field.entries[:4]).size == 1
    assert np.unique(field.entries[4:]).size == 1


def test_ellipticity_violation_on_large_eigenvalue():
    with pytest.raises(EllipticityViolation):
        CoefficientField.constant(Grid((4, 4), 1.0, PERIODIC), 2.0 * np.eye(2), ellipticity=1.5)


def test_ellipticity_violation_on_asymmetric_matrix():
    with pytest.raises(EllipticityViolation):
        CoefficientField.constant(Grid((4, 4), 1.0, PERIODIC), [[1.0, 0.5], [0.0, 1.0]], ellipticity=4.0)


def test_ellipticity_violation_on_nonpositive_entry():
    with pytest.raises(EllipticityViolation):
        CoefficientField(Grid((4,), 1.0, PERIODIC), [1.0, 1.0, 0.0, 1.0])


def test_ellipticity_is_inferred_from_the_eigenvalues():
    field = CoefficientField(Grid((3,), 1.0, PERIODIC), [0.5, 1.0, 3.0])

    assert field.ellipticity == pytest.approx(3.0)


def test_apply_matches_matrix_at(rng):
    grid = Grid((5, 4), 1.0, PERIODIC)
    field = CoefficientField.random_spd(grid, 4.0, rng)
    xi = rng.normal(size=(2,) + grid.cell_shape)

    assert np.allclose(field.apply(xi)[:, 3, 1], field.matrix_at((3, 1)) @ xi[:, 3, 1])


@pytest.mark.parametrize("dim", [1, 2])
def test_save_and_load(tmp_path, rng, dim):
    grid = Grid((6,) * dim, 0.5, DIRICHLET_ZERO)
    field = CoefficientField.random_spd(grid, 8.0, rng)
    path = tmp_path / "coefficients.txt"

    field.save(path)
    loaded = CoefficientField.load(grid, path, ellipticity=8.0)

    assert np.array_equal(loaded.entries, field.entries)


def test_load_rejects_wrong_layout(tmp_path):
    path = tmp_path / "coefficients.txt"
    np.savetxt(path, np.ones((5, 2)))

    with pytest.raises(ValueError):
        CoefficientField.load(Grid((5,), 1.0, PERIODIC), path)

    with pytest.raises(ValueError):
        CoefficientField.load(Grid((4, 4), 1.0, PERIODIC), path)


@pytest.mark.parametrize("ellipticity", [1.5, 4.0, 10.0])
def test_random_spd_is_monotone_in_two_dimensions(ellipticity, rng):
    grid = Grid((12, 12), 0.5, DIRICHLET_ZERO)
    field = CoefficientField.random_spd(grid, ellipticity, rng, block=2)
    a11, a12, a22 = field.entries
    low, high = field.eigenvalue_bounds()

    assert np.all(a12 <= 0)
    assert np.all(np.minimum(a11, a22) >= np.abs(a12))
    assert low >= (1 - 1e-12) / ellipticity
    assert high <= (1 + 1e-12) * ellipticity
    assert field.monotone()
    assert assemble(grid, field).monotone


def test_random_spd_with_unit_ellipticity_is_the_identity(rng):
    grid = Grid((5, 5), 1.0, PERIODIC)

    assert np.array_equal(CoefficientField.random_spd(grid, 1.0, rng).entries, CoefficientField.identity(grid).entries)


def test_positive_off_diagonal_breaks_monotonicity():
    grid = Grid((6, 6), 1.0, PERIODIC)
    positive = CoefficientField.constant(grid, [[2.0, 0.5], [0.5, 2.0]])
    negative = CoefficientField.constant(grid, [[2.0, -0.5], [-0.5, 2.0]])

    assert not positive.monotone()
    assert not assemble(grid, positive).monotone
    assert negative.monotone()
    assert assemble(grid, negative).monotone


def test_one_dimensional_fields_are_monotone(rng):
    grid = Grid((16,), 0.5, DIRICHLET_ZERO)
    field = CoefficientField.random_spd(grid, 10.0, rng)

    assert field.monotone()
    assert assemble(grid, field).monotone
