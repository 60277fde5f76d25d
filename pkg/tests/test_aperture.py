import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capa import Aperture, build_grid, inner_product, integrate
from capa.errors import DomainError

WAVELENGTH = 299_792_458.0 / 2.4e9


def test_default_grid_has_400_nodes_and_area_weight():
    grid = build_grid(Aperture.square(0.1), 20)
    assert grid.size == 400
    assert grid.aperture.lx == pytest.approx(0.31622776601683794)
    assert grid.weights.sum() == pytest.approx(0.1, rel=1e-14)


def test_order_one_is_midpoint():
    ap = Aperture(0.3, 0.7)
    grid = build_grid(ap, 1)
    np.testing.assert_allclose(grid.nodes, [[0.0, 0.0, 0.0]], atol=1e-15)
    assert grid.weights[0] == pytest.approx(0.3 * 0.7)


def test_second_moment_exact_at_order_two():
    grid = build_grid(Aperture(1.0, 1.0), 2)
    assert integrate(grid, grid.nodes[:, 0] ** 2).real == pytest.approx(1 / 12, rel=1e-14)


def test_weights_positive_and_nodes_inside():
    grid = build_grid(Aperture(0.2, 0.5), 7, 13)
    assert grid.size == 91
    assert np.all(grid.weights > 0)
    assert np.all(grid.aperture.contains(grid.nodes))


def test_grid_arrays_are_read_only():
    grid = build_grid(Aperture.square(0.1), 4)
    with pytest.raises(ValueError):
        grid.weights[0] = 1.0


@pytest.mark.parametrize("bad", [0, -2, 2.5])
def test_invalid_order_rejected(bad):
    with pytest.raises(DomainError):
        build_grid(Aperture.square(0.1), bad)


def test_invalid_aperture_rejected():
    with pytest.raises(DomainError):
        Aperture(0.0, 1.0)


def test_constant_integrates_to_area():
    grid = build_grid(Aperture.square(0.1), 20)
    assert integrate(grid, np.ones(grid.size)) == pytest.approx(0.1, rel=1e-14)


def test_odd_function_vanishes():
    grid = build_grid(Aperture.square(0.1), 20)
    assert abs(integrate(grid, grid.nodes[:, 0])) < 1e-14


def test_oscillatory_integrand_matches_order_200_reference():
    ap = Aperture(0.3162, 0.3162)
    f = lambda g: np.exp(-2j * np.pi * g.nodes[:, 0] / WAVELENGTH)
    reference = integrate(build_grid(ap, 200), f(build_grid(ap, 200)))
    value = integrate(build_grid(ap, 20), f(build_grid(ap, 20)))
    # closed form as a second check on the reference
    k = 2 * np.pi / WAVELENGTH
    exact = 0.3162 * 2 * np.sin(k * 0.3162 / 2) / k
    assert abs(reference - exact) < 1e-13
    assert abs(value - reference) / abs(reference) < 1e-10


@pytest.mark.parametrize("degree", range(6))
def test_polynomial_exactness_at_order_three(degree):
    grid = build_grid(Aperture(2.0, 2.0), 3)
    value = integrate(grid, grid.nodes[:, 0] ** degree * grid.nodes[:, 1] ** (5 - degree)).real
    # integral of x^a over [-1, 1] is 2/(a+1) for even a, 0 for odd a
    one_d = lambda a: 0.0 if a % 2 else 2.0 / (a + 1)
    exact = one_d(degree) * one_d(5 - degree)
    assert value == pytest.approx(exact, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("degree", range(6))
def test_polynomial_exactness_single_axis(degree):
    grid = build_grid(Aperture(2.0, 2.0), 3)
    value = integrate(grid, grid.nodes[:, 0] ** degree).real
    exact = 0.0 if degree % 2 else 2.0 * 2.0 / (degree + 1)
    assert value == pytest.approx(exact, rel=1e-13, abs=1e-15)


def test_inner_product_of_constants():
    grid = build_grid(Aperture.square(0.1), 20)
    one = np.ones(grid.size)
    assert inner_product(grid, one, one) == pytest.approx(0.1, rel=1e-14)


def test_fourier_modes_orthogonal_over_one_period():
    L = 0.5
    grid = build_grid(Aperture(L, L), 20)
    x = grid.nodes[:, 0]
    f = np.exp(-2j * np.pi * x / L)
    g = np.exp(-4j * np.pi * x / L)
    assert abs(inner_product(grid, f, g)) < 1e-12


def test_inner_product_conjugate_linear_in_first_argument():
    grid = build_grid(Aperture.square(0.1), 5)
    rng = np.random.default_rng(0)
    f = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    g = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    assert inner_product(grid, 1j * f, g) == pytest.approx(-1j * inner_product(grid, f, g))


def test_sample_count_mismatch_rejected():
    grid = build_grid(Aperture.square(0.1), 5)
    with pytest.raises(DomainError):
        integrate(grid, np.ones(grid.size + 1))


complex_fields = st.integers(0, 2**32 - 1).map(
    lambda seed: np.random.default_rng(seed).normal(size=(36, 2)) @ np.array([1, 1j])
)


@given(complex_fields, complex_fields)
def test_inner_product_hermitian(f, g):
    grid = build_grid(Aperture.square(0.1), 6)
    assert inner_product(grid, f, g) == pytest.approx(np.conj(inner_product(grid, g, f)), rel=1e-12)


@given(complex_fields)
def test_inner_product_positive(f):
    grid = build_grid(Aperture.square(0.1), 6)
    value = inner_product(grid, f, f)
    assert abs(value.imag) < 1e-15
    assert value.real > 0


def test_inner_product_zero_only_for_zero_field():
    grid = build_grid(Aperture.square(0.1), 6)
    assert inner_product(grid, np.zeros(grid.size), np.zeros(grid.size)) == 0
