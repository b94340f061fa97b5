import warnings

import numpy as np
import pytest

from maternspde.errors import ConfigurationError
from maternspde.rational import (aaa_fit, eval_rational, fit_fractional_power, split_exponent,
                                 to_pole_residue, validation_error)


def test_reciprocal_is_reproduced_exactly():
    grid = np.linspace(1, 100, 500)
    bary = aaa_fit(1 / grid, grid, tol=1e-12)
    assert len(bary.support) <= 3
    dense = np.linspace(1, 100, 10_000)
    assert np.max(np.abs(bary(dense) - 1 / dense)) <= 1e-13


def test_reciprocal_pole_and_residue():
    grid = np.linspace(1, 100, 500)
    ra = to_pole_residue(aaa_fit(1 / grid, grid, tol=1e-12))
    assert len(ra.shifts) == 1
    assert ra.shifts[0] == pytest.approx(0.0, abs=1e-10)
    assert ra.weights[0] == pytest.approx(1.0, abs=1e-10)
    assert ra(4.0) == pytest.approx(0.25, rel=1e-12)


def test_constant_function():
    grid = np.linspace(1, 10, 50)
    bary = aaa_fit(np.ones_like(grid), grid)
    assert len(bary.support) == 1 and bary.error == 0.0
    assert bary(3.7) == 1.0


def test_partial_fractions_recovered():
    grid = np.linspace(1, 100, 1000)
    f = 1 / (grid + 2) + 3 / (grid + 5)
    ra = to_pole_residue(aaa_fit(f, grid, tol=1e-13))
    pairs = sorted(zip(ra.weights, ra.shifts))
    np.testing.assert_allclose(pairs, [(1.0, 2.0), (3.0, 5.0)], atol=1e-10)
    assert ra.constant == 0.0


def test_inverse_sqrt_fit():
    ra = fit_fractional_power(0.5, 1.0, 1e4, tol=1e-8)
    assert ra.num_terms <= 20
    assert validation_error(ra) <= 1e-8 * 10
    assert np.all(ra.shifts > -1)
    assert ra(100.0) == pytest.approx(0.1, abs=1e-7)
    assert ra(1.0) == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.0])
def test_fractional_powers_accuracy(alpha):
    ra = fit_fractional_power(alpha, 1.0, 1e4)
    lam = np.geomspace(1, 1e4, 10_000)
    assert np.max(np.abs(ra(lam) * lam ** alpha - 1)) <= 1e-7
    assert np.all(ra.shifts >= -1e-10)
    assert np.all(ra.weights > 0)


def test_outside_interval_warns():
    ra = fit_fractional_power(0.5, 1.0, 100.0)
    with pytest.warns(RuntimeWarning):
        eval_rational(ra, 1e3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        eval_rational(ra, 50.0)


@pytest.mark.parametrize("alpha,lo,hi", [(0.0, 1, 10), (1.5, 1, 10), (0.5, 0, 10),
                                         (0.5, 10, 1)])
def test_invalid_arguments(alpha, lo, hi):
    with pytest.raises(ConfigurationError):
        fit_fractional_power(alpha, lo, hi)


@pytest.mark.parametrize("k,expected", [(1.0, (1, 0.0)), (0.75, (0, 0.75)), (1.5, (1, 0.5)),
                                        (2 - 1e-14, (2, 0.0)), (3 + 1e-14, (3, 0.0))])
def test_split_exponent(k, expected):
    n, frac = split_exponent(k)
    assert n == expected[0] and frac == pytest.approx(expected[1])
