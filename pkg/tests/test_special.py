import math

import numpy as np
import pytest
from scipy.special import kv

from maternspde.special import bessel_k, matern_correlation


@pytest.mark.parametrize("nu", [0.0, 0.3, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0])
@pytest.mark.parametrize("z", [1e-6, 0.01, 0.5, 1.99, 2.0, 2.01, 7.0, 30.0, 50.0])
def test_bessel_k_against_scipy(nu, z):
    assert bessel_k(nu, z) == pytest.approx(kv(nu, z), rel=1e-12)


def test_half_integer_closed_form():
    for z in (0.1, 1.0, 5.0):
        assert bessel_k(0.5, z) == pytest.approx(math.sqrt(math.pi / (2 * z)) * math.exp(-z),
                                                 rel=1e-14)


def test_reduced_accuracy_flag():
    assert bessel_k(1.0, 1.0, return_flag=True)[1] is False
    assert bessel_k(1.0, 80.0, return_flag=True)[1] is True
    assert bessel_k(12.0, 1.0, return_flag=True)[1] is True


def test_bessel_k_rejects_nonpositive():
    with pytest.raises(ValueError):
        bessel_k(1.0, 0.0)


def test_matern_closed_forms():
    z = np.array([0.0, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(matern_correlation(0.5, z), np.exp(-z), rtol=1e-13)
    np.testing.assert_allclose(matern_correlation(1.5, z), (1 + z) * np.exp(-z), rtol=1e-13)
    assert matern_correlation(2.0, 0.0) == 1.0
