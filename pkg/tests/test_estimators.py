import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lcgeom.estimators import IsotropicPosition, JohnPosition, SteinerPolynomial
from lcgeom.exceptions import DimensionError
from lcgeom.quad import mean_cov
from lcgeom.suite import builtin_functions


@pytest.fixture
def box():
    return builtin_functions(2)["box"]


def test_params_roundtrip():
    est = IsotropicPosition(budget=1000, random_state=3)
    assert est.get_params() == {"budget": 1000, "exact": True, "random_state": 3}
    assert clone(est).get_params() == est.get_params()


def test_isotropic_position(box):
    est = IsotropicPosition().fit(box)
    mom = mean_cov(est.g_)
    np.testing.assert_allclose(mom.cov, np.eye(2), atol=1e-9)
    np.testing.assert_allclose(est.transform(est.mean_[None, :]), 0.0, atol=1e-12)
    assert est.isotropic_constant_.value == pytest.approx(1 / math.sqrt(12))


def test_round_trip(box):
    est = JohnPosition().fit(box)
    X = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_allclose(est.inverse_transform(est.transform(X)), X, atol=1e-10)
    np.testing.assert_allclose(est.john_.B, np.diag([1.5, 0.5]), atol=1e-6)


def test_transform_validation(box):
    with pytest.raises(NotFittedError):
        JohnPosition().transform(np.zeros((1, 2)))
    est = JohnPosition().fit(box)
    with pytest.raises(DimensionError):
        est.transform(np.zeros((1, 3)))
    with pytest.raises(TypeError):
        JohnPosition().fit(np.zeros((3, 2)))


def test_steiner_polynomial():
    f = builtin_functions(2)["disk64"]
    est = SteinerPolynomial(budget=100_000, random_state=0).fit(f)
    area = 32 * math.sin(2 * math.pi / 64)
    perim = 128 * math.sin(math.pi / 64)
    np.testing.assert_allclose(est.coefficients_, [area, perim, math.pi], rtol=0.02)
    assert est.predict([0.0])[0] == pytest.approx(est.coefficients_[0])
    np.testing.assert_allclose(est.quermassintegrals_[1], perim / 2, rtol=0.02)
