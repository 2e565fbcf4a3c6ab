"""scikit-learn style wrappers around the position and Steiner routines.

The "data" passed to ``fit`` is a log-concave function, not a sample
matrix; ``transform`` then maps points of R^n into the fitted position.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import functionals as F
from .exceptions import DimensionError
from .funcrep import LogConcaveFn
from .grassmann import SeededStream


def _check_function(f) -> LogConcaveFn:
    if not isinstance(f, LogConcaveFn):
        raise TypeError(f"expected a LogConcaveFn, got {type(f).__name__}")
    return f


def _stream(random_state) -> SeededStream:
    if isinstance(random_state, SeededStream):
        return random_state
    return SeededStream(0 if random_state is None else int(random_state), 0)


class _PointMap(TransformerMixin, BaseEstimator):
    def _check_points(self, X):
        check_is_fitted(self, "A_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def transform(self, X):
        """Map points of the original space into the fitted position."""
        X = self._check_points(X)
        return X @ self.A_.T + self.shift_

    def inverse_transform(self, X):
        X = self._check_points(X)
        return np.linalg.solve(self.A_, (X - self.shift_).T).T


class IsotropicPosition(_PointMap):
    """Isotropic position of a log-concave function.

    Parameters
    ----------
    budget : int
        Monte Carlo budget for the moments (ignored when they are exact).
    exact : bool
        Use closed forms where available.
    random_state : int or SeededStream, optional

    Attributes
    ----------
    g_ : LogConcaveFn
        The function in isotropic position.
    A_, shift_ : ndarray
        ``x -> A_ x + shift_`` maps the original space onto g's space.
    isotropic_constant_ : Estimate
    """

    def __init__(self, budget: int = 100_000, exact: bool = True, random_state=None):
        self.budget = budget
        self.exact = exact
        self.random_state = random_state

    def fit(self, f, y=None):
        f = _check_function(f)
        form = F.isotropize(f, self.budget, _stream(self.random_state), self.exact)
        self.form_ = form
        self.g_ = form.g
        self.A_ = np.linalg.inv(form.S)
        self.shift_ = -self.A_ @ form.mean
        self.mean_ = form.mean
        self.covariance_ = form.moments.cov
        self.isotropic_constant_ = form.L
        self.n_features_in_ = f.dim
        return self


class JohnPosition(_PointMap):
    """John position: the John ellipsoid of f becomes the centred unit ball.

    Attributes
    ----------
    g_ : LogConcaveFn
    john_ : JohnFunction
        The John function of the original f.
    A_, shift_ : ndarray
    """

    def __init__(self, a_grid_size: int = 64, refine_iters: int = 40):
        self.a_grid_size = a_grid_size
        self.refine_iters = refine_iters

    def fit(self, f, y=None):
        f = _check_function(f)
        john = F.john_function(f, self.a_grid_size, self.refine_iters)
        self.john_ = john
        self.A_, self.shift_ = john.position_map
        from .funcrep import affine_image

        self.g_ = affine_image(f, self.A_, self.shift_)
        self.n_features_in_ = f.dim
        return self


class SteinerPolynomial(BaseEstimator):
    """Fit the Steiner polynomial ``delta -> ||f_delta||_1``.

    Attributes
    ----------
    coefficients_ : ndarray
        ``c_j``; the quermassintegrals are ``W_j = c_j / binom(n, j)``.
    coefficient_stderr_ : ndarray
    quermassintegrals_ : ndarray
    fit_ : SteinerFit
    """

    def __init__(self, deltas=None, budget: int = 100_000, random_state=None):
        self.deltas = deltas
        self.budget = budget
        self.random_state = random_state

    def fit(self, f, y=None):
        from math import comb

        f = _check_function(f)
        fit = F.steiner_fit(f, self.deltas, self.budget, _stream(self.random_state), reference=False)
        self.fit_ = fit
        self.coefficients_ = np.asarray(fit.coefficients)
        self.coefficient_stderr_ = np.asarray(fit.coefficient_stderr)
        self.quermassintegrals_ = self.coefficients_ / np.array([comb(f.dim, j) for j in range(f.dim + 1)])
        return self

    def predict(self, deltas):
        """``||f_delta||_1`` from the fitted polynomial."""
        check_is_fitted(self, "coefficients_")
        d = np.asarray(deltas, dtype=float)
        return np.polynomial.polynomial.polyval(d, self.coefficients_)
