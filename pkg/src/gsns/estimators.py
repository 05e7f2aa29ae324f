"""scikit-learn style wrappers around the simulation pipelines.

Rows of ``X`` are state vectors; every estimator draws its noise path from
``random_state`` at fit time, so ``transform`` and repeated calls reuse the
same frozen path.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import GSNS, SimConfig, _grid_steps
from .measure import moments, pesin_entropy, sample_stationary
from .tangent import lyapunov_spectrum


class _ModelParams(BaseEstimator):
    def _model(self) -> GSNS:
        forcing = {tuple(k): tuple(v) for k, v in dict(self.forcing or {}).items()}
        return GSNS(self.N, SimConfig(self.epsilon, self.dt, self.scheme), forcing)

    def _check_states(self, X, model):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != model.d:
            raise ValueError(f"X has {X.shape[1]} columns, the state dimension is {model.d}")
        return X


class FlowTransformer(TransformerMixin, _ModelParams):
    """Maps each row ``x`` to ``Phi^t(x)`` on one frozen noise path.

    Parameters
    ----------
    N, epsilon, dt, scheme, forcing
        Model definition; ``forcing`` maps ``(k1, k2)`` to ``(e1, e2)``.
    t : float
        Flow time.
    random_state : int
        Seed of the noise path.
    """

    def __init__(self, N=2, epsilon=0.01, dt=1e-3, scheme="euler_maruyama", forcing=None,
                 t=1.0, random_state=0):
        self.N = N
        self.epsilon = epsilon
        self.dt = dt
        self.scheme = scheme
        self.forcing = forcing
        self.t = t
        self.random_state = random_state

    def fit(self, X=None, y=None):
        self.model_ = self._model()
        if X is not None:
            self._check_states(X, self.model_)
        n = _grid_steps(self.t, self.dt, "t")
        forced = bool(self.model_.pattern.forced_components())
        self.path_ = self.model_.sample_noise(n, int(self.random_state)) if forced else None
        self.n_features_in_ = self.model_.d
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = self._check_states(X, self.model_)
        return np.array([self.model_.flow(x, self.path_, self.t) for x in X])


class LyapunovEstimator(_ModelParams):
    """Top-``p`` Lyapunov exponents along the trajectory of the first row of ``X``.

    Attributes
    ----------
    exponents_, stderr_ : ndarray
        Sorted estimates and batch-means standard errors.
    report_ : LyapunovReport
    """

    def __init__(self, N=2, epsilon=0.01, dt=1e-2, scheme="rk4", forcing=None, p=None,
                 t_total=100.0, reorth_every=10, burn_in=0.1, n_batches=20, random_state=0):
        self.N = N
        self.epsilon = epsilon
        self.dt = dt
        self.scheme = scheme
        self.forcing = forcing
        self.p = p
        self.t_total = t_total
        self.reorth_every = reorth_every
        self.burn_in = burn_in
        self.n_batches = n_batches
        self.random_state = random_state

    def fit(self, X=None, y=None):
        model = self._model()
        x0 = np.zeros(model.d) if X is None else self._check_states(X, model)[0]
        n = _grid_steps(self.t_total, self.dt, "t_total")
        forced = bool(model.pattern.forced_components())
        path = model.sample_noise(n, int(self.random_state)) if forced else None
        self.report_ = lyapunov_spectrum(model, x0, path, p=self.p,
                                         reorth_every=self.reorth_every,
                                         t_total=self.t_total, burn_in=self.burn_in,
                                         n_batches=self.n_batches)
        self.exponents_ = self.report_.exponents
        self.stderr_ = self.report_.stderr
        self.n_features_in_ = model.d
        return self

    def entropy(self):
        """Pesin entropy ``(value, stderr)``; needs ``p`` equal to the dimension."""
        check_is_fitted(self, "report_")
        return pesin_entropy(self.report_)


class StationarySampler(_ModelParams):
    """Samples the stationary measure from one long trajectory.

    Attributes
    ----------
    samples_ : ndarray of shape (n_samples, d)
    moments_ : MomentReport or None
        Moment diagnostics when at least 100 samples were drawn.
    """

    def __init__(self, N=2, epsilon=0.01, dt=1e-2, scheme="rk4", forcing=None,
                 burn_in=100.0, n_samples=1000, thin=100, random_state=0):
        self.N = N
        self.epsilon = epsilon
        self.dt = dt
        self.scheme = scheme
        self.forcing = forcing
        self.burn_in = burn_in
        self.n_samples = n_samples
        self.thin = thin
        self.random_state = random_state

    def fit(self, X=None, y=None):
        model = self._model()
        x0 = None if X is None else self._check_states(X, model)[0]
        self.measure_ = sample_stationary(model, self.burn_in, self.n_samples, self.thin,
                                          int(self.random_state), x0=x0)
        self.samples_ = self.measure_.samples
        self.moments_ = moments(self.measure_) if len(self.samples_) >= 100 else None
        self.n_features_in_ = model.d
        return self
