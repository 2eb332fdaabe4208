"""scikit-learn style estimator around the joint influence model."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import PointSequence
from .estimation import FitConfig, FitResult, fit
from .intensity import (
    influence_summary,
    intensity_at_points,
    intensity_at_times,
    log_likelihood,
)
from .simulation import SimConfig, simulate
from .validation import check_sequence


class JointInfluenceModel(BaseEstimator):
    """Marked multivariate Hawkes model of event-driven query streams.

    Parameters mirror :class:`~jointinfluence.estimation.FitConfig`.
    ``X`` is a :class:`~jointinfluence.core.PointSequence` or an ``(n, 3)``
    array of ``(t, d, x)`` rows.

    Attributes
    ----------
    params_ : ModelParams
        Fitted parameters.
    result_ : FitResult
        Optimizer output including the objective and iteration count.
    n_events_ : int
    """

    def __init__(self, max_iters=20_000, tolerance=1e-8, restarts=3,
                 reg_weight=1.0, stability_margin=0.99, two_stage=True,
                 shared_alpha=False, diagonal_mic=False, shared_eta=False,
                 identity_impact=False, random_state=0):
        self.max_iters = max_iters
        self.tolerance = tolerance
        self.restarts = restarts
        self.reg_weight = reg_weight
        self.stability_margin = stability_margin
        self.two_stage = two_stage
        self.shared_alpha = shared_alpha
        self.diagonal_mic = diagonal_mic
        self.shared_eta = shared_eta
        self.identity_impact = identity_impact
        self.random_state = random_state

    def _config(self) -> FitConfig:
        return FitConfig(
            max_iters=self.max_iters, tolerance=self.tolerance,
            restarts=self.restarts, reg_weight=self.reg_weight,
            stability_margin=self.stability_margin, two_stage=self.two_stage,
            seed=self.random_state, shared_alpha=self.shared_alpha,
            diagonal_mic=self.diagonal_mic, shared_eta=self.shared_eta,
            identity_impact=self.identity_impact)

    def fit(self, X, y=None, k=None, t_start=None, t_end=None):
        seq = check_sequence(X, k=k, t_start=t_start, t_end=t_end)
        self.result_ = fit(seq, self._config())
        self.params_ = self.result_.params
        self.n_events_ = seq.k
        return self

    @classmethod
    def from_result(cls, result: FitResult, **kw) -> "JointInfluenceModel":
        model = cls(**kw)
        model.result_ = result
        model.params_ = result.params
        model.n_events_ = result.params.k
        return model

    def _seq(self, X, t_start=None, t_end=None) -> PointSequence:
        check_is_fitted(self, "params_")
        return check_sequence(X, k=self.n_events_, t_start=t_start, t_end=t_end)

    def score(self, X, y=None, t_start=None, t_end=None) -> float:
        """Log-likelihood of ``X`` under the fitted parameters."""
        return log_likelihood(self.params_, self._seq(X, t_start, t_end))

    def predict(self, X, times=None, t_start=None, t_end=None) -> np.ndarray:
        """Intensities of every event.

        Without ``times`` the left-limit intensity at each point is returned
        ``(n, k)``; otherwise intensities at the sorted ``times`` given
        the history in ``X``.
        """
        seq = self._seq(X, t_start, t_end)
        if times is None:
            return intensity_at_points(self.params_, seq)
        return intensity_at_times(self.params_, seq, times, closed=True)

    def sample(self, t_start=0.0, t_end=1000.0, random_state=0) -> PointSequence:
        check_is_fitted(self, "params_")
        return simulate(self.params_, SimConfig(t_start, t_end, random_state))

    def summary(self):
        check_is_fitted(self, "params_")
        return influence_summary(self.params_)
