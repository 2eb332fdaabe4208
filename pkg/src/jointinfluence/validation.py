"""Input validation helpers shared by the estimators and functions."""
from __future__ import annotations

import numpy as np

from .core import ModelParams, PointSequence
from .exceptions import DomainError, InvalidParameterError, StabilityError


def check_params(params, require_stable: bool = True) -> ModelParams:
    """Return ``params`` if it is a valid :class:`ModelParams`.

    With ``require_stable`` the excitation matrix must also have spectral
    radius below one.
    """
    if not isinstance(params, ModelParams):
        raise InvalidParameterError(
            f"expected ModelParams, got {type(params).__name__}")
    if require_stable:
        from .intensity import spectral_radius
        r = spectral_radius(params.mic)
        if r >= 1.0:
            raise StabilityError(f"spectral radius {r:.6g} >= 1")
    return params


def check_sequence(X, k: int | None = None, t_start: float | None = None,
                   t_end: float | None = None,
                   min_points: int = 0) -> PointSequence:
    """Coerce ``X`` to a :class:`PointSequence`.

    ``X`` may already be a sequence, or an array of shape ``(n, 3)`` with
    columns ``(t, d, x)``. For arrays the window defaults to
    ``[0, ceil(max t)]`` and ``k`` to ``max d + 1``.
    """
    if isinstance(X, PointSequence):
        seq = X
        if k is not None and seq.k != k:
            raise DomainError(f"sequence has k={seq.k}, expected {k}")
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise DomainError("expected an array of shape (n, 3) with (t, d, x)")
        d = arr[:, 1]
        if np.any(d != np.round(d)):
            raise DomainError("event column must hold integers")
        if k is None:
            k = int(d.max()) + 1 if d.size else 1
        if t_start is None:
            t_start = 0.0
        if t_end is None:
            t_end = float(np.ceil(arr[:, 0].max())) if d.size else t_start + 1.0
            if t_end <= t_start:
                t_end = t_start + 1.0
        seq = PointSequence(arr[:, 0], d.astype(np.int64), arr[:, 2],
                            t_start, t_end, k)
    if len(seq) < min_points:
        raise DomainError(f"need at least {min_points} points, got {len(seq)}")
    return seq


def check_series(Y, min_rows: int = 1) -> np.ndarray:
    """Coerce a binned count matrix to a 2-D float array (bins x channels)."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise DomainError("series must be 1-D or 2-D")
    if not np.all(np.isfinite(Y)):
        raise DomainError("series must be finite")
    if Y.shape[0] < min_rows:
        raise DomainError(f"need at least {min_rows} bins, got {Y.shape[0]}")
    return Y
