"""Intensities, compensators, likelihood and model-level summaries."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .core import ModelParams, PointSequence, pareto_logpdf
from .exceptions import (
    DomainError,
    NumericalWarning,
    StabilityError,
)
from .validation import check_params, check_sequence

LOG_FLOOR = 1e-300


@numba.njit(cache=True)
def _recursion(times, events, jumps, eta, alpha, mic):
    # Left limits lambda_j(t_i-) via the O(n k) exponential recursion.
    n = times.shape[0]
    k = eta.shape[0]
    out = np.empty((n, k))
    if n == 0:
        return out
    for j in range(k):
        out[0, j] = eta[j]
    for i in range(1, n):
        dt = times[i] - times[i - 1]
        d = events[i - 1]
        g = jumps[i - 1]
        for j in range(k):
            e = np.exp(-alpha[j] * dt)
            out[i, j] = (eta[j] + (out[i - 1, j] - eta[j]) * e
                         + mic[j, d] * g * alpha[j] * e)
    return out


@numba.njit(cache=True)
def _on_grid(times, events, jumps, eta, alpha, mic, grid, closed):
    # Intensity at each (sorted) grid time. closed=True counts points at the
    # grid time itself (right limit), otherwise only strictly earlier points.
    n = times.shape[0]
    k = eta.shape[0]
    m = grid.shape[0]
    out = np.empty((m, k))
    excess = np.zeros(k)  # lambda - eta right after the last absorbed point
    last = -np.inf
    p = 0
    for r in range(m):
        g = grid[r]
        while p < n and (times[p] < g or (closed and times[p] == g)):
            t = times[p]
            if last > -np.inf:
                for j in range(k):
                    excess[j] *= np.exp(-alpha[j] * (t - last))
            d = events[p]
            for j in range(k):
                excess[j] += mic[j, d] * jumps[p] * alpha[j]
            last = t
            p += 1
        for j in range(k):
            if last > -np.inf:
                out[r, j] = eta[j] + excess[j] * np.exp(-alpha[j] * (g - last))
            else:
                out[r, j] = eta[j]
    return out


def _arrays(params: ModelParams, seq: PointSequence):
    jumps = params.impacts(seq.events, seq.marks)
    return (np.ascontiguousarray(seq.times), np.ascontiguousarray(seq.events),
            np.ascontiguousarray(jumps), np.ascontiguousarray(params.eta),
            np.ascontiguousarray(params.alpha), np.ascontiguousarray(params.mic))


def _checked(params, seq):
    check_params(params, require_stable=False)
    check_sequence(seq, k=params.k)


def intensity_at_points(params: ModelParams, seq: PointSequence) -> np.ndarray:
    """Intensity of every channel just before each point.

    Returns an ``(n, k)`` array whose row ``i`` is ``lambda(t_i)``, computed
    with the exponential recursion; row 0 equals ``eta``.
    """
    _checked(params, seq)
    return _recursion(*_arrays(params, seq))


def intensity_brute_force(params: ModelParams, seq: PointSequence) -> np.ndarray:
    """Same quantity as :func:`intensity_at_points` by direct O(n^2 k) summation."""
    _checked(params, seq)
    t = seq.times
    g = params.impacts(seq.events, seq.marks)
    n, k = t.size, params.k
    out = np.empty((n, k))
    for i in range(n):
        dt = t[i] - t[:i]                              # (i,)
        w = params.alpha[:, None] * np.exp(-params.alpha[:, None] * dt)  # (k, i)
        coef = params.mic[:, seq.events[:i]] * g[:i]   # (k, i)
        out[i] = params.eta + (coef * w).sum(axis=1)
    return out


def intensity_at_times(params: ModelParams, seq: PointSequence, times,
                       closed: bool = False) -> np.ndarray:
    """Intensity of every channel at arbitrary sorted ``times``.

    With ``closed=False`` a point lying exactly at a query time is not yet
    counted (left limit); with ``closed=True`` its jump is included.
    """
    _checked(params, seq)
    grid = np.ascontiguousarray(np.asarray(times, dtype=float).reshape(-1))
    if np.any(np.diff(grid) < 0):
        raise DomainError("query times must be sorted")
    return _on_grid(*_arrays(params, seq), grid, closed)


def compensator(params: ModelParams, seq: PointSequence, j: int,
                t: float | None = None) -> float:
    """Integrated intensity of channel ``j`` over ``[t_start, t]``.

    ``t`` defaults to the window end. Only points with ``t_i <= t`` contribute.
    """
    _checked(params, seq)
    if not 0 <= j < params.k:
        raise DomainError(f"event index {j} out of range")
    t = seq.t_end if t is None else float(t)
    mask = seq.times <= t
    g = params.impacts(seq.events[mask], seq.marks[mask])
    tail = -np.expm1(-params.alpha[j] * (t - seq.times[mask]))
    return float(params.eta[j] * (t - seq.t_start)
                 + np.sum(params.mic[j, seq.events[mask]] * tail * g))


def compensator_at_points(params: ModelParams, seq: PointSequence,
                          lam: np.ndarray | None = None) -> np.ndarray:
    """Integrated intensity ``Lambda_j(t_i)`` for every point and channel.

    Uses ``Lambda_j(t_i) = eta_j (t_i - t_start) + sum_{m<i} nu g_m
    - (lambda_j(t_i) - eta_j) / alpha_j``.
    """
    if lam is None:
        lam = intensity_at_points(params, seq)
    g = params.impacts(seq.events, seq.marks)
    contrib = params.mic[:, seq.events].T * g[:, None]          # (n, k)
    before = np.cumsum(contrib, axis=0) - contrib
    return (params.eta * (seq.times[:, None] - seq.t_start) + before
            - (lam - params.eta) / params.alpha)


def rescaled_interarrivals(params: ModelParams, seq: PointSequence,
                           j: int) -> np.ndarray:
    """Compensator increments between successive channel-``j`` points.

    Under a correctly specified model these are i.i.d. unit exponentials.
    """
    comp = compensator_at_points(params, seq)[:, j]
    mine = comp[seq.events == j]
    return np.diff(np.concatenate([[0.0], mine]))


def _log_likelihood(params: ModelParams, seq: PointSequence,
                    lam: np.ndarray | None = None) -> float:
    if lam is None:
        lam = _recursion(*_arrays(params, seq))
    own = lam[np.arange(len(seq)), seq.events]
    if np.any(own <= 0):
        warnings.warn("non-positive intensity at an observed point; "
                      "log-likelihood is -inf", NumericalWarning, stacklevel=3)
        return -np.inf
    d = seq.events
    marks_ll = pareto_logpdf(params.rho[d], params.mu[d], seq.marks)
    g = params.impacts(d, seq.marks)
    tail = -np.expm1(-params.alpha[:, None] * (seq.t_end - seq.times)[None, :])
    comp = (params.eta * seq.duration
            + np.sum(params.mic[:, d] * tail * g, axis=1))
    return float(np.sum(np.log(np.maximum(own, LOG_FLOOR)))
                 + np.sum(marks_ll) - np.sum(comp))


def log_likelihood(params: ModelParams, seq: PointSequence,
                   method: str = "recursive") -> float:
    """Log-likelihood of a marked sequence.

    Sum over points of ``log lambda_{d_i}(t_i) + log f_{d_i}(x_i)`` minus the
    compensators of all channels at the window end. Returns ``-inf`` (with a
    :class:`NumericalWarning`) when an observed point has zero intensity.

    ``method`` selects the intensity path: ``"recursive"`` or ``"brute"``.
    """
    _checked(params, seq)
    if len(seq) == 0:
        raise DomainError("log-likelihood needs at least one point")
    if method == "recursive":
        lam = None
    elif method == "brute":
        lam = intensity_brute_force(params, seq)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _log_likelihood(params, seq, lam)


@numba.njit(cache=True)
def _power_iteration(m, tol, max_iter):
    # Returns -1.0 on non-convergence.
    k = m.shape[0]
    v = np.ones(k) / k
    est = -1.0
    for _ in range(max_iter):
        w = m @ v
        s = w.sum()
        if s == 0.0:
            return 0.0
        w = w / s
        if est >= 0.0 and abs(s - est) <= tol * s \
                and np.abs(w - v).sum() <= tol:
            return s
        v = w
        est = s
    return -1.0


def spectral_radius(mic, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Perron root of a non-negative square matrix by power iteration.

    Starts from the all-ones vector. Falls back to the closed form for
    ``k <= 2``, then to a unit-shifted iteration (periodic matrices), then
    to a dense eigenvalue solve when the two leading roots are too close
    for the iteration to separate within ``max_iter`` steps.
    """
    m = np.ascontiguousarray(mic, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("matrix must be square")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise DomainError("matrix entries must be finite and non-negative")
    k = m.shape[0]
    r = _power_iteration(m, tol, max_iter)
    if r >= 0.0:
        return float(r)
    if k == 1:
        return float(m[0, 0])
    if k == 2:
        tr = m[0, 0] + m[1, 1]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        return float(0.5 * (tr + np.sqrt(max(tr * tr - 4.0 * det, 0.0))))
    # M + I has the same Perron vector and a strictly dominant Perron root.
    r = _power_iteration(m + np.eye(k), tol, max_iter)
    if r >= 0.0:
        return float(r - 1.0)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def average_influence(params: ModelParams) -> np.ndarray:
    """Stationary mean intensity ``(I - MIC)^{-1} eta``."""
    r = spectral_radius(params.mic)
    if r >= 1.0:
        raise StabilityError(f"spectral radius {r:.6g} >= 1")
    k = params.k
    if not np.any(params.mic):
        return params.eta.copy()
    return np.linalg.solve(np.eye(k) - params.mic, params.eta)


@dataclass(frozen=True)
class InfluenceSummary:
    avg_influence: np.ndarray
    direct_mean: float
    indirect_mean: float
    spectral_radius: float


def influence_summary(params: ModelParams) -> InfluenceSummary:
    """Average influence, mean direct (diagonal) and indirect excitation."""
    check_params(params, require_stable=True)
    mic = params.mic
    k = params.k
    off = mic[~np.eye(k, dtype=bool)]
    return InfluenceSummary(
        avg_influence=average_influence(params),
        direct_mean=float(np.mean(np.diag(mic))),
        indirect_mean=float(np.mean(off)) if off.size else 0.0,
        spectral_radius=spectral_radius(mic),
    )


@dataclass(frozen=True)
class IntensityTrace:
    """Intensities on a uniform grid merged with the point times.

    ``times`` is sorted; ``values[r, j]`` is the (left-limit) intensity of
    channel ``j`` at ``times[r]``; ``is_point[r]`` marks rows at points.
    """

    times: np.ndarray
    values: np.ndarray
    is_point: np.ndarray

    def to_csv(self, path_or_buf) -> None:
        k = self.values.shape[1]
        header = ",".join(["time"] + [f"event_{j}" for j in range(k)])
        lines = [header]
        for t, row in zip(self.times, self.values):
            lines.append(",".join([format(t, ".10g")]
                                  + [format(v, ".10g") for v in row]))
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)


def trace_grid(t_start: float, t_end: float, grid_step: float) -> np.ndarray:
    """Grid ``t_start + m * grid_step`` covering ``[t_start, t_end)``."""
    if not grid_step > 0:
        raise DomainError("grid_step must be positive")
    n = int(np.ceil((t_end - t_start) / grid_step - 1e-9))
    return t_start + grid_step * np.arange(n)


def intensity_trace(params: ModelParams, seq: PointSequence,
                    grid_step: float) -> IntensityTrace:
    """Evaluate every channel's intensity on a grid plus at each point."""
    _checked(params, seq)
    grid = trace_grid(seq.t_start, seq.t_end, grid_step)
    times = np.concatenate([grid, seq.times])
    is_point = np.concatenate([np.zeros(grid.size, bool),
                               np.ones(len(seq), bool)])
    order = np.argsort(times, kind="stable")
    times, is_point = times[order], is_point[order]
    values = _on_grid(*_arrays(params, seq), np.ascontiguousarray(times), False)
    return IntensityTrace(times=times, values=values, is_point=is_point)
