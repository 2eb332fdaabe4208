"""Domain types and the closed-form building blocks of the model.

Times are fractional hours. Event channels are indexed from 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .exceptions import (
    DegenerateImpactError,
    DomainError,
    InvalidParameterError,
    UnsortedSequenceError,
)

#: Pareto shapes must satisfy rho > 2 + RHO_MARGIN.
RHO_MARGIN = 1e-6


class MarkedPoint(NamedTuple):
    """One influenced query submission."""

    t: float
    d: int
    x: float


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointSequence:
    """Time-ordered marked points observed over ``[t_start, t_end]``.

    Parameters
    ----------
    times : array-like of shape (n,)
        Strictly increasing positive times.
    events : array-like of int, shape (n,)
        Triggering channel of each point, in ``[0, k)``.
    marks : array-like of shape (n,)
        Non-negative intent-match scores.
    t_start, t_end : float
        Observation window.
    k : int
        Number of event channels.
    """

    times: np.ndarray
    events: np.ndarray
    marks: np.ndarray
    t_start: float
    t_end: float
    k: int

    def __post_init__(self):
        times = _frozen(self.times).reshape(-1)
        events = _frozen(self.events, dtype=np.int64).reshape(-1)
        marks = _frozen(self.marks).reshape(-1)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "k", int(self.k))

        if not (times.shape == events.shape == marks.shape):
            raise DomainError("times, events and marks must have equal length")
        if self.k < 1:
            raise DomainError(f"k must be positive, got {self.k}")
        if not self.t_start < self.t_end:
            raise UnsortedSequenceError(
                f"empty window [{self.t_start}, {self.t_end}]")
        if times.size == 0:
            return
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(marks)):
            raise DomainError("times and marks must be finite")
        if np.any(np.diff(times) <= 0):
            raise UnsortedSequenceError("times must be strictly increasing")
        if times[0] < self.t_start or times[-1] > self.t_end:
            raise UnsortedSequenceError("points fall outside the observation window")
        if times[0] <= 0:
            raise UnsortedSequenceError("point times must be positive")
        if events.min() < 0 or events.max() >= self.k:
            raise DomainError(f"event indices must lie in [0, {self.k})")
        if marks.min() < 0:
            raise DomainError("marks must be non-negative")

    @classmethod
    def from_points(cls, points: Iterable, t_start: float, t_end: float,
                    k: int) -> "PointSequence":
        pts = [MarkedPoint(*p) for p in points]
        return cls(
            times=[p.t for p in pts],
            events=[p.d for p in pts],
            marks=[p.x for p in pts],
            t_start=t_start, t_end=t_end, k=k,
        )

    def __len__(self):
        return self.times.size

    @property
    def points(self) -> tuple[MarkedPoint, ...]:
        return tuple(MarkedPoint(float(t), int(d), float(x))
                     for t, d, x in zip(self.times, self.events, self.marks))

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def counts(self) -> np.ndarray:
        """Number of points per channel."""
        return np.bincount(self.events, minlength=self.k)

    def before(self, t: float, inclusive: bool = False) -> "PointSequence":
        """Sub-sequence of points strictly before ``t`` (or at, if inclusive).

        The window is kept so the result is always a valid sequence.
        """
        side = "right" if inclusive else "left"
        n = int(np.searchsorted(self.times, t, side=side))
        return PointSequence(self.times[:n], self.events[:n], self.marks[:n],
                             self.t_start, self.t_end, self.k)

    def window(self, t_start: float, t_end: float) -> "PointSequence":
        """Points inside ``[t_start, t_end]`` with the window reset."""
        mask = (self.times >= t_start) & (self.times <= t_end)
        return PointSequence(self.times[mask], self.events[mask],
                             self.marks[mask], t_start, t_end, self.k)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the joint influence model for ``k`` events.

    ``mic[j, i]`` is the excitation that a point of channel ``i`` adds to
    the intensity of channel ``j``.

    Element-wise constraints are checked on construction. Stability
    (spectral radius of ``mic`` below one) is checked where it matters,
    see :func:`jointinfluence.validation.check_params`.
    """

    eta: np.ndarray
    alpha: np.ndarray
    mic: np.ndarray
    rho: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    k: int = field(init=False)

    def __post_init__(self):
        vecs = {}
        for name in ("eta", "alpha", "rho", "mu", "phi", "psi"):
            vecs[name] = _frozen(getattr(self, name)).reshape(-1)
        k = vecs["eta"].size
        mic = _frozen(self.mic).reshape(k, k) if np.size(self.mic) == k * k \
            else None
        if k == 0 or mic is None:
            raise InvalidParameterError("mic must be k x k with k = len(eta) > 0")
        for name, v in vecs.items():
            if v.size != k:
                raise InvalidParameterError(f"{name} must have length {k}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "mic", mic)
        object.__setattr__(self, "k", k)

        allv = np.concatenate([*vecs.values(), mic.ravel()])
        if not np.all(np.isfinite(allv)):
            raise InvalidParameterError("parameters must be finite")
        if np.any(vecs["eta"] < 0):
            raise InvalidParameterError("eta must be >= 0")
        if np.any(vecs["alpha"] <= 0):
            raise InvalidParameterError("alpha must be > 0")
        if np.any(mic < 0):
            raise InvalidParameterError("mic entries must be >= 0")
        if np.any(vecs["rho"] <= 2 + RHO_MARGIN):
            raise InvalidParameterError("rho must exceed 2")
        if np.any(vecs["mu"] <= 0):
            raise InvalidParameterError("mu must be > 0")
        if np.any(vecs["phi"] < 0) or np.any(vecs["psi"] < 0):
            raise InvalidParameterError("phi and psi must be >= 0")
        if np.any(vecs["phi"] + vecs["psi"] <= 0):
            raise DegenerateImpactError("phi + psi must be > 0 for every event")

    def replace(self, **changes) -> "ModelParams":
        fields = {n: getattr(self, n) for n in
                  ("eta", "alpha", "mic", "rho", "mu", "phi", "psi")}
        fields.update(changes)
        return ModelParams(**fields)

    def as_vector(self) -> np.ndarray:
        """Flat natural-space vector ``[eta, alpha, mic, rho, mu, phi, psi]``."""
        return np.concatenate([self.eta, self.alpha, self.mic.ravel(),
                               self.rho, self.mu, self.phi, self.psi])

    @classmethod
    def from_vector(cls, vec, k: int) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size != 6 * k + k * k:
            raise InvalidParameterError("vector length does not match k")
        eta, alpha = vec[:k], vec[k:2 * k]
        mic = vec[2 * k:2 * k + k * k].reshape(k, k)
        rest = vec[2 * k + k * k:]
        return cls(eta=eta, alpha=alpha, mic=mic, rho=rest[:k],
                   mu=rest[k:2 * k], phi=rest[2 * k:3 * k], psi=rest[3 * k:])

    def impact_coefficient(self) -> np.ndarray:
        """Per-event scale ``c_j`` so that ``g_j(x) = c_j (phi_j + psi_j x)``."""
        return _impact_coefficient(self.rho, self.mu, self.phi, self.psi)

    def impacts(self, events, marks) -> np.ndarray:
        """Impact ``g_{d}(x)`` for each (event, mark) pair."""
        events = np.asarray(events, dtype=np.int64)
        marks = np.asarray(marks, dtype=float)
        c = self.impact_coefficient()
        return c[events] * (self.phi[events] + self.psi[events] * marks)


def _check_nonneg(name, v):
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v < 0):
        raise DomainError(f"{name} must be finite and non-negative")
    return v


def _check_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha <= 0):
        raise DomainError("decay rate alpha must be positive")
    return alpha


def _check_pareto(rho, mu):
    rho = np.asarray(rho, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(~(rho > 2)):
        raise InvalidParameterError("Pareto shape rho must exceed 2")
    if np.any(~(mu > 0)) or np.any(~np.isfinite(mu)):
        raise InvalidParameterError("Pareto scale mu must be positive")
    return rho, mu


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def decay(alpha, dt):
    """Exponential decay kernel ``alpha * exp(-alpha * dt)``."""
    alpha = _check_alpha(alpha)
    dt = _check_nonneg("dt", dt)
    return _scalar(alpha * np.exp(-alpha * dt))


def cumulative_decay(alpha, dt):
    """Integral of :func:`decay` from 0 to ``dt``: ``1 - exp(-alpha * dt)``."""
    alpha = _check_alpha(alpha)
    dt = _check_nonneg("dt", dt)
    return _scalar(-np.expm1(-alpha * dt))


def pareto_pdf(rho, mu, x):
    """Shifted Pareto (Lomax) density ``rho mu^rho / (x + mu)^(rho + 1)``."""
    rho, mu = _check_pareto(rho, mu)
    x = _check_nonneg("x", x)
    return _scalar(np.exp(pareto_logpdf(rho, mu, x)))


def pareto_logpdf(rho, mu, x):
    """Log of :func:`pareto_pdf` without argument checks."""
    return np.log(rho) + rho * np.log(mu) - (rho + 1.0) * np.log(x + mu)


def pareto_mean(rho, mu):
    return mu / (rho - 1.0)


def pareto_sample(rng: np.random.Generator, rho, mu, size=None):
    """Inverse-CDF draws ``mu * (u^(-1/rho) - 1)``."""
    u = rng.random(size)
    return mu * (u ** (-1.0 / rho) - 1.0)


def _impact_coefficient(rho, mu, phi, psi):
    # (rho-1)(rho-2) / (phi (rho-1)(rho-2) + psi mu (rho-2)); the (rho-2) cancels
    return (rho - 1.0) / (phi * (rho - 1.0) + psi * mu)


def impact(rho, mu, phi, psi, x):
    """Affine impact of a mark, normalised to unit mean under the Pareto law.

    ``g(x) = (rho-1)(rho-2) / (phi (rho-1)(rho-2) + psi mu (rho-2)) * (phi + psi x)``
    """
    rho, mu = _check_pareto(rho, mu)
    phi = _check_nonneg("phi", phi)
    psi = _check_nonneg("psi", psi)
    x = _check_nonneg("x", x)
    if np.any(phi + psi <= 0):
        raise DegenerateImpactError("phi + psi must be positive")
    return _scalar(_impact_coefficient(rho, mu, phi, psi) * (phi + psi * x))
