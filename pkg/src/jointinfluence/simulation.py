"""Ogata thinning simulation of the marked multivariate process."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModelParams, PointSequence, pareto_sample
from .exceptions import CapExceededError, ConfigError
from .validation import check_params

#: Bit generator used for every simulation; recorded in simulated datasets.
GENERATOR = "Philox"


def make_rng(seed) -> np.random.Generator:
    """Counter-based 64-bit generator seeded deterministically."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SimConfig:
    t_start: float = 0.0
    t_end: float = 1000.0
    seed: int = 0
    max_points: int = 10_000_000

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ConfigError("t_start must be below t_end")
        if self.max_points < 1:
            raise ConfigError("max_points must be positive")


def simulate(params: ModelParams, sim: SimConfig | None = None) -> PointSequence:
    """Draw a marked sequence from the model by thinning.

    Between arrivals every intensity only decays, so the total intensity
    right after the last accepted point bounds the intensity until the next
    one. Marks come from each channel's Pareto law by inverse CDF.
    """
    sim = sim or SimConfig()
    check_params(params, require_stable=True)
    rng = make_rng(sim.seed)
    k = params.k
    eta, alpha, mic = params.eta, params.alpha, params.mic
    coef = params.impact_coefficient()

    times, events, marks = [], [], []
    excess = np.zeros(k)          # lambda - eta at time `last`
    t = last = sim.t_start
    while True:
        lam = eta + excess * np.exp(-alpha * (t - last))
        bound = lam.sum()
        if bound <= 0:
            break
        t = t + rng.exponential(1.0 / bound)
        if t > sim.t_end:
            break
        lam_t = eta + excess * np.exp(-alpha * (t - last))
        total = lam_t.sum()
        if rng.random() * bound > total:
            continue
        j = int(np.searchsorted(np.cumsum(lam_t), rng.random() * total,
                                side="right"))
        j = min(j, k - 1)
        x = float(pareto_sample(rng, params.rho[j], params.mu[j]))
        if times and t <= times[-1]:
            t = times[-1] + 1e-9
        if len(times) >= sim.max_points:
            raise CapExceededError(f"more than {sim.max_points} points")
        times.append(t)
        events.append(j)
        marks.append(x)
        g = coef[j] * (params.phi[j] + params.psi[j] * x)
        excess = (lam_t - eta) + mic[:, j] * g * alpha
        last = t
    return PointSequence(times, np.array(events, dtype=np.int64), marks,
                         sim.t_start, sim.t_end, k)
