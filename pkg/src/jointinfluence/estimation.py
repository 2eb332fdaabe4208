"""Regularised maximum-likelihood fitting with a Nelder-Mead simplex."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import RHO_MARGIN, ModelParams, PointSequence
from .exceptions import (
    ConfigError,
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
    NumericalWarning,
)
from .intensity import _log_likelihood, spectral_radius
from .validation import check_params, check_sequence

LOG_FLOOR = 1e-10
RHO_MIN = 2.0 + 1.001 * RHO_MARGIN
RHO_MAX = 500.0
MU_MIN, MU_MAX = 1e-6, 1e6
BARRIER_WEIGHT = 1e6


@dataclass
class FitConfig:
    """Optimizer settings and model restrictions.

    ``shared_alpha`` gives every event the same decay rate (JIM-G).
    ``diagonal_mic``, ``shared_eta`` and ``identity_impact`` together give
    the independent-influence approximation (IIM-approx).
    """

    max_iters: int = 20_000
    tolerance: float = 1e-8
    restarts: int = 3
    reg_weight: float = 1.0
    stability_margin: float = 0.99
    two_stage: bool = True
    seed: int = 0
    shared_alpha: bool = False
    diagonal_mic: bool = False
    shared_eta: bool = False
    identity_impact: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if not 0 < self.stability_margin < 1:
            raise ConfigError("stability_margin must lie in (0, 1)")
        if self.max_iters < 1 or self.restarts < 0 or self.reg_weight < 0:
            raise ConfigError("max_iters >= 1, restarts >= 0, reg_weight >= 0")

    @classmethod
    def iim(cls, **kw) -> "FitConfig":
        return cls(diagonal_mic=True, shared_eta=True, shared_alpha=True,
                   identity_impact=True, **kw)

    @property
    def variant(self) -> str:
        if self.diagonal_mic and self.shared_eta and self.identity_impact:
            return "IIM-approx"
        return "JIM-G" if self.shared_alpha else "JIM"


def _num(v) -> float:
    return float(format(float(v), ".12g"))


@dataclass
class FitResult:
    params: ModelParams
    objective: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    variant: str = "JIM"

    def to_dict(self) -> dict:
        p = self.params
        return {
            "k": p.k,
            "eta": [_num(v) for v in p.eta],
            "alpha": [_num(v) for v in p.alpha],
            "mic": [[_num(v) for v in row] for row in p.mic],
            "rho": [_num(v) for v in p.rho],
            "mu": [_num(v) for v in p.mu],
            "phi": [_num(v) for v in p.phi],
            "psi": [_num(v) for v in p.psi],
            "objective": _num(self.objective),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "variant": self.variant,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        k = int(doc["k"])
        params = ModelParams(eta=doc["eta"], alpha=doc["alpha"],
                             mic=np.asarray(doc["mic"], float).reshape(k, k),
                             rho=doc["rho"], mu=doc["mu"], phi=doc["phi"],
                             psi=doc["psi"])
        return cls(params=params,
                   objective=float(doc.get("objective", float("nan"))),
                   iterations=int(doc.get("iterations", 0)),
                   converged=bool(doc.get("converged", False)),
                   variant=doc.get("variant", "JIM"))

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls.from_dict(json.loads(text))


# -- reparameterisation -------------------------------------------------------

def transform_to_unconstrained(params: ModelParams) -> np.ndarray:
    """Map parameters to R^(6k + k^2).

    Positive quantities go through ``log(max(v, 1e-10))``; ``rho`` goes
    through ``log(rho - 2)``. Order: eta, alpha, mic, rho, mu, phi, psi.
    """
    check_params(params, require_stable=False)
    lg = lambda v: np.log(np.maximum(v, LOG_FLOOR))  # noqa: E731
    return np.concatenate([lg(params.eta), lg(params.alpha),
                           lg(params.mic.ravel()), np.log(params.rho - 2.0),
                           lg(params.mu), lg(params.phi), lg(params.psi)])


def transform_from_unconstrained(vec, k: int) -> ModelParams:
    """Inverse of :func:`transform_to_unconstrained`."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != 6 * k + k * k:
        raise InvalidParameterError("vector length does not match k")
    nat = np.exp(vec)
    o = 2 * k + k * k
    nat[o:o + k] += 2.0
    return ModelParams.from_vector(nat, k)


# -- objective ----------------------------------------------------------------

def parameter_norm(params_or_vector) -> float:
    """Unsquared Euclidean norm of the natural-space parameter vector."""
    if isinstance(params_or_vector, ModelParams):
        v = params_or_vector.as_vector()
    else:
        v = np.asarray(params_or_vector, dtype=float).ravel()
    return float(np.linalg.norm(v))


def stability_barrier(params: ModelParams, margin: float) -> float:
    """Quadratic penalty ``1e6 (spr - margin)^2`` once spr exceeds the margin."""
    r = spectral_radius(params.mic)
    return BARRIER_WEIGHT * (r - margin) ** 2 if r > margin else 0.0


def _penalized(params, seq, reg_weight, margin):
    ll = _log_likelihood(params, seq)
    if not np.isfinite(ll):
        return -np.inf
    return ll - reg_weight * parameter_norm(params) \
        - stability_barrier(params, margin)


def penalized_objective(params: ModelParams, seq: PointSequence,
                        config: FitConfig | None = None) -> float:
    """Log-likelihood minus ``reg_weight * ||theta||`` minus the stability barrier."""
    config = config or FitConfig()
    check_params(params, require_stable=False)
    seq = check_sequence(seq, k=params.k, min_points=1)
    return _penalized(params, seq, config.reg_weight, config.stability_margin)


# -- marks --------------------------------------------------------------------

def _pareto_profile(x, log_mu):
    # Pareto log-likelihood maximised over rho in [RHO_MIN, RHO_MAX] for fixed mu.
    mu = np.exp(log_mu)
    n = x.size
    s = np.sum(np.log1p(x / mu))
    rho = n / s if s > 0 else RHO_MAX
    rho = min(max(rho, RHO_MIN), RHO_MAX)
    return n * np.log(rho) - n * log_mu - (rho + 1.0) * s, rho


def fit_marks(seq: PointSequence, j: int) -> tuple[float, float]:
    """Maximum-likelihood Pareto ``(rho, mu)`` from channel ``j``'s marks.

    The shape is profiled out in closed form (``rho = n / sum log(1 + x/mu)``,
    clamped to ``(2, 500]``); the scale is found by a log-grid search over
    ``[1e-6, 1e6]`` refined with a bounded Brent step.
    """
    seq = check_sequence(seq)
    if not 0 <= j < seq.k:
        raise DomainError(f"event index {j} out of range")
    x = seq.marks[seq.events == j]
    if x.size < 2:
        raise InsufficientDataError(
            f"channel {j} has {x.size} points; at least 2 are needed")
    lo, hi = np.log(MU_MIN), np.log(MU_MAX)
    grid = np.linspace(lo, hi, 481)
    vals = np.array([_pareto_profile(x, g)[0] for g in grid])
    b = int(np.argmax(vals))
    cands = [grid[b]]
    a_, b_ = grid[max(b - 1, 0)], grid[min(b + 1, grid.size - 1)]
    res = minimize_scalar(lambda g: -_pareto_profile(x, g)[0],
                          bounds=(a_, b_), method="bounded",
                          options={"xatol": 1e-10})
    cands.append(float(res.x))
    best = max(cands, key=lambda g: _pareto_profile(x, g)[0])
    ll, rho = _pareto_profile(x, best)
    return float(rho), float(np.exp(best))


# -- free-parameter layout ----------------------------------------------------

class _Layout:
    """Which coordinates the simplex moves, and how they map into params."""

    def __init__(self, base: ModelParams, active: np.ndarray, cfg: FitConfig):
        self.base = base
        self.k = base.k
        act = [int(j) for j in np.flatnonzero(active)]
        allj = list(range(self.k))
        slots = []  # (field, index tuple list)
        if cfg.shared_eta:
            slots.append(("eta", [(j,) for j in allj]))
        else:
            slots += [("eta", [(j,)]) for j in act]
        if cfg.shared_alpha:
            slots.append(("alpha", [(j,) for j in allj]))
        else:
            slots += [("alpha", [(j,)]) for j in act]
        for j in act:
            for i in act:
                if cfg.diagonal_mic and i != j:
                    continue
                slots.append(("mic", [(j, i)]))
        if not cfg.identity_impact:
            slots += [("phi", [(j,)]) for j in act]
            slots += [("psi", [(j,)]) for j in act]
        if not cfg.two_stage:
            slots += [("rho", [(j,)]) for j in act]
            slots += [("mu", [(j,)]) for j in act]
        self.slots = slots

    @property
    def dim(self):
        return len(self.slots)

    def pack(self, params: ModelParams) -> np.ndarray:
        out = np.empty(self.dim)
        for s, (name, idx) in enumerate(self.slots):
            v = getattr(params, name)[idx[0]]
            out[s] = np.log(v - 2.0) if name == "rho" \
                else np.log(max(v, LOG_FLOOR))
        return out

    def unpack(self, x) -> ModelParams:
        arrs = {n: np.array(getattr(self.base, n)) for n in
                ("eta", "alpha", "mic", "rho", "mu", "phi", "psi")}
        for s, (name, idx) in enumerate(self.slots):
            v = 2.0 + np.exp(x[s]) if name == "rho" else np.exp(x[s])
            for ix in idx:
                arrs[name][ix] = v
        return ModelParams(**arrs)


def initial_params(seq: PointSequence, cfg: FitConfig) -> tuple[ModelParams, np.ndarray]:
    """Starting point of the search and the mask of optimised channels.

    Channels with fewer than two points are pinned to simple defaults.
    """
    k, T = seq.k, seq.duration
    counts = seq.counts()
    active = counts >= 2
    eta = np.where(active, 0.5 * counts / T, counts / T)
    if cfg.shared_eta:
        eta = np.full(k, 0.5 * counts.mean() / T)
    alpha = np.ones(k)
    off = 0.0 if cfg.diagonal_mic else 0.01
    mic = np.full((k, k), off)
    for j in range(k):
        mic[j, j] = 0.3 if active[j] else 0.01
    rho, mu = np.full(k, 3.0), np.ones(k)
    for j in range(k):
        if active[j]:
            rho[j], mu[j] = fit_marks(seq, j)
        elif counts[j] == 1:
            mu[j] = max(2.0 * float(seq.marks[seq.events == j][0]), MU_MIN)
    if cfg.identity_impact:
        phi, psi = np.zeros(k), np.ones(k)
    else:
        phi, psi = np.ones(k), np.full(k, 0.1)
    params = ModelParams(eta=eta, alpha=alpha, mic=mic, rho=rho, mu=mu,
                         phi=phi, psi=psi)
    return params, active


def _initial_simplex(x0, step=0.5):
    n = x0.size
    sim = np.tile(x0, (n + 1, 1))
    sim[1:] += step * np.eye(n)
    return sim


class _TraceRecorder:
    """Simplex callback keeping every 100th best objective."""

    def __init__(self, trace, offset, every=100):
        self.trace, self.it, self.every = trace, offset, every

    def __call__(self, intermediate_result):
        self.it += 1
        if self.it % self.every == 0:
            self.trace.append((self.it, -float(intermediate_result.fun)))


def fit(seq: PointSequence, config: FitConfig | None = None) -> FitResult:
    """Maximise the penalised log-likelihood over all model parameters.

    With ``two_stage`` the Pareto mark parameters come from
    :func:`fit_marks` and stay fixed while the temporal parameters are
    searched; otherwise all are searched jointly. The best point over the
    initial run and ``restarts`` jittered restarts is returned.
    """
    cfg = config or FitConfig()
    seq = check_sequence(seq)
    if len(seq) < 2 or not np.any(seq.counts() >= 2):
        raise DegenerateDataError("no channel has two or more points")
    base, active = initial_params(seq, cfg)
    layout = _Layout(base, active, cfg)
    reg, margin = cfg.reg_weight, cfg.stability_margin

    def negobj(x):
        try:
            p = layout.unpack(x)
        except InvalidParameterError:
            return np.inf
        val = _penalized(p, seq, reg, margin)
        return -val if np.isfinite(val) else np.inf

    x0 = layout.pack(base)
    rng = np.random.default_rng(cfg.seed)
    trace = []
    iterations = 0
    converged = False

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        init_f = negobj(x0)
        best_x, best_f = x0.copy(), init_f
        trace.append((0, -init_f))
        if layout.dim > 0:
            for run in range(cfg.restarts + 1):
                start = x0 if run == 0 else \
                    best_x + rng.normal(0.0, 0.1, size=layout.dim)
                res = minimize(
                    negobj, start, method="Nelder-Mead",
                    callback=_TraceRecorder(trace, iterations),
                    options={"maxiter": cfg.max_iters,
                             "maxfev": 10 * cfg.max_iters,
                             "xatol": cfg.tolerance, "fatol": cfg.tolerance,
                             "initial_simplex": _initial_simplex(start)})
                iterations += int(res.nit)
                if res.fun < best_f or (run == 0 and res.fun <= best_f):
                    best_x, best_f = np.array(res.x), float(res.fun)
                    converged = bool(res.success)
                trace.append((iterations, -best_f))
        else:
            converged = True

    params = layout.unpack(best_x)
    r = spectral_radius(params.mic)
    if r >= margin:
        params = params.replace(mic=params.mic * (0.999 * margin / r))
        best_f = -_penalized(params, seq, reg, margin)
        if not best_f <= init_f:
            params, best_f = base, init_f
    return FitResult(params=params, objective=-best_f, iterations=iterations,
                     converged=converged, trace=trace, variant=cfg.variant)
