"""Hourly forecasting tasks, baseline predictors and the task runner.

Every predictor yields a score matrix ``S`` aligned with a
:class:`ForecastFrame`: ``S[b]`` scores the channels for bin ``b + 1``
using only data observed before the end of bin ``b``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .core import ModelParams, PointSequence
from .exceptions import ConfigError, DomainError, InsufficientDataError
from .ingestion import tokenize
from .intensity import intensity_at_times
from .metrics import (
    accuracy_top1,
    mrr,
    ndcg,
    rank_labels,
    rbo,
    wilcoxon_signed_rank,
)
from .validation import check_sequence, check_series

RIDGE = 1e-6
BASELINES = ("NF", "AR", "ARD", "VAR")
MODEL_METHODS = ("JIM", "JIM-G", "IIM-approx")
METHODS = ("ORACLE",) + BASELINES + MODEL_METHODS


@dataclass(frozen=True)
class ForecastFrame:
    """Per-bin counts for each channel (event ids or query strings)."""

    series: np.ndarray
    labels: tuple
    t0: float
    bin_width: float = 1.0
    channel_kind: str = "event"

    def __post_init__(self):
        s = np.asarray(self.series)
        if s.ndim != 2 or s.shape[1] != len(self.labels):
            raise DomainError("series must be bins x channels")
        if np.any(s < 0):
            raise DomainError("counts must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.series.shape[0]

    def bin_end(self, b) -> np.ndarray:
        return self.t0 + (np.asarray(b) + 1) * self.bin_width

    def bin_of(self, t) -> np.ndarray:
        b = np.floor((np.asarray(t, dtype=float) - self.t0) / self.bin_width)
        return np.clip(b.astype(np.int64), 0, self.n_bins - 1)


def _n_bins(seq: PointSequence, bin_width: float) -> int:
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    return max(1, int(np.ceil(seq.duration / bin_width - 1e-9)))


def bin_counts(seq: PointSequence, bin_width: float = 1.0) -> ForecastFrame:
    """Count points per (bin, event) over the observation window."""
    seq = check_sequence(seq)
    nb = _n_bins(seq, bin_width)
    frame = ForecastFrame(np.zeros((nb, seq.k), np.int64), tuple(range(seq.k)),
                          seq.t_start, bin_width, "event")
    np.add.at(frame.series, (frame.bin_of(seq.times), seq.events), 1)
    return frame


def bin_query_counts(seq: PointSequence, texts: Sequence[str],
                     bin_width: float = 1.0,
                     labels: Sequence[str] | None = None) -> ForecastFrame:
    """Count points per (bin, query string).

    ``labels`` defaults to every distinct text in sorted order; points whose
    text is not a label are ignored.
    """
    seq = check_sequence(seq)
    if len(texts) != len(seq):
        raise DomainError("one text per point is required")
    labels = tuple(sorted(set(texts))) if labels is None else tuple(labels)
    index = {q: c for c, q in enumerate(labels)}
    nb = _n_bins(seq, bin_width)
    frame = ForecastFrame(np.zeros((nb, len(labels)), np.int64), labels,
                          seq.t_start, bin_width, "query")
    cols = np.array([index.get(q, -1) for q in texts], dtype=np.int64)
    keep = cols >= 0
    np.add.at(frame.series, (frame.bin_of(seq.times[keep]), cols[keep]), 1)
    return frame


# -- model-based scores -------------------------------------------------------

def jim_scores(params: ModelParams, seq: PointSequence, bin_end_time: float) -> np.ndarray:
    """Every event's intensity at ``bin_end_time``, counting points up to it."""
    return intensity_at_times(params, seq, [bin_end_time], closed=True)[0]


def _decayed_shares(seq, texts, at_time, half_life):
    # {event: {query: decayed count share}} from points strictly before at_time.
    n = int(np.searchsorted(seq.times, at_time, side="left"))
    w = 0.5 ** ((at_time - seq.times[:n]) / half_life)
    acc = defaultdict(lambda: defaultdict(float))
    for wt, d, q in zip(w, seq.events[:n], texts[:n]):
        acc[int(d)][q] += wt
    out = {}
    for d, qs in acc.items():
        tot = sum(qs.values())
        if tot > 0:
            out[d] = {q: v / tot for q, v in qs.items()}
    return out


def query_level_scores(params: ModelParams, seq: PointSequence,
                       texts: Sequence[str], bin_end_time: float,
                       decay_half_life: float = 24.0,
                       inclusive: bool = True) -> dict[str, float]:
    """Split each event's intensity across its queries by decayed frequency.

    ``score(q) = lambda_e(t) * share_e(q)``, where ``share_e(q)`` is q's
    exponentially decayed occurrence count under event ``e`` divided by the
    decayed total of ``e``. A query seen under several events sums its parts.
    """
    if not decay_half_life > 0:
        raise DomainError("decay_half_life must be positive")
    seq = check_sequence(seq, k=params.k)
    lam = intensity_at_times(params, seq, [bin_end_time], closed=inclusive)[0]
    at = np.nextafter(bin_end_time, np.inf) if inclusive else bin_end_time
    shares = _decayed_shares(seq, list(texts), at, decay_half_life)
    scores: dict[str, float] = defaultdict(float)
    for d, qs in shares.items():
        for q, s in qs.items():
            scores[q] += lam[d] * s
    return dict(scores)


# -- baseline estimators ------------------------------------------------------

def _solve(X, y):
    # OLS; ridge loading on a rank-deficient design.
    if np.linalg.matrix_rank(X) < X.shape[1]:
        A = X.T @ X + RIDGE * np.eye(X.shape[1])
        return np.linalg.solve(A, X.T @ y)
    return np.linalg.lstsq(X, y, rcond=None)[0]


def _lag_design(Y, order):
    # Rows t = order-1 .. T-1: [1, y_t, y_{t-1}, ..., y_{t-order+1}] (all channels).
    T = Y.shape[0]
    blocks = [np.ones((T - order + 1, 1))]
    for lag in range(order):
        blocks.append(Y[order - 1 - lag:T - lag])
    return np.hstack(blocks)


class NaiveFrequency(BaseEstimator, RegressorMixin):
    """Predicts next-bin counts as the current bin's counts."""

    def fit(self, Y, y=None):
        Y = check_series(Y)
        self.n_channels_ = Y.shape[1]
        return self

    def predict(self, Y):
        return check_series(Y).copy()


class VectorAutoRegression(BaseEstimator, RegressorMixin):
    """Least-squares VAR(p) with intercept over all channels jointly.

    ``predict(Y)[b]`` forecasts bin ``b + 1`` from rows ``<= b``; rows
    without ``order`` lags of history repeat the current counts. Forecasts
    are clamped at zero.
    """

    def __init__(self, order: int = 3, differenced: bool = False):
        self.order = order
        self.differenced = differenced

    def _min_bins(self, k):
        return k * self.order + 2 + int(self.differenced)

    def _transform(self, Y):
        return np.diff(Y, axis=0) if self.differenced else Y

    def fit(self, Y, y=None):
        Y = check_series(Y)
        if self.order < 1:
            raise ConfigError("order must be >= 1")
        if Y.shape[0] < self._min_bins(Y.shape[1]):
            raise InsufficientDataError(
                f"need {self._min_bins(Y.shape[1])} training bins, got {Y.shape[0]}")
        Z = self._transform(Y)
        X = _lag_design(Z[:-1], self.order)
        self.coef_ = _solve(X, Z[self.order:])
        self.n_channels_ = Y.shape[1]
        return self

    def predict(self, Y):
        Y = check_series(Y)
        if Y.shape[1] != self.n_channels_:
            raise DomainError("channel count differs from training")
        out = Y.copy()
        Z = self._transform(Y)
        off = int(self.differenced)
        if Z.shape[0] >= self.order:
            pred = _lag_design(Z, self.order) @ self.coef_
            rows = np.arange(self.order - 1, Z.shape[0]) + off
            out[rows] = Y[rows] + pred if self.differenced else pred
        return np.maximum(out, 0.0)


class AutoRegression(BaseEstimator, RegressorMixin):
    """Per-channel AR(p) with intercept, optionally on first differences."""

    def __init__(self, order: int = 3, differenced: bool = False):
        self.order = order
        self.differenced = differenced

    def fit(self, Y, y=None):
        Y = check_series(Y)
        self.models_ = [VectorAutoRegression(self.order, self.differenced)
                        .fit(Y[:, [c]]) for c in range(Y.shape[1])]
        self.n_channels_ = Y.shape[1]
        return self

    def predict(self, Y):
        Y = check_series(Y)
        if Y.shape[1] != self.n_channels_:
            raise DomainError("channel count differs from training")
        return np.hstack([m.predict(Y[:, [c]]) for c, m in enumerate(self.models_)])


def baseline_nf(frame: ForecastFrame, b: int) -> np.ndarray:
    """Naive forecast for bin ``b + 1``: the counts of bin ``b``."""
    if not 0 <= b < frame.n_bins:
        raise DomainError(f"bin {b} out of range")
    return frame.series[b].astype(float)


def baseline_ar(frame: ForecastFrame, order: int = 3, differenced: bool = False,
                train_bins: int | None = None) -> np.ndarray:
    train_bins = frame.n_bins if train_bins is None else train_bins
    model = AutoRegression(order, differenced).fit(frame.series[:train_bins])
    return model.predict(frame.series)


def baseline_var(frame: ForecastFrame, order: int = 3,
                 train_bins: int | None = None) -> np.ndarray:
    train_bins = frame.n_bins if train_bins is None else train_bins
    model = VectorAutoRegression(order).fit(frame.series[:train_bins])
    return model.predict(frame.series)


# -- query auto-completion ----------------------------------------------------

def first_word(text: str) -> str | None:
    toks = tokenize(text)
    return toks[0] if toks else None


def qac_rank(scores: Mapping[str, float], prefix: str, actual: str) -> float:
    """Reciprocal rank of ``actual`` among known queries starting with ``prefix``.

    Candidates are ordered by descending score, ties by query text. Returns
    0 when ``actual`` is not a candidate.
    """
    cands = [q for q in scores if first_word(q) == prefix]
    if actual not in cands:
        return 0.0
    cands.sort(key=lambda q: (-scores[q], q))
    return 1.0 / (cands.index(actual) + 1)


# -- task runner --------------------------------------------------------------

@dataclass
class ForecastConfig:
    bin_width: float = 1.0
    split_fraction: float = 0.8
    ar_order: int = 3
    rbo_p: float = 0.9
    decay_half_life: float = 24.0
    query_top_n: int = 50

    def __post_init__(self):
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split_fraction must lie in (0, 1)")
        if not self.bin_width > 0 or self.ar_order < 1 or not 0 < self.rbo_p < 1:
            raise ConfigError("invalid bin_width, ar_order or rbo_p")


def split_bin(frame: ForecastFrame, fraction: float) -> int:
    """First test bin of a chronological split at ``fraction`` of the span."""
    b = int(np.floor(fraction * frame.n_bins + 1e-9))
    if not 1 <= b < frame.n_bins:
        raise InsufficientDataError("split leaves an empty train or test span")
    return b


def _model_scores(params, seq, texts, frame, rows, cfg):
    ends = frame.bin_end(rows)
    if frame.channel_kind == "event":
        return intensity_at_times(params, seq, ends, closed=False)
    out = np.zeros((rows.size, len(frame.labels)))
    col = {q: c for c, q in enumerate(frame.labels)}
    for r, t in enumerate(ends):
        sc = query_level_scores(params, seq, texts, t, cfg.decay_half_life,
                                inclusive=False)
        for q, v in sc.items():
            if q in col:
                out[r, col[q]] = v
    return out


def predict_scores(method: str, frame: ForecastFrame, first_test: int,
                   cfg: ForecastConfig, params: ModelParams | None = None,
                   seq: PointSequence | None = None,
                   texts: Sequence[str] | None = None) -> np.ndarray:
    """Score rows ``first_test - 1 .. n_bins - 2`` (forecasting bins first_test..)."""
    rows = np.arange(first_test - 1, frame.n_bins - 1)
    Y = frame.series.astype(float)
    if method == "ORACLE":
        return Y[rows + 1]
    if method == "NF":
        return Y[rows]
    if method in ("AR", "ARD"):
        est = AutoRegression(cfg.ar_order, differenced=method == "ARD")
        return est.fit(Y[:first_test]).predict(Y)[rows]
    if method == "VAR":
        return VectorAutoRegression(cfg.ar_order).fit(Y[:first_test]).predict(Y)[rows]
    if method in MODEL_METHODS:
        if params is None or seq is None:
            raise ConfigError(f"method {method} needs fitted parameters")
        return _model_scores(params, seq, texts, frame, rows, cfg)
    raise ConfigError(f"unknown method {method!r}")


@dataclass
class PredictionRun:
    task: int
    method: str
    split_time: float
    labels: tuple
    bins: np.ndarray          # bin b whose end is the forecast origin
    predicted: np.ndarray     # scores for bin b + 1
    actual: np.ndarray        # counts of bin b + 1
    per_bin: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    rows: list = field(default_factory=list)


def _reduce_ranking(run: PredictionRun, cfg: ForecastConfig):
    labels = list(run.labels)
    top_pred, top_act, hits, nd, rb = [], [], [], [], []
    informative = []
    for b, p, a in zip(run.bins, run.predicted, run.actual):
        pr = rank_labels(labels, p)
        ar = rank_labels(labels, a)
        top_pred.append(pr.items[0])
        top_act.append(ar.items[0])
        hits.append(float(pr.items[0] == ar.items[0]))
        gains = dict(zip(labels, a))
        nd.append(ndcg(pr, gains))
        depth = len(labels)
        rb.append(rbo(pr.items, ar.items, cfg.rbo_p) / (1.0 - cfg.rbo_p ** depth))
        informative.append(bool(np.any(a > 0)))
        for c, q in enumerate(labels):
            run.rows.append((int(b), run.method, run.task, q, float(p[c]), float(a[c])))
    info = np.array(informative, bool)
    n = len(hits)
    if run.task in (1, 3):
        run.per_bin["accuracy"] = np.array(hits)
        run.summary.append(("accuracy", accuracy_top1(top_pred, top_act), n))
        if info.any():
            run.summary.append(("accuracy_informative",
                                float(np.mean(np.array(hits)[info])), int(info.sum())))
    else:
        run.per_bin["ndcg"] = np.array(nd)
        run.per_bin["rbo"] = np.array(rb)
        run.summary.append(("ndcg", float(np.mean(nd)), n))
        if info.any():
            run.summary.append(("ndcg_informative",
                                float(np.mean(np.array(nd)[info])), int(info.sum())))
        run.summary.append(("rbo", float(np.mean(rb)), n))


def run_task(task: int, method: str, seq: PointSequence,
             texts: Sequence[str] | None = None,
             params: ModelParams | None = None,
             cfg: ForecastConfig | None = None) -> PredictionRun:
    """Run one of the five forecasting tasks for one method.

    Tasks 1 and 2 rank events, 3 and 4 rank query strings, 5 is query
    auto-completion scored by reciprocal rank. The first ``split_fraction``
    of the bins is training data; each test bin is forecast from data
    strictly before its start.
    """
    cfg = cfg or ForecastConfig()
    seq = check_sequence(seq)
    if task not in (1, 2, 3, 4, 5):
        raise ConfigError(f"unknown task {task}")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if task >= 3 and texts is None:
        raise ConfigError(f"task {task} needs query texts")

    ev = bin_counts(seq, cfg.bin_width)
    first_test = split_bin(ev, cfg.split_fraction)
    split_time = float(ev.t0 + first_test * cfg.bin_width)
    if task in (1, 2):
        frame = ev
    else:
        frame = _query_frame(seq, texts, cfg, split_time)

    scores = predict_scores(method, frame, first_test, cfg, params, seq, texts)
    rows = np.arange(first_test - 1, frame.n_bins - 1)
    run = PredictionRun(task, method, split_time, frame.labels, rows,
                        np.maximum(scores, 0.0),
                        frame.series[rows + 1].astype(float))
    if task < 5:
        _reduce_ranking(run, cfg)
    else:
        _reduce_qac(run, seq, texts, frame, first_test)
    return run


def _query_frame(seq, texts, cfg, split_time):
    n_train = int(np.searchsorted(seq.times, split_time, side="left"))
    freq = defaultdict(int)
    for q in texts[:n_train]:
        freq[q] += 1
    top = sorted(freq, key=lambda q: (-freq[q], q))[:cfg.query_top_n]
    if not top:
        raise InsufficientDataError("no queries in the training span")
    return bin_query_counts(seq, texts, cfg.bin_width, labels=sorted(top))


def _reduce_qac(run, seq, texts, frame, first_test):
    labels = list(frame.labels)
    rr = []
    test_idx = np.flatnonzero(seq.times >= run.split_time)
    point_bins = frame.bin_of(seq.times[test_idx])
    for i, b in zip(test_idx, point_bins):
        text = texts[i]
        prefix = first_word(text)
        if prefix is None:
            continue
        r = int(b) - first_test   # row forecasting bin b
        scores = dict(zip(labels, run.predicted[r]))
        val = qac_rank(scores, prefix, text)
        rr.append(val)
        run.rows.append((int(b) - 1, run.method, 5, text, val,
                         float(text in scores)))
    if not rr:
        raise InsufficientDataError("no test queries for auto-completion")
    run.per_bin["rr"] = np.array(rr)
    run.summary.append(("mrr", mrr(rr), len(rr)))


def compare_methods(a: PredictionRun, b: PredictionRun) -> list[tuple]:
    """Wilcoxon signed-rank comparison on every shared per-bin metric."""
    out = []
    for name in a.per_bin:
        if name in b.per_bin and len(a.per_bin[name]) == len(b.per_bin[name]):
            res = wilcoxon_signed_rank(a.per_bin[name], b.per_bin[name])
            out.append((name, res))
    return out
