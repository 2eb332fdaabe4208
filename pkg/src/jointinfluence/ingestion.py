"""Event and query-log parsing, intent-match scoring and dataset assembly."""
from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import PointSequence
from .exceptions import ConfigError, DomainError, EmptyResultError

SECONDS_PER_HOUR = 3600.0
TIE_NUDGE = 1e-9
DEFAULT_THRESHOLD = 1.25

_SPLIT = re.compile(r"[^0-9a-z]+")


class ParseError(DomainError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path, self.lineno = path, lineno


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop tokens under 2 chars."""
    return [t for t in _SPLIT.split(text.lower()) if len(t) >= 2]


@dataclass(frozen=True)
class EventRecord:
    id: int
    title: str
    body: str
    timestamp: int

    def __post_init__(self):
        if not self.title.strip():
            raise DomainError(f"event {self.id} has an empty title")

    def terms(self, use_body: bool = False) -> list[str]:
        text = self.title + (" " + self.body if use_body else "")
        return list(dict.fromkeys(tokenize(text)))


@dataclass(frozen=True)
class QueryRecord:
    text: str
    timestamp: int

    def __post_init__(self):
        if not tokenize(self.text):
            raise DomainError(f"query {self.text!r} is empty after normalization")


@dataclass
class SimilarityConfig:
    """Parameters of the weighted BM25 variant.

    ``idf`` and ``avgql`` come from the query corpus
    (:meth:`from_queries`). ``weights`` maps an event id to per-term
    weights; events without an entry get uniform weights.
    """

    k1: float = 1.2
    b: float = 0.75
    avgql: float = 1.0
    idf: Mapping[str, float] = field(default_factory=dict)
    weights: Mapping[int, Mapping[str, float]] = field(default_factory=dict)
    use_body: bool = False

    def __post_init__(self):
        if not self.k1 > 0 or not 0 <= self.b <= 1 or not self.avgql > 0:
            raise ConfigError("need k1 > 0, 0 <= b <= 1 and avgql > 0")

    @classmethod
    def from_queries(cls, query_terms: Iterable[Sequence[str]], **kw) -> "SimilarityConfig":
        """IDF ``log((N+1)/(df+1)) + 1`` and mean query length from a corpus."""
        df = Counter()
        n = 0
        total = 0
        for terms in query_terms:
            n += 1
            total += len(terms)
            df.update(set(terms))
        if n == 0:
            raise EmptyResultError("empty query corpus")
        idf = {t: math.log((n + 1) / (c + 1)) + 1.0 for t, c in df.items()}
        return cls(avgql=max(total / n, 1e-12), idf=idf, **kw)

    def event_weights(self, event: EventRecord) -> dict[str, float]:
        terms = event.terms(self.use_body)
        if event.id in self.weights:
            return dict(self.weights[event.id])
        return {t: 1.0 / len(terms) for t in terms}


def uniform_weights(event_terms: Sequence[str]) -> dict[str, float]:
    terms = list(dict.fromkeys(event_terms))
    return {t: 1.0 / len(terms) for t in terms}


def similarity(event_terms: Sequence[str], weights: Mapping[str, float],
               query_terms: Sequence[str], cfg: SimilarityConfig) -> float:
    """Weighted BM25 score of a query against an event's terms.

    Sums ``w(t) idf(t) tf (k1 + 1) / (tf + k1 (1 - b + b |q| / avgql))`` over
    the distinct event terms; weights must sum to one. Terms missing from
    the IDF table score zero.
    """
    terms = list(dict.fromkeys(event_terms))
    wsum = sum(weights.get(t, 0.0) for t in terms)
    if any(weights.get(t, 0.0) < 0 for t in terms) or abs(wsum - 1.0) > 1e-9:
        raise ConfigError(f"event term weights must be >= 0 and sum to 1, got {wsum}")
    tf = Counter(query_terms)
    norm = cfg.k1 * (1.0 - cfg.b + cfg.b * len(query_terms) / cfg.avgql)
    score = 0.0
    for t in terms:
        f = tf.get(t, 0)
        if f:
            score += (weights[t] * cfg.idf.get(t, 0.0) * f * (cfg.k1 + 1.0)
                      / (f + norm))
    return score


@dataclass(frozen=True)
class JointDataset:
    events: list
    sequence: PointSequence
    texts: tuple

    def __post_init__(self):
        if len(self.texts) != len(self.sequence):
            raise DomainError("one text per point is required")

    @property
    def k(self):
        return self.sequence.k


def build_joint_dataset(events: Sequence[EventRecord],
                        queries: Sequence[QueryRecord],
                        cfg: SimilarityConfig | None = None,
                        threshold: float = DEFAULT_THRESHOLD) -> JointDataset:
    """Score every query against every event and keep the confident matches.

    A query is kept when its best score reaches ``threshold``; its channel
    is the best-scoring event (ties go to the lower event id) and its mark
    that score. Events are indexed in ascending id order. Times become
    hours; equal times are separated by 1e-9 h in input order.
    """
    if not events:
        raise DomainError("no events given")
    events = sorted(events, key=lambda e: e.id)
    if len({e.id for e in events}) != len(events):
        raise DomainError("duplicate event ids")
    qterms = [tokenize(q.text) for q in queries]
    if cfg is None:
        cfg = SimilarityConfig.from_queries(qterms)
    eterms = [e.terms(cfg.use_body) for e in events]
    ewts = [cfg.event_weights(e) for e in events]

    kept = []
    for q, terms in zip(queries, qterms):
        best, best_j = -1.0, -1
        for j, (et, w) in enumerate(zip(eterms, ewts)):
            s = similarity(et, w, terms, cfg)
            if s > best:
                best, best_j = s, j
        if best >= threshold and best > 0:
            kept.append((q.timestamp / SECONDS_PER_HOUR, best_j, best, q.text))
    if not kept:
        raise EmptyResultError(f"no query reached similarity {threshold}")

    kept.sort(key=lambda r: r[0])  # stable: input order among equal times
    times = np.array([r[0] for r in kept])
    for i in range(1, times.size):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + TIE_NUDGE
    t_start = math.floor(kept[0][0])
    t_end = math.ceil(times[-1])
    if t_end <= t_start:
        t_end = t_start + 1
    seq = PointSequence(times, [r[1] for r in kept], [r[2] for r in kept],
                        t_start, t_end, len(events))
    return JointDataset(events=list(events), sequence=seq,
                        texts=tuple(r[3] for r in kept))


# -- file formats -------------------------------------------------------------

def read_events(path) -> list[EventRecord]:
    """Events file: one JSON object per line with id, title, body, timestamp."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                out.append(EventRecord(int(doc["id"]), str(doc["title"]),
                                       str(doc.get("body", "")),
                                       int(doc["timestamp"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    return out


def read_queries(path) -> list[QueryRecord]:
    """Query log: ``query_text<TAB>epoch_seconds`` per line, no header."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.rsplit("\t", 1)
            if len(parts) != 2:
                raise ParseError(path, lineno, "expected two tab-separated columns")
            try:
                out.append(QueryRecord(parts[0], int(parts[1])))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from exc
    return out


def _fmt(v: float) -> float:
    return float(format(v, ".17g"))


def write_dataset(path, seq: PointSequence, texts: Sequence[str] | None = None,
                  extra_header: Mapping | None = None) -> None:
    """Joint dataset: header ``{"k", "t_start", "t_end"}`` then one point per line."""
    texts = texts if texts is not None else [""] * len(seq)
    header = {"k": seq.k, "t_start": seq.t_start, "t_end": seq.t_end}
    if extra_header:
        header.update(extra_header)
    lines = [json.dumps(header)]
    for t, d, x, s in zip(seq.times, seq.events, seq.marks, texts):
        lines.append(json.dumps({"t": _fmt(t), "d": int(d), "x": _fmt(x),
                                 "text": s}, ensure_ascii=False))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path) -> tuple[PointSequence, list[str], dict]:
    """Inverse of :func:`write_dataset`; returns sequence, texts and header."""
    with open(path, encoding="utf-8") as fh:
        lines = [(i, ln) for i, ln in enumerate(fh, 1) if ln.strip()]
    if not lines:
        raise ParseError(path, 1, "empty dataset file")
    try:
        header = json.loads(lines[0][1])
        k, t0, t1 = int(header["k"]), float(header["t_start"]), float(header["t_end"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(path, lines[0][0], f"bad header: {exc}") from exc
    t, d, x, texts = [], [], [], []
    for lineno, line in lines[1:]:
        try:
            doc = json.loads(line)
            t.append(float(doc["t"]))
            d.append(int(doc["d"]))
            x.append(float(doc["x"]))
            texts.append(str(doc.get("text", "")))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    try:
        seq = PointSequence(t, np.array(d, dtype=np.int64), x, t0, t1, k)
    except DomainError as exc:
        raise ParseError(path, 0, str(exc)) from exc
    return seq, texts, header
