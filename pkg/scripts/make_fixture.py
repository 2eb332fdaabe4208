"""Regenerate the bundled example corpus in ``src/jointinfluence/data``.

Query arrivals are drawn from a three-event model so the corpus has
realistic cross-excitation; each arrival becomes a query string built from
the event's vocabulary. A few unrelated queries are mixed in and are
dropped by the similarity threshold.
"""
import json
import os
import sys

import numpy as np

from jointinfluence import ModelParams, SimConfig, simulate

BASE_EPOCH = 1_456_790_400  # 2016-03-01 00:00 UTC
HOURS = 120.0

EVENTS = [
    {"id": 0, "title": "Indiana primary election results",
     "body": "Voters in Indiana cast ballots in the presidential primary."},
    {"id": 1, "title": "Oscar nominations best actress",
     "body": "The academy announced nominations for the awards ceremony."},
    {"id": 2, "title": "Olympic swimming gold medal",
     "body": "A world record fell in the pool at the games."},
]

QUERIES = [
    ["indiana primary results", "indiana election results", "indiana primary",
     "primary election results indiana", "indiana primary election"],
    ["oscar nominations", "best actress oscar", "oscar nominations best actress",
     "oscar actress nominations", "nominations best actress"],
    ["olympic swimming", "swimming gold medal", "olympic gold medal swimming",
     "olympic swimming medal", "gold medal swimming"],
]
NOISE = ["weather tomorrow", "cheap flights", "pizza near me", "bank hours"]


def main(out_dir):
    params = ModelParams(
        eta=[0.6, 0.5, 0.4], alpha=[0.8, 0.6, 1.0],
        mic=[[0.45, 0.10, 0.05], [0.05, 0.40, 0.10], [0.10, 0.05, 0.50]],
        rho=[3.0] * 3, mu=[2.0] * 3, phi=[1.0] * 3, psi=[0.5] * 3)
    seq = simulate(params, SimConfig(0.0, HOURS, seed=7))
    rng = np.random.default_rng(7)
    zipf = np.array([0.4, 0.25, 0.15, 0.12, 0.08])
    rows = []
    for t, d in zip(seq.times, seq.events):
        text = QUERIES[d][rng.choice(5, p=zipf)]
        rows.append((BASE_EPOCH + int(t * 3600), text))
    for t in rng.uniform(0, HOURS, size=40):
        rows.append((BASE_EPOCH + int(t * 3600), NOISE[rng.integers(len(NOISE))]))
    rows.sort()
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "events.jsonl"), "w", newline="\n") as fh:
        for e in EVENTS:
            fh.write(json.dumps({**e, "timestamp": BASE_EPOCH}) + "\n")
    with open(os.path.join(out_dir, "queries.tsv"), "w", newline="\n") as fh:
        for ts, text in rows:
            fh.write(f"{text}\t{ts}\n")
    print(f"{len(rows)} queries ({len(seq)} event-driven)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         os.path.join(os.path.dirname(__file__), "..", "src", "jointinfluence", "data"))
