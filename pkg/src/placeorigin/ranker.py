"""Late-interaction (MaxSim) scoring and top-k ranking over a clustered index."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .encoders import Encoder
from .errors import DimensionMismatch, EmptyEmbedding, EncoderFailure
from .index import ClusteredIndex

DEFAULT_K_RANKER = 10
EXHAUSTIVE_LIMIT = 1000


@dataclass(frozen=True)
class RankedCandidate:
    subject: str
    score: float
    rank: int

    def to_record(self) -> dict:
        return asdict(self)


def score_maxsim(query_embs: np.ndarray, doc_embs: np.ndarray) -> float:
    """Sum over query tokens of the best cosine match among document tokens."""
    q = np.asarray(query_embs, dtype=np.float64)
    d = np.asarray(doc_embs, dtype=np.float64)
    if q.ndim != 2 or d.ndim != 2 or q.shape[0] == 0 or d.shape[0] == 0:
        raise EmptyEmbedding("MaxSim needs non-empty 2-D query and document matrices")
    if q.shape[1] != d.shape[1]:
        raise DimensionMismatch(f"query dim {q.shape[1]} != document dim {d.shape[1]}")
    return float((q @ d.T).max(axis=1).sum())


def default_probe(n_docs: int, n_clusters: int) -> int:
    if n_docs <= EXHAUSTIVE_LIMIT:
        return n_clusters
    return max(1, math.ceil(math.sqrt(n_clusters)))


SCORE_DECIMALS = 9


def order_candidates(scored: Sequence[tuple[str, float]], k: int) -> list[RankedCandidate]:
    # scores equal up to float noise count as ties, broken by subject
    ordered = sorted(scored, key=lambda t: (-round(t[1], SCORE_DECIMALS), t[0]))[:k]
    return [RankedCandidate(s, float(v), r) for r, (s, v) in enumerate(ordered, start=1)]


def rank_top_k(question: str, index: ClusteredIndex, encoder: Encoder, k_ranker: int = DEFAULT_K_RANKER,
               probe_clusters: int | None = None) -> list[RankedCandidate]:
    """Encode ``question``, probe the nearest clusters and rank their members by MaxSim.

    Clusters are ordered by the dot product between the mean query token and
    each centroid. With every cluster probed the result is exhaustive.
    """
    if k_ranker < 1:
        raise ValueError("k_ranker must be >= 1")
    if len(index) == 0:
        raise ValueError("index is empty")
    try:
        q = encoder.encode(question)
    except EncoderFailure:
        raise
    except Exception as exc:
        raise EncoderFailure(str(exc)) from exc
    if q.shape[0] == 0:
        raise EmptyEmbedding("question encodes to no tokens")
    probe = default_probe(len(index), index.n_clusters) if probe_clusters is None else probe_clusters
    probe = max(1, min(probe, index.n_clusters))
    if probe == index.n_clusters:
        members = range(len(index))
    else:
        sims = index.centroids @ q.mean(0)
        chosen = sorted(range(index.n_clusters), key=lambda c: (-sims[c], c))[:probe]
        members = sorted(i for c in chosen for i in index.members(c))
    scored = [(index.docs[i].subject, score_maxsim(q, index.embeddings[i])) for i in members]
    return order_candidates(scored, k_ranker)


def write_ranked(cands: Sequence[RankedCandidate], fh) -> None:
    for c in cands:
        fh.write(json.dumps(c.to_record(), sort_keys=True) + "\n")


def read_ranked(fh) -> list[RankedCandidate]:
    return [RankedCandidate(**json.loads(line)) for line in fh if line.strip()]
