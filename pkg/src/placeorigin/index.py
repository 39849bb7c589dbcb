"""Subject documents and a clustered embedding index over them."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rdfxml
from .encoders import Encoder
from .errors import EncoderFailure
from .rdfxml import PrefixMap
from .search import KGSnapshot

DOC_TOKEN_CAP = 256


@dataclass(frozen=True)
class TripleDocument:
    subject: str
    text: str
    token_count: int
    truncated: bool = False
    triple_count: int = 0


def chunk_by_subject(s: KGSnapshot, encoder: Encoder, pm: PrefixMap | None = None,
                     token_cap: int = DOC_TOKEN_CAP) -> list[TripleDocument]:
    """One document per subject; ``token_count`` is capped at ``token_cap`` encoder tokens."""
    fragments = rdfxml.subject_fragments(list(s.triples), pm)
    per_subject: dict[str, int] = {}
    for t in s.triples:
        per_subject[t.subject] = per_subject.get(t.subject, 0) + 1
    docs = []
    for subject, text in fragments.items():
        n = len(encoder.tokenize(text))
        docs.append(TripleDocument(subject, text, min(n, token_cap), n > token_cap, per_subject[subject]))
    return docs


def default_clusters(n_docs: int) -> int:
    return max(1, math.ceil(math.sqrt(n_docs)))


def kmeans(x: np.ndarray, k: int, seed: int = 0, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding; returns (centroids, labels).

    Empty clusters are re-seeded with the point farthest from its centroid.
    """
    n = len(x)
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(1)
    for c in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        centroids[c] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[c]) ** 2).sum(1))
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        new = dist.argmin(1)
        for c in range(k):
            if not np.any(new == c):
                far = int(dist[np.arange(n), new].argmax())
                new[far] = c
        if np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centroids[c] = x[labels == c].mean(0)
    return centroids, labels


@dataclass
class ClusteredIndex:
    docs: list[TripleDocument]
    embeddings: list[np.ndarray]
    centroids: np.ndarray
    assignment: np.ndarray
    encoder_name: str = ""

    def __len__(self):
        return len(self.docs)

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def members(self, cluster: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.assignment == cluster)]

    def partition(self) -> set[frozenset[str]]:
        groups: dict[int, set[str]] = {}
        for d, c in zip(self.docs, self.assignment):
            groups.setdefault(int(c), set()).add(d.subject)
        return {frozenset(g) for g in groups.values()}

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.save(d / "centroids.npy", self.centroids)
        np.savez(d / "embeddings.npz", **{f"doc{i}": e for i, e in enumerate(self.embeddings)})
        manifest = {
            "encoder": self.encoder_name,
            "assignment": [int(a) for a in self.assignment],
            "docs": [{"subject": x.subject, "text": x.text, "token_count": x.token_count,
                      "truncated": x.truncated, "triple_count": x.triple_count} for x in self.docs],
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", "utf-8")
        return d

    @classmethod
    def load(cls, directory) -> "ClusteredIndex":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text("utf-8"))
        with np.load(d / "embeddings.npz") as z:
            embeddings = [z[f"doc{i}"] for i in range(len(manifest["docs"]))]
        return cls(docs=[TripleDocument(**x) for x in manifest["docs"]], embeddings=embeddings,
                   centroids=np.load(d / "centroids.npy"),
                   assignment=np.asarray(manifest["assignment"], dtype=int),
                   encoder_name=manifest.get("encoder", ""))


def build_index(docs: Sequence[TripleDocument], encoder: Encoder, n_clusters: int | None = None,
                seed: int = 0) -> ClusteredIndex:
    """Encode documents and cluster their mean-pooled embeddings.

    Documents are processed in subject order, so the resulting partition does
    not depend on the order of ``docs``.
    """
    if not docs:
        raise ValueError("cannot index an empty document list")
    docs = sorted(docs, key=lambda x: x.subject)
    k = default_clusters(len(docs)) if n_clusters is None else n_clusters
    if k < 1:
        raise ValueError("n_clusters must be >= 1")
    try:
        mats = encoder.encode_batch([x.text for x in docs])
    except EncoderFailure:
        raise
    except Exception as exc:
        raise EncoderFailure(str(exc)) from exc
    embeddings = []
    for x, m in zip(docs, mats):
        if m.shape[0] == 0:
            raise EncoderFailure("empty embedding", doc_id=x.subject)
        embeddings.append(np.asarray(m, dtype=np.float64))
    pooled = np.vstack([m.mean(0) for m in embeddings])
    if len(docs) <= k:
        centroids, labels = pooled.copy(), np.arange(len(docs))
    else:
        centroids, labels = kmeans(pooled, k, seed)
    return ClusteredIndex(list(docs), embeddings, centroids, labels, repr(encoder))
