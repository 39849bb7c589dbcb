"""Ranking metrics over binary relevance, judgment files and aggregate reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidJudgment, MissingJudgment, UndefinedBase

RELEVANCE_TYPES = ("sem", "geo_aus", "geo_vic")
METRICS = ("mrr", "ndcg", "map", "hr", "classical_map")


def _top(rels: Sequence[int], k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.asarray(rels[:k], dtype=bool)


def hr_at_k(rels: Sequence[int], k: int) -> int:
    return int(_top(rels, k).any())


def mrr_at_k(rels: Sequence[int], k: int) -> float:
    hits = np.flatnonzero(_top(rels, k))
    return 1.0 / (hits[0] + 1) if hits.size else 0.0


def ndcg_at_k(rels: Sequence[int], k: int) -> float:
    """Binary-gain nDCG; the ideal list holds the relevant items found in the top k."""
    r = _top(rels, k)
    n_rel = int(r.sum())
    if n_rel == 0:
        return 0.0
    discounts = 1.0 / np.log2(np.arange(2, r.size + 2))
    return float(discounts[r].sum() / discounts[:n_rel].sum())


def precision_at_k(rels: Sequence[int], k: int) -> float:
    return float(_top(rels, k).sum()) / k


def average_precision_at_k(rels: Sequence[int], k: int) -> float:
    """Classical AP over the top k (mean of precision at each relevant rank)."""
    r = _top(rels, k)
    hits = np.flatnonzero(r)
    if not hits.size:
        return 0.0
    return float(np.mean([(i + 1) / (h + 1) for i, h in enumerate(hits)]))


def map_at_k(lists: Iterable[Sequence[int]], k: int) -> float:
    """Mean of P@k over queries (the table convention, not classical MAP)."""
    values = [precision_at_k(r, k) for r in lists]
    return float(np.mean(values)) if values else 0.0


def delta_hr(hr_current: float, hr_previous: float) -> float:
    """Signed relative change of hit ratio between consecutive modules."""
    if hr_previous == 0:
        raise UndefinedBase("previous hit ratio is zero")
    return (hr_current - hr_previous) / hr_previous


# --- judgments and aggregation ----------------------------------------------

@dataclass(frozen=True)
class RelevanceJudgment:
    query_id: str
    item_id: str
    sem: int = 0
    geo_aus: int = 0
    geo_vic: int = 0

    def __post_init__(self):
        for name in RELEVANCE_TYPES:
            if getattr(self, name) not in (0, 1):
                raise InvalidJudgment(f"{self.query_id}/{self.item_id}: {name} must be 0 or 1")
        if self.geo_vic and not self.geo_aus:
            raise InvalidJudgment(f"{self.query_id}/{self.item_id}: geo_vic=1 requires geo_aus=1")


@dataclass(frozen=True)
class QueryMeta:
    query_id: str
    kg_extracted: bool
    origin_mentioned: bool

    def __post_init__(self):
        if self.origin_mentioned and not self.kg_extracted:
            raise InvalidJudgment(f"{self.query_id}: origin_mentioned requires kg_extracted")


@dataclass
class MetricsReport:
    k: int
    n: int
    n_star: int
    scores: dict[str, dict[str, float]] = field(default_factory=dict)
    starred: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"k": self.k, "n": self.n, "n_star": self.n_star,
                "scores": self.scores, "starred": self.starred}

    def rows(self) -> list[dict]:
        """Flat table rows: one per relevance type with all and starred metrics."""
        out = []
        for t in RELEVANCE_TYPES:
            row = {"type": t}
            row.update({m: self.scores.get(t, {}).get(m) for m in METRICS})
            row.update({m + "*": self.starred.get(t, {}).get(m) for m in METRICS})
            out.append(row)
        return out


def read_judgments(lines: Iterable[str]) -> dict[tuple[str, str], RelevanceJudgment]:
    out = {}
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        try:
            j = RelevanceJudgment(str(rec["query_id"]), str(rec["item_id"]),
                                  int(rec.get("sem", 0)), int(rec.get("geo_aus", 0)),
                                  int(rec.get("geo_vic", 0)))
        except KeyError as exc:
            raise InvalidJudgment(f"line {n}: missing {exc}") from None
        out[(j.query_id, j.item_id)] = j
    return out


def read_meta(lines: Iterable[str]) -> dict[str, QueryMeta]:
    out = {}
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        m = QueryMeta(str(rec["query_id"]), bool(rec["kg_extracted"]), bool(rec["origin_mentioned"]))
        out[m.query_id] = m
    return out


def relevance_lists(ranking: Sequence[str], query_id: str,
                    judgments: Mapping[tuple[str, str], RelevanceJudgment], k: int) -> dict[str, list[int]]:
    out = {t: [] for t in RELEVANCE_TYPES}
    for item in ranking[:k]:
        j = judgments.get((query_id, item))
        if j is None:
            raise MissingJudgment(query_id, item)
        for t in RELEVANCE_TYPES:
            out[t].append(getattr(j, t))
    return out


def _scores(lists: Sequence[Sequence[int]], k: int) -> dict[str, float]:
    if not lists:
        return {m: 0.0 for m in METRICS}
    return {
        "mrr": float(np.mean([mrr_at_k(r, k) for r in lists])),
        "ndcg": float(np.mean([ndcg_at_k(r, k) for r in lists])),
        "map": map_at_k(lists, k),
        "hr": float(np.mean([hr_at_k(r, k) for r in lists])),
        "classical_map": float(np.mean([average_precision_at_k(r, k) for r in lists])),
    }


def aggregate(judgments: Mapping[tuple[str, str], RelevanceJudgment],
              rankings: Mapping[str, Sequence[str]], meta: Mapping[str, QueryMeta],
              k: int = 10) -> MetricsReport:
    """Means over every query in ``meta`` and over the origin-mentioned subset.

    Queries without a ranking (no knowledge graph) count as all-zero lists.
    """
    per_type: dict[str, dict[str, list[int]]] = {t: {} for t in RELEVANCE_TYPES}
    for qid in sorted(meta):
        rels = relevance_lists(rankings.get(qid, ()), qid, judgments, k)
        for t in RELEVANCE_TYPES:
            per_type[t][qid] = rels[t]
    starred_ids = [q for q in sorted(meta) if meta[q].origin_mentioned]
    report = MetricsReport(k=k, n=len(meta), n_star=len(starred_ids))
    for t in RELEVANCE_TYPES:
        report.scores[t] = _scores(list(per_type[t].values()), k)
        report.starred[t] = _scores([per_type[t][q] for q in starred_ids], k)
    return report


def relevance_grid(judgments: Mapping[tuple[str, str], RelevanceJudgment],
                   rankings: Mapping[str, Sequence[str]], k: int, kind: str) -> dict:
    """Per-query, per-rank relevance matrix (queries x ranks), missing ranks as -1."""
    qids = sorted(rankings)
    grid = []
    for q in qids:
        row = [getattr(judgments[(q, item)], kind) for item in rankings[q][:k]]
        grid.append(row + [-1] * (k - len(row)))
    return {"type": kind, "k": k, "queries": qids, "grid": grid}


def accounting(meta: Mapping[str, QueryMeta]) -> dict:
    """Searcher accounting over all queries.

    ``hr_searcher`` counts a query as a hit when its graph mentions the origin;
    queries without a graph are misses, so the denominator is every query.
    ``mentioned_ratio`` is the same count relative to the extracted graphs only.
    """
    n = len(meta)
    extracted = sum(1 for m in meta.values() if m.kg_extracted)
    mentioned = sum(1 for m in meta.values() if m.origin_mentioned)
    return {
        "n": n,
        "extracted": extracted,
        "mentioned": mentioned,
        "extracted_ratio": extracted / n if n else None,
        "hr_searcher": mentioned / n if n else None,
        "mentioned_ratio": mentioned / extracted if extracted else None,
    }


def delta_hr_series(series: Mapping[str, float]) -> dict[str, float | None]:
    """Relative change between consecutive modules in insertion order; None where undefined."""
    names = list(series)
    out: dict[str, float | None] = {}
    for prev, cur in zip(names, names[1:]):
        try:
            out[f"{cur}/{prev}"] = delta_hr(series[cur], series[prev])
        except UndefinedBase:
            out[f"{cur}/{prev}"] = None
    return out


def _fmt(x) -> str:
    return "" if x is None else f"{x:.3f}"


def report_table(report: MetricsReport) -> str:
    cols = ["type"] + list(METRICS) + [m + "*" for m in METRICS]
    lines = ["\t".join(cols)]
    for row in report.rows():
        lines.append("\t".join([row["type"]] + [_fmt(row[c]) for c in cols[1:]]))
    return "\n".join(lines) + "\n"
