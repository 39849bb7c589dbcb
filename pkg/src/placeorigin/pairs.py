"""Training-pair synthesis for the ranker: country borders, nearby cities, QALD9 RDF/XML."""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyResult, EndpointError
from .geo import CityNode, SpatialGraph
from .rdfxml import sort_triples

logger = logging.getLogger(__name__)

COUNTRY_QUESTION = "Give a country that shares a border with {country_i}."
COUNTRY_ANSWER = "{country_j} shares a border with {country_i}."
CITY_QUESTION = "Give a city near {city_i} in {country_i}."
CITY_ANSWER = "{city_j} in {country_j} is a neighbor of {city_i} in {country_i}."

_COUNTRY_Q_RE = re.compile(r"^Give a country that shares a border with (?P<country_i>.+)\.$")
_COUNTRY_A_RE = re.compile(r"^(?P<country_j>.+) shares a border with (?P<country_i>.+)\.$")
_CITY_Q_RE = re.compile(r"^Give a city near (?P<city_i>.+) in (?P<country_i>.+)\.$")
_CITY_A_RE = re.compile(
    r"^(?P<city_j>.+) in (?P<country_j>.+) is a neighbor of (?P<city_i>.+) in (?P<country_i>.+)\.$"
)


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class Dataset(str, enum.Enum):
    COUNTRY = "country"
    CITY = "city"
    QALD9_RDF = "qald9_rdf"


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    label: Label
    dataset: Dataset
    seed_trace: tuple[int, int]
    ratio_infeasible: bool = False

    def to_record(self) -> dict:
        rec = {
            "question": self.question,
            "answer": self.answer,
            "label": self.label.value,
            "dataset": self.dataset.value,
            "seed": self.seed_trace[0],
            "draw": self.seed_trace[1],
        }
        if self.ratio_infeasible:
            rec["ratio_infeasible"] = True
        return rec


@dataclass(frozen=True)
class Qald9Record:
    question: str
    sparql: str
    keywords: tuple[str, ...]
    kg_doc: str
    label: Label
    subjects: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "question": self.question,
            "sparql": self.sparql,
            "keywords": list(self.keywords),
            "kg_doc": self.kg_doc,
            "label": self.label.value,
            "dataset": Dataset.QALD9_RDF.value,
            "subjects": list(self.subjects),
        }


def _question_rng(seed: int, key: str) -> np.random.Generator:
    # keyed on the question, not its position, so batch order and parallelism do not matter
    digest = int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "big")
    return np.random.default_rng([int(seed), digest])


def _draw_without_replacement(rng, pool_size: int, count: int, excluded: set[int]) -> list[int]:
    """Uniform sample of ``count`` indices from range(pool_size) minus ``excluded``."""
    if count <= 0:
        return []
    if pool_size - len(excluded) <= 4 * (count + len(excluded)):
        pool = np.array([i for i in range(pool_size) if i not in excluded])
        return [int(x) for x in rng.choice(pool, size=count, replace=False)]
    drawn = rng.choice(pool_size, size=count + len(excluded), replace=False)
    return [int(x) for x in drawn if int(x) not in excluded][:count]


def _canonical(g: SpatialGraph) -> tuple[list[int], dict[int, int]]:
    """Node indices sorted by stable id, and the inverse map, so draws ignore table order."""
    order = sorted(range(len(g.nodes)), key=g.node_key)
    return order, {node: pos for pos, node in enumerate(order)}


def _draw_nodes(g, canon, rng, count: int, excluded: set[int]) -> list[int]:
    order, pos = canon
    picks = _draw_without_replacement(rng, len(order), count, {pos[i] for i in excluded})
    return [order[k] for k in picks]


def gen_country_pairs(g: SpatialGraph, neg_per_question: int = 100, seed: int = 0) -> list[QAPair]:
    """One positive per directed border edge, ``neg_per_question`` negatives per question.

    A question exists for every country with at least one neighbour; isolated
    countries contribute nothing. When fewer than ``neg_per_question``
    non-neighbours exist, all of them are emitted and flagged.
    """
    adj = g.neighbors()
    names = [n.name for n in g.nodes]
    canon = _canonical(g)
    out: list[QAPair] = []
    for i, nbrs in enumerate(adj):
        if not nbrs:
            continue
        q = COUNTRY_QUESTION.format(country_i=names[i])
        for j in nbrs:
            out.append(QAPair(q, COUNTRY_ANSWER.format(country_j=names[j], country_i=names[i]),
                              Label.POSITIVE, Dataset.COUNTRY, (seed, -1)))
        excluded = set(nbrs) | {i}
        available = len(names) - len(excluded)
        infeasible = available < neg_per_question
        if infeasible:
            logger.info("country %s: only %d non-neighbours for %d negatives",
                        names[i], available, neg_per_question)
        rng = _question_rng(seed, "country:" + g.node_key(i))
        picks = _draw_nodes(g, canon, rng, min(neg_per_question, available), excluded)
        for draw, k in enumerate(picks):
            out.append(QAPair(q, COUNTRY_ANSWER.format(country_j=names[k], country_i=names[i]),
                              Label.NEGATIVE, Dataset.COUNTRY, (seed, draw), infeasible))
    return out


def gen_city_pairs(g: SpatialGraph, country_names: dict[str, str], max_neg_ratio: float = 5,
                   seed: int = 0, directed: bool = True) -> list[QAPair]:
    """Positives for city pairs within the graph's threshold, capped negatives beyond it.

    With ``directed`` (the default) each undirected edge yields a positive in
    both directions and every city with a neighbour asks a question. Otherwise
    only the ``(i, j)`` direction with ``i < j`` is emitted. Each question gets
    ``floor(max_neg_ratio * positives)`` negatives drawn from cities outside
    ``g.threshold_km``.
    """
    adj = g.neighbors()
    nodes: list[CityNode] = g.nodes
    canon = _canonical(g)

    def label(i):
        c = nodes[i]
        return c.name, country_names.get(c.country_code, c.country_code)

    out: list[QAPair] = []
    for i, nbrs in enumerate(adj):
        positives = nbrs if directed else [j for j in nbrs if j > i]
        if not positives:
            continue
        ci, ki = label(i)
        q = CITY_QUESTION.format(city_i=ci, country_i=ki)
        for j in positives:
            cj, kj = label(j)
            out.append(QAPair(q, CITY_ANSWER.format(city_j=cj, country_j=kj, city_i=ci, country_i=ki),
                              Label.POSITIVE, Dataset.CITY, (seed, -1)))
        excluded = set(nbrs) | {i}
        want = int(math.floor(max_neg_ratio * len(positives) + 1e-9))
        available = len(nodes) - len(excluded)
        infeasible = available < want
        rng = _question_rng(seed, "city:" + g.node_key(i))
        picks = _draw_nodes(g, canon, rng, min(want, available), excluded)
        for draw, k in enumerate(picks):
            ck, kk = label(k)
            out.append(QAPair(q, CITY_ANSWER.format(city_j=ck, country_j=kk, city_i=ci, country_i=ki),
                              Label.NEGATIVE, Dataset.CITY, (seed, draw), infeasible))
    return out


def parse_country_pair(p: QAPair) -> dict[str, str]:
    """Recover template slots; raises ValueError when the texts do not fit the templates."""
    mq, ma = _COUNTRY_Q_RE.match(p.question), _COUNTRY_A_RE.match(p.answer)
    if not mq or not ma or mq["country_i"] != ma["country_i"]:
        raise ValueError(f"not a country pair: {p.question!r} / {p.answer!r}")
    return {"country_i": mq["country_i"], "country_j": ma["country_j"]}


def parse_city_pair(p: QAPair) -> dict[str, str]:
    mq = _CITY_Q_RE.match(p.question)
    if not mq:
        raise ValueError(f"not a city question: {p.question!r}")
    suffix = f" is a neighbor of {mq['city_i']} in {mq['country_i']}."
    if not p.answer.endswith(suffix):
        raise ValueError(f"answer does not restate the question city: {p.answer!r}")
    return {"city_i": mq["city_i"], "country_i": mq["country_i"],
            "city_j_in_country_j": p.answer[: -len(suffix)]}


def write_ndjson(records: Iterable, fh) -> int:
    n = 0
    for r in records:
        rec = r.to_record() if hasattr(r, "to_record") else r
        fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        n += 1
    return n


def pair_counts(pairs: Sequence[QAPair]) -> dict[str, int]:
    pos = sum(1 for p in pairs if p.label is Label.POSITIVE)
    return {"positive": pos, "negative": len(pairs) - pos,
            "questions": len({p.question for p in pairs})}


# --- QALD9 ---------------------------------------------------------------

@dataclass(frozen=True)
class Qald9Question:
    question: str
    sparql: str
    keywords: tuple[str, ...]
    qid: str = ""


def load_qald9(data: dict | str | bytes, language: str = "en") -> list[Qald9Question]:
    """Read the QALD JSON layout (``questions[].question[]``, ``query.sparql``)."""
    if not isinstance(data, dict):
        data = json.loads(data)
    out = []
    for q in data.get("questions", []):
        texts = [t for t in q.get("question", []) if t.get("language") == language]
        if not texts:
            continue
        t = texts[0]
        keywords = tuple(k.strip() for k in (t.get("keywords") or "").split(",") if k.strip())
        sparql = (q.get("query") or {}).get("sparql") or ""
        if not sparql:
            continue
        out.append(Qald9Question(t.get("string", ""), sparql, keywords, str(q.get("id", ""))))
    return out


@dataclass
class Qald9Stats:
    questions: int = 0
    skipped_empty: int = 0
    failed: int = 0
    positives: int = 0
    negatives: int = 0
    errors: list[str] = field(default_factory=list)


def build_qald9_dataset(entries: Sequence[Qald9Question], endpoint, searcher: Callable[[str], list],
                        serialize: Callable[[list], str], fetch_subjects: Callable[[list[str]], list],
                        per_subject: bool = False, max_negatives: int | None = None,
                        stats: Qald9Stats | None = None) -> list[Qald9Record]:
    """Build positive/negative RDF/XML records per QALD9 question.

    ``endpoint`` executes a SPARQL SELECT and returns the list of binding
    dicts; ``fetch_subjects`` returns the filtered triples for a set of subject
    URIs; ``searcher`` returns triples whose subject contains a keyword;
    ``serialize`` renders triples as RDF/XML. By default one positive record
    holds the whole result sub-graph; ``per_subject`` emits one per result node.
    """
    stats = stats if stats is not None else Qald9Stats()
    records: list[Qald9Record] = []
    for e in entries:
        stats.questions += 1
        try:
            bindings = endpoint(e.sparql)
        except EndpointError as exc:
            stats.failed += 1
            stats.errors.append(f"{e.qid or e.question}: {exc}")
            continue
        result = sorted({v["value"] for b in bindings for v in b.values() if v.get("type") == "uri"})
        triples = fetch_subjects(result) if result else []
        if not triples:
            stats.skipped_empty += 1
            logger.info("%s", EmptyResult(f"no sub-graph for {e.question!r}"))
            continue
        in_result = set(result)
        groups = [triples] if not per_subject else _group(triples).values()
        for group in groups:
            subjects = tuple(sorted({t.subject for t in group}))
            records.append(Qald9Record(e.question, e.sparql, e.keywords, serialize(list(group)),
                                       Label.POSITIVE, subjects))
            stats.positives += 1
        neg_groups: dict[str, list] = {}
        for kw in e.keywords:
            for t in searcher(kw):
                if t.subject not in in_result:
                    neg_groups.setdefault(t.subject, []).append(t)
        for n, subj in enumerate(sorted(neg_groups)):
            if max_negatives is not None and n >= max_negatives:
                break
            records.append(Qald9Record(e.question, e.sparql, e.keywords,
                                       serialize(_dedupe(neg_groups[subj])), Label.NEGATIVE, (subj,)))
            stats.negatives += 1
    return records


def _group(triples) -> dict[str, list]:
    out: dict[str, list] = {}
    for t in triples:
        out.setdefault(t.subject, []).append(t)
    return dict(sorted(out.items()))


def _dedupe(triples):
    return sort_triples(triples)
