"""The searcher: constrained SPARQL extraction per root name, plus the snapshot cache."""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import os
import tempfile
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import quote

from . import rdfxml
from .errors import CorruptSnapshot, EmptyName, MalformedResponse, NotCached
from .http import RateLimiter, RetryPolicy, request
from .rdfxml import PrefixMap, Triple

logger = logging.getLogger(__name__)

RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
DEFAULT_RELATION_KEYS = (
    "abstract", "children", "comment", "country", "date", "geo",
    "label", "location", "occupation", "parent", "place", "spouse",
)
DEFAULT_K_SEARCHER = 10_000
DEFAULT_MAX_SUBJECTS = 1_000


@dataclass(frozen=True)
class RelationFilter:
    mapping: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        for key, uris in self.mapping.items():
            if not uris:
                raise ValueError(f"relation key {key!r} maps to no predicate")
            for u in uris:
                if "://" not in u:
                    raise ValueError(f"relation {key!r}: {u!r} is not a full URI")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[str]],
                     keys: Iterable[str] | None = None) -> "RelationFilter":
        keys = list(keys) if keys is not None else [k for k in mapping if not k.startswith("_")]
        return cls({k: tuple(mapping[k]) for k in keys})

    @classmethod
    def default(cls, keys: Iterable[str] = DEFAULT_RELATION_KEYS) -> "RelationFilter":
        raw = json.loads(resources.files("placeorigin").joinpath("data/relations.json").read_text("utf-8"))
        return cls.from_mapping(raw, keys)

    @classmethod
    def from_file(cls, path, keys: Iterable[str] | None = None) -> "RelationFilter":
        return cls.from_mapping(json.loads(Path(path).read_text("utf-8")), keys)

    @property
    def relation_keys(self) -> frozenset[str]:
        return frozenset(self.mapping)

    def predicates(self) -> list[str]:
        return sorted({u for uris in self.mapping.values() for u in uris})

    def key_of(self, predicate: str) -> str | None:
        for key in sorted(self.mapping):
            if predicate in self.mapping[key]:
                return key
        return None


@dataclass(frozen=True)
class KGSnapshot:
    root_name: str
    triples: tuple[Triple, ...]
    subject_count: int
    retrieved_at: str
    endpoint: str
    truncated: bool = False

    @classmethod
    def create(cls, root_name: str, triples: Iterable[Triple], endpoint: str,
               retrieved_at: str | None = None, truncated: bool = False) -> "KGSnapshot":
        ts = tuple(rdfxml.sort_triples(triples))
        return cls(root_name, ts, len({t.subject for t in ts}),
                   retrieved_at or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                   endpoint, truncated)

    def subjects(self) -> list[str]:
        return sorted({t.subject for t in self.triples})


@dataclass
class SearchResult:
    triples: list[Triple]
    truncated: bool = False
    retries: int = 0
    dropped: dict[str, int] = field(default_factory=dict)


def sparql_string(value: str) -> str:
    """Double-quoted SPARQL literal with ECHAR escapes."""
    out = (value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
           .replace("\r", "\\r").replace("\t", "\\t").replace("\b", "\\b").replace("\f", "\\f"))
    return f'"{out}"'


def build_sparql(root_name: str, f: RelationFilter, k_searcher: int = DEFAULT_K_SEARCHER,
                 max_subjects: int = DEFAULT_MAX_SUBJECTS) -> str:
    """SELECT ?s ?p ?o for subjects whose local name or English label contains ``root_name``."""
    if not root_name or not root_name.strip():
        raise EmptyName("root name is empty")
    if k_searcher <= 0 or max_subjects <= 0:
        raise ValueError("k_searcher and max_subjects must be positive")
    needle = root_name.strip().lower()
    label_lit = sparql_string(needle)
    local_lit = sparql_string(needle.replace(" ", "_"))
    values = " ".join(f"<{p}>" for p in f.predicates())
    lang_ok = 'LANG({v}) = "" || LANGMATCHES(LANG({v}), "en")'
    return f"""SELECT ?s ?p ?o WHERE {{
  {{
    SELECT DISTINCT ?s WHERE {{
      {{
        ?s <{RDFS_LABEL}> ?name .
        FILTER(isIRI(?s) && ({lang_ok.format(v="?name")}) && CONTAINS(LCASE(STR(?name)), {label_lit}))
      }}
      UNION
      {{
        ?s ?anyp ?anyo .
        FILTER(isIRI(?s) && CONTAINS(LCASE(REPLACE(STR(?s), "^.*[/#]", "")), {local_lit}))
      }}
    }}
    ORDER BY ?s
    LIMIT {int(max_subjects)}
  }}
  VALUES ?p {{ {values} }}
  ?s ?p ?o .
  FILTER(!isLiteral(?o) || {lang_ok.format(v="?o")})
}}
ORDER BY ?s ?p ?o
LIMIT {int(k_searcher)}
"""


def english_or_untagged(lang: str | None) -> bool:
    if not lang:
        return True
    lang = lang.lower()
    return lang == "en" or lang.startswith("en-")


def _term(b: dict) -> tuple[str, str, str | None, str | None]:
    kind = b.get("type")
    if kind == "typed-literal":
        kind = "literal"
    return kind, b.get("value", ""), b.get("xml:lang") or b.get("lang"), b.get("datatype")


def parse_sparql_json(body: bytes) -> list[dict]:
    try:
        doc = json.loads(body.decode("utf-8"))
        return doc["results"]["bindings"]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedResponse(f"not a SPARQL JSON result: {exc}") from None


def parse_sparql_xml(body: bytes) -> list[dict]:
    ns = "{http://www.w3.org/2005/sparql-results#}"
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise MalformedResponse(f"not a SPARQL XML result: {exc}") from None
    rows = []
    for result in root.iter(ns + "result"):
        row = {}
        for binding in result.findall(ns + "binding"):
            term = binding[0]
            kind = term.tag[len(ns):]
            entry = {"type": kind, "value": term.text or ""}
            lang = term.get("{http://www.w3.org/XML/1998/namespace}lang")
            if lang:
                entry["xml:lang"] = lang
            if term.get("datatype"):
                entry["datatype"] = term.get("datatype")
            row[binding.get("name")] = entry
        rows.append(row)
    return rows


def run_select(endpoint: str, query: str, policy: RetryPolicy | None = None,
               limiter: RateLimiter | None = None, session=None) -> tuple[list[dict], int]:
    """POST a SELECT query; returns (bindings, retries)."""
    resp = request("POST", endpoint, data={"query": query},
                   headers={"Accept": "application/sparql-results+json, application/sparql-results+xml;q=0.9"},
                   policy=policy, limiter=limiter, session=session)
    if "xml" in resp.content_type:
        return parse_sparql_xml(resp.body), resp.retries
    return parse_sparql_json(resp.body), resp.retries


def bindings_to_triples(bindings: Sequence[dict], f: RelationFilter | None = None) -> tuple[list[Triple], dict[str, int]]:
    dropped = {"language": 0, "relation": 0, "blank_node": 0}
    allowed = set(f.predicates()) if f is not None else None
    out = []
    for b in bindings:
        try:
            sk, s, _, _ = _term(b["s"])
            pk, p, _, _ = _term(b["p"])
            ok, o, lang, dt = _term(b["o"])
        except KeyError as exc:
            raise MalformedResponse(f"binding without variable {exc}") from None
        if sk != "uri" or pk != "uri" or ok == "bnode":
            dropped["blank_node"] += 1
            continue
        if allowed is not None and p not in allowed:
            dropped["relation"] += 1
            continue
        if ok == "uri":
            out.append(Triple(s, p, o, object_is_uri=True))
            continue
        if not english_or_untagged(lang):
            dropped["language"] += 1
            continue
        out.append(Triple(s, p, o, object_lang=lang or None, datatype=None if lang else dt))
    return out, dropped


def execute_search(endpoint: str, query: str, retry_policy: RetryPolicy | None = None,
                   f: RelationFilter | None = None, k_searcher: int | None = None,
                   max_subjects: int | None = None, limiter: RateLimiter | None = None,
                   session=None) -> SearchResult:
    """Run the query, parse triples and re-apply language, relation and limit constraints."""
    bindings, retries = run_select(endpoint, query, retry_policy, limiter, session)
    triples, dropped = bindings_to_triples(bindings, f)
    triples = rdfxml.sort_triples(triples)
    truncated = k_searcher is not None and len(bindings) >= k_searcher
    if max_subjects is not None:
        keep = set(sorted({t.subject for t in triples})[:max_subjects])
        dropped["subject_limit"] = sum(1 for t in triples if t.subject not in keep)
        triples = [t for t in triples if t.subject in keep]
    if k_searcher is not None and len(triples) > k_searcher:
        dropped["triple_limit"] = len(triples) - k_searcher
        triples = triples[:k_searcher]
        truncated = True
    return SearchResult(triples, truncated, retries, dropped)


def search_root(root_name: str, endpoint: str, f: RelationFilter | None = None,
                k_searcher: int = DEFAULT_K_SEARCHER, max_subjects: int = DEFAULT_MAX_SUBJECTS,
                retry_policy: RetryPolicy | None = None, limiter: RateLimiter | None = None,
                session=None, retrieved_at: str | None = None) -> KGSnapshot:
    f = f or RelationFilter.default()
    query = build_sparql(root_name, f, k_searcher, max_subjects)
    res = execute_search(endpoint, query, retry_policy, f, k_searcher, max_subjects, limiter, session)
    return KGSnapshot.create(root_name, res.triples, endpoint, retrieved_at, res.truncated)


def check_snapshot(s: KGSnapshot, f: RelationFilter, k_searcher: int | None = None,
                   max_subjects: int | None = None) -> list[str]:
    """Post-hoc constraint check; returns a list of violations (empty when conforming)."""
    problems = []
    if k_searcher is not None and len(s.triples) > k_searcher:
        problems.append(f"{len(s.triples)} triples exceed k_searcher={k_searcher}")
    if max_subjects is not None and s.subject_count > max_subjects:
        problems.append(f"{s.subject_count} subjects exceed max_subjects={max_subjects}")
    needle = s.root_name.strip().lower()
    labels: dict[str, list[str]] = {}
    for t in s.triples:
        if t.predicate == RDFS_LABEL and not t.object_is_uri:
            labels.setdefault(t.subject, []).append(t.object.lower())
    for t in s.triples:
        if f.key_of(t.predicate) is None:
            problems.append(f"predicate outside relation filter: {t.predicate}")
        if not t.object_is_uri and not english_or_untagged(t.object_lang):
            problems.append(f"non-English literal: {t}")
        local = t.subject.rsplit("/", 1)[-1].rsplit("#", 1)[-1].lower()
        if needle.replace(" ", "_") not in local and not any(needle in l for l in labels.get(t.subject, ())):
            problems.append(f"subject does not contain {s.root_name!r}: {t.subject}")
    return problems


# --- cache ---------------------------------------------------------------

_key_locks: dict[str, threading.Lock] = {}
_key_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _key_locks_guard:
        return _key_locks.setdefault(str(path), threading.Lock())


def snapshot_paths(root_name: str, directory) -> tuple[Path, Path]:
    stem = quote(root_name, safe="")
    d = Path(directory)
    return d / f"{stem}.rdf", d / f"{stem}.meta"


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cache_snapshot(s: KGSnapshot, directory, pm: PrefixMap | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rdf_path, meta_path = snapshot_paths(s.root_name, directory)
    body = rdfxml.serialize(list(s.triples), pm).encode("utf-8")
    meta = {
        "root_name": s.root_name,
        "subject_count": s.subject_count,
        "triple_count": len(s.triples),
        "retrieved_at": s.retrieved_at,
        "endpoint": s.endpoint,
        "truncated": s.truncated,
        "sha256": hashlib.sha256(body).hexdigest(),
    }
    with _lock_for(rdf_path):
        _atomic_write(rdf_path, body)
        _atomic_write(meta_path, (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return rdf_path


def load_snapshot(root_name: str, directory) -> KGSnapshot:
    rdf_path, meta_path = snapshot_paths(root_name, directory)
    if not rdf_path.exists() or not meta_path.exists():
        raise NotCached(root_name)
    body = rdf_path.read_bytes()
    try:
        meta = json.loads(meta_path.read_text("utf-8"))
    except ValueError as exc:
        raise CorruptSnapshot(f"{meta_path}: {exc}") from None
    if hashlib.sha256(body).hexdigest() != meta.get("sha256"):
        raise CorruptSnapshot(f"{rdf_path}: checksum mismatch")
    try:
        triples = rdfxml.parse(body)
    except (ET.ParseError, ValueError) as exc:
        raise CorruptSnapshot(f"{rdf_path}: {exc}") from None
    return KGSnapshot(meta["root_name"], tuple(rdfxml.sort_triples(triples)), meta["subject_count"],
                      meta["retrieved_at"], meta["endpoint"], meta.get("truncated", False))
