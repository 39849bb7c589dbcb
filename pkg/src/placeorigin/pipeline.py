"""Configuration, per-toponym orchestration with stage caching, and report emission."""
from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import metrics, search
from .encoders import encoder_from_url
from .errors import ConfigError, EncoderFailure, EndpointError, NotCached, PlaceOriginError
from .generate import (Ordering, PromptCandidate, PromptSpec, assemble_prompt, call_generator,
                       parse_generation)
from .http import RateLimiter, RetryPolicy
from .index import build_index, chunk_by_subject
from .rdfxml import PrefixMap
from .ranker import RankedCandidate, rank_top_k
from .toponym import GazetteerEntry, build_anchor_question

logger = logging.getLogger(__name__)

ENV_OVERRIDES = {
    "PLACEORIGIN_SPARQL_URL": "sparql_url",
    "PLACEORIGIN_ENCODER_URL": "encoder_url",
    "PLACEORIGIN_GENERATOR_URL": "generator_url",
}
STATUSES = ("ok", "no_kg", "search_error", "encode_error", "generate_error")
# fields that never change results; endpoint URLs are locations, backends are identified by name
_UNHASHED = {"cache_dir", "workers", "min_interval_s", "retry_attempts",
             "sparql_url", "encoder_url", "generator_url"}


@dataclass
class PipelineConfig:
    sparql_url: str | None = None
    encoder_url: str = "hash://64"
    generator_url: str | None = None
    encoder_name: str = ""
    generator_name: str = ""
    k_searcher: int = search.DEFAULT_K_SEARCHER
    max_subjects: int = search.DEFAULT_MAX_SUBJECTS
    k_ranker: int = 10
    k_generator: int = 1
    doc_token_cap: int = 256
    prompt_token_budget: int = 4096
    ordering: str = Ordering.TAIL_BEST.value
    n_hab: int = 50_000
    d_city_km: float = 50.0
    seed: int = 0
    n_clusters: int | None = None
    probe_clusters: int | None = None
    max_new_tokens: int = 256
    temperature: float = 0.0
    relations_file: str | None = None
    cache_dir: str = "cache"
    workers: int = 1
    min_interval_s: float = 0.2
    retry_attempts: int = 3

    def validate(self) -> "PipelineConfig":
        for name in ("k_searcher", "max_subjects", "k_ranker", "k_generator"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("doc_token_cap", "prompt_token_budget", "n_hab", "d_city_km", "max_new_tokens", "workers"):
            if getattr(self, name) <= 0 and not (name == "n_hab" and self.n_hab == 0):
                raise ConfigError(f"{name} must be positive")
        if self.k_generator != 1:
            raise ConfigError("only k_generator = 1 is supported")
        if self.ordering not in {o.value for o in Ordering}:
            raise ConfigError(f"unknown ordering {self.ordering!r}")
        for name in ("n_clusters", "probe_clusters"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1 or null")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PipelineConfig":
        try:
            return cls.from_dict(json.loads(text))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"config is not valid JSON: {exc}") from None

    def encoder_identity(self) -> str:
        """Cache identity of the encoder: its name, or the URL for the built-in hashing encoder."""
        if self.encoder_name:
            return self.encoder_name
        return self.encoder_url if self.encoder_url.startswith("hash://") else ""

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        d["encoder"] = self.encoder_identity()
        return _digest(json.dumps(d, sort_keys=True))[:16]


def load_config(path=None, overrides: dict | None = None, environ=None) -> PipelineConfig:
    """File values, then environment endpoint overrides, then explicit overrides."""
    cfg = PipelineConfig.loads(Path(path).read_text("utf-8")) if path else PipelineConfig()
    environ = os.environ if environ is None else environ
    for var, attr in ENV_OVERRIDES.items():
        if environ.get(var):
            setattr(cfg, attr, environ[var])
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if not hasattr(cfg, k):
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    return cfg.validate()


def _digest(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


class ArtifactStore:
    """Content-addressed files under ``<cache>/objects`` and stage pointers under ``<cache>/stages``."""

    def __init__(self, root):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        (self.root / "stages").mkdir(parents=True, exist_ok=True)

    def put(self, obj) -> str:
        data = json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1).encode("utf-8") + b"\n"
        sha = _digest(data)
        path = self.root / "objects" / f"{sha}.json"
        if not path.exists():
            search._atomic_write(path, data)
        return sha

    def path(self, sha: str) -> Path:
        return self.root / "objects" / f"{sha}.json"

    def get(self, sha: str):
        return json.loads(self.path(sha).read_text("utf-8"))

    def stage_get(self, key: str) -> str | None:
        p = self.root / "stages" / f"{key}.json"
        if not p.exists():
            return None
        sha = json.loads(p.read_text("utf-8"))["artifact"]
        return sha if self.path(sha).exists() else None

    def stage_put(self, key: str, sha: str) -> None:
        search._atomic_write(self.root / "stages" / f"{key}.json",
                             (json.dumps({"artifact": sha}) + "\n").encode("utf-8"))


@dataclass
class EntryResult:
    entry_id: str
    root_name: str
    question: str = ""
    status: str = "ok"
    error: str | None = None
    stages: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunManifest:
    config_hash: str
    entries: dict[str, EntryResult] = field(default_factory=dict)
    started_at: str = ""
    finished_at: str = ""
    cache_dir: str = ""

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "entries": [self.entries[k].to_dict() for k in sorted(self.entries)],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        search._atomic_write(path, (json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n").encode("utf-8"))
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        d = json.loads(path.read_text("utf-8"))
        # manifests live at <cache>/runs/<hash>.json; artifact paths are relative to <cache>
        m = cls(d["config_hash"], started_at=d.get("started_at", ""),
                finished_at=d.get("finished_at", ""), cache_dir=str(path.parent.parent))
        for e in d["entries"]:
            m.entries[e["entry_id"]] = EntryResult(**e)
        return m

    def status_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in STATUSES}
        for e in self.entries.values():
            counts[e.status] = counts.get(e.status, 0) + 1
        return counts


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class Pipeline:
    """Runs search -> chunk/index -> rank -> prompt/generate -> parse for each entry independently."""

    def __init__(self, cfg: PipelineConfig, encoder=None):
        self.cfg = cfg.validate()
        self.cache = Path(cfg.cache_dir)
        self.snapshots = self.cache / "snapshots"
        self.store = ArtifactStore(self.cache)
        self.filter = (search.RelationFilter.from_file(cfg.relations_file) if cfg.relations_file
                       else search.RelationFilter.default())
        self.policy = RetryPolicy(attempts=cfg.retry_attempts)
        self.limiters = {name: RateLimiter(cfg.min_interval_s) for name in ("sparql", "encoder", "generator")}
        self.encoder = encoder or encoder_from_url(cfg.encoder_url, max_length=cfg.doc_token_cap,
                                                   policy=self.policy, limiter=self.limiters["encoder"])
        self.pm = PrefixMap()
        self._manifest_lock = threading.Lock()
        # cache hits per stage; kept out of the manifest so it stays order independent
        self.cache_hits = {"search": 0, "rank": 0, "generate": 0}

    def _hit(self, stage: str, cached: bool) -> None:
        if cached:
            with self._manifest_lock:
                self.cache_hits[stage] += 1

    def manifest_path(self) -> Path:
        return self.cache / "runs" / f"{self.cfg.config_hash()}.json"

    def _rel(self, sha: str) -> str:
        return self.store.path(sha).relative_to(self.cache).as_posix()

    def _stage_key(self, stage: str, *parts) -> str:
        return _digest(json.dumps([stage, *parts], sort_keys=True))

    def _snapshot(self, root: str):
        try:
            return search.load_snapshot(root, self.snapshots), True
        except NotCached:
            if not self.cfg.sparql_url:
                return None, False
        snap = search.search_root(root, self.cfg.sparql_url, self.filter, self.cfg.k_searcher,
                                  self.cfg.max_subjects, self.policy, self.limiters["sparql"])
        search.cache_snapshot(snap, self.snapshots, self.pm)
        return snap, False

    def _rank(self, question: str, snap, snap_sha: str) -> tuple[str, bool]:
        cfg = self.cfg
        key = self._stage_key("rank", cfg.encoder_identity(), cfg.k_ranker, cfg.n_clusters, cfg.probe_clusters,
                              cfg.seed, cfg.doc_token_cap, snap_sha, question)
        sha = self.store.stage_get(key)
        if sha:
            return sha, True
        docs = chunk_by_subject(snap, self.encoder, self.pm, cfg.doc_token_cap)
        index = build_index(docs, self.encoder, cfg.n_clusters, cfg.seed)
        ranked = rank_top_k(question, index, self.encoder, cfg.k_ranker, cfg.probe_clusters)
        by_subject = {d.subject: d for d in index.docs}
        sha = self.store.put({
            "question": question,
            "candidates": [{"subject": c.subject, "name": self.pm.compact(c.subject), "score": c.score,
                            "rank": c.rank, "text": by_subject[c.subject].text,
                            "token_count": by_subject[c.subject].token_count,
                            "truncated": by_subject[c.subject].truncated} for c in ranked],
            "n_documents": len(docs),
            "n_clusters": index.n_clusters,
        })
        self.store.stage_put(key, sha)
        return sha, False

    def _generate(self, rank_sha: str) -> tuple[str, bool]:
        cfg = self.cfg
        key = self._stage_key("generate", cfg.generator_name, cfg.ordering, cfg.prompt_token_budget,
                              cfg.max_new_tokens, cfg.temperature, cfg.seed, rank_sha)
        sha = self.store.stage_get(key)
        if sha:
            return sha, True
        ranked = self.store.get(rank_sha)
        cands = tuple(PromptCandidate(RankedCandidate(c["subject"], c["score"], c["rank"]), c["name"], c["text"])
                      for c in ranked["candidates"])
        spec = PromptSpec(ranked["question"], cands, Ordering(cfg.ordering), cfg.prompt_token_budget)
        prompt = assemble_prompt(spec)
        raw = call_generator(cfg.generator_url, prompt.text, cfg.max_new_tokens, cfg.temperature, cfg.seed,
                             self.policy, self.limiters["generator"])
        outcome = parse_generation(raw, [c.name for c in cands])
        by_name = {c.name: c.candidate.subject for c in cands}
        sha = self.store.put({
            "prompt": prompt.text,
            "prompt_tokens": prompt.token_count,
            "dropped_ranks": list(prompt.dropped_ranks),
            "raw": raw,
            "choice": outcome.choice_subject,
            "choice_subject": by_name.get(outcome.choice_subject),
            "answer": outcome.answer_text,
            "refusal": outcome.refusal,
            "off_list": outcome.off_list,
        })
        self.store.stage_put(key, sha)
        return sha, False

    def run_entry(self, entry: GazetteerEntry) -> EntryResult:
        t = entry.toponym
        res = EntryResult(entry.entry_id, t.root_name)
        try:
            res.question = build_anchor_question(t).text
        except PlaceOriginError as exc:
            res.status, res.error = "search_error", str(exc)
            return res
        try:
            snap, cached = self._snapshot(t.root_name)
        except (EndpointError, PlaceOriginError) as exc:
            res.status, res.error = "search_error", f"{type(exc).__name__}: {exc}"
            return res
        if snap is None or not snap.triples:
            res.status = "no_kg"
            res.stages["search"] = {"status": "no_kg"}
            return res
        rdf_path, meta_path = search.snapshot_paths(t.root_name, self.snapshots)
        snap_sha = json.loads(meta_path.read_text("utf-8"))["sha256"]
        res.stages["search"] = {"status": "ok", "artifact": rdf_path.relative_to(self.cache).as_posix(), "sha256": snap_sha,
                                "triples": len(snap.triples), "subjects": snap.subject_count}
        self._hit("search", cached)
        try:
            rank_sha, cached = self._rank(res.question, snap, snap_sha)
        except (EncoderFailure, PlaceOriginError) as exc:
            res.status, res.error = "encode_error", f"{type(exc).__name__}: {exc}"
            return res
        self._hit("rank", cached)
        res.stages["rank"] = {"status": "ok", "artifact": self._rel(rank_sha), "sha256": rank_sha}
        if not self.cfg.generator_url:
            return res
        try:
            gen_sha, cached = self._generate(rank_sha)
        except PlaceOriginError as exc:
            res.status, res.error = "generate_error", f"{type(exc).__name__}: {exc}"
            return res
        self._hit("generate", cached)
        res.stages["generate"] = {"status": "ok", "artifact": self._rel(gen_sha), "sha256": gen_sha}
        return res

    def run(self, entries: Sequence[GazetteerEntry]) -> RunManifest:
        path = self.manifest_path()
        manifest = RunManifest(self.cfg.config_hash(), started_at=_now(), cache_dir=str(self.cache))

        def work(entry):
            try:
                r = self.run_entry(entry)
            except Exception as exc:  # isolate anything unexpected to this entry
                logger.exception("entry %s failed", entry.entry_id)
                r = EntryResult(entry.entry_id, entry.toponym.root_name, status="search_error",
                                error=f"{type(exc).__name__}: {exc}")
            with self._manifest_lock:
                manifest.entries[r.entry_id] = r
                manifest.save(path)
            return r

        if self.cfg.workers == 1:
            for e in entries:
                work(e)
        else:
            with ThreadPoolExecutor(self.cfg.workers) as pool:
                list(pool.map(work, entries))
        manifest.finished_at = _now()
        manifest.save(path)
        return manifest


def run_pipeline(entries: Sequence[GazetteerEntry], cfg: PipelineConfig, encoder=None) -> RunManifest:
    return Pipeline(cfg, encoder).run(entries)


# --- reporting ---------------------------------------------------------------

def _read_lines(path) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"missing file: {p}")
    return p.read_text("utf-8").splitlines()


def manifest_rankings(manifest: RunManifest) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Ranker lists and generator top-1 lists per entry, read from stage artifacts."""
    ranker, generator = {}, {}
    root = Path(manifest.cache_dir)
    for eid, e in manifest.entries.items():
        if "rank" in e.stages:
            ranked = json.loads((root / e.stages["rank"]["artifact"]).read_text("utf-8"))
            ranker[eid] = [c["subject"] for c in ranked["candidates"]]
        if "generate" in e.stages:
            gen = json.loads((root / e.stages["generate"]["artifact"]).read_text("utf-8"))
            generator[eid] = [gen["choice_subject"]] if gen.get("choice_subject") else []
    return ranker, generator


def emit_report(manifest: RunManifest, judgments_path, meta_path, out_dir, k: int = 10) -> dict:
    """Write ``report.json``, ``report_ranker.tsv``, ``report_generator.tsv`` and relevance grids."""
    judgments = metrics.read_judgments(_read_lines(judgments_path))
    meta = metrics.read_meta(_read_lines(meta_path))
    ranker, generator = manifest_rankings(manifest)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rank_report = metrics.aggregate(judgments, ranker, meta, k)
    gen_report = metrics.aggregate(judgments, generator, meta, 1)
    acc = metrics.accounting(meta)
    series = {"searcher": 1.0 if rank_report.n_star else 0.0,
              "ranker": rank_report.starred["sem"]["hr"],
              "generator": gen_report.starred["sem"]["hr"]}
    doc = {
        "ranker": rank_report.to_dict(),
        "generator": gen_report.to_dict(),
        "accounting": acc,
        "hr_star_sem": series,
        "delta_hr_star_sem": metrics.delta_hr_series(series),
        "statuses": manifest.status_counts(),
    }
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", "utf-8")
    (out / "report_ranker.tsv").write_text(metrics.report_table(rank_report), "utf-8")
    (out / "report_generator.tsv").write_text(metrics.report_table(gen_report), "utf-8")
    scored = {q: r for q, r in ranker.items() if q in meta}
    for kind in metrics.RELEVANCE_TYPES:
        grid = metrics.relevance_grid(judgments, scored, k, kind)
        (out / f"grid_{kind}.json").write_text(json.dumps(grid) + "\n", "utf-8")
    return doc
