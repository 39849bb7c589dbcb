"""Command-line entry point: ``placeorigin <group> <action> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import geo, metrics, pairs, search
from .encoders import encoder_from_url
from .errors import PlaceOriginError
from .generate import Ordering, PromptCandidate, PromptSpec, assemble_prompt, call_generator, parse_generation
from .http import RateLimiter, RetryPolicy
from .index import ClusteredIndex, build_index, chunk_by_subject
from .pipeline import RunManifest, emit_report, load_config, run_pipeline
from .rdfxml import PrefixMap
from .ranker import rank_top_k, read_ranked, write_ranked
from .toponym import build_anchor_question, load_gazetteer, origin_counts


def _gazetteer(path: str, fmt: str | None):
    p = Path(path)
    fmt = fmt or ("tsv" if p.suffix.lower() in (".tsv", ".tab") else "csv")
    return load_gazetteer(p.read_bytes(), fmt)


def _dump(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False))


def cmd_gazetteer_load(a):
    entries = _gazetteer(a.input, a.format)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            for e in entries:
                t = e.toponym
                rec = {"entry_id": e.entry_id, "name": t.raw_name, "root_name": t.root_name,
                       "type": t.feature_type, "city": t.city, "state": t.state, "country": t.country,
                       "origin_text": e.origin_text, "origin_kind": e.origin_kind.value,
                       "question": build_anchor_question(t).text}
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    _dump(origin_counts(entries))


def _graphs(a):
    countries = geo.parse_country_table(Path(a.countries).read_bytes())
    cities = geo.parse_city_table(Path(a.cities).read_bytes(), a.n_hab)
    return countries, geo.build_country_graph(countries), geo.build_city_graph(cities, a.d_city)


def cmd_geo_build(a):
    _, gc, gv = _graphs(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "country_graph.ndjson", "w", encoding="utf-8") as fh:
        gc.write_ndjson(fh)
    with open(out / "city_graph.ndjson", "w", encoding="utf-8") as fh:
        gv.write_ndjson(fh)
    summary = {"countries": len(gc.nodes), "country_pairs_directed": gc.directed_edge_count(),
               "dropped_neighbor_codes": gc.dropped_neighbors,
               "cities": len(gv.nodes), "city_pairs_directed": gv.directed_edge_count(),
               "n_hab": a.n_hab, "d_city_km": a.d_city}
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n", "utf-8")
    _dump(summary)


def cmd_pairs_gen(a):
    countries, gc, gv = _graphs(a)
    names = geo.country_names(countries)
    cp = pairs.gen_country_pairs(gc, a.neg_per_question, a.seed)
    vp = pairs.gen_city_pairs(gv, names, a.max_neg_ratio, a.seed, directed=not a.undirected)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "country_pairs.ndjson", "w", encoding="utf-8") as fh:
        pairs.write_ndjson(cp, fh)
    with open(out / "city_pairs.ndjson", "w", encoding="utf-8") as fh:
        pairs.write_ndjson(vp, fh)
    _dump({"country": pairs.pair_counts(cp), "city": pairs.pair_counts(vp)})


def _roots(a) -> list[str]:
    roots = list(a.root or [])
    if a.gazetteer:
        roots += [e.toponym.root_name for e in _gazetteer(a.gazetteer, None)]
    return sorted(set(roots))


def cmd_search_run(a):
    cfg = load_config(a.config, {"sparql_url": a.endpoint})
    if not cfg.sparql_url:
        raise PlaceOriginError("no SPARQL endpoint (use --endpoint or PLACEORIGIN_SPARQL_URL)")
    f = search.RelationFilter.from_file(cfg.relations_file) if cfg.relations_file else search.RelationFilter.default()
    policy, limiter = RetryPolicy(attempts=cfg.retry_attempts), RateLimiter(cfg.min_interval_s)
    summary = {}
    for root in _roots(a):
        try:
            snap = search.load_snapshot(root, a.cache) if not a.refresh else None
        except PlaceOriginError:
            snap = None
        if snap is None:
            snap = search.search_root(root, cfg.sparql_url, f, cfg.k_searcher, cfg.max_subjects, policy, limiter)
            search.cache_snapshot(snap, a.cache)
        summary[root] = {"triples": len(snap.triples), "subjects": snap.subject_count, "truncated": snap.truncated}
    _dump(summary)


def cmd_index_build(a):
    snap = search.load_snapshot(a.root, a.cache)
    enc = encoder_from_url(a.encoder, max_length=a.doc_token_cap)
    docs = chunk_by_subject(snap, enc, PrefixMap(), a.doc_token_cap)
    index = build_index(docs, enc, a.n_clusters, a.seed)
    index.encoder_name = a.encoder
    index.save(a.out)
    _dump({"documents": len(index), "clusters": index.n_clusters})


def cmd_rank_run(a):
    index = ClusteredIndex.load(a.index)
    enc = encoder_from_url(a.encoder or index.encoder_name or "hash://64")
    ranked = rank_top_k(a.question, index, enc, a.k, a.probe)
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            write_ranked(ranked, fh)
    else:
        write_ranked(ranked, sys.stdout)


def cmd_generate_run(a):
    index = ClusteredIndex.load(a.index)
    text = {d.subject: d.text for d in index.docs}
    with open(a.ranked, encoding="utf-8") as fh:
        ranked = read_ranked(fh)
    pm = PrefixMap()
    cands = tuple(PromptCandidate(c, pm.compact(c.subject), text[c.subject]) for c in ranked)
    prompt = assemble_prompt(PromptSpec(a.question, cands, Ordering(a.ordering), a.budget))
    if a.prompt_only:
        print(prompt.text)
        return
    raw = call_generator(a.backend, prompt.text, a.max_new_tokens)
    out = parse_generation(raw, [c.name for c in cands])
    _dump({"choice": out.choice_subject, "answer": out.answer_text, "refusal": out.refusal,
           "off_list": out.off_list, "dropped_ranks": list(prompt.dropped_ranks), "raw": raw})


def cmd_eval_run(a):
    manifest = RunManifest.load(a.manifest)
    doc = emit_report(manifest, a.judgments, a.meta, a.out, a.k)
    print(metrics.report_table(metrics.MetricsReport(**{
        k: doc["ranker"][k] for k in ("k", "n", "n_star", "scores", "starred")})), end="")


def cmd_run_all(a):
    overrides = {"cache_dir": a.cache, "workers": a.workers}
    cfg = load_config(a.config, overrides)
    entries = _gazetteer(a.gazetteer, None)
    manifest = run_pipeline(entries, cfg)
    path = Path(cfg.cache_dir) / "runs" / f"{cfg.config_hash()}.json"
    _dump({"manifest": str(path), "statuses": manifest.status_counts()})
    if a.judgments and a.meta:
        emit_report(manifest, a.judgments, a.meta, a.report or Path(cfg.cache_dir) / "report", cfg.k_ranker)


def cmd_config_show(a):
    print(load_config(a.config).dumps(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="placeorigin", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    def group(name, help_):
        g = sub.add_parser(name, help=help_).add_subparsers(dest="action", required=True)
        return g

    g = group("gazetteer", "toponym gazetteer")
    s = g.add_parser("load", help="parse a gazetteer and print origin counts")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("csv", "tsv"))
    s.add_argument("--out", help="write normalised entries as NDJSON")
    s.set_defaults(func=cmd_gazetteer_load)

    def geo_args(s):
        s.add_argument("--countries", required=True, help="countryInfo.txt")
        s.add_argument("--cities", required=True, help="cities table (.txt or .gz)")
        s.add_argument("--n-hab", type=int, default=50_000)
        s.add_argument("--d-city", type=float, default=50.0)
        s.add_argument("--out", required=True)

    g = group("geo", "spatial graphs")
    s = g.add_parser("build-graphs")
    geo_args(s)
    s.set_defaults(func=cmd_geo_build)

    g = group("pairs", "spatial question/answer pairs")
    s = g.add_parser("gen")
    geo_args(s)
    s.add_argument("--neg-per-question", type=int, default=100)
    s.add_argument("--max-neg-ratio", type=float, default=5.0)
    s.add_argument("--undirected", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_pairs_gen)

    g = group("search", "knowledge-graph retrieval")
    s = g.add_parser("run")
    s.add_argument("--root", action="append")
    s.add_argument("--gazetteer")
    s.add_argument("--endpoint")
    s.add_argument("--config")
    s.add_argument("--cache", default="cache/snapshots")
    s.add_argument("--refresh", action="store_true")
    s.set_defaults(func=cmd_search_run)

    g = group("index", "document index")
    s = g.add_parser("build")
    s.add_argument("--root", required=True)
    s.add_argument("--cache", default="cache/snapshots")
    s.add_argument("--encoder", default="hash://64")
    s.add_argument("--doc-token-cap", type=int, default=256)
    s.add_argument("--n-clusters", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_index_build)

    g = group("rank", "late-interaction ranking")
    s = g.add_parser("run")
    s.add_argument("--index", required=True)
    s.add_argument("--question", required=True)
    s.add_argument("--encoder")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--probe", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_rank_run)

    g = group("generate", "prompt assembly and generation")
    s = g.add_parser("run")
    s.add_argument("--index", required=True)
    s.add_argument("--ranked", required=True)
    s.add_argument("--question", required=True)
    s.add_argument("--backend")
    s.add_argument("--ordering", choices=[o.value for o in Ordering], default="tail_best")
    s.add_argument("--budget", type=int, default=4096)
    s.add_argument("--max-new-tokens", type=int, default=256)
    s.add_argument("--prompt-only", action="store_true")
    s.set_defaults(func=cmd_generate_run)

    g = group("eval", "metrics over judged rankings")
    s = g.add_parser("run")
    s.add_argument("--manifest", required=True)
    s.add_argument("--judgments", required=True)
    s.add_argument("--meta", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k", type=int, default=10)
    s.set_defaults(func=cmd_eval_run)

    g = group("config", "pipeline configuration")
    s = g.add_parser("show")
    s.add_argument("--config")
    s.set_defaults(func=cmd_config_show)

    s = sub.add_parser("run-all", help="full pipeline over a gazetteer")
    s.add_argument("--gazetteer", required=True)
    s.add_argument("--config")
    s.add_argument("--cache")
    s.add_argument("--workers", type=int)
    s.add_argument("--judgments")
    s.add_argument("--meta")
    s.add_argument("--report")
    s.set_defaults(func=cmd_run_all)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        a.func(a)
    except (PlaceOriginError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
