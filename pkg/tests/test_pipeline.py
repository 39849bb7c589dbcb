import json
import random

import pytest

from helpers import Backends, artifact_digests
from placeorigin.errors import ConfigError
from placeorigin.pipeline import Pipeline, PipelineConfig, RunManifest, emit_report, load_config, run_pipeline
from placeorigin.testing import MockEncoderServer
from placeorigin.toponym import load_gazetteer


@pytest.fixture(scope="module")
def entries(data_dir):
    return load_gazetteer((data_dir / "pipeline" / "gazetteer.csv").read_bytes())


def config(backends, cache, **kw):
    base = dict(sparql_url=backends.sparql.url, generator_url=backends.generator.url, encoder_url="hash://256",
                cache_dir=str(cache), min_interval_s=0.0)
    base.update(kw)
    return PipelineConfig(**base)


def test_config_defaults_and_roundtrip(tmp_path):
    cfg = PipelineConfig()
    assert (cfg.k_searcher, cfg.max_subjects, cfg.k_ranker, cfg.k_generator) == (10_000, 1_000, 10, 1)
    assert (cfg.doc_token_cap, cfg.prompt_token_budget, cfg.n_hab, cfg.d_city_km) == (256, 4096, 50_000, 50.0)
    assert PipelineConfig.loads(cfg.dumps()) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"k_ranker": 5, "sparql_url": "http://file/"}))
    env = {"PLACEORIGIN_SPARQL_URL": "http://env/", "PLACEORIGIN_GENERATOR_URL": "http://gen/"}
    loaded = load_config(path, {"workers": 2}, environ=env)
    assert (loaded.k_ranker, loaded.sparql_url, loaded.generator_url, loaded.workers) == (5, "http://env/", "http://gen/", 2)


@pytest.mark.parametrize("bad", [{"k_ranker": 0}, {"k_generator": 2}, {"ordering": "sideways"},
                                 {"prompt_token_budget": 0}, {"n_clusters": 0}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        PipelineConfig(**bad).validate()


def test_config_rejects_unknown_keys_and_bad_json():
    with pytest.raises(ConfigError):
        PipelineConfig.loads('{"k_rnaker": 3}')
    with pytest.raises(ConfigError):
        PipelineConfig.loads("k_ranker: 3")


def test_config_hash_ignores_locations():
    a = PipelineConfig(sparql_url="http://a/", cache_dir="x", workers=1)
    b = PipelineConfig(sparql_url="http://b/", cache_dir="y", workers=8)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != PipelineConfig(k_ranker=3).config_hash()


def test_statuses_and_outcomes(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        m = run_pipeline(entries, config(be, tmp_path))
    assert m.status_counts() == {"ok": 4, "no_kg": 1, "search_error": 0, "encode_error": 0, "generate_error": 0}
    assert m.entries["Hoddle Street|Melbourne|Australia"].status == "no_kg"
    gen = json.loads((tmp_path / m.entries["Batman Avenue|Melbourne|Australia"].stages["generate"]["artifact"]).read_text())
    assert gen["choice_subject"] == "http://dbpedia.org/resource/John_Batman"
    assert gen["answer"] == "John Batman"
    saved = RunManifest.load(tmp_path / "runs" / f"{m.config_hash}.json")
    assert saved.to_dict()["entries"] == m.to_dict()["entries"]


def test_rerun_uses_stage_cache(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        cfg = config(be, tmp_path)
        run_pipeline(entries, cfg)
        first = be.calls()
        pipe = Pipeline(cfg)
        pipe.run(entries)
        assert be.calls() == first
        assert pipe.cache_hits == {"search": 4, "rank": 4, "generate": 4}


def test_deterministic_across_order_and_width(entries, pipeline_nt, tmp_path):
    shuffled = entries[:]
    random.Random(11).shuffle(shuffled)
    digests = []
    for n, (ents, width) in enumerate([(entries, 1), (shuffled, 3), (entries[::-1], 5)]):
        with Backends(pipeline_nt) as be:
            run_pipeline(ents, config(be, tmp_path / str(n), workers=width))
        digests.append(artifact_digests(tmp_path / str(n)))
    assert digests[0] == digests[1] == digests[2]


def test_search_error_is_isolated(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        be.sparql.fail_statuses = [400]
        m = run_pipeline(entries, config(be, tmp_path))
    counts = m.status_counts()
    assert counts["search_error"] == 1 and counts["ok"] + counts["no_kg"] == 4


def test_encode_and_generate_errors(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be, MockEncoderServer(dim=32) as enc:
        enc.fail_statuses = [500] * 100
        m = run_pipeline(entries, config(be, tmp_path / "e", encoder_url=enc.url, retry_attempts=1))
        assert m.status_counts()["encode_error"] == 4
        be.generator.fail_statuses = [500] * 100
        m = run_pipeline(entries, config(be, tmp_path / "g", retry_attempts=1))
        assert m.status_counts()["generate_error"] == 4


def test_without_generator_stops_after_ranking(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        m = run_pipeline(entries, config(be, tmp_path, generator_url=None))
        assert be.generator.requests == 0
    assert all("generate" not in e.stages for e in m.entries.values())


def test_offline_rerun_from_snapshots(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        run_pipeline(entries, config(be, tmp_path, generator_url=None))
    m = run_pipeline(entries, PipelineConfig(cache_dir=str(tmp_path), encoder_url="hash://256", min_interval_s=0))
    assert m.status_counts()["ok"] == 4


def write_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_emit_report(entries, pipeline_nt, tmp_path):
    with Backends(pipeline_nt) as be:
        m = run_pipeline(entries, config(be, tmp_path / "c"))
    judg, meta = [], []
    origins = {e.entry_id: e.origin_text.replace(" ", "_") for e in entries}
    for eid, e in m.entries.items():
        items = []
        if "rank" in e.stages:
            items = [c["subject"] for c in json.loads((tmp_path / "c" / e.stages["rank"]["artifact"]).read_text())["candidates"]]
        for it in items:
            sem = int(it.endswith("/" + origins[eid]))
            judg.append({"query_id": eid, "item_id": it, "sem": sem, "geo_aus": 1, "geo_vic": 0})
        meta.append({"query_id": eid, "kg_extracted": bool(items), "origin_mentioned": bool(items)})
    doc = emit_report(m, write_lines(tmp_path / "j.ndjson", judg), write_lines(tmp_path / "m.ndjson", meta),
                      tmp_path / "report")
    assert doc["accounting"] == {"n": 5, "extracted": 4, "mentioned": 4, "extracted_ratio": 0.8,
                                 "hr_searcher": 0.8, "mentioned_ratio": 1.0}
    assert doc["ranker"]["starred"]["sem"]["hr"] == 1.0
    # Swanston Street outranks Charles Swanston, so the top-1 choice misses there
    assert doc["generator"]["starred"]["sem"]["hr"] == 0.75
    assert doc["delta_hr_star_sem"] == {"ranker/searcher": 0.0, "generator/ranker": -0.25}
    for name in ("report.json", "report_ranker.tsv", "report_generator.tsv", "grid_sem.json"):
        assert (tmp_path / "report" / name).exists()
    with pytest.raises(FileNotFoundError, match="nope.ndjson"):
        emit_report(m, tmp_path / "j.ndjson", tmp_path / "nope.ndjson", tmp_path / "r2")
