"""Walk one small city gazetteer through the whole pipeline against local mock backends.

Run from the repository root:  python demos/street_origins.py
Needs the test extra (rdflib) for the mock SPARQL endpoint.
"""
import json
import tempfile
from pathlib import Path

from placeorigin import PipelineConfig, load_gazetteer, run_pipeline
from placeorigin.testing import MockSparqlServer, ScriptedGenerator

DATA = Path(__file__).resolve().parent.parent / "tests" / "data" / "pipeline"


def main():
    entries = load_gazetteer((DATA / "gazetteer.csv").read_bytes())
    print("Gazetteer entries and the root each one is searched under:")
    for e in entries:
        print(f"  {e.toponym.raw_name:<22} -> {e.toponym.root_name}")

    # A tiny DBpedia stand-in and a generator that trusts the extract placed last.
    with MockSparqlServer(ntriples=(DATA / "batman.nt").read_text("utf-8")) as kg, ScriptedGenerator() as llm:
        with tempfile.TemporaryDirectory() as tmp:
            cfg = PipelineConfig(sparql_url=kg.url, generator_url=llm.url, encoder_url="hash://256",
                                 cache_dir=str(Path(tmp) / "cache"), min_interval_s=0)
            manifest = run_pipeline(entries, cfg)
            cache = Path(cfg.cache_dir)
            print(f"\nRun {cfg.config_hash()}: {manifest.status_counts()}")
            for _, e in sorted(manifest.entries.items()):
                if e.status != "ok":
                    print(f"\n{e.entry_id}: {e.status} ({e.error or 'nothing found'})")
                    continue
                ranked = json.loads((cache / e.stages["rank"]["artifact"]).read_text())
                answer = json.loads((cache / e.stages["generate"]["artifact"]).read_text())
                print(f"\n{e.question}")
                for c in ranked["candidates"][:3]:
                    print(f"  #{c['rank']} {c['subject'].rsplit('/', 1)[-1]:<28} MaxSim {c['score']:.2f}")
                print(f"  generator answer: {answer['answer']}")


if __name__ == "__main__":
    main()
