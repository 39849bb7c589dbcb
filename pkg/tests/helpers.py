"""Shared helpers for the mock-backed pipeline tests."""
import hashlib
import json
from pathlib import Path

from placeorigin.testing import MockSparqlServer, ScriptedGenerator

# provenance fields that legitimately differ between runs
VOLATILE = ("retrieved_at", "endpoint", "started_at", "finished_at")


def artifact_digests(cache) -> dict[str, str]:
    """sha256 per file under ``cache``, with timestamps and endpoint URLs removed from JSON metadata."""
    cache = Path(cache)
    out = {}
    for p in sorted(cache.rglob("*")):
        if not p.is_file():
            continue
        data = p.read_bytes()
        if p.suffix == ".meta" or p.parent.name == "runs":
            doc = json.loads(data)
            for k in VOLATILE:
                doc.pop(k, None)
            data = json.dumps(doc, sort_keys=True).encode()
        out[p.relative_to(cache).as_posix()] = hashlib.sha256(data).hexdigest()
    return out


class Backends:
    """Mock SPARQL endpoint plus scripted generator, as a context manager."""

    def __init__(self, ntriples: str):
        self.sparql = MockSparqlServer(ntriples=ntriples)
        self.generator = ScriptedGenerator()

    def __enter__(self):
        self.sparql.start()
        self.generator.start()
        return self

    def __exit__(self, *exc):
        self.sparql.stop()
        self.generator.stop()

    def calls(self) -> int:
        return self.sparql.requests + self.generator.requests


COUNTRIES = """# comment
#ISO\tISO3\tISO-Numeric\tfips\tCountry\tCapital\tArea\tPopulation\tContinent\ttld\tCurrencyCode\tCurrencyName\tPhone\tPostal Code Format\tPostal Code Regex\tLanguages\tgeonameid\tneighbours\tEquivalentFipsCode
AD\tAND\t020\tAN\tAndorra\tAndorra la Vella\t468\t77006\tEU\t.ad\tEUR\tEuro\t376\t\t\tca\t3041565\tES,FR\t
ES\tESP\t724\tSP\tSpain\tMadrid\t504782\t46723749\tEU\t.es\tEUR\tEuro\t34\t\t\tes-ES\t2510769\tAD,FR,GI,PT,MA\t
FR\tFRA\t250\tFR\tFrance\tParis\t547030\t66987244\tEU\t.fr\tEUR\tEuro\t33\t\t\tfr-FR\t3017382\tCH,DE,BE,LU,IT,AD,MC,ES\t
PT\tPRT\t620\tPO\tPortugal\tLisbon\t92391\t10281762\tEU\t.pt\tEUR\tEuro\t351\t\t\tpt-PT\t2264397\tES\t
AU\tAUS\t036\tAS\tAustralia\tCanberra\t7686850\t24992369\tOC\t.au\tAUD\tDollar\t61\t\t\ten-AU\t2077456\t\t
"""


def city_row(gid, name, lat, lon, cc, pop):
    cols = [""] * 19
    cols[0], cols[1], cols[2], cols[4], cols[5] = str(gid), name, name, str(lat), str(lon)
    cols[6], cols[8], cols[14] = "P", cc, str(pop)
    return "\t".join(cols)
