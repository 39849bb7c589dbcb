"""Render the JSON tables bundled with ``geonamescache`` as GeoNames dump files.

The pinned test snapshot under ``tests/data/geonames`` was produced with::

    pip download geonamescache==2.0.0 --no-deps
    python tools/geonamescache_to_dump.py <unpacked>/geonamescache/data tests/data/geonames

geonamescache 2.0.0 carries GeoNames tables exported on 2023-07-03. Columns the
JSON does not carry are left empty rather than guessed.
"""
import gzip
import json
import sys
from pathlib import Path

COUNTRY_HEADER = (
    "#ISO\tISO3\tISO-Numeric\tfips\tCountry\tCapital\tArea(in sq km)\tPopulation\t"
    "Continent\ttld\tCurrencyCode\tCurrencyName\tPhone\tPostal Code Format\t"
    "Postal Code Regex\tLanguages\tgeonameid\tneighbours\tEquivalentFipsCode"
)


def _s(value):
    return "" if value is None else str(value)


def convert(src: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    countries = json.loads((src / "countries.json").read_text(encoding="utf-8"))
    with open(out / "countryInfo.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# GeoNames countryInfo rendered from geonamescache 2.0.0 (export 2023-07-03)\n")
        fh.write(COUNTRY_HEADER + "\n")
        for code in sorted(countries):
            c = countries[code]
            row = [
                c["iso"], c["iso3"], c["isonumeric"], c["fips"], c["name"], c["capital"],
                c["areakm2"], c["population"], c["continentcode"], c["tld"],
                c["currencycode"], c["currencyname"], c["phone"], "",
                c["postalcoderegex"], c["languages"], c["geonameid"], c["neighbours"], "",
            ]
            fh.write("\t".join(_s(v) for v in row) + "\n")

    cities = json.loads((src / "cities15000.json").read_text(encoding="utf-8"))
    rows = sorted(cities.values(), key=lambda c: int(c["geonameid"]))
    with gzip.open(out / "cities15000.txt.gz", "wt", encoding="utf-8", newline="\n") as fh:
        for c in rows:
            row = [
                c["geonameid"], c["name"], "", "", c["latitude"], c["longitude"], "P", "",
                c["countrycode"], "", c.get("admin1code", ""), "", "", "",
                c["population"], "", "", c.get("timezone", ""), "",
            ]
            fh.write("\t".join(_s(v) for v in row) + "\n")


if __name__ == "__main__":
    convert(Path(sys.argv[1]), Path(sys.argv[2]))
