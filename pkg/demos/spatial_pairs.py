"""Build the country and city neighbour graphs from the bundled GeoNames snapshot and sample pairs.

Run from the repository root:  python demos/spatial_pairs.py
"""
from collections import Counter
from pathlib import Path

from placeorigin import build_city_graph, build_country_graph, gen_city_pairs, gen_country_pairs
from placeorigin.geo import country_names, parse_city_table, parse_country_table

SNAPSHOT = Path(__file__).resolve().parent.parent / "tests" / "data" / "geonames"


def show(title, pairs, n=3):
    counts = Counter(p.label.value for p in pairs)
    print(f"{title}: {counts['positive']} positive, {counts['negative']} negative")
    for p in [q for q in pairs if q.label.value == "positive"][:n]:
        print(f"  + {p.question} -> {p.answer}")
    for p in [q for q in pairs if q.label.value == "negative"][:n]:
        print(f"  - {p.question} -> {p.answer}")


def main():
    countries = parse_country_table(SNAPSHOT / "countryInfo.txt")
    cg = build_country_graph(countries)
    print(f"{len(countries)} countries, {len(cg.edge_set())} land borders")
    show("Country pairs", gen_country_pairs(cg, neg_per_question=100, seed=0))

    cities = parse_city_table(SNAPSHOT / "cities15000.txt.gz", 50_000)
    vg = build_city_graph(cities, 50.0)
    print(f"\n{len(cities)} cities of 50,000+ people, {len(vg.edge_set())} pairs within 50 km")
    show("City pairs", gen_city_pairs(vg, country_names(countries), 5, seed=0))


if __name__ == "__main__":
    main()
