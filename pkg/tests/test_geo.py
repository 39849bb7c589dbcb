import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import COUNTRIES, city_row
from placeorigin import geo
from placeorigin.errors import BadCoordinate, MalformedRow

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
points = st.tuples(lats, lons)


@given(points, points)
def test_haversine_matches_atan2_form(a, b):
    assert geo.haversine_km(a, b) == pytest.approx(oracles.great_circle_km(a, b), abs=1e-6)


@given(points, points)
def test_haversine_symmetric_and_bounded(a, b):
    d = geo.haversine_km(a, b)
    assert d == geo.haversine_km(b, a)
    assert 0.0 <= d <= math.pi * geo.EARTH_RADIUS_KM


@given(points)
def test_haversine_identity(a):
    assert geo.haversine_km(a, a) == 0.0


def test_antipodes():
    assert geo.haversine_km((90, 0), (-90, 0)) == math.pi * 6371.0088
    assert geo.haversine_km((0, 0), (0, 180)) == math.pi * 6371.0088


def test_array_form_agrees():
    rng = np.random.default_rng(3)
    la1, la2 = rng.uniform(-90, 90, (2, 500))
    lo1, lo2 = rng.uniform(-180, 180, (2, 500))
    arr = geo.haversine_km_array(la1, lo1, la2, lo2)
    ref = [geo.haversine_km((a, b), (c, d)) for a, b, c, d in zip(la1, lo1, la2, lo2)]
    np.testing.assert_allclose(arr, ref, rtol=0, atol=1e-9)


@pytest.mark.parametrize("p", [(91, 0), (-90.5, 0), (0, 181), (float("nan"), 0)])
def test_bad_coordinate(p):
    with pytest.raises(BadCoordinate):
        geo.haversine_km(p, (0, 0))


def test_country_graph_symmetrised():
    nodes = geo.parse_country_table(COUNTRIES.encode())
    assert [n.code for n in nodes] == ["AD", "ES", "FR", "PT", "AU"]
    g = geo.build_country_graph(nodes)
    names = {(nodes[i].code, nodes[j].code) for i, j in g.edges}
    assert names == {("AD", "ES"), ("AD", "FR"), ("ES", "FR"), ("ES", "PT")}
    assert g.directed_edge_count() == 8
    # GI, MA, CH, DE, BE, LU, IT, MC are not in the table
    assert g.dropped_neighbors == 2 + 6
    adj = g.neighbors()
    for i, nb in enumerate(adj):
        for j in nb:
            assert i in adj[j]
    assert adj[4] == []


def test_country_table_column_count():
    with pytest.raises(MalformedRow) as exc:
        geo.parse_country_table("AD\tAND\tAndorra\n")
    assert exc.value.row_index == 1


def test_city_table_population_filter():
    text = "\n".join([city_row(1, "Big", -37.8, 144.9, "AU", 5_000_000),
                      city_row(2, "Small", -37.7, 144.8, "AU", 49_999),
                      city_row(3, "Edge", -37.6, 144.7, "AU", 50_000)])
    cities = geo.parse_city_table(text, 50_000)
    assert [c.name for c in cities] == ["Big", "Edge"]


def test_city_table_bad_rows():
    with pytest.raises(BadCoordinate):
        geo.parse_city_table(city_row(1, "X", 95.0, 0, "AU", 1), 0)
    with pytest.raises(MalformedRow):
        geo.parse_city_table(city_row(1, "X", "north", 0, "AU", 1), 0)
    with pytest.raises(MalformedRow):
        geo.parse_city_table("1\tX\t", 0)


def random_cities(n, seed, box=None):
    rng = np.random.default_rng(seed)
    if box:
        lat = rng.uniform(box[0], box[1], n)
        lon = rng.uniform(box[2], box[3], n)
    else:
        lat = np.degrees(np.arcsin(rng.uniform(-1, 1, n)))
        lon = rng.uniform(-180, 180, n)
    return [geo.CityNode(i, f"c{i}", "XX", float(a), float(b), 100_000) for i, (a, b) in enumerate(zip(lat, lon))]


@pytest.mark.parametrize("seed", range(3))
def test_city_graph_matches_exhaustive_search(seed):
    cities = random_cities(300, seed, box=(-40, -30, 140, 150))
    g = geo.build_city_graph(cities, 60.0)
    ref = oracles.pairs_within([(c.lat, c.lon) for c in cities], 60.0)
    assert g.edge_set() == ref
    assert g.edge_set() == geo.build_city_graph_bruteforce(cities, 60.0).edge_set()


def test_city_graph_across_dateline_and_poles():
    cities = [geo.CityNode(1, "a", "XX", 0.0, 179.9, 1), geo.CityNode(2, "b", "XX", 0.0, -179.9, 1),
              geo.CityNode(3, "c", "XX", 89.9, 0.0, 1), geo.CityNode(4, "d", "XX", 89.9, 180.0, 1)]
    g = geo.build_city_graph(cities, 50.0)
    assert g.edge_set() == {(0, 1), (2, 3)}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1, 500), st.floats(1, 500))
def test_city_graph_monotone_in_threshold(seed, d1, d2):
    lo, hi = sorted((d1, d2))
    cities = random_cities(120, seed, box=(40, 50, 0, 15))
    assert geo.build_city_graph(cities, lo).edge_set() <= geo.build_city_graph(cities, hi).edge_set()


def test_graph_ndjson_roundtrip():
    cities = random_cities(80, 9, box=(0, 3, 0, 3))
    g = geo.build_city_graph(cities, 100.0)
    buf = io.StringIO()
    g.write_ndjson(buf)
    buf.seek(0)
    back = geo.SpatialGraph.read_ndjson(buf, cities)
    assert back.edges == g.edges
    np.testing.assert_allclose(back.distances, g.distances, atol=1e-6)


def test_snapshot_parses(data_dir):
    nodes = geo.parse_country_table(data_dir / "geonames" / "countryInfo.txt")
    assert len(nodes) == 252
    cities = geo.parse_city_table(data_dir / "geonames" / "cities15000.txt.gz", 50_000)
    assert all(c.population >= 50_000 for c in cities)
