"""GeoNames dump parsing and the country/city spatial graphs."""
from __future__ import annotations

import gzip
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import BadCoordinate, MalformedRow

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088

COUNTRY_COLUMNS = 19
CITY_COLUMNS = 19
# positions in the GeoNames "geoname" table
_C_ID, _C_NAME, _C_LAT, _C_LON, _C_CC, _C_POP = 0, 1, 4, 5, 8, 14
# positions in countryInfo.txt
_K_ISO, _K_NAME, _K_NEIGHBOURS = 0, 4, 17


@dataclass(frozen=True)
class CountryNode:
    code: str
    name: str
    neighbor_codes: tuple[str, ...] = ()


@dataclass(frozen=True)
class CityNode:
    geoname_id: int
    name: str
    country_code: str
    lat: float
    lon: float
    population: int


@dataclass
class SpatialGraph:
    """Undirected graph over ``nodes``; edges are index pairs ``(i, j)`` with ``i < j``.

    ``distances`` is parallel to ``edges`` for city graphs and empty for
    country graphs. ``threshold_km`` records the d_city the graph was built with.
    """

    nodes: list
    edges: list[tuple[int, int]]
    distances: list[float] = field(default_factory=list)
    threshold_km: float | None = None
    dropped_neighbors: int = 0

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.nodes]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for a in adj:
            a.sort()
        return adj

    def directed_edge_count(self) -> int:
        return 2 * len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges)

    def node_key(self, i: int) -> str:
        n = self.nodes[i]
        return n.code if isinstance(n, CountryNode) else str(n.geoname_id)

    def write_ndjson(self, fh) -> None:
        """Write one ``{"i", "j", "distance_km"?}`` record per edge, keyed by node id."""
        for e, (i, j) in enumerate(self.edges):
            rec = {"i": self.node_key(i), "j": self.node_key(j)}
            if self.distances:
                rec["distance_km"] = round(self.distances[e], 6)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def read_ndjson(cls, fh, nodes: Sequence) -> "SpatialGraph":
        graph = cls(nodes=list(nodes), edges=[])
        index = {graph.node_key(i): i for i in range(len(graph.nodes))}
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            i, j = sorted((index[str(rec["i"])], index[str(rec["j"])]))
            graph.edges.append((i, j))
            if "distance_km" in rec:
                graph.distances.append(float(rec["distance_km"]))
        return graph


def _text_lines(source: BinaryIO | bytes | str | os.PathLike) -> Iterator[str]:
    """Lines from text, bytes, a path or a binary stream; gzip input is detected by magic."""
    if isinstance(source, os.PathLike):
        source = Path(source).read_bytes()
    if isinstance(source, bytes):
        if source[:2] == b"\x1f\x8b":
            source = gzip.decompress(source)
        source = io.BytesIO(source)
    if isinstance(source, str):
        yield from io.StringIO(source)
        return
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def parse_country_table(source) -> list[CountryNode]:
    nodes = []
    for idx, line in enumerate(_text_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != COUNTRY_COLUMNS:
            raise MalformedRow(idx, f"expected {COUNTRY_COLUMNS} columns, got {len(cols)}")
        neighbours = tuple(c.strip() for c in cols[_K_NEIGHBOURS].split(",") if c.strip())
        nodes.append(CountryNode(cols[_K_ISO], cols[_K_NAME], neighbours))
    return nodes


def _check_coord(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0) or math.isnan(lat) or math.isnan(lon):
        raise BadCoordinate(f"coordinate out of range: ({lat}, {lon})")


def parse_city_table(source, n_hab: int) -> list[CityNode]:
    """Parse a GeoNames cities table, keeping rows with population >= ``n_hab``."""
    cities = []
    for idx, line in enumerate(_text_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != CITY_COLUMNS:
            raise MalformedRow(idx, f"expected {CITY_COLUMNS} columns, got {len(cols)}")
        try:
            pop = int(cols[_C_POP] or 0)
            lat, lon = float(cols[_C_LAT]), float(cols[_C_LON])
            gid = int(cols[_C_ID])
        except ValueError as exc:
            raise MalformedRow(idx, str(exc)) from None
        try:
            _check_coord(lat, lon)
        except BadCoordinate as exc:
            raise BadCoordinate(f"row {idx}: {exc}") from None
        if pop >= n_hab:
            cities.append(CityNode(gid, cols[_C_NAME], cols[_C_CC], lat, lon, pop))
    return cities


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between two (lat, lon) points in degrees."""
    _check_coord(*a)
    _check_coord(*b)
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def build_country_graph(nodes: Sequence[CountryNode]) -> SpatialGraph:
    index = {}
    for i, n in enumerate(nodes):
        if n.code in index:
            raise ValueError(f"duplicate country code {n.code!r}")
        index[n.code] = i
    edges = set()
    dropped = 0
    for i, n in enumerate(nodes):
        for code in n.neighbor_codes:
            j = index.get(code)
            if j is None:
                dropped += 1
                continue
            if j != i:
                edges.add((min(i, j), max(i, j)))
    if dropped:
        logger.warning("dropped %d neighbour codes missing from the country table", dropped)
    return SpatialGraph(nodes=list(nodes), edges=sorted(edges), dropped_neighbors=dropped)


def _unit_vectors(lat, lon) -> np.ndarray:
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    return np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


def build_city_graph(nodes: Sequence[CityNode], d_city: float) -> SpatialGraph:
    """Connect every pair of cities at haversine distance <= ``d_city`` km.

    Candidates come from a k-d tree over unit vectors (chord radius padded a
    little); each candidate is then confirmed with the exact haversine distance.
    """
    if d_city <= 0:
        raise ValueError("d_city must be positive")
    nodes = list(nodes)
    if len(nodes) < 2:
        return SpatialGraph(nodes=nodes, edges=[], threshold_km=d_city)
    lat = np.array([c.lat for c in nodes])
    lon = np.array([c.lon for c in nodes])
    xyz = _unit_vectors(lat, lon)
    angle = min(math.pi, d_city / EARTH_RADIUS_KM)
    chord = 2 * math.sin(angle / 2) * (1 + 1e-9) + 1e-12
    pairs = cKDTree(xyz).query_pairs(chord, output_type="ndarray")
    if len(pairs) == 0:
        return SpatialGraph(nodes=nodes, edges=[], threshold_km=d_city)
    pairs = np.sort(pairs, axis=1)
    d = haversine_km_array(lat[pairs[:, 0]], lon[pairs[:, 0]], lat[pairs[:, 1]], lon[pairs[:, 1]])
    # settle near-threshold pairs with the scalar formula so results match it exactly
    near = np.flatnonzero(np.abs(d - d_city) < 1e-6)
    for k in near:
        a, b = nodes[pairs[k, 0]], nodes[pairs[k, 1]]
        d[k] = haversine_km((a.lat, a.lon), (b.lat, b.lon))
    keep = d <= d_city
    pairs, d = pairs[keep], d[keep]
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs, d = pairs[order], d[order]
    return SpatialGraph(
        nodes=nodes,
        edges=[(int(i), int(j)) for i, j in pairs],
        distances=[float(x) for x in d],
        threshold_km=d_city,
    )


def build_city_graph_bruteforce(nodes: Sequence[CityNode], d_city: float) -> SpatialGraph:
    """All-pairs reference construction; quadratic, for checking small inputs."""
    nodes = list(nodes)
    edges, dist = [], []
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            d = haversine_km((nodes[i].lat, nodes[i].lon), (nodes[j].lat, nodes[j].lon))
            if d <= d_city:
                edges.append((i, j))
                dist.append(d)
    return SpatialGraph(nodes=nodes, edges=edges, distances=dist, threshold_km=d_city)


def country_names(nodes: Iterable[CountryNode]) -> dict[str, str]:
    return {n.code: n.name for n in nodes}
