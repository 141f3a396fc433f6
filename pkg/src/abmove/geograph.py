"""Location graph: nodes with landmark categories, undirected road edges.

Node categories come from a closed set of ten landmark kinds plus
``Intersection`` (road-network points that never carry anomaly
semantics).  Travel is one edge per timestep; waiting is a search action,
not a graph self-loop.  Graphs are immutable once loaded.

File formats (UTF-8 CSV with headers):
    nodes: id,lat,lon,category
    edges: src,dst
    weights (G_w export): src,dst,weight
"""

from __future__ import annotations

import csv
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .errors import GraphError
from .language import TAF
from .lattice import Annotation, Literal, SCALE

CATEGORIES = (
    "Commercial",
    "Unclassified",
    "NonProfit",
    "Residential",
    "Assembly",
    "Education",
    "Utility",
    "Industrial",
    "Agriculture",
    "Government",
    "Intersection",
)
LANDMARK_CATEGORIES = CATEGORIES[:-1]
INTERSECTION = "Intersection"

EARTH_RADIUS_M = 6_371_000.0


def category_predicate(category):
    """Agent-occupancy predicate name for a landmark category."""
    return category.lower()


def location_predicate(category):
    """Location-attribute predicate name (static graph facts)."""
    return f"loc_{category.lower()}"


def haversine_m(lat1, lon1, lat2, lon2):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class LocationNode:
    id: str
    lat: float
    lon: float
    category: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise GraphError(f"unknown category {self.category!r} for node {self.id!r}")

    @property
    def is_landmark(self):
        return self.category != INTERSECTION


class LocationGraph:
    """Undirected graph over LocationNodes; adjacency kept sorted."""

    def __init__(self, nodes, edges):
        self.nodes = {}
        for n in nodes:
            if n.id in self.nodes:
                raise GraphError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        adj = {nid: set() for nid in self.nodes}
        self._edges = set()
        for u, v in edges:
            if u not in self.nodes or v not in self.nodes:
                raise GraphError(f"edge ({u!r},{v!r}) references a missing node")
            if u == v:
                raise GraphError(f"self-loop on {u!r} (waiting is a search action)")
            self._edges.add((min(u, v), max(u, v)))
            adj[u].add(v)
            adj[v].add(u)
        self.adj = {nid: tuple(sorted(nbrs)) for nid, nbrs in adj.items()}

    def edges(self):
        return sorted(self._edges)

    def directed_movements(self):
        for u, v in self.edges():
            yield (u, v)
            yield (v, u)

    def neighbors(self, node_id):
        return self.adj[node_id]

    def category(self, node_id):
        return self.nodes[node_id].category

    def __len__(self):
        return len(self.nodes)

    def is_connected(self):
        if not self.nodes:
            return True
        start = next(iter(self.nodes))
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(self.nodes)

    def hop_distances(self, target):
        """Unweighted BFS distance from every node to the target."""
        dist = {target: 0}
        queue = deque([target])
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def nearest_node(self, lat, lon):
        """Closest node by great-circle distance; ties to the lower id."""
        best_d = best_id = None
        for nid, n in self.nodes.items():
            d = haversine_m(lat, lon, n.lat, n.lon)
            if best_d is None or d < best_d or (d == best_d and nid < best_id):
                best_d, best_id = d, nid
        if best_id is None:
            raise GraphError("graph has no nodes")
        return best_id, best_d


def load_graph(nodes_file, edges_file):
    """Load and validate a graph from CSV files; errors cite row numbers."""
    nodes = []
    with open(nodes_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "lat", "lon", "category"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise GraphError(f"{nodes_file}: header must contain id,lat,lon,category")
        for row_no, row in enumerate(reader, start=2):
            try:
                nodes.append(
                    LocationNode(
                        row["id"], float(row["lat"]), float(row["lon"]), row["category"]
                    )
                )
            except (TypeError, ValueError) as e:
                raise GraphError(f"{nodes_file} row {row_no}: {e}") from None
            except GraphError as e:
                raise GraphError(f"{nodes_file} row {row_no}: {e}") from None
    node_ids = {n.id for n in nodes}
    edges = []
    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"src", "dst"}.issubset(reader.fieldnames):
            raise GraphError(f"{edges_file}: header must contain src,dst")
        for row_no, row in enumerate(reader, start=2):
            u, v = row["src"], row["dst"]
            if u not in node_ids or v not in node_ids:
                raise GraphError(f"{edges_file} row {row_no}: edge ({u!r},{v!r}) references a missing node")
            edges.append((u, v))
    try:
        return LocationGraph(nodes, edges)
    except GraphError as e:
        raise GraphError(f"{nodes_file}/{edges_file}: {e}") from None


def save_graph(graph, nodes_file, edges_file):
    with open(nodes_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "lat", "lon", "category"])
        for nid in sorted(graph.nodes):
            n = graph.nodes[nid]
            w.writerow([n.id, repr(n.lat), repr(n.lon), n.category])
    with open(edges_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        for u, v in graph.edges():
            w.writerow([u, v])


_TRUE = Annotation(SCALE, SCALE)


def graph_to_facts(graph):
    """Static TAF encoding: symmetric conn facts plus one location-category
    fact per node, all time-invariant (@*)."""
    facts = []
    for u, v in graph.edges():
        facts.append(TAF(Literal("conn", (u, v)), _TRUE, None))
        facts.append(TAF(Literal("conn", (v, u)), _TRUE, None))
    for nid in sorted(graph.nodes):
        pred = location_predicate(graph.category(nid))
        facts.append(TAF(Literal(pred, (nid,)), _TRUE, None))
    return facts


def _draw_categories(rng, count, category_mix):
    if category_mix is None:
        category_mix = {c: 1.0 for c in CATEGORIES}
    cats = sorted(category_mix)
    weights = [category_mix[c] for c in cats]
    return [rng.choices(cats, weights=weights)[0] for _ in range(count)]


def synth_graph(kind, n, seed, category_mix=None, spacing_deg=0.005):
    """Deterministic synthetic graph: 'grid' or 'random-geometric'.

    Grid fills rows of ceil(sqrt(n)) columns; random-geometric scatters
    points in a spacing-scaled box, links pairs within a connectivity
    radius, then bridges any remaining components through their nearest
    node pairs.  Output is always connected.
    """
    if n < 2:
        raise GraphError(f"synthetic graph needs n >= 2, got {n}")
    rng = random.Random(seed)
    base_lat, base_lon = 36.0, -84.0
    if kind == "grid":
        cols = math.isqrt(n)
        if cols * cols < n:
            cols += 1
        ids = [f"n{k:04d}" for k in range(n)]
        cats = _draw_categories(rng, n, category_mix)
        nodes = []
        for k, nid in enumerate(ids):
            r, c = divmod(k, cols)
            nodes.append(
                LocationNode(nid, base_lat + r * spacing_deg, base_lon + c * spacing_deg, cats[k])
            )
        edges = []
        for k in range(n):
            r, c = divmod(k, cols)
            if c + 1 < cols and k + 1 < n and (k + 1) // cols == r:
                edges.append((ids[k], ids[k + 1]))
            if k + cols < n:
                edges.append((ids[k], ids[k + cols]))
        return LocationGraph(nodes, edges)
    if kind == "random-geometric":
        side = math.sqrt(n) * spacing_deg * 1.8
        ids = [f"n{k:04d}" for k in range(n)]
        pts = [(rng.random() * side, rng.random() * side) for _ in range(n)]
        cats = _draw_categories(rng, n, category_mix)
        nodes = [
            LocationNode(ids[k], base_lat + y, base_lon + x, cats[k])
            for k, (x, y) in enumerate(pts)
        ]
        radius = spacing_deg * 3.0
        r2 = radius * radius
        # Bucket points so only neighboring cells are compared.
        buckets = {}
        for i, (x, y) in enumerate(pts):
            buckets.setdefault((int(x / radius), int(y / radius)), []).append(i)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        edges = []
        for (cx, cy), members in sorted(buckets.items()):
            near = []
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    near.extend(buckets.get((cx + dx, cy + dy), ()))
            for i in members:
                for j in near:
                    if j <= i:
                        continue
                    ddx = pts[i][0] - pts[j][0]
                    ddy = pts[i][1] - pts[j][1]
                    if ddx * ddx + ddy * ddy <= r2:
                        edges.append((ids[i], ids[j]))
                        parent[find(i)] = find(j)
        # Bridge remaining components through their nearest cross-pairs:
        # one candidate per stray component, applied in ascending length.
        while True:
            comps = {}
            for i in range(n):
                comps.setdefault(find(i), []).append(i)
            if len(comps) == 1:
                break
            candidates = []
            roots = sorted(comps, key=lambda r: comps[r][0])
            for root in roots[1:]:
                best = None
                for i in comps[root]:
                    for j in range(n):
                        if find(j) == root:
                            continue
                        ddx = pts[i][0] - pts[j][0]
                        ddy = pts[i][1] - pts[j][1]
                        d2 = ddx * ddx + ddy * ddy
                        if best is None or d2 < best[0]:
                            best = (d2, i, j)
                candidates.append(best)
            for _d2, i, j in sorted(candidates):
                if find(i) != find(j):
                    edges.append((ids[i], ids[j]))
                    parent[find(i)] = find(j)
        return LocationGraph(nodes, edges)
    raise GraphError(f"unknown synthetic graph kind {kind!r}")


def _component_of(graph, start):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in graph.adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


@dataclass
class WeightedGraph:
    """Directed per-movement anomaly weights over a base graph.

    ``weights`` holds micro-unit costs for covered movements only;
    ``covered`` tracks which movements have been computed (ad-hoc mode
    fills it lazily).  ``computations`` counts weight evaluations.
    """

    base: LocationGraph
    weights: dict = field(default_factory=dict)
    covered: set = field(default_factory=set)
    computations: int = 0

    def weight(self, movement):
        if movement not in self.covered:
            raise GraphError(f"movement {movement!r} not covered yet")
        return self.weights[movement]

    def set_weight(self, movement, micro):
        if micro < 0:
            raise GraphError("movement weights must be nonnegative")
        self.weights[movement] = micro
        self.covered.add(movement)
        self.computations += 1

    @property
    def fully_covered(self):
        return len(self.covered) == 2 * len(self.base.edges())

    def save(self, path):
        from .lattice import micro_to_text

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "weight"])
            for (u, v) in sorted(self.covered):
                w.writerow([u, v, micro_to_text(self.weights[(u, v)])])
