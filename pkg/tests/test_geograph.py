"""Graph loading, fact encoding, and synthetic generation."""

import pytest

from abmove.errors import GraphError
from abmove.geograph import (
    LocationGraph,
    LocationNode,
    WeightedGraph,
    graph_to_facts,
    load_graph,
    save_graph,
    synth_graph,
)


def toy_graph():
    nodes = [
        LocationNode("n0", 36.0, -84.0, "Education"),
        LocationNode("n1", 36.0, -83.995, "Intersection"),
        LocationNode("n2", 36.0, -83.99, "Utility"),
        LocationNode("n3", 36.005, -84.0, "Residential"),
        LocationNode("n4", 36.005, -83.995, "Commercial"),
    ]
    edges = [("n0", "n1"), ("n1", "n2"), ("n0", "n3"), ("n3", "n4")]
    return LocationGraph(nodes, edges)


def write_csvs(tmp_path, graph):
    nodes_file = tmp_path / "nodes.csv"
    edges_file = tmp_path / "edges.csv"
    save_graph(graph, nodes_file, edges_file)
    return nodes_file, edges_file


class TestLoad:
    def test_five_node_fixture(self, tmp_path):
        g = load_graph(*write_csvs(tmp_path, toy_graph()))
        assert len(g) == 5
        assert len(g.edges()) == 4

    def test_dangling_edge_cites_row(self, tmp_path):
        nodes_file, edges_file = write_csvs(tmp_path, toy_graph())
        with open(edges_file, "a", encoding="utf-8") as fh:
            fh.write("n4,n9\n")
        with pytest.raises(GraphError) as err:
            load_graph(nodes_file, edges_file)
        assert "row 6" in str(err.value)

    def test_unknown_category_rejected(self, tmp_path):
        nodes_file = tmp_path / "nodes.csv"
        nodes_file.write_text("id,lat,lon,category\nn0,36.0,-84.0,Castle\n")
        edges_file = tmp_path / "edges.csv"
        edges_file.write_text("src,dst\n")
        with pytest.raises(GraphError):
            load_graph(nodes_file, edges_file)

    def test_duplicate_node_rejected(self, tmp_path):
        nodes_file = tmp_path / "nodes.csv"
        nodes_file.write_text(
            "id,lat,lon,category\nn0,36.0,-84.0,Education\nn0,36.1,-84.0,Utility\n"
        )
        edges_file = tmp_path / "edges.csv"
        edges_file.write_text("src,dst\n")
        with pytest.raises(GraphError):
            load_graph(nodes_file, edges_file)

    def test_round_trip_identity(self, tmp_path):
        g = toy_graph()
        g2 = load_graph(*write_csvs(tmp_path, g))
        assert g2.nodes == g.nodes
        assert g2.edges() == g.edges()

    def test_large_synth_export(self, tmp_path):
        g = synth_graph("random-geometric", 2000, seed=5)
        nodes_file, edges_file = write_csvs(tmp_path, g)
        n_lines = len(nodes_file.read_text().splitlines())
        g2 = load_graph(nodes_file, edges_file)
        assert len(g2) == n_lines - 1 == 2000


class TestFacts:
    def test_one_edge_gives_two_conn_facts(self):
        g = LocationGraph(
            [LocationNode("a", 0, 0, "Education"), LocationNode("b", 0, 0.01, "Utility")],
            [("a", "b")],
        )
        facts = graph_to_facts(g)
        conn = [f for f in facts if f.literal.predicate == "conn"]
        assert len(conn) == 2
        assert {f.literal.args for f in conn} == {("a", "b"), ("b", "a")}
        assert all(f.time is None for f in facts)

    def test_empty_graph_empty_facts(self):
        assert graph_to_facts(LocationGraph([], [])) == []

    def test_path_graph_counts(self):
        nodes = [LocationNode(f"n{i}", 0, i / 100, "Residential") for i in range(5)]
        edges = [(f"n{i}", f"n{i+1}") for i in range(4)]
        facts = graph_to_facts(LocationGraph(nodes, edges))
        conn = [f for f in facts if f.literal.predicate == "conn"]
        cats = [f for f in facts if f.literal.predicate == "loc_residential"]
        assert len(conn) == 8 and len(cats) == 5
        assert len(facts) == 13

    def test_conn_facts_symmetric(self):
        facts = graph_to_facts(toy_graph())
        conn = {f.literal.args for f in facts if f.literal.predicate == "conn"}
        assert all((v, u) in conn for (u, v) in conn)


class TestSynth:
    def test_grid_nine_is_three_by_three(self):
        g = synth_graph("grid", 9, seed=1)
        assert len(g) == 9
        assert len(g.edges()) == 12
        assert g.is_connected()

    def test_deterministic_per_seed(self):
        a = synth_graph("grid", 16, seed=3)
        b = synth_graph("grid", 16, seed=3)
        assert a.nodes == b.nodes and a.edges() == b.edges()
        c = synth_graph("random-geometric", 40, seed=9)
        d = synth_graph("random-geometric", 40, seed=9)
        assert c.nodes == d.nodes and c.edges() == d.edges()

    def test_random_geometric_connected(self):
        for seed in (1, 7, 23):
            g = synth_graph("random-geometric", 50, seed=seed)
            assert g.is_connected()

    def test_category_mix_respected(self):
        g = synth_graph("grid", 25, seed=2, category_mix={"Education": 1.0})
        assert all(n.category == "Education" for n in g.nodes.values())

    def test_too_small_rejected(self):
        with pytest.raises(GraphError):
            synth_graph("grid", 1, seed=1)

    def test_hop_distances(self):
        g = toy_graph()
        dist = g.hop_distances("n2")
        assert dist["n2"] == 0 and dist["n1"] == 1 and dist["n0"] == 2
        assert dist["n4"] == 4


class TestWeightedGraph:
    def test_coverage_tracking(self):
        gw = WeightedGraph(toy_graph())
        gw.set_weight(("n0", "n1"), 900_000)
        assert gw.weight(("n0", "n1")) == 900_000
        assert not gw.fully_covered
        with pytest.raises(GraphError):
            gw.weight(("n1", "n0"))

    def test_save(self, tmp_path):
        gw = WeightedGraph(toy_graph())
        gw.set_weight(("n0", "n1"), 900_000)
        gw.set_weight(("n0", "n3"), 0)
        out = tmp_path / "gw.csv"
        gw.save(out)
        assert out.read_text() == "src,dst,weight\nn0,n1,0.9\nn0,n3,0\n"

    def test_nearest_node_tie_breaks_to_lower_id(self):
        g = LocationGraph(
            [
                LocationNode("a1", 0.0, 0.001, "Education"),
                LocationNode("a0", 0.0, -0.001, "Utility"),
            ],
            [("a0", "a1")],
        )
        nid, dist = g.nearest_node(0.0, 0.0)
        assert nid == "a0"
        assert dist == pytest.approx(111.19, abs=0.5)
