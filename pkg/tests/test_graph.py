import json

import numpy as np
import pytest

from hage.graph import (GraphFormatError, MemoryGraph, RelationType, load_graph,
                        save_graph)


def make_graph(d=4):
    g = MemoryGraph(d)
    for i in range(3):
        emb = np.zeros(d)
        emb[i % d] = 1.0
        g.add_node(f"event {i}", 100 * i, emb, {"k": str(i)})
    return g


class TestAddNode:
    def test_first_insert_gets_id_zero(self):
        g = MemoryGraph(4)
        assert g.add_node("a", 0, np.array([1.0, 0, 0, 0])) == 0

    def test_ids_are_dense(self):
        g = MemoryGraph(4)
        g.add_node("a", 0, np.array([1.0, 0, 0, 0]))
        assert g.add_node("b", 1, np.array([0, 1.0, 0, 0])) == 1

    def test_dimension_mismatch_rejected(self):
        g = MemoryGraph(4)
        with pytest.raises(ValueError, match="dimension"):
            g.add_node("a", 0, np.array([1.0, 0, 0]))

    def test_zero_norm_rejected(self):
        g = MemoryGraph(4)
        with pytest.raises(ValueError, match="zero-norm"):
            g.add_node("a", 0, np.zeros(4))


class TestAddEdge:
    def test_one_hot_init_without_cache(self):
        g = make_graph()
        eid = g.add_edge(0, 1, RelationType.SEMANTIC)
        np.testing.assert_array_equal(g.edges[eid].features_init, [0, 1, 0, 0])

    def test_cached_scores_pass_through(self):
        g = make_graph()
        eid = g.add_edge(0, 1, RelationType.CAUSAL,
                         cached_scores=[0.2, 0.9, 0.1, 0.4])
        np.testing.assert_array_equal(g.edges[eid].features_init,
                                      [0.2, 0.9, 0.1, 0.4])

    def test_out_of_range_cache_rejected(self):
        g = make_graph()
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            g.add_edge(0, 1, RelationType.CAUSAL, cached_scores=[1.3, 0, 0, 0])

    def test_missing_endpoint_rejected(self):
        g = make_graph()
        with pytest.raises(ValueError, match="endpoint"):
            g.add_edge(0, 99, RelationType.SEMANTIC)

    def test_features_init_is_immutable(self):
        g = make_graph()
        eid = g.add_edge(0, 1, RelationType.SEMANTIC)
        with pytest.raises(ValueError):
            g.edges[eid].features_init[0] = 0.5

    def test_features_start_as_copy_of_init(self):
        g = make_graph()
        eid = g.add_edge(0, 1, RelationType.SEMANTIC)
        g.edges[eid].features[0] = 0.5
        np.testing.assert_array_equal(g.edges[eid].features_init, [0, 1, 0, 0])


class TestNeighbors:
    def test_insertion_order(self):
        g = make_graph()
        e0 = g.add_edge(0, 2, RelationType.SEMANTIC)
        e1 = g.add_edge(0, 1, RelationType.TEMPORAL)
        assert g.neighbors(0) == [(e0, 2), (e1, 1)]

    def test_sink_is_empty(self):
        g = make_graph()
        assert g.neighbors(2) == []

    def test_count_grows(self):
        g = make_graph()
        for dst in (1, 2, 1):
            g.add_edge(0, dst, RelationType.SEMANTIC)
        assert len(g.neighbors(0)) == 3

    def test_unknown_node(self):
        g = make_graph()
        with pytest.raises(ValueError, match="unknown node"):
            g.neighbors(99)


class TestConsistency:
    def test_coo_matches_adjacency(self):
        g = make_graph()
        g.add_edge(0, 1, RelationType.SEMANTIC)
        g.add_edge(1, 2, RelationType.TEMPORAL)
        g.add_edge(0, 2, RelationType.CAUSAL)
        from_adj = sorted((src, dst) for src, lst in enumerate(g.adjacency)
                          for _, dst in lst)
        from_coo = sorted(zip(g.coo_src, g.coo_dst))
        assert from_adj == from_coo

    def test_relation_views_partition_edges(self):
        g = make_graph()
        g.add_edge(0, 1, RelationType.SEMANTIC)
        g.add_edge(1, 2, RelationType.SEMANTIC)
        g.add_edge(0, 2, RelationType.ENTITY)
        all_ids = sorted(eid for view in g.relation_views.values() for eid in view)
        assert all_ids == [0, 1, 2]


class TestPersistence:
    def test_round_trip_is_byte_identical(self, tmp_path):
        g = make_graph()
        g.add_edge(0, 1, RelationType.SEMANTIC, cached_scores=[0.25, 0.5, 0.125, 1.0])
        g.add_edge(1, 2, RelationType.TEMPORAL)
        g.edges[0].features = np.array([0.3, 0.123456789, -2.5, 7.0])
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_graph(g, p1)
        g2 = load_graph(p1)
        save_graph(g2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_preserves_structure(self, tmp_path):
        g = make_graph()
        g.add_edge(0, 1, RelationType.CAUSAL)
        path = tmp_path / "g.jsonl"
        save_graph(g, path)
        g2 = load_graph(path)
        assert g2.node_count == g.node_count
        assert g2.edge_count == g.edge_count
        assert g2.d == g.d
        assert g2.nodes[1].content == "event 1"
        assert g2.nodes[1].attributes == {"k": "1"}
        np.testing.assert_array_equal(g2.edges[0].features_init,
                                      g.edges[0].features_init)

    def test_dangling_endpoint_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        lines = [
            '{"format":"hage-graph","version":1,"dim":2}',
            '{"kind":"node","id":0,"content":"a","ts":0,"emb":[1.0,0.0],"attrs":{}}',
            '{"kind":"edge","id":0,"src":0,"dst":99,"rel":"semantic",'
            '"feat_init":[0,1,0,0],"feat":[0,1,0,0]}',
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(GraphFormatError, match="endpoint"):
            load_graph(path)

    def test_mixed_dimensions_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        lines = [
            '{"format":"hage-graph","version":1,"dim":2}',
            '{"kind":"node","id":0,"content":"a","ts":0,"emb":[1.0,0.0],"attrs":{}}',
            '{"kind":"node","id":1,"content":"b","ts":0,"emb":[1.0,0.0,0.0],"attrs":{}}',
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(GraphFormatError, match="inconsistent"):
            load_graph(path)

    def test_malformed_record_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"format":"hage-graph","version":1,"dim":2}\nnot json\n')
        with pytest.raises(GraphFormatError, match="malformed"):
            load_graph(path)

    def test_node_after_edge_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        lines = [
            '{"format":"hage-graph","version":1,"dim":2}',
            '{"kind":"node","id":0,"content":"a","ts":0,"emb":[1.0,0.0],"attrs":{}}',
            '{"kind":"node","id":1,"content":"b","ts":0,"emb":[0.0,1.0],"attrs":{}}',
            '{"kind":"edge","id":0,"src":0,"dst":1,"rel":"semantic",'
            '"feat_init":[0,1,0,0],"feat":[0,1,0,0]}',
            '{"kind":"node","id":2,"content":"c","ts":0,"emb":[1.0,1.0],"attrs":{}}',
        ]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(GraphFormatError, match="after edge"):
            load_graph(path)

    def test_nine_significant_digit_serialization(self, tmp_path):
        g = MemoryGraph(2)
        g.add_node("a", 0, np.array([0.123456789123456, 1.0]))
        path = tmp_path / "g.jsonl"
        save_graph(g, path)
        rec = json.loads(path.read_text().splitlines()[1])
        assert rec["emb"][0] == 0.123456789


class TestRelationType:
    def test_ordinals_are_stable(self):
        assert [int(r) for r in RelationType] == [0, 1, 2, 3]
        assert RelationType.from_label("causal") is RelationType.CAUSAL

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            RelationType.from_label("friendship")
