"""Vocabulary construction, coordinate lists, accessors, and snapshots."""

import numpy as np
import pytest

from hehr.fact_format import FactRecord, QualifierPair, parse_dataset
from hehr.graph_store import (
    IndexOutOfRange,
    SnapshotError,
    UnknownToken,
    build_graph,
    build_vocab,
    extend_vocab,
    load_snapshot,
    resolve_records,
    save_snapshot,
)
from reference import random_records

FACT5 = "<<PlayedTogether, Messi, Suarez, Neymar>>; PlayedInTeam, FC Barcelona"
FACT6 = "<<PlayedTogether, Messi, Di Maria, Martinez>>; PlayedInTeam, Argentina"


@pytest.fixture
def two_fact_records():
    records, diags = parse_dataset([FACT5, FACT6])
    assert not diags
    return records


class TestBuildVocab:
    def test_primary_entities_before_qualifier_entities(self, two_fact_records):
        vocab = build_vocab(two_fact_records)
        assert [vocab.entity_to_id[e] for e in ("Messi", "Suarez", "Neymar", "Di Maria", "Martinez")] == [0, 1, 2, 3, 4]
        # qualifier entities follow, in fact order
        assert vocab.entity_to_id["FC Barcelona"] == 5
        assert vocab.entity_to_id["Argentina"] == 6

    def test_relation_order(self, two_fact_records):
        vocab = build_vocab(two_fact_records)
        assert vocab.relation_to_id == {"PlayedTogether": 0, "PlayedInTeam": 1}

    def test_seeded_relations_reserve_low_ids(self, two_fact_records):
        vocab = build_vocab(two_fact_records, seed_relations=("BornIn",))
        assert vocab.relation_to_id == {"BornIn": 0, "PlayedTogether": 1, "PlayedInTeam": 2}

    def test_bijective(self, two_fact_records):
        vocab = build_vocab(two_fact_records)
        for token, idx in vocab.entity_to_id.items():
            assert vocab.id_to_entity[idx] == token
        for token, idx in vocab.relation_to_id.items():
            assert vocab.id_to_relation[idx] == token

    def test_empty_input(self):
        vocab = build_vocab([])
        assert vocab.num_entities == 0 and vocab.num_relations == 0

    def test_repeated_fact_idempotent(self, two_fact_records):
        once = build_vocab(two_fact_records)
        twice = build_vocab(two_fact_records + two_fact_records)
        assert once == twice

    def test_extend_keeps_existing_ids(self, two_fact_records):
        vocab = build_vocab(two_fact_records)
        extra = [FactRecord("NewRel", ("Messi", "Pele"))]
        bigger = extend_vocab(vocab, extra)
        assert bigger.entity_to_id["Messi"] == vocab.entity_to_id["Messi"]
        assert bigger.entity_to_id["Pele"] == vocab.num_entities
        assert bigger.relation_to_id["NewRel"] == vocab.num_relations


class TestBuildGraph:
    def test_two_fact_incidence(self, two_fact_records):
        # relation id 0 is reserved for a relation with no hyperedge instances,
        # matching the reference table layout this store reproduces
        vocab = build_vocab(two_fact_records, seed_relations=("BornIn",))
        graph = build_graph(two_fact_records, vocab)
        assert graph.edge_relation.tolist() == [1, 1]
        assert graph.primary_edge.tolist() == [0, 0, 0, 1, 1, 1]
        assert graph.primary_entity.tolist() == [0, 1, 2, 0, 3, 4]
        assert graph.primary_position.tolist() == [0, 1, 2, 0, 1, 2]
        assert graph.qual_edge.tolist() == [0, 1]
        assert graph.qual_relation.tolist() == [2, 2]
        assert graph.qual_entity.tolist() == [5, 6]

    def test_zero_qualifier_fact(self):
        records = [FactRecord("R", ("a", "b"))]
        graph = build_graph(records, build_vocab(records))
        assert len(graph.qual_edge) == 0

    def test_unknown_token_raises(self, two_fact_records):
        vocab = build_vocab(two_fact_records[:1])
        with pytest.raises(UnknownToken):
            build_graph(two_fact_records, vocab)

    def test_deterministic_construction(self):
        rng = np.random.default_rng(13)
        records = random_records(rng, num_facts=30)
        vocab = build_vocab(records)
        a = build_graph(records, vocab)
        b = build_graph(records, vocab)
        for name in (
            "edge_relation",
            "primary_edge",
            "primary_entity",
            "primary_position",
            "qual_edge",
            "qual_relation",
            "qual_entity",
        ):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_csr_views_match_flat_lists(self):
        """Adjacency views rebuilt by brute force equal the stored views."""
        rng = np.random.default_rng(99)
        records = random_records(rng, num_entities=15, num_facts=100, max_arity=4)
        vocab = build_vocab(records)
        graph = build_graph(records, vocab)
        for e in range(graph.num_edges):
            expect = [i for i in range(len(graph.primary_edge)) if graph.primary_edge[i] == e]
            assert graph.edge_to_primary.group(e).tolist() == expect
            expect_q = [i for i in range(len(graph.qual_edge)) if graph.qual_edge[i] == e]
            assert sorted(graph.edge_to_qual.group(e).tolist()) == expect_q
        for v in range(graph.num_entities):
            expect = [i for i in range(len(graph.primary_entity)) if graph.primary_entity[i] == v]
            assert sorted(graph.entity_to_primary.group(v).tolist()) == expect


class TestAccessors:
    @pytest.fixture
    def fig_graph(self, two_fact_records):
        vocab = build_vocab(two_fact_records, seed_relations=("BornIn",))
        return build_graph(two_fact_records, vocab)

    def test_primary_nodes_tuple_order(self, fig_graph):
        assert fig_graph.primary_nodes(0).tolist() == [0, 1, 2]
        assert fig_graph.primary_nodes(1).tolist() == [0, 3, 4]

    def test_qualifier_edges(self, fig_graph):
        assert fig_graph.qualifier_edges(5).tolist() == [0]
        assert fig_graph.qualifier_edges(6).tolist() == [1]
        assert fig_graph.qualifier_edges(0).tolist() == []

    def test_relation_instances(self, fig_graph):
        assert fig_graph.relation_instances(1).tolist() == [0, 1]
        assert fig_graph.relation_instances(0).tolist() == []

    def test_primary_edges(self, fig_graph):
        assert fig_graph.primary_edges(0).tolist() == [0, 1]
        assert fig_graph.primary_edges(4).tolist() == [1]

    def test_index_out_of_range(self, fig_graph):
        with pytest.raises(IndexOutOfRange):
            fig_graph.primary_nodes(2)
        with pytest.raises(IndexOutOfRange):
            fig_graph.primary_edges(7)
        with pytest.raises(IndexOutOfRange):
            fig_graph.relation_instances(3)


class TestGraphInvariants:
    def test_arity_sum_equals_incidence_length(self):
        rng = np.random.default_rng(4)
        records = random_records(rng, num_facts=40)
        graph = build_graph(records, build_vocab(records))
        assert sum(graph.arity(e) for e in range(graph.num_edges)) == len(graph.primary_edge)

    def test_incidence_duality(self):
        """v in primary_nodes(e) iff e in primary_edges(v), exhaustively."""
        rng = np.random.default_rng(5)
        records = random_records(rng, num_entities=10, num_facts=50)
        graph = build_graph(records, build_vocab(records))
        for e in range(graph.num_edges):
            nodes = set(graph.primary_nodes(e).tolist())
            for v in range(graph.num_entities):
                assert (v in nodes) == (e in graph.primary_edges(v).tolist())

    def test_relation_instances_partition_edges(self):
        rng = np.random.default_rng(6)
        records = random_records(rng, num_facts=60)
        graph = build_graph(records, build_vocab(records))
        seen = []
        for r in range(graph.num_relations):
            seen.extend(graph.relation_instances(r).tolist())
        assert sorted(seen) == list(range(graph.num_edges))


class TestSnapshot:
    def test_round_trip(self, tmp_path, two_fact_records):
        vocab = build_vocab(two_fact_records, seed_relations=("BornIn",))
        graph = build_graph(two_fact_records, vocab)
        path = tmp_path / "graph.hehr"
        save_snapshot(graph, str(path))
        loaded = load_snapshot(str(path))
        assert loaded.num_entities == graph.num_entities
        assert loaded.num_relations == graph.num_relations
        assert np.array_equal(loaded.edge_relation, graph.edge_relation)
        assert np.array_equal(loaded.primary_entity, graph.primary_entity)
        assert np.array_equal(loaded.qual_entity, graph.qual_entity)
        assert loaded.primary_nodes(0).tolist() == graph.primary_nodes(0).tolist()

    def test_magic_bytes(self, tmp_path, two_fact_records):
        graph = build_graph(two_fact_records, build_vocab(two_fact_records))
        path = tmp_path / "graph.hehr"
        save_snapshot(graph, str(path))
        assert path.read_bytes()[:4] == b"HEHR"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(SnapshotError):
            load_snapshot(str(path))

    def test_corrupt_ids_rejected(self, tmp_path, two_fact_records):
        graph = build_graph(two_fact_records, build_vocab(two_fact_records))
        path = tmp_path / "graph.hehr"
        save_snapshot(graph, str(path))
        blob = bytearray(path.read_bytes())
        blob[-4:] = (9999).to_bytes(4, "little")  # last qualifier entity id
        path.write_bytes(bytes(blob))
        with pytest.raises(SnapshotError):
            load_snapshot(str(path))

    def test_truncated_rejected(self, tmp_path, two_fact_records):
        graph = build_graph(two_fact_records, build_vocab(two_fact_records))
        path = tmp_path / "graph.hehr"
        save_snapshot(graph, str(path))
        path.write_bytes(path.read_bytes()[:-6])
        with pytest.raises(SnapshotError):
            load_snapshot(str(path))


class TestResolveRecords:
    def test_resolution_matches_vocab(self, two_fact_records):
        vocab = build_vocab(two_fact_records)
        facts = resolve_records(two_fact_records, vocab)
        assert facts[0].entities == (0, 1, 2)
        assert facts[1].qualifiers == ((1, 6),)

    def test_unknown_raises(self, two_fact_records):
        vocab = build_vocab(two_fact_records[:1])
        with pytest.raises(UnknownToken):
            resolve_records(two_fact_records, vocab)
