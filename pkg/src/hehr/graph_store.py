"""In-memory coordinate-list graph built from fact records.

The store keeps three parallel-array groups, mirroring the file format:

* ``edge_relation[e]`` — relation id of hyperedge ``e`` (one per fact);
* primary incidence — ``(edge, entity, position)`` triples, one row per
  primary-tuple slot, grouped by edge in input order;
* qualifier incidence — ``(edge, relation, entity)`` triples, one row per
  qualifier pair.

Derived adjacency views (:class:`CsrView`) answer "which incidence rows touch
edge e / entity v / relation r" without scanning, and fix the reduction order
used by the propagation kernels: within a group, rows are visited in
ascending incidence-row order, so repeated runs are bit-identical.

The store is immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .fact_format import FactRecord


class GraphError(Exception):
    """Base class for graph construction/access failures."""


class UnknownToken(GraphError):
    """A record mentions a token absent from the vocabulary."""


class IndexOutOfRange(GraphError):
    """An entity/relation/hyperedge index is outside the stored range."""


class SnapshotError(GraphError):
    """A binary snapshot is malformed or violates store invariants."""


@dataclass(frozen=True)
class VocabMaps:
    """Bidirectional dense-id maps for entities and relations."""

    entity_to_id: dict[str, int]
    id_to_entity: tuple[str, ...]
    relation_to_id: dict[str, int]
    id_to_relation: tuple[str, ...]

    @property
    def num_entities(self) -> int:
        return len(self.id_to_entity)

    @property
    def num_relations(self) -> int:
        return len(self.id_to_relation)

    def entity_id(self, token: str) -> int:
        try:
            return self.entity_to_id[token]
        except KeyError:
            raise UnknownToken(f"unknown entity {token!r}") from None

    def relation_id(self, token: str) -> int:
        try:
            return self.relation_to_id[token]
        except KeyError:
            raise UnknownToken(f"unknown relation {token!r}") from None


@dataclass(frozen=True)
class ResolvedFact:
    """A fact with every token replaced by its vocabulary id."""

    relation: int
    entities: tuple[int, ...]
    qualifiers: tuple[tuple[int, int], ...] = ()  # (relation id, entity id)

    @property
    def arity(self) -> int:
        return len(self.entities)

    def primary_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.relation, self.entities)


def build_vocab(
    records: list[FactRecord],
    seed_entities: tuple[str, ...] = (),
    seed_relations: tuple[str, ...] = (),
) -> VocabMaps:
    """Assign dense ids by first occurrence.

    Primary entities of all facts are scanned first (fact by fact, tuple
    order), then qualifier entities; relations likewise (edge relations, then
    qualifier relations).  ``seed_*`` tokens are registered before scanning,
    which reserves the lowest ids for them; seeded tokens may have zero
    occurrences in the records.
    """
    entity_to_id: dict[str, int] = {}
    relation_to_id: dict[str, int] = {}

    def intern(table: dict[str, int], token: str) -> None:
        if token not in table:
            table[token] = len(table)

    for token in seed_entities:
        intern(entity_to_id, token)
    for token in seed_relations:
        intern(relation_to_id, token)
    for record in records:
        intern(relation_to_id, record.relation)
        for entity in record.primary_entities:
            intern(entity_to_id, entity)
    for record in records:
        for pair in record.qualifiers:
            intern(relation_to_id, pair.relation)
            intern(entity_to_id, pair.entity)

    return VocabMaps(
        entity_to_id=entity_to_id,
        id_to_entity=tuple(entity_to_id),
        relation_to_id=relation_to_id,
        id_to_relation=tuple(relation_to_id),
    )


def extend_vocab(vocab: VocabMaps, records: list[FactRecord]) -> VocabMaps:
    """Return a vocabulary that keeps every existing id and appends new tokens."""
    return build_vocab(records, seed_entities=vocab.id_to_entity, seed_relations=vocab.id_to_relation)


def resolve_records(records: list[FactRecord], vocab: VocabMaps) -> list[ResolvedFact]:
    resolved = []
    for record in records:
        resolved.append(
            ResolvedFact(
                relation=vocab.relation_id(record.relation),
                entities=tuple(vocab.entity_id(e) for e in record.primary_entities),
                qualifiers=tuple(
                    (vocab.relation_id(p.relation), vocab.entity_id(p.entity))
                    for p in record.qualifiers
                ),
            )
        )
    return resolved


@dataclass(frozen=True)
class CsrView:
    """Offset-indexed grouping of incidence rows by some key.

    ``rows[offsets[k]:offsets[k+1]]`` are the incidence-row indices whose key
    equals ``k``, in ascending row order.
    """

    offsets: np.ndarray  # int64, length num_keys + 1
    rows: np.ndarray  # int64, length = number of incidence rows

    def group(self, key: int) -> np.ndarray:
        return self.rows[self.offsets[key] : self.offsets[key + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)


def _csr_from_keys(keys: np.ndarray, num_keys: int) -> CsrView:
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=num_keys)
    offsets = np.zeros(num_keys + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return CsrView(offsets=offsets, rows=order.astype(np.int64))


@dataclass(frozen=True)
class GraphStore:
    """Immutable coordinate-list knowledge graph."""

    num_entities: int
    num_relations: int
    edge_relation: np.ndarray  # (num_edges,) relation id per hyperedge
    primary_edge: np.ndarray  # (P,) hyperedge index per primary slot
    primary_entity: np.ndarray  # (P,) entity id per primary slot
    primary_position: np.ndarray  # (P,) 0-based slot within the tuple
    qual_edge: np.ndarray  # (Q,) hyperedge index per qualifier pair
    qual_relation: np.ndarray  # (Q,) qualifier relation id
    qual_entity: np.ndarray  # (Q,) qualifier entity id

    # adjacency views derived from the flat lists
    edge_to_primary: CsrView = field(repr=False, default=None)
    edge_to_qual: CsrView = field(repr=False, default=None)
    entity_to_primary: CsrView = field(repr=False, default=None)
    entity_to_qual: CsrView = field(repr=False, default=None)
    relation_to_edges: CsrView = field(repr=False, default=None)

    @property
    def num_edges(self) -> int:
        return len(self.edge_relation)

    def _check_edge(self, e: int) -> None:
        if not 0 <= e < self.num_edges:
            raise IndexOutOfRange(f"hyperedge {e} outside 0..{self.num_edges - 1}")

    def _check_entity(self, v: int) -> None:
        if not 0 <= v < self.num_entities:
            raise IndexOutOfRange(f"entity {v} outside 0..{self.num_entities - 1}")

    def _check_relation(self, r: int) -> None:
        if not 0 <= r < self.num_relations:
            raise IndexOutOfRange(f"relation {r} outside 0..{self.num_relations - 1}")

    def arity(self, e: int) -> int:
        self._check_edge(e)
        view = self.edge_to_primary
        return int(view.offsets[e + 1] - view.offsets[e])

    def primary_nodes(self, e: int) -> np.ndarray:
        """Entity ids of edge ``e``'s primary tuple, in tuple order."""
        self._check_edge(e)
        rows = self.edge_to_primary.group(e)
        order = np.argsort(self.primary_position[rows], kind="stable")
        return self.primary_entity[rows[order]]

    def qualifier_nodes(self, e: int) -> np.ndarray:
        """Distinct qualifier entity ids of edge ``e``, ascending."""
        self._check_edge(e)
        rows = self.edge_to_qual.group(e)
        return np.unique(self.qual_entity[rows])

    def primary_edges(self, v: int) -> np.ndarray:
        """Distinct hyperedges having ``v`` in the primary tuple, ascending."""
        self._check_entity(v)
        rows = self.entity_to_primary.group(v)
        return np.unique(self.primary_edge[rows])

    def qualifier_edges(self, v: int) -> np.ndarray:
        """Distinct hyperedges having ``v`` as a qualifier entity, ascending."""
        self._check_entity(v)
        rows = self.entity_to_qual.group(v)
        return np.unique(self.qual_edge[rows])

    def relation_instances(self, r: int) -> np.ndarray:
        """Hyperedges whose relation type is ``r``, ascending (may be empty)."""
        self._check_relation(r)
        return np.sort(self.relation_to_edges.group(r))

    def max_arity(self) -> int:
        if self.num_edges == 0:
            return 0
        return int(self.edge_to_primary.counts().max())


def build_graph(records: list[FactRecord], vocab: VocabMaps) -> GraphStore:
    """Populate the coordinate lists; hyperedge ``i`` corresponds to ``records[i]``."""
    resolved = resolve_records(records, vocab)
    return build_graph_resolved(resolved, vocab.num_entities, vocab.num_relations)


def build_graph_resolved(
    facts: list[ResolvedFact], num_entities: int, num_relations: int
) -> GraphStore:
    edge_relation: list[int] = []
    p_edge: list[int] = []
    p_entity: list[int] = []
    p_position: list[int] = []
    q_edge: list[int] = []
    q_relation: list[int] = []
    q_entity: list[int] = []
    for e, fact in enumerate(facts):
        if not 0 <= fact.relation < num_relations:
            raise UnknownToken(f"relation id {fact.relation} outside vocabulary")
        edge_relation.append(fact.relation)
        for pos, ent in enumerate(fact.entities):
            if not 0 <= ent < num_entities:
                raise UnknownToken(f"entity id {ent} outside vocabulary")
            p_edge.append(e)
            p_entity.append(ent)
            p_position.append(pos)
        for qr, qv in fact.qualifiers:
            if not 0 <= qr < num_relations:
                raise UnknownToken(f"relation id {qr} outside vocabulary")
            if not 0 <= qv < num_entities:
                raise UnknownToken(f"entity id {qv} outside vocabulary")
            q_edge.append(e)
            q_relation.append(qr)
            q_entity.append(qv)

    def arr(values: list[int]) -> np.ndarray:
        return np.asarray(values, dtype=np.int64)

    num_edges = len(edge_relation)
    edge_relation_a = arr(edge_relation)
    primary_edge = arr(p_edge)
    qual_edge = arr(q_edge)
    return GraphStore(
        num_entities=num_entities,
        num_relations=num_relations,
        edge_relation=edge_relation_a,
        primary_edge=primary_edge,
        primary_entity=arr(p_entity),
        primary_position=arr(p_position),
        qual_edge=qual_edge,
        qual_relation=arr(q_relation),
        qual_entity=arr(q_entity),
        edge_to_primary=_csr_from_keys(primary_edge, num_edges),
        edge_to_qual=_csr_from_keys(qual_edge, num_edges),
        entity_to_primary=_csr_from_keys(arr(p_entity), num_entities),
        entity_to_qual=_csr_from_keys(arr(q_entity), num_entities),
        relation_to_edges=_csr_from_keys(edge_relation_a, num_relations),
    )


# ---------------------------------------------------------------------------
# Binary snapshot
#
# Layout (all integers little-endian):
#   magic           4 bytes  b"HEHR"
#   version         u16      currently 1
#   num_entities    u32
#   num_relations   u32
#   7 lists, each:  u32 length, then <length> u32 values, in this order:
#     edge_relation, primary_edge, primary_entity, primary_position,
#     qual_edge, qual_relation, qual_entity
# ---------------------------------------------------------------------------

SNAPSHOT_MAGIC = b"HEHR"
SNAPSHOT_VERSION = 1


def save_snapshot(store: GraphStore, path: str) -> None:
    def encode(values: np.ndarray) -> bytes:
        return struct.pack("<I", len(values)) + values.astype("<u4").tobytes()

    with open(path, "wb") as handle:
        handle.write(SNAPSHOT_MAGIC)
        handle.write(struct.pack("<H", SNAPSHOT_VERSION))
        handle.write(struct.pack("<II", store.num_entities, store.num_relations))
        for values in (
            store.edge_relation,
            store.primary_edge,
            store.primary_entity,
            store.primary_position,
            store.qual_edge,
            store.qual_relation,
            store.qual_entity,
        ):
            handle.write(encode(values))


def load_snapshot(path: str) -> GraphStore:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError("bad magic; not a graph snapshot")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    num_entities, num_relations = struct.unpack_from("<II", blob, 6)
    offset = 14
    lists: list[np.ndarray] = []
    for _ in range(7):
        if offset + 4 > len(blob):
            raise SnapshotError("truncated snapshot (missing list header)")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        end = offset + 4 * length
        if end > len(blob):
            raise SnapshotError("truncated snapshot (missing list payload)")
        lists.append(np.frombuffer(blob[offset:end], dtype="<u4").astype(np.int64))
        offset += 4 * length
    if offset != len(blob):
        raise SnapshotError("trailing bytes after snapshot payload")
    edge_relation, p_edge, p_entity, p_position, q_edge, q_relation, q_entity = lists
    if not (len(p_edge) == len(p_entity) == len(p_position)):
        raise SnapshotError("primary incidence lists have mismatched lengths")
    if not (len(q_edge) == len(q_relation) == len(q_entity)):
        raise SnapshotError("qualifier incidence lists have mismatched lengths")
    num_edges = len(edge_relation)
    for arrays, bound, what in (
        ((edge_relation, q_relation), num_relations, "relation"),
        ((p_entity, q_entity), num_entities, "entity"),
        ((p_edge, q_edge), num_edges, "hyperedge"),
    ):
        for values in arrays:
            if len(values) and (values.min() < 0 or values.max() >= bound):
                raise SnapshotError(f"{what} id outside declared range")
    store = GraphStore(
        num_entities=num_entities,
        num_relations=num_relations,
        edge_relation=edge_relation,
        primary_edge=p_edge,
        primary_entity=p_entity,
        primary_position=p_position,
        qual_edge=q_edge,
        qual_relation=q_relation,
        qual_entity=q_entity,
        edge_to_primary=_csr_from_keys(p_edge, num_edges),
        edge_to_qual=_csr_from_keys(q_edge, num_edges),
        entity_to_primary=_csr_from_keys(p_entity, num_entities),
        entity_to_qual=_csr_from_keys(q_entity, num_entities),
        relation_to_edges=_csr_from_keys(edge_relation, num_relations),
    )
    for e in range(num_edges):
        positions = np.sort(p_position[store.edge_to_primary.group(e)])
        if not np.array_equal(positions, np.arange(len(positions))):
            raise SnapshotError(f"hyperedge {e} has non-contiguous primary positions")
        if len(positions) == 0:
            raise SnapshotError(f"hyperedge {e} has an empty primary tuple")
    return store
