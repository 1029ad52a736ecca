"""Rank-based link-prediction evaluation.

For every (fact, primary position) query we score the true fact and every
candidate obtained by substituting each entity id into that position, drop
candidates that form other known true facts (filtered protocol), and record
the rank of the true fact.  Ranks aggregate into MRR and Hits@k.

Ties are broken pessimistically by default (the true fact is placed after
every candidate with an equal score); an optimistic convention is available
behind a flag.  Qualifier sets of the query fact stay fixed during candidate
generation, and candidate substitution covers primary-tuple positions only.
Evaluation never mutates model or graph state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoders import HypeDecoderParams, transform_batch
from .graph_store import ResolvedFact

DEFAULT_KS = (1, 3, 5, 10)
TIE_BREAKS = ("pessimistic", "optimistic")


class EvaluationError(Exception):
    pass


class EmptyInput(EvaluationError):
    pass


class PositionOutOfRange(EvaluationError):
    pass


class FilterIndex:
    """Known true primary tuples, indexed for one-slot substitution queries."""

    def __init__(self, facts: list[ResolvedFact]):
        self._tuples: set[tuple[int, tuple[int, ...]]] = set()
        self._fillers: dict[tuple, set[int]] = {}
        for fact in facts:
            key = fact.primary_key()
            if key in self._tuples:
                continue
            self._tuples.add(key)
            for pos, ent in enumerate(fact.entities):
                hole = (fact.relation, pos, fact.entities[:pos], fact.entities[pos + 1 :])
                self._fillers.setdefault(hole, set()).add(ent)

    @classmethod
    def from_facts(cls, *fact_lists: list[ResolvedFact]) -> "FilterIndex":
        merged: list[ResolvedFact] = []
        for facts in fact_lists:
            merged.extend(facts)
        return cls(merged)

    def __contains__(self, key: tuple[int, tuple[int, ...]]) -> bool:
        return key in self._tuples

    def __len__(self) -> int:
        return len(self._tuples)

    def known_fillers(self, fact: ResolvedFact, position: int) -> set[int]:
        """Entity ids that make a known true fact when placed at ``position``."""
        hole = (fact.relation, position, fact.entities[:position], fact.entities[position + 1 :])
        return self._fillers.get(hole, set())


@dataclass
class TupleScorer:
    """Scores tuples against fixed embedding matrices with a chosen decoder."""

    entity_embeddings: np.ndarray
    relation_embeddings: np.ndarray
    decoder: str = "mdistmult"
    hype_params: HypeDecoderParams | None = None
    _transformed: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def num_entities(self) -> int:
        return self.entity_embeddings.shape[0]

    def _table(self, position: int) -> np.ndarray:
        """Entity table as seen from one tuple slot (positional transform for hype)."""
        if self.decoder != "hype":
            return self.entity_embeddings
        if position not in self._transformed:
            self._transformed[position] = transform_batch(
                self.entity_embeddings, position, self.hype_params
            )
        return self._transformed[position]

    def score_fact(self, fact: ResolvedFact) -> float:
        r = self.relation_embeddings[fact.relation]
        prod = np.ones_like(r)
        for pos, ent in enumerate(fact.entities):
            prod = prod * self._table(pos)[ent]
        return float(np.dot(r, prod))

    def candidate_raws(self, fact: ResolvedFact, position: int) -> np.ndarray:
        """Raw scores of all entity substitutions at ``position``, index-aligned."""
        if not 0 <= position < fact.arity:
            raise PositionOutOfRange(f"position {position} outside arity {fact.arity}")
        r = self.relation_embeddings[fact.relation]
        rest = np.ones_like(r)
        for pos, ent in enumerate(fact.entities):
            if pos != position:
                rest = rest * self._table(pos)[ent]
        return self._table(position) @ (r * rest)


def rank_from_scores(
    scores: np.ndarray,
    true_id: int,
    excluded: set[int] = frozenset(),
    tie_break: str = "pessimistic",
) -> int:
    """Rank of ``true_id`` among the non-excluded candidates.

    Pessimistic: 1 + strictly-greater + other equal-scored candidates.
    Optimistic: 1 + strictly-greater.
    """
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
    true_score = scores[true_id]
    if excluded:
        mask = np.ones(len(scores), dtype=bool)
        mask[list(excluded)] = False
        mask[true_id] = True
        considered = scores[mask]
    else:
        considered = scores
    greater = int((considered > true_score).sum())
    if tie_break == "optimistic":
        return 1 + greater
    ties = int((considered == true_score).sum()) - 1  # the true candidate itself
    return 1 + greater + ties


def rank_of(
    fact: ResolvedFact,
    position: int,
    scorer: TupleScorer,
    filter_index: FilterIndex | None = None,
    filtered: bool = True,
    tie_break: str = "pessimistic",
) -> int:
    """Filtered (or raw) rank of the true entity at one primary position."""
    scores = scorer.candidate_raws(fact, position)
    true_id = fact.entities[position]
    excluded: set[int] = set()
    if filtered and filter_index is not None:
        excluded = filter_index.known_fillers(fact, position) - {true_id}
    return rank_from_scores(scores, true_id, excluded, tie_break)


def mrr(ranks) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise EmptyInput("mrr needs at least one rank")
    return float(np.mean(1.0 / ranks))


def hits_at_k(ranks, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise EmptyInput("hits_at_k needs at least one rank")
    return float(np.mean(ranks <= k))


@dataclass(frozen=True)
class RankReport:
    """Per-query ranks plus their aggregates."""

    ranks: tuple[int, ...]
    mrr: float
    hits: dict[int, float]
    query_count: int
    filtered: bool = True
    tie_break: str = "pessimistic"

    def to_dict(self) -> dict:
        return {
            "query_count": self.query_count,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "filtered": self.filtered,
            "tie_break": self.tie_break,
        }

    def to_text(self) -> str:
        lines = [
            f"queries: {self.query_count}",
            f"mrr: {self.mrr:.6f}",
        ]
        for k in sorted(self.hits):
            lines.append(f"hits@{k}: {self.hits[k]:.6f}")
        lines.append(f"filtered: {str(self.filtered).lower()}")
        lines.append(f"tie_break: {self.tie_break}")
        return "\n".join(lines)


def evaluate(
    facts: list[ResolvedFact],
    scorer: TupleScorer,
    filter_index: FilterIndex | None = None,
    ks: tuple[int, ...] = DEFAULT_KS,
    filtered: bool = True,
    tie_break: str = "pessimistic",
) -> RankReport:
    """One rank per (fact, primary position) query, in fact-then-position order."""
    ranks: list[int] = []
    for fact in facts:
        for position in range(fact.arity):
            ranks.append(
                rank_of(fact, position, scorer, filter_index, filtered, tie_break)
            )
    if not ranks:
        raise EmptyInput("no queries to evaluate")
    return RankReport(
        ranks=tuple(ranks),
        mrr=mrr(ranks),
        hits={k: hits_at_k(ranks, k) for k in ks},
        query_count=len(ranks),
        filtered=filtered,
        tie_break=tie_break,
    )
