"""Independent reference implementations used as test oracles.

Everything here is written in a deliberately different style from the
package: dense incidence matrices and plain Python loops instead of
coordinate lists and batched kernels.  The oracles consume raw fact
descriptions, not package data structures, so they stay decoupled from the
code they check.
"""

from __future__ import annotations

import math

import numpy as np

from hehr.fact_format import FactRecord, QualifierPair


# ---------------------------------------------------------------------------
# Random dataset generation
# ---------------------------------------------------------------------------


def random_records(
    rng: np.random.Generator,
    num_entities: int = 12,
    num_relations: int = 4,
    num_facts: int = 8,
    max_arity: int = 4,
    max_qualifiers: int = 2,
    allow_duplicate_entities: bool = False,
) -> list[FactRecord]:
    entities = [f"e{i}" for i in range(num_entities)]
    relations = [f"r{i}" for i in range(num_relations)]
    records = []
    for _ in range(num_facts):
        arity = int(rng.integers(1, max_arity + 1))
        if allow_duplicate_entities:
            primary = [entities[int(rng.integers(num_entities))] for _ in range(arity)]
        else:
            primary = [entities[i] for i in rng.choice(num_entities, size=min(arity, num_entities), replace=False)]
        quals = []
        for _ in range(int(rng.integers(0, max_qualifiers + 1))):
            quals.append(
                QualifierPair(
                    relations[int(rng.integers(num_relations))],
                    entities[int(rng.integers(num_entities))],
                )
            )
        records.append(
            FactRecord(
                relations[int(rng.integers(num_relations))], tuple(primary), tuple(quals)
            )
        )
    return records


def facts_as_plain(records: list[FactRecord]):
    """(relation name, [entity names], [(qual rel, qual ent)]) triples."""
    return [
        (r.relation, list(r.primary_entities), [(q.relation, q.entity) for q in r.qualifiers])
        for r in records
    ]


def make_mixed_dataset(
    rng: np.random.Generator,
    num_hyperedge: int = 25,
    num_hyper_relational: int = 25,
    num_entities: int = 30,
) -> list[FactRecord]:
    """Distinct facts of both kinds: arity 3-4 hyperedges plus binary facts
    carrying 1-2 qualifier pairs, over a shared entity pool."""
    entities = [f"e{i}" for i in range(num_entities)]
    records: list[FactRecord] = []
    seen = set()
    while len(records) < num_hyperedge:
        arity = int(rng.integers(3, 5))
        ents = tuple(entities[i] for i in rng.choice(num_entities, size=arity, replace=False))
        key = (f"he{int(rng.integers(3))}", ents)
        if key in seen:
            continue
        seen.add(key)
        records.append(FactRecord(key[0], ents))
    while len(records) < num_hyperedge + num_hyper_relational:
        ents = tuple(entities[i] for i in rng.choice(num_entities, size=2, replace=False))
        key = (f"hr{int(rng.integers(3))}", ents)
        if key in seen:
            continue
        seen.add(key)
        quals = tuple(
            QualifierPair(f"q{int(rng.integers(2))}", entities[int(rng.integers(num_entities))])
            for _ in range(int(rng.integers(1, 3)))
        )
        records.append(FactRecord(key[0], ents, quals))
    return records


def make_cluster_dataset(
    rng: np.random.Generator,
    clusters: int = 8,
    tails_per_cluster: int = 2,
    num_heads: int = 10,
    heads_per_tail: int = 3,
) -> list[FactRecord]:
    """Facts whose qualifier tag identifies the tail's cluster.

    Every cluster k owns one relation, one qualifier entity, and a few tail
    entities; heads are shared across clusters.  The tag entity is therefore
    predictive of the correct tail, and each relation's hyperedge instances
    all point into one cluster."""
    records: list[FactRecord] = []
    seen = set()
    for k in range(clusters):
        for j in range(tails_per_cluster):
            for h in rng.choice(num_heads, size=heads_per_tail, replace=False):
                key = (f"rel{k}", (f"head{h}", f"tail{k}_{j}"))
                if key in seen:
                    continue
                seen.add(key)
                records.append(
                    FactRecord(key[0], key[1], (QualifierPair("tag", f"q{k}"),))
                )
    return records


def epochs_to_threshold(log, threshold: float):
    """First epoch whose logged MRR reaches the threshold; None if never."""
    for entry in log:
        if entry.val_mrr is not None and entry.val_mrr >= threshold:
            return entry.epoch
    return None


# ---------------------------------------------------------------------------
# Dense incidence-matrix propagation oracle
# ---------------------------------------------------------------------------


def _act(name, x):
    if name == "relu":
        return np.where(x > 0, x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    return x


def dense_forward(
    plain_facts,
    entity_ids: dict[str, int],
    relation_ids: dict[str, int],
    weight_list,
    hv0: np.ndarray,
    hr0: np.ndarray,
    activation: str = "relu",
    self_residual: bool = False,
    qualifier_messages: bool = True,
    relation_update: str = "edge_mean",
    batch_norm: bool = False,
):
    """Straight-line dense implementation of the propagation update rules.

    ``weight_list`` holds per-layer dicts with keys w_pn, w_qn, w_r, w_pe,
    w_qe.  Returns (entity matrix, relation matrix) after the last layer.
    """
    n_v = len(entity_ids)
    n_r = len(relation_ids)
    n_e = len(plain_facts)
    d = hv0.shape[1]

    # dense incidence with occurrence counts
    b_p = np.zeros((n_e, n_v))
    b_q = np.zeros((n_e, n_v))
    types = np.zeros((n_r, n_e))
    for e, (rel, primary, quals) in enumerate(plain_facts):
        types[relation_ids[rel], e] = 1.0
        for ent in primary:
            b_p[e, entity_ids[ent]] += 1.0
        if qualifier_messages:
            for _, ent in quals:
                b_q[e, entity_ids[ent]] += 1.0

    def row_normalized(mat):
        out = mat.copy()
        for i in range(out.shape[0]):
            total = out[i].sum()
            if total > 0:
                out[i] /= total
        return out

    gather_p = row_normalized(b_p)
    gather_q = row_normalized(b_q)
    scatter_p = row_normalized(b_p.T)
    scatter_q = row_normalized(b_q.T)
    rel_mean = row_normalized(types)

    hv = hv0.astype(float).copy()
    hr = hr0.astype(float).copy()
    he = np.zeros((n_e, d))
    for weights in weight_list:
        w_pn, w_qn = weights["w_pn"], weights["w_qn"]
        w_r, w_pe, w_qe = weights["w_r"], weights["w_pe"], weights["w_qe"]

        he_new = np.zeros((n_e, d))
        for e in range(n_e):
            out = _act(activation, w_pn @ (gather_p[e] @ hv))
            if b_q[e].sum() > 0:
                out = out + _act(activation, w_qn @ (gather_q[e] @ hv))
            if self_residual:
                out = out + he[e]
            he_new[e] = out

        hr_new = np.zeros((n_r, d))
        for r in range(n_r):
            if relation_update == "direct":
                out = _act(activation, w_r @ hr[r])
                if self_residual:
                    out = out + hr[r]
            elif types[r].sum() > 0:
                out = _act(activation, w_r @ (rel_mean[r] @ he_new))
                if self_residual:
                    out = out + hr[r]
            else:
                out = hr[r]
            hr_new[r] = out

        hv_new = np.zeros((n_v, d))
        for v in range(n_v):
            has_p = b_p[:, v].sum() > 0
            has_q = b_q[:, v].sum() > 0
            if not has_p and not has_q:
                hv_new[v] = hv[v]
                continue
            out = np.zeros(d)
            if has_p:
                out = out + _act(activation, w_pe @ (scatter_p[v] @ he_new))
            if has_q:
                out = out + _act(activation, w_qe @ (scatter_q[v] @ he_new))
            if self_residual:
                out = out + hv[v]
            hv_new[v] = out

        if batch_norm:
            hv_new = (hv_new - hv_new.mean(0)) / np.sqrt(hv_new.var(0) + 1e-5)
            hr_new = (hr_new - hr_new.mean(0)) / np.sqrt(hr_new.var(0) + 1e-5)
        hv, hr, he = hv_new, hr_new, he_new
    return hv, hr


# ---------------------------------------------------------------------------
# Scalar decoder oracles
# ---------------------------------------------------------------------------


def scalar_mdistmult(r_vec, entity_vecs) -> float:
    total = 0.0
    for k in range(len(r_vec)):
        prod = 1.0
        for vec in entity_vecs:
            prod *= float(vec[k])
        total += float(r_vec[k]) * prod
    return total


def scalar_convolve(e_vec, filters, stride, projection) -> np.ndarray:
    """filters: (n_f, w); projection: (d, n_f * windows)."""
    d = len(e_vec)
    n_f, w = filters.shape
    windows = (d - w) // stride + 1
    feature = []
    for f in range(n_f):
        for t in range(windows):
            total = 0.0
            for u in range(w):
                total += float(filters[f, u]) * float(e_vec[t * stride + u])
            feature.append(total)
    out = np.zeros(projection.shape[0])
    for i in range(projection.shape[0]):
        for j in range(len(feature)):
            out[i] += float(projection[i, j]) * feature[j]
    return out


def scalar_hype(r_vec, entity_vecs, filters_per_pos, stride, projection) -> float:
    transformed = [
        scalar_convolve(vec, filters_per_pos[pos], stride, projection)
        for pos, vec in enumerate(entity_vecs)
    ]
    return scalar_mdistmult(r_vec, transformed)


# ---------------------------------------------------------------------------
# Ranking oracle: explicit sort over candidate score lists
# ---------------------------------------------------------------------------


def sort_rank(scores, true_id, excluded_ids, pessimistic: bool) -> int:
    """Rank of the true candidate in the sorted score list.

    Ties resolved by placing the true candidate after (pessimistic) or
    before (optimistic) every equal-scored competitor.
    """
    entries = []
    for cid, score in enumerate(scores):
        if cid == true_id or cid not in excluded_ids:
            entries.append((cid, float(score)))
    # sort competitors by score descending; true candidate loses or wins ties
    true_score = float(scores[true_id])
    rank = 1
    for cid, score in entries:
        if cid == true_id:
            continue
        if score > true_score:
            rank += 1
        elif score == true_score and pessimistic:
            rank += 1
    return rank


def scalar_mrr(ranks) -> float:
    return math.fsum(1.0 / r for r in ranks) / len(ranks)


def scalar_hits(ranks, k) -> float:
    return sum(1 for r in ranks if r <= k) / len(ranks)


# ---------------------------------------------------------------------------
# High-precision loss oracle
# ---------------------------------------------------------------------------


def precise_bce(raws, labels) -> float:
    from mpmath import mp, mpf, log, exp

    mp.dps = 60
    total = mpf(0)
    for raw, y in zip(raws, labels):
        p = 1 / (1 + exp(-mpf(float(raw))))
        total += -(mpf(y) * log(p) + (1 - mpf(y)) * log(1 - p))
    return float(total / len(raws))
