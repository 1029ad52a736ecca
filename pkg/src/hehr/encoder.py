"""Message-propagation encoder producing entity and relation embeddings.

Each layer runs three phases over the coordinate lists:

1. *gather* — every hyperedge averages the embeddings of its primary-tuple
   entities and (separately) of its qualifier entities, transforms each mean
   with a learned matrix, and sums the two activated results into the edge
   embedding;
2. *apply on relations* — every relation type averages the fresh embeddings
   of its hyperedge instances and transforms the mean;
3. *scatter* — every entity averages the fresh edge embeddings over the edges
   it belongs to, with separate learned matrices for primary-tuple membership
   and qualifier membership, and sums the two activated results.

A term whose underlying set is empty is dropped; an element with no incoming
terms keeps its previous embedding.  Aggregation runs over incidence rows, so
repeated membership (the same entity twice in one tuple) weights the mean
accordingly.  All reductions sum in ascending row order, making repeated runs
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph_store import GraphStore

ACTIVATIONS = ("relu", "tanh", "identity")
MODES = ("inductive", "transductive")
RELATION_UPDATES = ("edge_mean", "direct")

_BN_EPS = 1e-5


class EncoderError(Exception):
    pass


class DimensionMismatch(EncoderError):
    pass


class NonFiniteValue(EncoderError):
    """A propagation phase produced NaN or Inf."""


@dataclass(frozen=True)
class EncoderConfig:
    embedding_dim: int = 128
    num_layers: int = 2
    activation: str = "relu"
    mode: str = "transductive"
    inductive_init_value: float = 0.5
    batch_norm: bool = False
    self_residual: bool = False
    qualifier_messages: bool = True
    relation_update: str = "edge_mean"

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.relation_update not in RELATION_UPDATES:
            raise ValueError(f"relation_update must be one of {RELATION_UPDATES}")


@dataclass
class LayerWeights:
    """The five square transforms of one layer."""

    w_pn: np.ndarray  # primary nodes -> hyperedge
    w_qn: np.ndarray  # qualifier nodes -> hyperedge
    w_r: np.ndarray  # hyperedge instances -> relation
    w_pe: np.ndarray  # hyperedges -> primary member entity
    w_qe: np.ndarray  # hyperedges -> qualifier entity

    NAMES = ("w_pn", "w_qn", "w_r", "w_pe", "w_qe")

    def __post_init__(self):
        dim = None
        for name in self.NAMES:
            mat = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, mat)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise DimensionMismatch(f"{name} must be square, got {mat.shape}")
            if dim is None:
                dim = mat.shape[0]
            elif mat.shape[0] != dim:
                raise DimensionMismatch("layer matrices must share one dimension")
            if not np.all(np.isfinite(mat)):
                raise NonFiniteValue(f"{name} contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.w_pn.shape[0]


@dataclass
class EmbeddingState:
    entities: np.ndarray  # (num_entities, d)
    relations: np.ndarray  # (num_relations, d)
    edges: np.ndarray  # (num_edges, d) working buffer


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    return pre


def _activate_grad(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "tanh":
        t = np.tanh(pre)
        return 1.0 - t * t
    return np.ones_like(pre)


def segment_sum(rows: np.ndarray, groups: np.ndarray, num_groups: int) -> np.ndarray:
    """Sum (n, d) rows into their groups; summation order is ascending row index."""
    out = np.empty((num_groups, rows.shape[1]), dtype=np.float64)
    for j in range(rows.shape[1]):
        out[:, j] = np.bincount(groups, weights=rows[:, j], minlength=num_groups)
    return out


def init_embeddings(
    graph: GraphStore,
    cfg: EncoderConfig,
    learned_init: tuple[np.ndarray, np.ndarray] | None = None,
) -> EmbeddingState:
    """Layer-0 state: constant rows in inductive mode, given tables otherwise."""
    d = cfg.embedding_dim
    if cfg.mode == "inductive":
        if learned_init is not None:
            raise DimensionMismatch("inductive mode takes no learned initial tables")
        entities = np.full((graph.num_entities, d), cfg.inductive_init_value, dtype=np.float64)
        relations = np.full((graph.num_relations, d), cfg.inductive_init_value, dtype=np.float64)
    else:
        if learned_init is None:
            raise DimensionMismatch("transductive mode requires learned initial tables")
        entities, relations = learned_init
        entities = np.asarray(entities, dtype=np.float64)
        relations = np.asarray(relations, dtype=np.float64)
        if entities.shape != (graph.num_entities, d):
            raise DimensionMismatch(
                f"entity table shape {entities.shape} != {(graph.num_entities, d)}"
            )
        if relations.shape != (graph.num_relations, d):
            raise DimensionMismatch(
                f"relation table shape {relations.shape} != {(graph.num_relations, d)}"
            )
        entities = entities.copy()
        relations = relations.copy()
    edges = np.zeros((graph.num_edges, d), dtype=np.float64)
    return EmbeddingState(entities=entities, relations=relations, edges=edges)


# ---------------------------------------------------------------------------
# Per-element reference operations (contract surface; the batched kernels in
# layer_forward compute the same quantities for all elements at once).
# ---------------------------------------------------------------------------


def gather_primary(graph: GraphStore, e: int, entity_embeddings: np.ndarray) -> np.ndarray:
    """Mean embedding of edge ``e``'s primary-tuple entities."""
    nodes = graph.primary_nodes(e)
    return entity_embeddings[nodes].mean(axis=0)


def gather_qualifier(
    graph: GraphStore, e: int, entity_embeddings: np.ndarray
) -> np.ndarray | None:
    """Mean embedding of edge ``e``'s qualifier entities; None when it has none."""
    rows = graph.edge_to_qual.group(e)
    if len(rows) == 0:
        return None
    return entity_embeddings[graph.qual_entity[rows]].mean(axis=0)


def apply_hyperedge(
    gathered_primary: np.ndarray,
    gathered_qual: np.ndarray | None,
    weights: LayerWeights,
    cfg: EncoderConfig,
) -> np.ndarray:
    out = _activate(cfg.activation, weights.w_pn @ gathered_primary)
    if gathered_qual is not None:
        out = out + _activate(cfg.activation, weights.w_qn @ gathered_qual)
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("hyperedge update produced non-finite values")
    return out


def apply_relation(
    graph: GraphStore,
    r: int,
    edge_embeddings: np.ndarray,
    previous: np.ndarray,
    weights: LayerWeights,
    cfg: EncoderConfig,
) -> np.ndarray:
    """Relation update from its hyperedge instances; no instances keeps ``previous``."""
    instances = graph.relation_instances(r)
    if len(instances) == 0:
        return previous.copy()
    out = _activate(cfg.activation, weights.w_r @ edge_embeddings[instances].mean(axis=0))
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("relation update produced non-finite values")
    return out


def apply_entity(
    graph: GraphStore,
    v: int,
    edge_embeddings: np.ndarray,
    previous: np.ndarray,
    weights: LayerWeights,
    cfg: EncoderConfig,
) -> np.ndarray:
    """Entity update from incident edges; isolated entities keep ``previous``."""
    p_rows = graph.entity_to_primary.group(v)
    q_rows = graph.entity_to_qual.group(v)
    terms = []
    if len(p_rows):
        mean_p = edge_embeddings[graph.primary_edge[p_rows]].mean(axis=0)
        terms.append(_activate(cfg.activation, weights.w_pe @ mean_p))
    if len(q_rows) and cfg.qualifier_messages:
        mean_q = edge_embeddings[graph.qual_edge[q_rows]].mean(axis=0)
        terms.append(_activate(cfg.activation, weights.w_qe @ mean_q))
    if not terms:
        return previous.copy()
    out = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("entity update produced non-finite values")
    return out


# ---------------------------------------------------------------------------
# Batched layer kernel with cached intermediates for the backward pass.
# ---------------------------------------------------------------------------


@dataclass
class _BnCache:
    normalized: np.ndarray
    inv_std: np.ndarray


@dataclass
class LayerCache:
    hv_in: np.ndarray
    hr_in: np.ndarray
    he_in: np.ndarray
    gp: np.ndarray
    gq: np.ndarray
    pre_pn: np.ndarray
    pre_qn: np.ndarray
    q_mask: np.ndarray  # (n_e, 1) float
    mr: np.ndarray | None
    pre_r: np.ndarray
    r_mask: np.ndarray | None  # (n_r, 1) float; None for direct relation update
    mpv: np.ndarray
    mqv: np.ndarray
    pre_pe: np.ndarray
    pre_qe: np.ndarray
    pv_mask: np.ndarray  # (n_v, 1) float
    qv_mask: np.ndarray
    bn_v: _BnCache | None = None
    bn_r: _BnCache | None = None
    counts: dict = field(default_factory=dict)


def _batch_norm_forward(x: np.ndarray) -> tuple[np.ndarray, _BnCache]:
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + _BN_EPS)
    normalized = (x - mean) * inv_std
    return normalized, _BnCache(normalized=normalized, inv_std=inv_std)


def _batch_norm_backward(dy: np.ndarray, cache: _BnCache) -> np.ndarray:
    y = cache.normalized
    return cache.inv_std * (dy - dy.mean(axis=0) - y * (dy * y).mean(axis=0))


def _counts(graph: GraphStore, cfg: EncoderConfig) -> dict:
    qual_on = cfg.qualifier_messages
    n_q = len(graph.qual_edge)
    counts_p = np.bincount(graph.primary_edge, minlength=graph.num_edges).astype(np.float64)
    counts_q = (
        np.bincount(graph.qual_edge, minlength=graph.num_edges).astype(np.float64)
        if qual_on and n_q
        else np.zeros(graph.num_edges)
    )
    counts_r = np.bincount(graph.edge_relation, minlength=graph.num_relations).astype(np.float64)
    counts_pv = np.bincount(
        graph.primary_entity, minlength=graph.num_entities
    ).astype(np.float64)
    counts_qv = (
        np.bincount(graph.qual_entity, minlength=graph.num_entities).astype(np.float64)
        if qual_on and n_q
        else np.zeros(graph.num_entities)
    )
    return {
        "p": counts_p,
        "q": counts_q,
        "r": counts_r,
        "pv": counts_pv,
        "qv": counts_qv,
        "p_safe": np.maximum(counts_p, 1.0),
        "q_safe": np.maximum(counts_q, 1.0),
        "r_safe": np.maximum(counts_r, 1.0),
        "pv_safe": np.maximum(counts_pv, 1.0),
        "qv_safe": np.maximum(counts_qv, 1.0),
    }


def layer_forward(
    graph: GraphStore,
    weights: LayerWeights,
    hv_in: np.ndarray,
    hr_in: np.ndarray,
    he_in: np.ndarray,
    cfg: EncoderConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, LayerCache]:
    """One propagation layer over all edges, relations, and entities."""
    act = cfg.activation
    c = _counts(graph, cfg)
    qual_on = cfg.qualifier_messages and len(graph.qual_edge) > 0

    # phase 1: gather into hyperedges
    gp = segment_sum(hv_in[graph.primary_entity], graph.primary_edge, graph.num_edges)
    gp /= c["p_safe"][:, None]
    if qual_on:
        gq = segment_sum(hv_in[graph.qual_entity], graph.qual_edge, graph.num_edges)
        gq /= c["q_safe"][:, None]
    else:
        gq = np.zeros_like(gp)
    q_mask = (c["q"] > 0).astype(np.float64)[:, None]
    pre_pn = gp @ weights.w_pn.T
    pre_qn = gq @ weights.w_qn.T
    he = _activate(act, pre_pn) + q_mask * _activate(act, pre_qn)
    if cfg.self_residual:
        he = he + he_in

    # phase 2: apply edge instances onto relation types
    if cfg.relation_update == "edge_mean":
        mr = segment_sum(he, graph.edge_relation, graph.num_relations)
        mr /= c["r_safe"][:, None]
        r_mask = (c["r"] > 0).astype(np.float64)[:, None]
        pre_r = mr @ weights.w_r.T
        hr = r_mask * _activate(act, pre_r) + (1.0 - r_mask) * hr_in
        if cfg.self_residual:
            hr = hr + r_mask * hr_in
    else:
        mr = None
        r_mask = None
        pre_r = hr_in @ weights.w_r.T
        hr = _activate(act, pre_r)
        if cfg.self_residual:
            hr = hr + hr_in

    # phase 3: scatter edge embeddings back to entities
    mpv = segment_sum(he[graph.primary_edge], graph.primary_entity, graph.num_entities)
    mpv /= c["pv_safe"][:, None]
    if qual_on:
        mqv = segment_sum(he[graph.qual_edge], graph.qual_entity, graph.num_entities)
        mqv /= c["qv_safe"][:, None]
    else:
        mqv = np.zeros_like(mpv)
    pv_mask = (c["pv"] > 0).astype(np.float64)[:, None]
    qv_mask = (c["qv"] > 0).astype(np.float64)[:, None]
    pre_pe = mpv @ weights.w_pe.T
    pre_qe = mqv @ weights.w_qe.T
    core = pv_mask * _activate(act, pre_pe) + qv_mask * _activate(act, pre_qe)
    any_mask = np.maximum(pv_mask, qv_mask)
    hv = any_mask * core + (1.0 - any_mask) * hv_in
    if cfg.self_residual:
        hv = hv + any_mask * hv_in

    cache = LayerCache(
        hv_in=hv_in,
        hr_in=hr_in,
        he_in=he_in,
        gp=gp,
        gq=gq,
        pre_pn=pre_pn,
        pre_qn=pre_qn,
        q_mask=q_mask,
        mr=mr,
        pre_r=pre_r,
        r_mask=r_mask,
        mpv=mpv,
        mqv=mqv,
        pre_pe=pre_pe,
        pre_qe=pre_qe,
        pv_mask=pv_mask,
        qv_mask=qv_mask,
        counts=c,
    )

    if cfg.batch_norm:
        hv, cache.bn_v = _batch_norm_forward(hv)
        hr, cache.bn_r = _batch_norm_forward(hr)
    return hv, hr, he, cache


def layer_backward(
    graph: GraphStore,
    weights: LayerWeights,
    cache: LayerCache,
    d_hv: np.ndarray,
    d_hr: np.ndarray,
    d_he_out: np.ndarray,
    cfg: EncoderConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Vector-Jacobian products of :func:`layer_forward`.

    ``d_he_out`` carries gradient flowing into this layer's edge embeddings
    from the next layer's residual path (zero otherwise).  Returns gradients
    for the layer inputs and a dict of gradients for the five matrices.
    """
    act = cfg.activation
    c = cache.counts
    qual_on = cfg.qualifier_messages and len(graph.qual_edge) > 0

    if cfg.batch_norm:
        d_hv = _batch_norm_backward(d_hv, cache.bn_v)
        d_hr = _batch_norm_backward(d_hr, cache.bn_r)

    # phase 3 reversed
    any_mask = np.maximum(cache.pv_mask, cache.qv_mask)
    d_core = d_hv * any_mask
    d_hv_in = d_hv * (1.0 - any_mask)
    if cfg.self_residual:
        d_hv_in = d_hv_in + d_hv * any_mask
    d_pre_pe = d_core * cache.pv_mask * _activate_grad(act, cache.pre_pe)
    d_pre_qe = d_core * cache.qv_mask * _activate_grad(act, cache.pre_qe)
    d_w_pe = d_pre_pe.T @ cache.mpv
    d_w_qe = d_pre_qe.T @ cache.mqv
    d_mpv = d_pre_pe @ weights.w_pe
    d_mqv = d_pre_qe @ weights.w_qe
    d_he = segment_sum(
        (d_mpv / c["pv_safe"][:, None])[graph.primary_entity],
        graph.primary_edge,
        graph.num_edges,
    )
    if qual_on:
        d_he += segment_sum(
            (d_mqv / c["qv_safe"][:, None])[graph.qual_entity],
            graph.qual_edge,
            graph.num_edges,
        )
    d_he += d_he_out

    # phase 2 reversed
    if cfg.relation_update == "edge_mean":
        d_rel_core = d_hr * cache.r_mask
        d_hr_in = d_hr * (1.0 - cache.r_mask)
        if cfg.self_residual:
            d_hr_in = d_hr_in + d_hr * cache.r_mask
        d_pre_r = d_rel_core * _activate_grad(act, cache.pre_r)
        d_w_r = d_pre_r.T @ cache.mr
        d_mr = d_pre_r @ weights.w_r
        d_he += (d_mr / c["r_safe"][:, None])[graph.edge_relation]
    else:
        d_pre_r = d_hr * _activate_grad(act, cache.pre_r)
        d_w_r = d_pre_r.T @ cache.hr_in
        d_hr_in = d_pre_r @ weights.w_r
        if cfg.self_residual:
            d_hr_in = d_hr_in + d_hr

    # phase 1 reversed
    d_he_in = d_he.copy() if cfg.self_residual else np.zeros_like(d_he)
    d_pre_pn = d_he * _activate_grad(act, cache.pre_pn)
    d_pre_qn = d_he * cache.q_mask * _activate_grad(act, cache.pre_qn)
    d_w_pn = d_pre_pn.T @ cache.gp
    d_w_qn = d_pre_qn.T @ cache.gq
    d_gp = d_pre_pn @ weights.w_pn
    d_gq = d_pre_qn @ weights.w_qn
    d_hv_in += segment_sum(
        (d_gp / c["p_safe"][:, None])[graph.primary_edge],
        graph.primary_entity,
        graph.num_entities,
    )
    if qual_on:
        d_hv_in += segment_sum(
            (d_gq / c["q_safe"][:, None])[graph.qual_edge],
            graph.qual_entity,
            graph.num_entities,
        )

    grads = {"w_pn": d_w_pn, "w_qn": d_w_qn, "w_r": d_w_r, "w_pe": d_w_pe, "w_qe": d_w_qe}
    return d_hv_in, d_hr_in, d_he_in, grads


def _check_finite(name: str, layer: int, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"non-finite values after {name} in layer {layer}")


def forward(
    graph: GraphStore,
    params: list[LayerWeights],
    init: EmbeddingState,
    cfg: EncoderConfig,
    collect_trace: bool = False,
) -> tuple[np.ndarray, np.ndarray] | tuple[np.ndarray, np.ndarray, list]:
    """Run all layers; returns final (entity, relation) embedding matrices.

    With ``collect_trace`` the per-layer (entity, relation, edge) snapshots
    are returned as a third element for debugging and cross-checking.
    """
    if len(params) != cfg.num_layers:
        raise DimensionMismatch(
            f"got {len(params)} weight sets for {cfg.num_layers} layers"
        )
    hv, hr, he = init.entities, init.relations, init.edges
    trace = []
    for layer, weights in enumerate(params, start=1):
        hv, hr, he, _ = layer_forward(graph, weights, hv, hr, he, cfg)
        _check_finite("propagation", layer, hv, hr, he)
        if collect_trace:
            trace.append((hv.copy(), hr.copy(), he.copy()))
    if collect_trace:
        return hv, hr, trace
    return hv, hr


def forward_with_cache(
    graph: GraphStore,
    params: list[LayerWeights],
    init: EmbeddingState,
    cfg: EncoderConfig,
) -> tuple[np.ndarray, np.ndarray, list[LayerCache]]:
    hv, hr, he = init.entities, init.relations, init.edges
    caches: list[LayerCache] = []
    for layer, weights in enumerate(params, start=1):
        hv, hr, he, cache = layer_forward(graph, weights, hv, hr, he, cfg)
        _check_finite("propagation", layer, hv, hr, he)
        caches.append(cache)
    return hv, hr, caches


def backward_through_layers(
    graph: GraphStore,
    params: list[LayerWeights],
    caches: list[LayerCache],
    d_hv: np.ndarray,
    d_hr: np.ndarray,
    cfg: EncoderConfig,
) -> tuple[np.ndarray, np.ndarray, list[dict[str, np.ndarray]]]:
    """Propagate output gradients back to the initial tables and all weights."""
    d_he = np.zeros((graph.num_edges, cfg.embedding_dim))
    weight_grads: list[dict[str, np.ndarray]] = [None] * len(params)
    for layer in range(len(params) - 1, -1, -1):
        d_hv, d_hr, d_he, grads = layer_backward(
            graph, params[layer], caches[layer], d_hv, d_hr, d_he, cfg
        )
        weight_grads[layer] = grads
    return d_hv, d_hr, weight_grads
