"""End-to-end training of encoder and decoder parameters.

Every batch runs one full-graph propagation, scores the batch positives plus
their sampled negatives, computes a sigmoid binary cross-entropy loss on the
raw scores, backpropagates through the decoder and all propagation layers by
hand-written vector-Jacobian products, and applies one bias-corrected Adam
step.  All randomness flows through a single seeded generator and every
reduction has a fixed order, so runs with the same seed are bit-identical.

Three modes are supported:

* ``transductive`` — entity/relation tables are learned parameters feeding
  the encoder;
* ``inductive`` — tables are a constant vector (nothing entity-sized is
  learned, so unseen entities can be embedded later);
* ``shallow`` — the encoder is bypassed and the decoder reads the learned
  tables directly (ablation baseline).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import evaluation
from .decoders import (
    DECODERS,
    HypeDecoderParams,
    init_hype_params,
    sigmoid,
    transform_batch,
    transform_batch_backward,
)
from .encoder import (
    EncoderConfig,
    LayerWeights,
    backward_through_layers,
    forward,
    forward_with_cache,
    init_embeddings,
)
from .graph_store import (
    GraphStore,
    ResolvedFact,
    VocabMaps,
    build_graph,
    build_vocab,
    extend_vocab,
    resolve_records,
)

TRAIN_MODES = ("inductive", "transductive", "shallow")


class TrainingError(Exception):
    pass


class NonFiniteGradient(TrainingError):
    pass


class CheckpointError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    negative_ratio: int = 10
    batch_size: int = 128
    epochs: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    mode: str = "transductive"
    decoder: str = "mdistmult"
    corrupt_qualifiers: bool = False
    hype_num_filters: int = 4
    hype_width: int = 3
    hype_stride: int = 2
    eval_every: int = 0

    def __post_init__(self):
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"mode must be one of {TRAIN_MODES}")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder must be one of {DECODERS}")


@dataclass(frozen=True)
class TrainingSample:
    fact: ResolvedFact
    label: int  # 1 positive, 0 negative
    corrupted_position: int | None = None  # primary slot replaced, if any
    corrupted_qualifier: int | None = None  # qualifier slot replaced, if any


@dataclass
class ModelState:
    """All learned parameters plus the Adam moment buffers."""

    mode: str
    decoder: str
    enc_cfg: EncoderConfig
    max_arity: int
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    hype_stride: int = 2

    def __post_init__(self):
        for name, value in self.params.items():
            self.params[name] = np.asarray(value, dtype=np.float64)
        if not self.adam_m:
            self.adam_m = {n: np.zeros_like(p) for n, p in self.params.items()}
            self.adam_v = {n: np.zeros_like(p) for n, p in self.params.items()}
        for buf in (self.adam_m, self.adam_v):
            for name, value in buf.items():
                if value.shape != self.params[name].shape:
                    raise CheckpointError(
                        f"moment buffer {name} shape {value.shape} != {self.params[name].shape}"
                    )

    @property
    def dim(self) -> int:
        return self.enc_cfg.embedding_dim

    def layer_weights(self) -> list[LayerWeights]:
        layers = []
        for i in range(self.enc_cfg.num_layers):
            layers.append(
                LayerWeights(*(self.params[f"layer{i}.{n}"] for n in LayerWeights.NAMES))
            )
        return layers

    def hype_params(self) -> HypeDecoderParams | None:
        if self.decoder != "hype":
            return None
        return HypeDecoderParams(
            filters=self.params["decoder.filters"],
            stride=self.hype_stride,
            projection=self.params["decoder.projection"],
        )


def init_model(
    num_entities: int,
    num_relations: int,
    max_arity: int,
    enc_cfg: EncoderConfig,
    train_cfg: TrainConfig,
    rng: np.random.Generator,
) -> ModelState:
    """Fresh parameters: Glorot-uniform transforms, small uniform tables."""
    d = enc_cfg.embedding_dim
    params: dict[str, np.ndarray] = {}
    if train_cfg.mode in ("transductive", "shallow"):
        params["entity_table"] = rng.uniform(-0.1, 0.1, size=(num_entities, d))
        params["relation_table"] = rng.uniform(-0.1, 0.1, size=(num_relations, d))
    if train_cfg.mode != "shallow":
        limit = np.sqrt(3.0 / d)
        for i in range(enc_cfg.num_layers):
            for name in LayerWeights.NAMES:
                params[f"layer{i}.{name}"] = rng.uniform(-limit, limit, size=(d, d))
    if train_cfg.decoder == "hype":
        hype = init_hype_params(
            d,
            max(max_arity, 1),
            rng,
            num_filters=train_cfg.hype_num_filters,
            width=train_cfg.hype_width,
            stride=train_cfg.hype_stride,
        )
        params["decoder.filters"] = hype.filters
        params["decoder.projection"] = hype.projection
    return ModelState(
        mode=train_cfg.mode,
        decoder=train_cfg.decoder,
        enc_cfg=enc_cfg,
        max_arity=max_arity,
        params=params,
        hype_stride=train_cfg.hype_stride,
    )


def compute_embeddings(state: ModelState, graph: GraphStore) -> tuple[np.ndarray, np.ndarray]:
    """Final entity/relation embeddings for scoring (no gradient bookkeeping)."""
    if state.mode == "shallow":
        return state.params["entity_table"], state.params["relation_table"]
    learned = None
    if state.mode == "transductive":
        learned = (state.params["entity_table"], state.params["relation_table"])
    init = init_embeddings(graph, state.enc_cfg, learned)
    return forward(graph, state.layer_weights(), init, state.enc_cfg)


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------


def _random_other(original: int, num_entities: int, rng: np.random.Generator) -> int:
    draw = int(rng.integers(0, num_entities - 1))
    return draw + 1 if draw >= original else draw


def sample_negatives(
    fact: ResolvedFact,
    negative_ratio: int,
    num_entities: int,
    rng: np.random.Generator,
    corrupt_qualifiers: bool = False,
) -> list[TrainingSample]:
    """Corrupt each primary slot ``negative_ratio`` times with a uniform
    random entity different from the original; qualifiers stay fixed unless
    ``corrupt_qualifiers`` extends the same treatment to qualifier entities.
    """
    if num_entities < 2:
        raise ValueError("need at least 2 entities to sample a replacement")
    negatives: list[TrainingSample] = []
    for pos, original in enumerate(fact.entities):
        for _ in range(negative_ratio):
            replacement = _random_other(original, num_entities, rng)
            entities = fact.entities[:pos] + (replacement,) + fact.entities[pos + 1 :]
            negatives.append(
                TrainingSample(
                    fact=ResolvedFact(fact.relation, entities, fact.qualifiers),
                    label=0,
                    corrupted_position=pos,
                )
            )
    if corrupt_qualifiers:
        for qi, (qr, qv) in enumerate(fact.qualifiers):
            for _ in range(negative_ratio):
                replacement = _random_other(qv, num_entities, rng)
                quals = (
                    fact.qualifiers[:qi] + ((qr, replacement),) + fact.qualifiers[qi + 1 :]
                )
                negatives.append(
                    TrainingSample(
                        fact=ResolvedFact(fact.relation, fact.entities, quals),
                        label=0,
                        corrupted_qualifier=qi,
                    )
                )
    return negatives


def make_batch_samples(
    facts: list[ResolvedFact],
    train_cfg: TrainConfig,
    num_entities: int,
    rng: np.random.Generator,
) -> list[TrainingSample]:
    samples: list[TrainingSample] = []
    for fact in facts:
        samples.append(TrainingSample(fact=fact, label=1))
        samples.extend(
            sample_negatives(
                fact,
                train_cfg.negative_ratio,
                num_entities,
                rng,
                corrupt_qualifiers=train_cfg.corrupt_qualifiers,
            )
        )
    return samples


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def _raw_array(scores) -> np.ndarray:
    if isinstance(scores, np.ndarray):
        return scores.astype(np.float64)
    return np.asarray(
        [s.raw if hasattr(s, "raw") else float(s) for s in scores], dtype=np.float64
    )


def bce_loss(scores, labels) -> float:
    """Mean binary cross-entropy on raw scores (log-sum-exp stabilized)."""
    raw = _raw_array(scores)
    y = np.asarray(labels, dtype=np.float64)
    if raw.size == 0 or raw.shape != y.shape:
        raise ValueError("scores and labels must be non-empty and congruent")
    return float(np.mean(np.logaddexp(0.0, raw) - raw * y))


def bce_grad(raw: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return (sigmoid(raw) - labels) / raw.size


# ---------------------------------------------------------------------------
# Decoder scoring of a sample batch (forward + hand-written backward)
# ---------------------------------------------------------------------------


@dataclass
class _ScoreCache:
    order: np.ndarray  # sample index per scored row, grouped by arity
    groups: list[dict]


def _score_samples(
    hv: np.ndarray,
    hr: np.ndarray,
    facts: list[ResolvedFact],
    decoder: str,
    hype: HypeDecoderParams | None,
) -> tuple[np.ndarray, _ScoreCache]:
    by_arity: dict[int, list[int]] = {}
    for i, fact in enumerate(facts):
        by_arity.setdefault(fact.arity, []).append(i)
    raws = np.empty(len(facts), dtype=np.float64)
    groups = []
    order = []
    for arity in sorted(by_arity):
        idx = np.asarray(by_arity[arity], dtype=np.int64)
        order.append(idx)
        ent_ids = np.asarray([facts[i].entities for i in idx], dtype=np.int64)
        rel_ids = np.asarray([facts[i].relation for i in idx], dtype=np.int64)
        e_rows = hv[ent_ids]  # (m, a, d)
        if decoder == "hype":
            x_rows = np.stack(
                [transform_batch(e_rows[:, i, :], i, hype) for i in range(arity)], axis=1
            )
        else:
            x_rows = e_rows
        m, a, d = x_rows.shape
        prefix = np.ones((m, a, d))
        for i in range(1, a):
            prefix[:, i] = prefix[:, i - 1] * x_rows[:, i - 1]
        suffix = np.ones((m, a, d))
        for i in range(a - 2, -1, -1):
            suffix[:, i] = suffix[:, i + 1] * x_rows[:, i + 1]
        all_prod = prefix[:, -1] * x_rows[:, -1]
        r_rows = hr[rel_ids]
        raws[idx] = np.einsum("md,md->m", r_rows, all_prod)
        groups.append(
            {
                "idx": idx,
                "ent_ids": ent_ids,
                "rel_ids": rel_ids,
                "e_rows": e_rows,
                "x_rows": x_rows,
                "prod_except": prefix * suffix,
                "all_prod": all_prod,
                "r_rows": r_rows,
            }
        )
    return raws, _ScoreCache(order=np.concatenate(order) if order else np.empty(0), groups=groups)


def _score_backward(
    cache: _ScoreCache,
    d_raw: np.ndarray,
    hv_shape: tuple[int, int],
    hr_shape: tuple[int, int],
    decoder: str,
    hype: HypeDecoderParams | None,
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    d_hv = np.zeros(hv_shape)
    d_hr = np.zeros(hr_shape)
    decoder_grads: dict[str, np.ndarray] = {}
    if decoder == "hype":
        decoder_grads["decoder.filters"] = np.zeros_like(hype.filters)
        decoder_grads["decoder.projection"] = np.zeros_like(hype.projection)
    for group in cache.groups:
        g = d_raw[group["idx"]][:, None]  # (m, 1)
        d_r_rows = g * group["all_prod"]
        np.add.at(d_hr, group["rel_ids"], d_r_rows)
        d_x = g[:, None, :] * group["r_rows"][:, None, :] * group["prod_except"]
        if decoder == "hype":
            arity = group["x_rows"].shape[1]
            d_e = np.empty_like(d_x)
            for i in range(arity):
                d_e_i, d_filt_i, d_proj = transform_batch_backward(
                    group["e_rows"][:, i, :], i, hype, d_x[:, i, :]
                )
                d_e[:, i, :] = d_e_i
                decoder_grads["decoder.filters"][i] += d_filt_i
                decoder_grads["decoder.projection"] += d_proj
        else:
            d_e = d_x
        np.add.at(d_hv, group["ent_ids"], d_e)
    return d_hv, d_hr, decoder_grads


# ---------------------------------------------------------------------------
# Full backward pass and the optimizer step
# ---------------------------------------------------------------------------


def backward(
    state: ModelState, graph: GraphStore, samples: list[TrainingSample]
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and its exact gradient for every learned parameter."""
    facts = [s.fact for s in samples]
    labels = np.asarray([s.label for s in samples], dtype=np.float64)
    hype = state.hype_params()

    caches = None
    if state.mode == "shallow":
        hv, hr = state.params["entity_table"], state.params["relation_table"]
    else:
        learned = None
        if state.mode == "transductive":
            learned = (state.params["entity_table"], state.params["relation_table"])
        init = init_embeddings(graph, state.enc_cfg, learned)
        hv, hr, caches = forward_with_cache(graph, state.layer_weights(), init, state.enc_cfg)

    raws, score_cache = _score_samples(hv, hr, facts, state.decoder, hype)
    loss = bce_loss(raws, labels)
    d_raw = bce_grad(raws, labels)
    d_hv, d_hr, grads = _score_backward(
        score_cache, d_raw, hv.shape, hr.shape, state.decoder, hype
    )

    if state.mode == "shallow":
        grads["entity_table"] = d_hv
        grads["relation_table"] = d_hr
    else:
        d_init_v, d_init_r, weight_grads = backward_through_layers(
            graph, state.layer_weights(), caches, d_hv, d_hr, state.enc_cfg
        )
        for i, layer in enumerate(weight_grads):
            for name, grad in layer.items():
                grads[f"layer{i}.{name}"] = grad
        if state.mode == "transductive":
            grads["entity_table"] = d_init_v
            grads["relation_table"] = d_init_r

    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"gradient for {name} contains non-finite values")
        if grad.shape != state.params[name].shape:
            raise TrainingError(
                f"gradient shape {grad.shape} for {name} != {state.params[name].shape}"
            )
    return loss, grads


def adam_step(
    state: ModelState, grads: dict[str, np.ndarray], cfg: TrainConfig
) -> ModelState:
    """Bias-corrected Adam update applied in place; returns the state."""
    state.step += 1
    t = state.step
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for name, grad in grads.items():
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        state.params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    val_mrr: float | None = None


@dataclass
class TrainResult:
    state: ModelState
    vocab: VocabMaps
    graph: GraphStore
    log: list[EpochStats]


def train(
    records,
    train_cfg: TrainConfig,
    enc_cfg: EncoderConfig | None = None,
    eval_records=None,
    initial_state: ModelState | None = None,
    seed_relations: tuple[str, ...] = (),
) -> TrainResult:
    """Train on fact records; propagation graph is built from them alone.

    ``eval_records`` plus ``train_cfg.eval_every`` adds a filtered-MRR probe
    to the epoch log (filter = training facts plus the probe facts).  With
    ``initial_state`` training resumes and the step counter keeps counting.
    """
    if enc_cfg is None:
        enc_cfg = EncoderConfig()
    if train_cfg.mode != "shallow" and enc_cfg.mode != train_cfg.mode:
        enc_cfg = replace(enc_cfg, mode=train_cfg.mode)

    vocab = build_vocab(records, seed_relations=seed_relations)
    graph = build_graph(records, vocab)
    facts = resolve_records(records, vocab)
    rng = np.random.default_rng(train_cfg.seed & (2**64 - 1))

    if initial_state is None:
        state = init_model(
            vocab.num_entities,
            vocab.num_relations,
            graph.max_arity(),
            enc_cfg,
            train_cfg,
            rng,
        )
    else:
        state = initial_state

    eval_resolved = None
    filter_index = None
    if eval_records is not None and train_cfg.eval_every > 0:
        eval_resolved = resolve_records(eval_records, vocab)
        filter_index = evaluation.FilterIndex.from_facts(facts, eval_resolved)

    log: list[EpochStats] = []
    n = len(facts)
    for epoch in range(1, train_cfg.epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        sample_count = 0
        for start in range(0, n, train_cfg.batch_size):
            batch_facts = [facts[i] for i in perm[start : start + train_cfg.batch_size]]
            samples = make_batch_samples(batch_facts, train_cfg, vocab.num_entities, rng)
            loss, grads = backward(state, graph, samples)
            adam_step(state, grads, train_cfg)
            loss_sum += loss * len(samples)
            sample_count += len(samples)
        epoch_loss = loss_sum / sample_count if sample_count else 0.0

        val_mrr = None
        if eval_resolved is not None and epoch % train_cfg.eval_every == 0:
            hv, hr = compute_embeddings(state, graph)
            scorer = evaluation.TupleScorer(hv, hr, state.decoder, state.hype_params())
            report = evaluation.evaluate(eval_resolved, scorer, filter_index)
            val_mrr = report.mrr
        log.append(EpochStats(epoch=epoch, loss=epoch_loss, val_mrr=val_mrr))
    return TrainResult(state=state, vocab=vocab, graph=graph, log=log)


# ---------------------------------------------------------------------------
# Evaluation-time embeddings (vocabulary extension for inductive mode)
# ---------------------------------------------------------------------------


def embeddings_for_eval(
    state: ModelState,
    graph: GraphStore,
    vocab: VocabMaps,
    extra_records=None,
):
    """Embeddings plus a vocabulary covering ``extra_records``.

    In inductive mode, unseen entities/relations get the constant init vector
    (they are isolated with respect to the training graph, so full
    propagation would leave them at the init value anyway).  In transductive
    and shallow modes unseen tokens raise ``UnknownToken``.
    """
    hv, hr = compute_embeddings(state, graph)
    if extra_records is None:
        return hv, hr, vocab
    if state.mode == "inductive":
        vocab_ext = extend_vocab(vocab, extra_records)
        const = state.enc_cfg.inductive_init_value
        if vocab_ext.num_entities > vocab.num_entities:
            extra = np.full(
                (vocab_ext.num_entities - vocab.num_entities, state.dim), const
            )
            hv = np.vstack([hv, extra])
        if vocab_ext.num_relations > vocab.num_relations:
            extra = np.full(
                (vocab_ext.num_relations - vocab.num_relations, state.dim), const
            )
            hr = np.vstack([hr, extra])
        return hv, hr, vocab_ext
    resolve_records(extra_records, vocab)  # raises UnknownToken on new tokens
    return hv, hr, vocab


# ---------------------------------------------------------------------------
# Checkpoints
#
# Layout: magic b"HEHRCKPT", u16 version, u64 header length, UTF-8 JSON
# header, then the raw little-endian float64 array payload.  The header
# carries the config echo, the vocabulary hash, the step counter, and one
# manifest entry (name, shape, offset) per array.
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"HEHRCKPT"
CHECKPOINT_VERSION = 1


def vocab_hash(vocab: VocabMaps) -> str:
    digest = hashlib.sha256()
    for token in vocab.id_to_entity:
        digest.update(token.encode("utf-8") + b"\x00")
    digest.update(b"\x01")
    for token in vocab.id_to_relation:
        digest.update(token.encode("utf-8") + b"\x00")
    return digest.hexdigest()


def save_checkpoint(state: ModelState, path: str, vocab: VocabMaps) -> None:
    arrays: list[dict] = []
    payload = bytearray()

    def push(name: str, kind: str, value: np.ndarray) -> None:
        data = np.ascontiguousarray(value, dtype="<f8").tobytes()
        arrays.append(
            {"name": name, "kind": kind, "shape": list(value.shape), "offset": len(payload)}
        )
        payload.extend(data)

    for name in sorted(state.params):
        push(name, "param", state.params[name])
    for name in sorted(state.adam_m):
        push(name, "adam_m", state.adam_m[name])
    for name in sorted(state.adam_v):
        push(name, "adam_v", state.adam_v[name])

    header = {
        "mode": state.mode,
        "decoder": state.decoder,
        "max_arity": state.max_arity,
        "hype_stride": state.hype_stride,
        "encoder": {
            "embedding_dim": state.enc_cfg.embedding_dim,
            "num_layers": state.enc_cfg.num_layers,
            "activation": state.enc_cfg.activation,
            "mode": state.enc_cfg.mode,
            "inductive_init_value": state.enc_cfg.inductive_init_value,
            "batch_norm": state.enc_cfg.batch_norm,
            "self_residual": state.enc_cfg.self_residual,
            "qualifier_messages": state.enc_cfg.qualifier_messages,
            "relation_update": state.enc_cfg.relation_update,
        },
        "step": state.step,
        "vocab_hash": vocab_hash(vocab),
        "num_entities": vocab.num_entities,
        "num_relations": vocab.num_relations,
        "arrays": arrays,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<H", CHECKPOINT_VERSION))
        handle.write(struct.pack("<Q", len(blob)))
        handle.write(blob)
        handle.write(bytes(payload))


def load_checkpoint(path: str, vocab: VocabMaps | None = None) -> tuple[ModelState, dict]:
    """Load a checkpoint; validates array congruence, and in the modes with
    entity-sized tables also the vocabulary hash when ``vocab`` is given."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    (version,) = struct.unpack_from("<H", blob, 8)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", blob, 10)
    header_start = 18
    header = json.loads(blob[header_start : header_start + header_len].decode("utf-8"))
    payload = blob[header_start + header_len :]

    buffers: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise CheckpointError(f"array {entry['name']} overruns checkpoint payload")
        value = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
        buffers[entry["kind"]][entry["name"]] = value

    if set(buffers["adam_m"]) != set(buffers["param"]) or set(buffers["adam_v"]) != set(
        buffers["param"]
    ):
        raise CheckpointError("moment buffers do not match parameter set")

    if vocab is not None and header["mode"] != "inductive":
        if vocab_hash(vocab) != header["vocab_hash"]:
            raise CheckpointError(
                "vocabulary hash mismatch: checkpoint was trained on different data"
            )

    enc = header["encoder"]
    enc_cfg = EncoderConfig(
        embedding_dim=enc["embedding_dim"],
        num_layers=enc["num_layers"],
        activation=enc["activation"],
        mode=enc["mode"],
        inductive_init_value=enc["inductive_init_value"],
        batch_norm=enc["batch_norm"],
        self_residual=enc["self_residual"],
        qualifier_messages=enc["qualifier_messages"],
        relation_update=enc["relation_update"],
    )
    state = ModelState(
        mode=header["mode"],
        decoder=header["decoder"],
        enc_cfg=enc_cfg,
        max_arity=header["max_arity"],
        params=buffers["param"],
        adam_m=buffers["adam_m"],
        adam_v=buffers["adam_v"],
        step=header["step"],
        hype_stride=header.get("hype_stride", 2),
    )
    return state, header
