"""Link prediction on knowledge graphs mixing hyperedge and hyper-relational facts."""

from .fact_format import (
    FactRecord,
    ParseDiagnostic,
    QualifierPair,
    ValidationReport,
    convert_external,
    load_dataset,
    parse_dataset,
    parse_fact_line,
    save_dataset,
    serialize_fact,
    validate_dataset,
)
from .graph_store import (
    GraphStore,
    ResolvedFact,
    VocabMaps,
    build_graph,
    build_vocab,
    extend_vocab,
    load_snapshot,
    resolve_records,
    save_snapshot,
)
from .encoder import EncoderConfig, EmbeddingState, LayerWeights, forward, init_embeddings
from .decoders import (
    HypeDecoderParams,
    Score,
    positional_convolve,
    score_hype,
    score_mdistmult,
)
from .training import (
    EpochStats,
    ModelState,
    TrainConfig,
    TrainingSample,
    adam_step,
    backward,
    bce_loss,
    compute_embeddings,
    embeddings_for_eval,
    load_checkpoint,
    sample_negatives,
    save_checkpoint,
    train,
)
from .evaluation import (
    FilterIndex,
    RankReport,
    TupleScorer,
    evaluate,
    hits_at_k,
    mrr,
    rank_of,
)

__version__ = "0.1.0"
