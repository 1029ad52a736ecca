"""Tuple scorers over entity/relation embeddings.

Two options are provided:

* ``mdistmult`` — the n-ary DistMult generalization: the raw score of
  ``(r, e_1..e_a)`` is ``sum_k r_k * prod_i e_ik``.  Invariant under any
  permutation of the entities.
* ``hype`` — each entity embedding is first passed through a convolution
  specific to its slot in the primary tuple (per-position filter bank, shared
  projection back to the embedding dimension), then scored as above.  The
  positional transform makes the score order-sensitive.

Raw scores are squashed to probabilities with the sigmoid.  Qualifiers never
enter a scorer directly; their influence arrives through the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import DimensionMismatch

DECODERS = ("mdistmult", "hype")


class DecoderError(Exception):
    pass


class PositionOutOfRange(DecoderError):
    pass


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


@dataclass(frozen=True)
class Score:
    raw: float
    probability: float

    @classmethod
    def from_raw(cls, raw: float) -> "Score":
        return cls(raw=float(raw), probability=float(sigmoid(raw)))


@dataclass
class HypeDecoderParams:
    """Per-position filter banks plus one shared projection.

    ``filters`` has shape (max_arity, num_filters, width); ``projection``
    maps the concatenated feature maps (filter-major order, length
    ``num_filters * window_count``) back to the embedding dimension.
    """

    filters: np.ndarray
    stride: int
    projection: np.ndarray

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        self.projection = np.asarray(self.projection, dtype=np.float64)
        if self.filters.ndim != 3:
            raise DimensionMismatch("filters must have shape (positions, num_filters, width)")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        d = self.projection.shape[0]
        if self.filters.shape[2] > d:
            raise DimensionMismatch("filter width exceeds embedding dimension")
        expected = self.filters.shape[1] * self.window_count(d)
        if self.projection.shape != (d, expected):
            raise DimensionMismatch(
                f"projection shape {self.projection.shape} != {(d, expected)}"
            )
        if not (np.all(np.isfinite(self.filters)) and np.all(np.isfinite(self.projection))):
            raise ValueError("decoder parameters must be finite")

    @property
    def max_arity(self) -> int:
        return self.filters.shape[0]

    @property
    def num_filters(self) -> int:
        return self.filters.shape[1]

    @property
    def width(self) -> int:
        return self.filters.shape[2]

    def window_count(self, dim: int) -> int:
        return (dim - self.width) // self.stride + 1


def init_hype_params(
    dim: int, max_arity: int, rng: np.random.Generator, num_filters: int = 4,
    width: int = 3, stride: int = 2,
) -> HypeDecoderParams:
    """Glorot-uniform filters and projection for the positional scorer."""
    if width > dim:
        raise DimensionMismatch(f"filter width {width} exceeds embedding dim {dim}")
    windows = (dim - width) // stride + 1
    limit_f = np.sqrt(6.0 / (width + num_filters))
    filters = rng.uniform(-limit_f, limit_f, size=(max_arity, num_filters, width))
    feat = num_filters * windows
    limit_p = np.sqrt(6.0 / (dim + feat))
    projection = rng.uniform(-limit_p, limit_p, size=(dim, feat))
    return HypeDecoderParams(filters=filters, stride=stride, projection=projection)


def score_mdistmult(r_embed: np.ndarray, entity_embeds: list[np.ndarray]) -> Score:
    """Product-sum score; reduces to a dot product at arity 1."""
    r_embed = np.asarray(r_embed, dtype=np.float64)
    if not entity_embeds:
        raise DimensionMismatch("need at least one entity embedding")
    prod = np.ones_like(r_embed)
    for emb in entity_embeds:
        emb = np.asarray(emb, dtype=np.float64)
        if emb.shape != r_embed.shape:
            raise DimensionMismatch(
                f"entity embedding shape {emb.shape} != relation shape {r_embed.shape}"
            )
        prod = prod * emb
    return Score.from_raw(float(np.dot(r_embed, prod)))


def _windows(x: np.ndarray, width: int, stride: int) -> np.ndarray:
    """Strided valid-convolution windows along the last axis."""
    n = (x.shape[-1] - width) // stride + 1
    view = np.lib.stride_tricks.sliding_window_view(x, width, axis=-1)
    return view[..., ::stride, :][..., :n, :]


def positional_convolve(
    e_embed: np.ndarray, position: int, params: HypeDecoderParams
) -> np.ndarray:
    """Transform one embedding with the filter bank of its tuple slot."""
    if not 0 <= position < params.max_arity:
        raise PositionOutOfRange(
            f"position {position} outside 0..{params.max_arity - 1}"
        )
    e_embed = np.asarray(e_embed, dtype=np.float64)
    if e_embed.shape != (params.projection.shape[0],):
        raise DimensionMismatch(
            f"embedding shape {e_embed.shape} != ({params.projection.shape[0]},)"
        )
    windows = _windows(e_embed, params.width, params.stride)  # (m, w)
    fmap = windows @ params.filters[position].T  # (m, n_f)
    flat = fmap.T.ravel()  # filter-major concatenation
    return params.projection @ flat


def transform_batch(
    x: np.ndarray, position: int, params: HypeDecoderParams
) -> np.ndarray:
    """Vectorized :func:`positional_convolve` over the rows of ``x``."""
    if not 0 <= position < params.max_arity:
        raise PositionOutOfRange(
            f"position {position} outside 0..{params.max_arity - 1}"
        )
    windows = _windows(x, params.width, params.stride)  # (n, m, w)
    fmap = windows @ params.filters[position].T  # (n, m, n_f)
    flat = fmap.transpose(0, 2, 1).reshape(x.shape[0], -1)  # (n, n_f*m)
    return flat @ params.projection.T


def transform_batch_backward(
    x: np.ndarray,
    position: int,
    params: HypeDecoderParams,
    d_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of :func:`transform_batch` wrt input, filters[position], projection."""
    n, d = x.shape
    m = params.window_count(d)
    n_f = params.num_filters
    windows = _windows(x, params.width, params.stride)  # (n, m, w)
    fmap = windows @ params.filters[position].T  # (n, m, n_f)
    flat = fmap.transpose(0, 2, 1).reshape(n, -1)
    d_projection = d_out.T @ flat
    d_flat = d_out @ params.projection  # (n, n_f*m)
    d_fmap = d_flat.reshape(n, n_f, m).transpose(0, 2, 1)  # (n, m, n_f)
    d_filters_p = np.einsum("nmf,nmw->fw", d_fmap, windows)
    d_windows = d_fmap @ params.filters[position]  # (n, m, w)
    d_x = np.zeros_like(x)
    idx = (np.arange(m) * params.stride)[:, None] + np.arange(params.width)[None, :]
    np.add.at(d_x, (np.arange(n)[:, None, None], idx[None, :, :]), d_windows)
    return d_x, d_filters_p, d_projection


def score_hype(
    r_embed: np.ndarray,
    entity_embeds: list[np.ndarray],
    params: HypeDecoderParams,
) -> Score:
    """Product-sum score over position-transformed entity embeddings."""
    if len(entity_embeds) > params.max_arity:
        raise PositionOutOfRange(
            f"tuple arity {len(entity_embeds)} exceeds decoder max arity {params.max_arity}"
        )
    transformed = [
        positional_convolve(emb, pos, params) for pos, emb in enumerate(entity_embeds)
    ]
    return score_mdistmult(r_embed, transformed)
