"""
The network game transformer: an attention encoder over the players of a set
of games and a pairwise decoder that scores every node pair.

Shapes, for a batch of B graphs with N players and K games:

    x       (B, N, K)          equilibrium actions
    y       (B, N, K, F)       ReLU(x w + b)
    scores  (B, H, N, N)       Σ_k y_ikᵀ W_Q W_K y_jk, one matrix per head
    z       (B, N, K, F)       φ(y_ik, Σ_j α_ij y_jk for every head)
    logits  (B, N, N)          ψ(Σ_k z_ik ⊙ z_jk), symmetrised

Every function also accepts a single (N, K) instance and then drops the
batch axis from its result.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

from nugget._exceptions import ArgumentError, DataError, MalformedRecordError
from nugget.autodiff import (
    Array,
    Tensor,
    concat,
    load_arrays,
    matmul,
    relu,
    reshape,
    save_arrays,
    sigmoid,
    softmax,
    transpose,
)
from nugget.linalg import Matrix, Rng

logger = logging.getLogger(__name__)

Aggregator: t.TypeAlias = t.Literal["sum", "mean"]
ParamTensors: t.TypeAlias = dict[str, Tensor]


@dataclass(frozen=True)
class ModelShape:
    features: int = 10
    query_features: int = 10
    heads: int = 10
    phi_hidden: int = 100
    psi_hidden: int = 100
    aggregator: Aggregator = "sum"

    def __post_init__(self) -> None:
        for name in ("features", "query_features", "heads", "phi_hidden", "psi_hidden"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.aggregator not in ("sum", "mean"):
            raise ArgumentError(f"Unknown aggregator {self.aggregator!r}")

    def array_shapes(self) -> dict[str, tuple[int, ...]]:
        f, fq, h = self.features, self.query_features, self.heads
        return {
            "expand.w": (f,),
            "expand.b": (f,),
            "query": (h, f, fq),
            "key": (h, fq, f),
            "phi.w1": ((h + 1) * f, self.phi_hidden),
            "phi.b1": (self.phi_hidden,),
            "phi.w2": (self.phi_hidden, f),
            "phi.b2": (f,),
            "psi.w1": (f, self.psi_hidden),
            "psi.b1": (self.psi_hidden,),
            "psi.w2": (self.psi_hidden, 1),
            "psi.b2": (1,),
        }


@dataclass(frozen=True)
class Mlp:
    w1: Matrix
    b1: Array
    w2: Matrix
    b2: Array


@dataclass(frozen=True)
class NuggetParams:
    """
    All trainable arrays. `query[h]` is W_Q for head h (F × F′) and `key[h]`
    is W_K (F′ × F), so the score of a pair is y_iᵀ W_Q W_K y_j.
    """

    expand_w: Array
    expand_b: Array
    query: Array
    key: Array
    phi: Mlp
    psi: Mlp
    shape: ModelShape = field(default_factory=ModelShape)

    def __post_init__(self) -> None:
        for name, arr in self.named_arrays().items():
            expected = self.shape.array_shapes()[name]
            if arr.shape != expected:
                raise ArgumentError(f"Parameter {name} has shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"Parameter {name} contains non-finite values")

    def named_arrays(self) -> dict[str, Array]:
        return {
            "expand.w": self.expand_w,
            "expand.b": self.expand_b,
            "query": self.query,
            "key": self.key,
            "phi.w1": self.phi.w1,
            "phi.b1": self.phi.b1,
            "phi.w2": self.phi.w2,
            "phi.b2": self.phi.b2,
            "psi.w1": self.psi.w1,
            "psi.b1": self.psi.b1,
            "psi.w2": self.psi.w2,
            "psi.b2": self.psi.b2,
        }

    @classmethod
    def from_named(cls, arrays: t.Mapping[str, Array], shape: ModelShape) -> NuggetParams:
        missing = set(shape.array_shapes()) - set(arrays)
        if missing:
            raise ArgumentError(f"Missing parameters {sorted(missing)}")
        a = {name: np.asarray(arr, dtype=np.float64) for name, arr in arrays.items()}
        return cls(
            expand_w=a["expand.w"],
            expand_b=a["expand.b"],
            query=a["query"],
            key=a["key"],
            phi=Mlp(a["phi.w1"], a["phi.b1"], a["phi.w2"], a["phi.b2"]),
            psi=Mlp(a["psi.w1"], a["psi.b1"], a["psi.w2"], a["psi.b2"]),
            shape=shape,
        )

    def tensors(self, requires_grad: bool = False) -> ParamTensors:
        """Fresh leaf tensors over copies of the arrays"""
        return {
            name: Tensor(arr.copy(), requires_grad=requires_grad)
            for name, arr in self.named_arrays().items()
        }

    def size(self) -> int:
        return sum(arr.size for arr in self.named_arrays().values())


def _glorot(rng: Rng, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Array:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def init_params(rng: Rng, shape: ModelShape | None = None) -> NuggetParams:
    """Uniform ±√(6 / (fan_in + fan_out)) weights, zero biases"""
    shape = shape or ModelShape()
    f, fq, h = shape.features, shape.query_features, shape.heads
    phi_in = (h + 1) * f
    return NuggetParams(
        expand_w=_glorot(rng, (f,), 1, f),
        expand_b=np.zeros(f),
        query=_glorot(rng, (h, f, fq), f, fq),
        key=_glorot(rng, (h, fq, f), fq, f),
        phi=Mlp(
            w1=_glorot(rng, (phi_in, shape.phi_hidden), phi_in, shape.phi_hidden),
            b1=np.zeros(shape.phi_hidden),
            w2=_glorot(rng, (shape.phi_hidden, f), shape.phi_hidden, f),
            b2=np.zeros(f),
        ),
        psi=Mlp(
            w1=_glorot(rng, (f, shape.psi_hidden), f, shape.psi_hidden),
            b1=np.zeros(shape.psi_hidden),
            w2=_glorot(rng, (shape.psi_hidden, 1), shape.psi_hidden, 1),
            b2=np.zeros(1),
        ),
        shape=shape,
    )


def _resolve(params: NuggetParams | ParamTensors) -> tuple[ParamTensors, ModelShape]:
    if isinstance(params, NuggetParams):
        return params.tensors(), params.shape
    w1 = params["phi.w1"].shape
    psi = params["psi.w1"].shape
    heads, features, query_features = params["query"].shape
    shape = ModelShape(
        features=features,
        query_features=query_features,
        heads=heads,
        phi_hidden=w1[1],
        psi_hidden=psi[1],
    )
    return params, shape


def _batched(x: npt.ArrayLike) -> tuple[Array, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None], True
    if arr.ndim != 3:
        raise ArgumentError(f"Expected actions of shape (N, K) or (B, N, K), got {arr.shape}")
    return arr, False


def _check_actions(x: Array) -> None:
    _, n, k = x.shape
    if n < 2 or k < 1:
        raise ArgumentError(f"Need N ≥ 2 players and K ≥ 1 games, got N={n}, K={k}")
    if not np.all(np.isfinite(x)):
        raise DataError("Actions contain non-finite values")


def _mlp(p: ParamTensors, prefix: str, x: Tensor) -> Tensor:
    hidden = relu(matmul(x, p[f"{prefix}.w1"]) + p[f"{prefix}.b1"])
    return matmul(hidden, p[f"{prefix}.w2"]) + p[f"{prefix}.b2"]


def _expand(p: ParamTensors, x: Array) -> Tensor:
    b, n, k = x.shape
    xe = Tensor(x.reshape(b, n, k, 1))
    return relu(xe * p["expand.w"] + p["expand.b"])


def _attention_logits(
    p: ParamTensors, shape: ModelShape, y: Tensor, aggregator: Aggregator
) -> Tensor:
    b, n, k, f = y.shape
    h, fq = shape.heads, shape.query_features
    flat = reshape(y, (b, 1, n * k, f))
    queries = reshape(matmul(flat, p["query"]), (b, h, n, k * fq))
    keys = reshape(matmul(flat, transpose(p["key"], (0, 2, 1))), (b, h, n, k * fq))
    scores = matmul(queries, transpose(keys, (0, 1, 3, 2)))
    if aggregator == "mean":
        scores = scores * (1.0 / k)
    return scores


def encode(
    params: NuggetParams | ParamTensors,
    x: npt.ArrayLike,
    frozen_attention: npt.ArrayLike | None = None,
    aggregator: Aggregator | None = None,
) -> Tensor:
    """
    Per-player, per-game embeddings z. With `frozen_attention` the attention
    weights are taken as given constants of shape (B, H, N, N) or (H, N, N)
    instead of being computed from `x`.
    """
    p, shape = _resolve(params)
    agg = aggregator or shape.aggregator
    xb, single = _batched(x)
    _check_actions(xb)
    b, n, k = xb.shape
    f, h = shape.features, shape.heads

    y = _expand(p, xb)
    if frozen_attention is None:
        alpha = softmax(_attention_logits(p, shape, y, agg), axis=-1)
    else:
        frozen = np.asarray(frozen_attention, dtype=np.float64)
        if frozen.ndim == 3:
            frozen = frozen[None]
        if frozen.shape != (b, h, n, n):
            raise ArgumentError(f"Frozen attention must have shape {(b, h, n, n)}, got {frozen.shape}")
        alpha = Tensor(frozen)

    attended = matmul(alpha, reshape(y, (b, 1, n, k * f)))
    attended = reshape(attended, (b, h, n, k, f))
    attended = reshape(transpose(attended, (0, 2, 3, 1, 4)), (b, n, k, h * f))
    z = _mlp(p, "phi", concat([y, attended], axis=-1))
    return reshape(z, (n, k, f)) if single else z


def attention_scores(
    params: NuggetParams | ParamTensors, x: npt.ArrayLike, aggregator: Aggregator | None = None
) -> Array:
    """Softmax attention weights α, shape (H, N, N) or (B, H, N, N)"""
    p, shape = _resolve(params)
    xb, single = _batched(x)
    _check_actions(xb)
    y = _expand(p, xb)
    alpha = softmax(_attention_logits(p, shape, y, aggregator or shape.aggregator), axis=-1)
    return alpha.data[0] if single else alpha.data


def decode(
    params: NuggetParams | ParamTensors, z: Tensor, aggregator: Aggregator | None = None
) -> Tensor:
    """
    Edge logits ψ(Σ_k z_ik ⊙ z_jk). The result is averaged with its transpose,
    so it is symmetric bit for bit whatever the parameters.
    """
    p, shape = _resolve(params)
    agg = aggregator or shape.aggregator
    single = z.ndim == 3
    if single:
        z = reshape(z, (1, *z.shape))
    if z.ndim != 4 or z.shape[-1] != shape.features:
        raise ArgumentError(f"decode expects z of shape (B, N, K, {shape.features}), got {z.shape}")
    if not np.all(np.isfinite(z.data)):
        raise DataError("Embeddings contain non-finite values")

    b, n, k, _ = z.shape
    zt = transpose(z, (0, 3, 1, 2))
    pairs = matmul(zt, transpose(zt, (0, 1, 3, 2)))
    if agg == "mean":
        pairs = pairs * (1.0 / k)
    pairs = transpose(pairs, (0, 2, 3, 1))

    logits = reshape(_mlp(p, "psi", pairs), (b, n, n))
    logits = (logits + transpose(logits, (0, 2, 1))) * 0.5
    return reshape(logits, (n, n)) if single else logits


def logits(
    params: NuggetParams | ParamTensors, x: npt.ArrayLike, aggregator: Aggregator | None = None
) -> Tensor:
    return decode(params, encode(params, x, aggregator=aggregator), aggregator=aggregator)


def forward(params: NuggetParams | ParamTensors, x: npt.ArrayLike) -> Array:
    """Edge probabilities, (N, N) or (B, N, N)"""
    return sigmoid(logits(params, x)).data


@dataclass(frozen=True)
class Prediction:
    probabilities: Matrix
    adjacency: npt.NDArray[np.int8]


def predict(params: NuggetParams, x: npt.ArrayLike, threshold: float = 0.5) -> Prediction:
    if not 0 <= threshold <= 1:
        raise ArgumentError(f"Threshold must be in [0, 1], got {threshold}")
    probs = forward(params, x)
    n = probs.shape[-1]
    adjacency = ((probs > threshold) & ~np.eye(n, dtype=bool)).astype(np.int8)
    return Prediction(probabilities=probs, adjacency=adjacency)


def save_checkpoint(params: NuggetParams, path: Path) -> None:
    shape = params.shape
    meta = {
        "features": shape.features,
        "query_features": shape.query_features,
        "heads": shape.heads,
        "phi_hidden": shape.phi_hidden,
        "psi_hidden": shape.psi_hidden,
        "aggregator": shape.aggregator,
    }
    save_arrays(path, params.named_arrays(), meta)
    logger.info("Saved %d parameters to %s", params.size(), path)


def load_checkpoint(path: Path) -> NuggetParams:
    meta, arrays = load_arrays(path)
    try:
        shape = ModelShape(**meta)
        return NuggetParams.from_named(arrays, shape)
    except (TypeError, ArgumentError) as e:
        raise MalformedRecordError(f"checkpoint does not describe a model ({e})", line=1) from e
