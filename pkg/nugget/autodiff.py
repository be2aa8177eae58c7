"""
A small reverse-mode differentiation engine over dense float64 numpy arrays.

Only the primitives the model needs are provided. Every primitive checks its
input shapes up front and raises `ArgumentError` naming itself, so a shape bug
surfaces at the call site instead of deep inside numpy.
"""

from __future__ import annotations

import json
import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy.special import expit, log_expit

from nugget._exceptions import (
    ArgumentError,
    DatasetIOError,
    FormatVersionError,
    MalformedRecordError,
    NumericalError,
)
from nugget.linalg import Rng

logger = logging.getLogger(__name__)

Array: t.TypeAlias = npt.NDArray[np.float64]
Backward: t.TypeAlias = t.Callable[[Array], None]

CHECKPOINT_FORMAT = "nugget-checkpoint"
CHECKPOINT_VERSION = 1


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(
        self,
        data: npt.ArrayLike,
        requires_grad: bool = False,
        parents: tuple[Tensor, ...] = (),
        op: str = "leaf",
    ) -> None:
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Array | None = np.zeros_like(self.data) if requires_grad else None
        self.op = op
        self._parents = parents
        self._backward: Backward | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.item())

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def backward(self) -> None:
        """Backpropagates from a scalar, accumulating into every tracked leaf"""
        if self.data.size != 1:
            raise ArgumentError(f"backward needs a scalar output, got shape {self.shape}")
        Tape.trace(self).backward()

    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, _lift(other))

    def __radd__(self, other: float) -> Tensor:
        return add(_lift(other), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, _lift(other))

    def __rmul__(self, other: float) -> Tensor:
        return mul(_lift(other), self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __repr__(self) -> str:
        tracked = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{tracked})"


def _lift(value: Tensor | float) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: Array, parents: tuple[Tensor, ...], op: str, backward: Backward) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), parents=parents, op=op)
    if out.requires_grad:
        out._backward = backward
    return out


def _accumulate(target: Tensor, grad: Array) -> None:
    if target.requires_grad:
        assert target.grad is not None
        target.grad += grad


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sums `grad` back down to `shape` after numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


@dataclass
class Tape:
    """The tracked part of a computation, in topological order (inputs first)"""

    nodes: list[Tensor] = field(default_factory=list[Tensor])

    @classmethod
    def trace(cls, root: Tensor) -> t.Self:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents)
        return cls(order)

    def backward(self) -> None:
        if not self.nodes:
            return

        # Interior gradients start from zero on every pass; leaves accumulate
        for node in self.nodes:
            if node._parents:
                node.grad = np.zeros_like(node.data)

        root = self.nodes[-1]
        assert root.grad is not None
        root.grad += 1.0
        for node in reversed(self.nodes):
            if node._backward is not None:
                assert node.grad is not None
                node._backward(node.grad)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ArgumentError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("add", a, b)

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), "add", backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("mul", a, b)

    def backward(g: Array) -> None:
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), "mul", backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """numpy matmul semantics for operands of rank ≥ 2, with broadcast batch axes"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ArgumentError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ArgumentError(
            f"matmul: batch axes of {a.shape} and {b.shape} do not broadcast"
        ) from None

    def backward(g: Array) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _node(a.data @ b.data, (a, b), "matmul", backward)


def relu(x: Tensor) -> Tensor:
    """max(x, 0). The subgradient at exactly 0 is taken as 0."""
    active = x.data > 0

    def backward(g: Array) -> None:
        _accumulate(x, g * active)

    return _node(np.where(active, x.data, 0.0), (x,), "relu", backward)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)

    def backward(g: Array) -> None:
        _accumulate(x, g * s * (1.0 - s))

    return _node(s, (x,), "sigmoid", backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.ndim == 0:
        raise ArgumentError("softmax: needs at least one axis, got a scalar")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g: Array) -> None:
        _accumulate(x, s * (g - np.sum(g * s, axis=axis, keepdims=True)))

    return _node(s, (x,), "softmax", backward)


def concat(tensors: t.Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ArgumentError("concat: needs at least one tensor")
    shapes = [tn.shape for tn in tensors]
    ndim = tensors[0].ndim
    ax = axis % ndim
    for s in shapes:
        if len(s) != ndim or s[:ax] + s[ax + 1 :] != shapes[0][:ax] + shapes[0][ax + 1 :]:
            raise ArgumentError(f"concat: incompatible shapes {shapes} along axis {axis}")

    cuts = np.cumsum([s[ax] for s in shapes])[:-1]

    def backward(g: Array) -> None:
        for tn, piece in zip(tensors, np.split(g, cuts, axis=ax)):
            _accumulate(tn, piece)

    data = np.concatenate([tn.data for tn in tensors], axis=ax)
    return _node(data, tuple(tensors), "concat", backward)


def reduce_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    if axis is not None and not -x.ndim <= axis < x.ndim:
        raise ArgumentError(f"sum: axis {axis} out of range for shape {x.shape}")

    def backward(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _node(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), "sum", backward)


def reduce_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    return mul(reduce_sum(x, axis, keepdims), Tensor(1.0 / count))


def transpose(x: Tensor, axes: t.Sequence[int] | None = None) -> Tensor:
    perm = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(perm) != list(range(x.ndim)):
        raise ArgumentError(f"transpose: {perm} is not a permutation of the axes of {x.shape}")
    inverse = tuple(np.argsort(perm))

    def backward(g: Array) -> None:
        _accumulate(x, np.transpose(g, inverse))

    return _node(np.transpose(x.data, perm), (x,), "transpose", backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ArgumentError(f"reshape: cannot reshape {x.shape} into {shape}") from None

    def backward(g: Array) -> None:
        _accumulate(x, g.reshape(x.shape))

    return _node(data, (x,), "reshape", backward)


def masked_bce(logits: Tensor, target: npt.ArrayLike) -> Tensor:
    """
    Binary cross-entropy on logits for one N × N graph or a B × N × N batch,
    ignoring the diagonal. Each graph's loss is the mean over its N(N - 1)
    off-diagonal entries; a batch returns the mean of the per-graph losses.

    Uses log σ(y) and log σ(-y) directly so the loss stays finite for any
    finite logit.
    """
    a = np.asarray(target, dtype=np.float64)
    if a.shape != logits.shape or logits.ndim not in (2, 3):
        raise ArgumentError(
            f"masked_bce: logits {logits.shape} and target {a.shape} must be matching N × N"
        )
    if logits.shape[-1] != logits.shape[-2] or logits.shape[-1] < 2:
        raise ArgumentError(f"masked_bce: needs square graphs with N ≥ 2, got {logits.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ArgumentError("masked_bce: target must be binary")

    n = logits.shape[-1]
    batch = logits.shape[0] if logits.ndim == 3 else 1
    mask = 1.0 - np.eye(n)
    y = logits.data
    per_entry = -(a * log_expit(y) + (1.0 - a) * log_expit(-y)) * mask
    weight = 1.0 / (n * (n - 1) * batch)
    loss = float(per_entry.sum()) * weight

    def backward(g: Array) -> None:
        _accumulate(logits, g * (expit(y) - a) * mask * weight)

    return _node(np.asarray(loss), (logits,), "masked_bce", backward)


def grad_check(
    f: t.Callable[[], Tensor],
    params: t.Sequence[Tensor],
    rng: Rng,
    coords: int = 200,
    h: float = 1e-5,
) -> float:
    """
    Largest relative error between backprop and central differences over a
    random sample of `coords` parameter coordinates (all of them if there are
    fewer). The relative error uses max(|analytic|, |numeric|, 1e-8) as the
    denominator. Untracked parameters are skipped.
    """
    tracked = [p for p in params if p.requires_grad]
    for p in tracked:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise NumericalError("grad_check: function value is not finite")
    out.backward()
    analytic = [t.cast(Array, p.grad).copy() for p in tracked]

    index = [(i, j) for i, p in enumerate(tracked) for j in range(p.data.size)]
    if not index:
        return 0.0
    chosen = rng.choice(len(index), min(coords, len(index)))

    worst = 0.0
    for c in chosen:
        i, j = index[int(c)]
        data = tracked[i].data
        at = np.unravel_index(j, data.shape)
        original = float(data[at])
        data[at] = original + h
        plus = f().item()
        data[at] = original - h
        minus = f().item()
        data[at] = original

        numeric = (plus - minus) / (2 * h)
        exact = float(analytic[i].reshape(-1)[j])
        if not (math.isfinite(numeric) and math.isfinite(exact)):
            raise NumericalError(f"grad_check: non-finite gradient at parameter {i}, entry {j}")
        rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
        worst = max(worst, rel)

    logger.debug("grad_check: %d coordinates, max relative error %.3e", len(chosen), worst)
    return worst


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[Array] = field(default_factory=list[Array])
    v: list[Array] = field(default_factory=list[Array])

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ArgumentError(f"Learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ArgumentError(f"Adam betas must be in [0, 1), got {self.beta1}, {self.beta2}")

    @classmethod
    def for_params(cls, params: t.Sequence[Array], lr: float = 0.001) -> t.Self:
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    state: AdamState, params: t.Sequence[Array], grads: t.Sequence[Array]
) -> list[Array]:
    """
    One bias-corrected Adam update. Returns the new parameter arrays and
    advances `state` in place. A non-finite gradient aborts the step before
    anything is modified.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ArgumentError("adam_step: parameter, gradient and moment counts differ")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ArgumentError(f"adam_step: shapes {p.shape}, {g.shape}, {m.shape} differ")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"Non-finite gradient at Adam step {state.step + 1}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step

    updated: list[Array] = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        updated.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


def save_arrays(path: Path, arrays: t.Mapping[str, Array], meta: t.Mapping[str, t.Any]) -> None:
    """
    Writes named arrays as JSON lines: a header with the format, version,
    `meta` and every array's shape, then one `{"name", "values"}` line per
    array in header order.
    """
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": dict(meta),
        "shapes": {name: list(a.shape) for name, a in arrays.items()},
    }
    lines = [json.dumps(header, allow_nan=False)]
    for name, a in arrays.items():
        lines.append(json.dumps({"name": name, "values": a.ravel().tolist()}, allow_nan=False))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot write checkpoint {path}") from e


def load_arrays(path: Path) -> tuple[dict[str, t.Any], dict[str, Array]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetIOError(f"Cannot read checkpoint {path}") from e
    if not lines:
        raise MalformedRecordError("empty checkpoint", line=1)

    try:
        header = json.loads(lines[0])
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a nugget checkpoint")
    except (json.JSONDecodeError, AttributeError, ValueError) as e:
        raise MalformedRecordError(f"invalid checkpoint header ({e})", line=1) from e
    if header.get("version") != CHECKPOINT_VERSION:
        raise FormatVersionError(
            f"Checkpoint format version {header.get('version')!r} is not supported"
        )

    shapes: dict[str, list[int]] = header.get("shapes", {})
    arrays: dict[str, Array] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            name = record["name"]
            values = np.asarray(record["values"], dtype=np.float64)
            arrays[name] = values.reshape(shapes[name])
        except json.JSONDecodeError as e:
            raise MalformedRecordError(f"truncated or invalid JSON ({e.msg})", line=line_no) from e
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRecordError(f"invalid parameter record ({e})", line=line_no) from e

    missing = set(shapes) - set(arrays)
    if missing:
        raise MalformedRecordError(
            f"missing parameters {sorted(missing)}", line=len(lines) + 1
        )
    return header.get("meta", {}), arrays
