"""Define-by-run reverse-mode differentiation over dense float64 matrices.

Every value is a 2-D row-major float64 ``Tensor``.  Ops are free functions;
while a :class:`Tape` is active (as a context manager) and any input requires
gradients, each op appends a backward closure to the tape.  ``backward``
walks the tape once in reverse, accumulating into ``Tensor.grad``.  Tapes are
rebuilt every training step and are confined to a single thread.

All op outputs are checked for NaN/Inf at the op boundary; leaves are
checked at construction.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError, StateError

RESET_MODULUS = 1e-12  # below this a normalized complex coordinate becomes 1+0i

_tape_stack: list["Tape"] = []


class Tensor:
    """A 2-D float64 matrix with an optional gradient accumulator."""

    def __init__(self, values: np.ndarray, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D matrices, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise NumericError("non-finite values in tensor")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros(arr.shape, dtype=np.float64) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


def tensor(values, requires_grad: bool = False, name: str | None = None) -> Tensor:
    """Create a leaf tensor (lists accepted, cast to float64)."""
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=requires_grad, name=name)


class Tape:
    """Execution record for one forward pass; backward may run exactly once."""

    def __init__(self):
        self.records: list[tuple[Tensor, object]] = []  # (output, backward closure)
        self._on_tape: set[int] = set()
        self._consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _tape_stack.pop()
        assert popped is self

    def _add(self, out: Tensor, backward_fn) -> None:
        self.records.append((out, backward_fn))
        self._on_tape.add(id(out))


def _active_tape() -> Tape | None:
    return _tape_stack[-1] if _tape_stack else None


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite result in {op}")
    return arr


def _make_result(arr: np.ndarray, inputs: tuple[Tensor, ...], op: str, backward_fn) -> Tensor:
    """Wrap an op result, recording the backward closure when tracking."""
    _check_finite(arr, op)
    tape = _active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(arr, requires_grad=track)
    if track:
        tape._add(out, backward_fn)
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad += g


def _reduce_broadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum a full-shape gradient down to a broadcast (1, n) or (1, 1) operand."""
    out = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _binary_shapes(a: Tensor, b: Tensor, op: str) -> bool:
    """Validate elementwise operand shapes; True when b broadcasts as a row."""
    if a.shape == b.shape:
        return False
    if b.rows == 1 and b.cols in (1, a.cols):
        return True
    raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} are incompatible "
                     "(second operand may be a broadcastable single row)")


def add(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _binary_shapes(a, b, "add")

    def backward_fn(g):
        _accumulate(a, g)
        _accumulate(b, _reduce_broadcast(g, b.shape) if broadcast else g)

    return _make_result(a.values + b.values, (a, b), "add", backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _binary_shapes(a, b, "sub")

    def backward_fn(g):
        _accumulate(a, g)
        _accumulate(b, -( _reduce_broadcast(g, b.shape) if broadcast else g))

    return _make_result(a.values - b.values, (a, b), "sub", backward_fn)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _binary_shapes(a, b, "hadamard")

    def backward_fn(g):
        _accumulate(a, g * b.values)
        gb = g * a.values
        _accumulate(b, _reduce_broadcast(gb, b.shape) if broadcast else gb)

    return _make_result(a.values * b.values, (a, b), "hadamard", backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")

    def backward_fn(g):
        _accumulate(a, g @ b.values.T)
        _accumulate(b, a.values.T @ g)

    return _make_result(a.values @ b.values, (a, b), "matmul", backward_fn)


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)
    if not np.isfinite(k):
        raise NumericError("scale factor must be finite")

    def backward_fn(g):
        _accumulate(a, k * g)

    return _make_result(k * a.values, (a,), "scale", backward_fn)


def _split(t: Tensor, op: str) -> int:
    if t.cols % 2:
        raise ShapeError(f"{op}: complex layout needs an even column count, got {t.cols}")
    return t.cols // 2


def complex_hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Coordinate-wise complex product in split-half layout [re | im]."""
    if a.shape != b.shape:
        raise ShapeError(f"complex_hadamard: shapes {a.shape} and {b.shape} differ")
    k = _split(a, "complex_hadamard")
    ar, ai = a.values[:, :k], a.values[:, k:]
    br, bi = b.values[:, :k], b.values[:, k:]
    out = np.concatenate([ar * br - ai * bi, ar * bi + ai * br], axis=1)

    def backward_fn(g):
        gr, gi = g[:, :k], g[:, k:]
        # d/da = g * conj(b), d/db = g * conj(a)
        _accumulate(a, np.concatenate([gr * br + gi * bi, -gr * bi + gi * br], axis=1))
        _accumulate(b, np.concatenate([gr * ar + gi * ai, -gr * ai + gi * ar], axis=1))

    return _make_result(out, (a, b), "complex_hadamard", backward_fn)


def complex_conjugate(a: Tensor) -> Tensor:
    k = _split(a, "complex_conjugate")
    out = a.values.copy()
    out[:, k:] = -out[:, k:]

    def backward_fn(g):
        ga = g.copy()
        ga[:, k:] = -ga[:, k:]
        _accumulate(a, ga)

    return _make_result(out, (a,), "complex_conjugate", backward_fn)


def gather_rows(m: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ShapeError("gather_rows: ids must be a 1-D sequence")
    if ids.size and (ids.min() < 0 or ids.max() >= m.rows):
        raise IndexError(f"gather_rows: id out of range for {m.rows} rows")

    def backward_fn(g):
        if m.requires_grad:
            np.add.at(m.grad, ids, g)

    return _make_result(m.values[ids], (m,), "gather_rows", backward_fn)


def segment_sum(rows: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Sum rows into ``num_segments`` buckets; empty buckets stay zero."""
    seg = np.asarray(segment_ids, dtype=np.int64)
    if seg.ndim != 1 or seg.size != rows.rows:
        raise ShapeError("segment_sum: need one segment id per row")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise IndexError(f"segment_sum: segment id out of range for {num_segments} segments")
    out = np.zeros((num_segments, rows.cols), dtype=np.float64)
    np.add.at(out, seg, rows.values)

    def backward_fn(g):
        _accumulate(rows, g[seg])

    return _make_result(out, (rows,), "segment_sum", backward_fn)


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0  # gradient is 0 at exactly 0

    def backward_fn(g):
        _accumulate(a, g * mask)

    return _make_result(np.maximum(a.values, 0.0), (a,), "relu", backward_fn)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.values)

    def backward_fn(g):
        _accumulate(a, g * s * (1.0 - s))

    return _make_result(s, (a,), "sigmoid", backward_fn)


def log_sigmoid(a: Tensor) -> Tensor:
    """log(sigmoid(x)) without underflow for very negative x."""
    x = a.values
    out = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))

    def backward_fn(g):
        _accumulate(a, g * _sigmoid(-x))

    return _make_result(out, (a,), "log_sigmoid", backward_fn)


def log(a: Tensor) -> Tensor:
    if (a.values <= 0).any():
        raise NumericError("log: domain requires strictly positive values")

    def backward_fn(g):
        _accumulate(a, g / a.values)

    return _make_result(np.log(a.values), (a,), "log", backward_fn)


def row_l1_norm(a: Tensor) -> Tensor:
    out = np.abs(a.values).sum(axis=1, keepdims=True)

    def backward_fn(g):
        _accumulate(a, g * np.sign(a.values))  # subgradient 0 at 0

    return _make_result(out, (a,), "row_l1_norm", backward_fn)


def row_l2_norm(a: Tensor) -> Tensor:
    sq = np.square(a.values)
    out = np.sqrt(sq.sum(axis=1, keepdims=True))

    def backward_fn(g):
        safe = np.where(out > 0, out, 1.0)
        _accumulate(a, g * (a.values / safe))

    return _make_result(out, (a,), "row_l2_norm", backward_fn)


def softmax_over_scores(a: Tensor) -> Tensor:
    """Row-wise softmax with max-subtraction."""
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        _accumulate(a, p * (g - dot))

    return _make_result(p, (a,), "softmax_over_scores", backward_fn)


def phase_embedding(theta: Tensor) -> Tensor:
    """Materialize unit-modulus complex rows [cos θ | sin θ] from phases."""
    c, s = np.cos(theta.values), np.sin(theta.values)
    out = np.concatenate([c, s], axis=1)

    def backward_fn(g):
        k = theta.cols
        _accumulate(theta, -s * g[:, :k] + c * g[:, k:])

    return _make_result(out, (theta,), "phase_embedding", backward_fn)


def complex_unit_normalize(a: Tensor) -> Tensor:
    """Rescale every complex coordinate to unit modulus.

    Coordinates with modulus < RESET_MODULUS become 1+0i and pass no
    gradient (constant branch).
    """
    k = _split(a, "complex_unit_normalize")
    x, y = a.values[:, :k], a.values[:, k:]
    mod = np.hypot(x, y)
    reset = mod < RESET_MODULUS
    safe = np.where(reset, 1.0, mod)
    u = np.where(reset, 1.0, x / safe)
    v = np.where(reset, 0.0, y / safe)
    out = np.concatenate([u, v], axis=1)

    def backward_fn(g):
        gu, gv = g[:, :k], g[:, k:]
        # d(x/s)/dx = y^2/s^3, d(x/s)/dy = -xy/s^3 and symmetrically for y/s
        common = (v * gu - u * gv) / safe
        gx = np.where(reset, 0.0, v * common)
        gy = np.where(reset, 0.0, -u * common)
        _accumulate(a, np.concatenate([gx, gy], axis=1))

    return _make_result(out, (a,), "complex_unit_normalize", backward_fn)


def sum_all(a: Tensor) -> Tensor:
    out = np.array([[a.values.sum()]])

    def backward_fn(g):
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _make_result(out, (a,), "sum_all", backward_fn)


def backward(tape: Tape, loss: Tensor) -> None:
    """Reverse sweep from a scalar loss; valid once per tape."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")
    if tape._consumed:
        raise StateError("backward already ran on this tape")
    if id(loss) not in tape._on_tape:
        raise StateError("loss is not recorded on this tape")
    tape._consumed = True
    loss.grad += 1.0
    for out, backward_fn in reversed(tape.records):
        if out.grad is not None and out.grad.any():
            backward_fn(out.grad)
