"""A small reverse-mode autodiff core over float64 numpy arrays.

Only the operations the tagger needs are provided.  Every op returns a new
:class:`Tensor`; when any input requires a gradient the result records its
parents and a closure mapping the output gradient to input gradients.
:meth:`Tensor.backward` walks that record in reverse topological order and
accumulates into the ``grad`` of leaf tensors.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"tensor {name or ''} holds non-finite values")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return sum_(self)

    def backward(self) -> None:
        """Backpropagate from this scalar into every leaf that requires grad."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            return
        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("operation produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out._parents = parents if out.requires_grad else ()
    out._backward = backward if out.requires_grad else None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and linear algebra
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D and 2-D operands (numpy ``@`` semantics)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ValueError("matmul supports 1-D and 2-D operands only")
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        if a.ndim == 1 and b.ndim == 1:
            return g * b.data, g * a.data
        if a.ndim == 1:
            return b.data @ g, np.outer(a.data, g)
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("dot expects two vectors")
    return matmul(a, b)


def transpose(a: Tensor) -> Tensor:
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,))


def sum_(a: Tensor) -> Tensor:
    return _result(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def gather_rows(table: Tensor, idx) -> Tensor:
    """Rows of ``table`` selected by ``idx``; index ``-1`` yields a zero row."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((idx.shape[0], table.shape[1]))
    hit = idx >= 0
    out[hit] = table.data[idx[hit]]

    def backward(g):
        gt = np.zeros_like(table.data)
        _kernels.scatter_add_rows(gt, idx, np.ascontiguousarray(g))
        return (gt,)

    return _result(out, (table,), backward)


# ---------------------------------------------------------------------------
# normalisation, attention and loss
# ---------------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    x = _as_tensor(x)
    if x.data.size == 0 or x.shape[axis] == 0:
        raise ValueError("softmax of an empty vector")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (x,), backward)


def scaled_dot_scores(queries: Tensor, keys: Tensor) -> Tensor:
    """``queries @ keys.T / sqrt(d)``; works for one query vector or a matrix."""
    d = keys.shape[-1]
    return matmul(queries, transpose(keys)) * (1.0 / math.sqrt(d))


def additive_scores(qa: Tensor, ka: Tensor, v: Tensor) -> Tensor:
    """``v . tanh(qa_i + ka_j)`` for every query row i and key row j.

    ``qa`` is ``(s, h)`` or ``(h,)``; ``ka`` is ``(t, h)``; ``v`` is ``(h,)``.
    """
    single = qa.ndim == 1
    q = qa.data[None, :] if single else qa.data
    T = np.tanh(q[:, None, :] + ka.data[None, :, :])
    scores = T @ v.data

    def backward(g):
        g2 = g[None, :] if single else g
        dv = np.einsum("st,sth->h", g2, T)
        dpre = g2[:, :, None] * v.data * (1.0 - T * T)
        dq = dpre.sum(axis=1)
        return (dq[0] if single else dq), dpre.sum(axis=0), dv

    return _result(scores[0] if single else scores, (qa, ka, v), backward)


def attention(query, contexts, values=None, score_fn: str = "dot", additive=None) -> Tensor:
    """Attention-weighted sum of context vectors for a single query.

    ``contexts`` is a ``(K, d)`` tensor or a sequence of ``d``-vectors;
    ``values`` defaults to the contexts themselves.  ``score_fn`` is
    ``"dot"`` (scaled dot product) or ``"additive"``, the latter needing
    ``additive=(W1, W2, v)``.
    """
    query = _as_tensor(query)
    contexts = _stack(contexts)
    if contexts.shape[0] == 0:
        raise ValueError("attention over an empty context set")
    values = contexts if values is None else _stack(values)
    if score_fn == "dot":
        scores = scaled_dot_scores(query, contexts)
    elif score_fn == "additive":
        if additive is None:
            raise ValueError("additive score needs (W1, W2, v)")
        w1, w2, v = additive
        scores = additive_scores(matmul(query, w1), matmul(contexts, w2), v)
    else:
        raise ValueError(f"unknown score_fn {score_fn!r}")
    return matmul(softmax(scores), values)


def _stack(xs) -> Tensor:
    if isinstance(xs, Tensor):
        return xs
    xs = list(xs)
    if not xs:
        return Tensor(np.zeros((0, 0)))
    if all(not isinstance(x, Tensor) for x in xs):
        return Tensor(np.stack([np.asarray(x, dtype=np.float64) for x in xs]))
    ts = [_as_tensor(x) for x in xs]
    return _result(np.stack([t.data for t in ts]), tuple(ts), lambda g: tuple(g))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardise along the last axis, then apply ``gain`` and ``bias``."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def backward(g):
        gx = g * gain.data
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        return dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _result(gain.data * xhat + bias.data, (x, gain, bias), backward)


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity in eval mode or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _result(x.data * mask, (x,), lambda g: (g * mask,))


def cross_entropy(logits: Tensor, gold) -> Tensor:
    """Summed negative log-likelihood of ``gold`` under ``softmax(logits)``.

    ``logits`` is a class-score vector with an integer ``gold``, or an
    ``(s, o)`` matrix with ``s`` gold indices; the per-row losses are summed.
    """
    logits = _as_tensor(logits)
    single = logits.ndim == 1
    z = logits.data[None, :] if single else logits.data
    gold = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    o = z.shape[1]
    if gold.shape[0] != z.shape[0]:
        raise ValueError(f"{gold.shape[0]} gold labels for {z.shape[0]} rows")
    if np.any(gold < 0) or np.any(gold >= o):
        raise IndexError(f"gold index out of range [0, {o})")
    rows = np.arange(z.shape[0])
    top = z.argmax(axis=1)
    m = z[rows, top]
    e = np.exp(z - m[:, None])
    e_rest = e.sum(axis=1) - e[rows, top]
    # log1p keeps precision when the top class dominates
    lse = m + np.log1p(e_rest)
    loss = float(np.sum(lse - z[rows, gold]))
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        d = p.copy()
        d[rows, gold] -= 1.0
        d *= g
        return (d[0] if single else d,)

    return _result(np.asarray(loss), (logits,), backward)


# ---------------------------------------------------------------------------
# optimiser
# ---------------------------------------------------------------------------


class Adam:
    """Bias-corrected adaptive-moment optimiser.

    Tensors with ``requires_grad=False`` are never touched.  A parameter
    that grew along its first axis since the last step (new embedding rows)
    gets zero moments for the new rows.
    """

    def __init__(self, params: Iterable[Tensor], lr: float = 5e-5,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def _sync_state(self, i: int) -> None:
        p, m = self.params[i], self.m[i]
        if m.shape == p.shape:
            return
        if m.shape[1:] == p.shape[1:] and p.shape[0] > m.shape[0]:
            pad = np.zeros((p.shape[0] - m.shape[0],) + p.shape[1:])
            self.m[i] = np.concatenate([m, pad])
            self.v[i] = np.concatenate([self.v[i], pad])
            return
        raise ValueError(f"optimizer state {m.shape} does not match parameter {p.shape}")

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            if not p.requires_grad or p.grad is None:
                continue
            if p.grad.shape != p.shape:
                raise ValueError(f"gradient {p.grad.shape} does not match parameter {p.shape}")
            self._sync_state(i)
            if not p.data.flags.c_contiguous:
                p.data = np.ascontiguousarray(p.data)
            grad = np.ascontiguousarray(p.grad, dtype=np.float64)
            _kernels.adam_update(
                p.data.reshape(-1), grad.reshape(-1), self.m[i].reshape(-1), self.v[i].reshape(-1),
                self.lr, b1, b2, self.eps, bc1, bc2,
            )


def adam_step(params: Sequence[Tensor], state: Adam | None = None, lr: float = 5e-5,
              betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8) -> Adam:
    """Apply one optimiser step to ``params`` using their ``grad`` slots.

    Pass the returned state back in on the next call.
    """
    if state is None:
        state = Adam(params, lr=lr, betas=betas, eps=eps)
    state.step()
    return state
