"""Minimal dense reverse-mode autodiff over float64 matrices.

Every value is a 2-D array wrapped in a Tensor.  Ops record their parents and
a backward closure on the output; backward() linearizes the graph into a Tape
(insertion order = topological order) and replays it in reverse exactly once.
No broadcasting beyond the dedicated row-gather and bias ops, no higher-order
derivatives.
"""

from __future__ import annotations

import numpy as np

from .graph import spmm as _spmm, spmm_t as _spmm_t


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "tape_id", "_backward", "_done")

    def __init__(self, data, requires_grad=False, op="leaf", parents=()):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        if data.ndim != 2:
            raise ValueError(f"tensors are 2-D matrices, got shape {data.shape}")
        self.data = np.ascontiguousarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = op
        self.parents = parents
        self.tape_id = None
        self._backward = None
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return hadamard(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """The backward program: tensor records with parents before children."""

    def __init__(self, records):
        self.records = records
        for i, t in enumerate(records):
            t.tape_id = i

    def __len__(self):
        return len(self.records)


def _trace(loss):
    order = []
    visited = set()
    stack = [(loss, iter(loss.parents))]
    visited.add(id(loss))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in visited and p.requires_grad:
                visited.add(id(p))
                stack.append((p, iter(p.parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    return Tape(order)


def backward(loss, params=()):
    """Populate .grad on every tensor reachable from loss.

    Parameters listed in ``params`` but not touched by the forward pass get a
    zero gradient.  Calling backward twice on the same loss is an error; the
    forward pass must be rebuilt first.
    """
    if loss.data.shape != (1, 1):
        raise ValueError("backward requires a scalar loss")
    if not loss.requires_grad:
        raise ValueError("loss does not require gradients")
    if loss._done:
        raise RuntimeError("backward already called on this loss; rebuild the forward pass")
    loss._done = True
    tape = _trace(loss)
    in_tape = {id(t) for t in tape.records}
    for t in tape.records:
        t.grad = np.zeros_like(t.data)
    for p in params:
        if id(p) not in in_tape:
            p.grad = np.zeros_like(p.data)
    loss.grad = np.ones((1, 1))
    for t in reversed(tape.records):
        if t._backward is not None:
            t._backward()
    return tape


def _binary_requires(a, b):
    return a.requires_grad or b.requires_grad


def matmul(a, b):
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, _binary_requires(a, b), "matmul", (a, b))

    def _back():
        if a.requires_grad:
            a.grad += out.grad @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ out.grad

    out._backward = _back
    return out


def add(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, _binary_requires(a, b), "add", (a, b))

    def _back():
        if a.requires_grad:
            a.grad += out.grad
        if b.requires_grad:
            b.grad += out.grad

    out._backward = _back
    return out


def add_bias(x, b):
    """Add a (1, d) bias row to every row of x."""
    if b.data.shape != (1, x.data.shape[1]):
        raise ValueError(f"bias shape {b.data.shape} incompatible with {x.data.shape}")
    out = Tensor(x.data + b.data, _binary_requires(x, b), "add_bias", (x, b))

    def _back():
        if x.requires_grad:
            x.grad += out.grad
        if b.requires_grad:
            b.grad += out.grad.sum(axis=0, keepdims=True)

    out._backward = _back
    return out


def hadamard(a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"hadamard shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data, _binary_requires(a, b), "hadamard", (a, b))

    def _back():
        if a.requires_grad:
            a.grad += out.grad * b.data
        if b.requires_grad:
            b.grad += out.grad * a.data

    out._backward = _back
    return out


def concat_cols(a, b):
    if a.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"concat_cols row mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(np.hstack([a.data, b.data]), _binary_requires(a, b), "concat_cols", (a, b))
    split = a.data.shape[1]

    def _back():
        if a.requires_grad:
            a.grad += out.grad[:, :split]
        if b.requires_grad:
            b.grad += out.grad[:, split:]

    out._backward = _back
    return out


def relu(x):
    out = Tensor(np.maximum(x.data, 0.0), x.requires_grad, "relu", (x,))

    def _back():
        if x.requires_grad:
            x.grad += out.grad * (x.data > 0.0)

    out._backward = _back
    return out


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x):
    out = Tensor(_sigmoid(x.data), x.requires_grad, "sigmoid", (x,))

    def _back():
        if x.requires_grad:
            x.grad += out.grad * out.data * (1.0 - out.data)

    out._backward = _back
    return out


def gather_rows(x, idx):
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows takes a 1-D index array")
    if len(idx) and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise IndexError("gather_rows index out of range")
    out = Tensor(x.data[idx], x.requires_grad, "gather_rows", (x,))

    def _back():
        if x.requires_grad:
            np.add.at(x.grad, idx, out.grad)

    out._backward = _back
    return out


def row_sum(x):
    """Sum each row to a single column: (n, d) -> (n, 1)."""
    out = Tensor(x.data.sum(axis=1, keepdims=True), x.requires_grad, "row_sum", (x,))

    def _back():
        if x.requires_grad:
            x.grad += out.grad

    out._backward = _back
    return out


def sum_all(x):
    out = Tensor(x.data.sum().reshape(1, 1), x.requires_grad, "sum_all", (x,))

    def _back():
        if x.requires_grad:
            x.grad += out.grad[0, 0]

    out._backward = _back
    return out


def scale(x, s):
    """Multiply a matrix by a scalar held in a (1, 1) tensor."""
    if s.data.shape != (1, 1):
        raise ValueError("scale factor must be a 1x1 tensor")
    out = Tensor(x.data * s.data[0, 0], _binary_requires(x, s), "scale", (x, s))

    def _back():
        if x.requires_grad:
            x.grad += out.grad * s.data[0, 0]
        if s.requires_grad:
            s.grad += (out.grad * x.data).sum()

    out._backward = _back
    return out


def spmm_const(m, x):
    """Multiply a constant CsrMatrix into a tensor: out = m @ x."""
    if x.data.shape[0] != m.cols:
        raise ValueError(f"spmm_const shape mismatch: {m.rows}x{m.cols} @ {x.data.shape}")
    out = Tensor(_spmm(m, x.data), x.requires_grad, "spmm_const", (x,))

    def _back():
        if x.requires_grad:
            x.grad += _spmm_t(m, out.grad)

    out._backward = _back
    return out


def spmm_t_const(m, x):
    """Multiply the transpose of a constant CsrMatrix into a tensor: out = m.T @ x."""
    if x.data.shape[0] != m.rows:
        raise ValueError(f"spmm_t_const shape mismatch: {m.cols}x{m.rows} @ {x.data.shape}")
    out = Tensor(_spmm_t(m, x.data), x.requires_grad, "spmm_t_const", (x,))

    def _back():
        if x.requires_grad:
            x.grad += _spmm(m, out.grad)

    out._backward = _back
    return out


def bce_with_logits(logits, labels):
    """Mean binary cross-entropy on pre-sigmoid logits, log-sum-exp stable form.

    labels must be 0/1; logits shape (n, 1).
    """
    if logits.data.shape[1] != 1:
        raise ValueError("bce_with_logits expects (n, 1) logits")
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape[0] != logits.data.shape[0]:
        raise ValueError("logits and labels length mismatch")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be binary")
    z = logits.data
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    val = per.mean()
    if not np.isfinite(val):
        raise FloatingPointError("non-finite loss")
    out = Tensor(np.array([[val]]), logits.requires_grad, "bce_with_logits", (logits,))
    inv_n = 1.0 / z.shape[0]

    def _back():
        if logits.requires_grad:
            logits.grad += out.grad[0, 0] * (_sigmoid(z) - y) * inv_n

    out._backward = _back
    return out


def ce_pairwise(logits, classes):
    """Mean two-class softmax cross-entropy over (n, 2) logit pairs."""
    if logits.data.shape[1] != 2:
        raise ValueError("ce_pairwise expects (n, 2) logits")
    cls = np.asarray(classes, dtype=np.int64).reshape(-1)
    if cls.shape[0] != logits.data.shape[0]:
        raise ValueError("logits and classes length mismatch")
    if len(cls) and (cls.min() < 0 or cls.max() > 1):
        raise ValueError("class labels must be 0 or 1")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))
    rows = np.arange(len(cls))
    per = lse[:, 0] - z[rows, cls]
    val = per.mean()
    if not np.isfinite(val):
        raise FloatingPointError("non-finite loss")
    out = Tensor(np.array([[val]]), logits.requires_grad, "ce_pairwise", (logits,))
    inv_n = 1.0 / z.shape[0]

    def _back():
        if logits.requires_grad:
            soft = np.exp(z - lse)
            soft[rows, cls] -= 1.0
            logits.grad += out.grad[0, 0] * soft * inv_n

    out._backward = _back
    return out


class AdamState:
    """Adam with bias correction; weight decay enters as an L2 term on the gradient."""

    def __init__(self, params, lr, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                raise ValueError("parameter has no gradient; call backward first")
            if p.grad.shape != p.data.shape:
                raise ValueError("gradient shape mismatch")
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
