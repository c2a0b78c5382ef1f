"""Minimal define-by-run reverse-mode autodiff over float64 numpy arrays.

Every op builds a fresh :class:`Node`; :func:`backward` walks the graph in
reverse topological order and returns gradients for the leaves.  The op set
is deliberately small: it covers what the MLP generator and projection
discriminator need and nothing else.
"""

from __future__ import annotations

import itertools
from typing import Callable, Mapping

import numpy as np

OP_KINDS = (
    "leaf",
    "matmul",
    "add",
    "mul",
    "relu",
    "leaky-relu",
    "tanh",
    "softmax",
    "mean",
    "sum",
    "hinge",
    "scale",
    "concat",
    "slice",
)

_ids = itertools.count()


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class GraphError(RuntimeError):
    pass


class Node:
    """A value in the computation graph.

    ``backward_fn`` receives the upstream gradient and returns one gradient
    per parent (in parent order).
    """

    __slots__ = ("id", "value", "op", "parents", "backward_fn", "attrs")

    def __init__(self, value, op="leaf", parents=(), backward_fn=None, attrs=None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"non-finite value produced by op {op!r}")
        self.id = next(_ids)
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.attrs = attrs or {}

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on non-scalar node of shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Node(id={self.id}, op={self.op!r}, shape={self.shape})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return mul(self, other)
        return scale(self, float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))


def leaf(value) -> Node:
    return Node(value)


def constant(value) -> Node:
    """A leaf whose gradient nobody will read; used for detached inputs."""
    return Node(value)


def _unbroadcast_rows(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.sum(axis=0, keepdims=True)


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def back(g):
        return g @ bv.T, av.T @ g

    return Node(av @ bv, "matmul", (a, b), back)


def add(a: Node, b: Node) -> Node:
    """Elementwise add; ``b`` may be a [1 x n] row broadcast over rows of ``a``."""
    if a.shape != b.shape:
        if b.shape[0] == 1 and b.shape[1] == a.shape[1]:
            pass
        elif a.shape[0] == 1 and a.shape[1] == b.shape[1]:
            return add(b, a)
        else:
            raise ShapeError(f"add {a.shape} + {b.shape}")
    sa, sb = a.shape, b.shape

    def back(g):
        return _unbroadcast_rows(g, sa), _unbroadcast_rows(g, sb)

    return Node(a.value + b.value, "add", (a, b), back)


def mul(a: Node, b: Node) -> Node:
    if a.shape != b.shape:
        raise ShapeError(f"mul {a.shape} * {b.shape}")
    av, bv = a.value, b.value

    def back(g):
        return g * bv, g * av

    return Node(av * bv, "mul", (a, b), back)


def relu(a: Node) -> Node:
    # Subgradient at exactly 0 is taken as 0.
    mask = a.value > 0

    def back(g):
        return (g * mask,)

    return Node(a.value * mask, "relu", (a,), back)


def leaky_relu(a: Node, slope: float = 0.2) -> Node:
    deriv = np.where(a.value > 0, 1.0, slope)

    def back(g):
        return (g * deriv,)

    return Node(a.value * deriv, "leaky-relu", (a,), back, {"slope": slope})


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)

    def back(g):
        return (g * (1.0 - out * out),)

    return Node(out, "tanh", (a,), back)


def softmax(a: Node) -> Node:
    """Row-wise softmax (max-subtracted)."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return Node(out, "softmax", (a,), back)


def mean(a: Node) -> Node:
    n = a.value.size
    shape = a.shape

    def back(g):
        return (np.full(shape, g.item() / n),)

    return Node(a.value.mean(), "mean", (a,), back)


def sum(a: Node, axis: int | None = None) -> Node:  # noqa: A001 - mirrors numpy
    """Sum over everything (scalar result) or over ``axis=1`` ([n x 1] result)."""
    shape = a.shape
    if axis is None:
        def back(g):
            return (np.full(shape, g.item()),)

        return Node(a.value.sum(), "sum", (a,), back, {"axis": None})
    if axis != 1:
        raise ShapeError("sum supports axis=None or axis=1 only")

    def back_rows(g):
        return (np.broadcast_to(g, shape).copy(),)

    return Node(a.value.sum(axis=1, keepdims=True), "sum", (a,), back_rows, {"axis": 1})


def hinge(a: Node) -> Node:
    """Elementwise ``max(0, 1 - a)``; gradient at the kink is 0."""
    active = (1.0 - a.value) > 0

    def back(g):
        return (-g * active,)

    return Node(np.where(active, 1.0 - a.value, 0.0), "hinge", (a,), back)


def scale(a: Node, c: float) -> Node:
    def back(g):
        return (g * c,)

    return Node(a.value * c, "scale", (a,), back, {"c": c})


def concat(parts: list[Node]) -> Node:
    """Column-wise concatenation of nodes with equal row counts."""
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat row mismatch: {[p.shape for p in parts]}")
    widths = [p.shape[1] for p in parts]
    cuts = np.cumsum(widths)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=1))

    return Node(np.concatenate([p.value for p in parts], axis=1), "concat", tuple(parts), back)


def slice_cols(a: Node, start: int, stop: int) -> Node:
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"slice [{start}:{stop}] of {a.shape}")
    shape = a.shape

    def back(g):
        full = np.zeros(shape)
        full[:, start:stop] = g
        return (full,)

    return Node(a.value[:, start:stop], "slice", (a,), back, {"start": start, "stop": stop})


_FORWARD = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "relu": relu,
    "leaky-relu": leaky_relu,
    "tanh": tanh,
    "softmax": softmax,
    "mean": mean,
    "sum": sum,
    "hinge": hinge,
    "scale": scale,
    "slice": slice_cols,
}


def forward(op: str, *parents: Node, **attrs) -> Node:
    """Apply ``op`` by name.  ``concat`` takes its parts as positional args."""
    if op == "concat":
        return concat(list(parents))
    try:
        fn = _FORWARD[op]
    except KeyError:
        raise ValueError(f"unknown op kind {op!r}") from None
    return fn(*parents, **attrs)


def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    done: set[int] = set()
    on_path: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            on_path.discard(node.id)
            done.add(node.id)
            order.append(node)
            continue
        if node.id in done:
            continue
        if node.id in on_path:
            raise GraphError("cycle detected in computation graph")
        on_path.add(node.id)
        stack.append((node, True))
        for parent in node.parents:
            if parent.id in on_path:
                raise GraphError("cycle detected in computation graph")
            if parent.id not in done:
                stack.append((parent, False))
    return order


def backward(root: Node) -> dict[Node, np.ndarray]:
    """Gradients of scalar ``root`` with respect to every leaf reachable from it."""
    if root.value.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    order = _topo_order(root)
    grads: dict[int, np.ndarray] = {root.id: np.ones_like(root.value)}
    leaves: dict[Node, np.ndarray] = {}
    for node in reversed(order):
        g = grads.pop(node.id, None)
        if g is None:
            continue
        if not node.parents:
            leaves[node] = g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + pg
            else:
                grads[parent.id] = pg
    for node in order:
        if not node.parents and node not in leaves:
            leaves[node] = np.zeros_like(node.value)
    for g in leaves.values():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")
    return leaves


def grad_of(
    loss_fn: Callable[[Mapping[str, Node]], Node], params: Mapping[str, np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate ``loss_fn`` on leaf-wrapped ``params``; return (loss, grads by name)."""
    nodes = {name: leaf(value) for name, value in params.items()}
    root = loss_fn(nodes)
    g = backward(root)
    return root.item(), {
        name: g.get(node, np.zeros_like(node.value)).reshape(np.shape(params[name]))
        for name, node in nodes.items()
    }


def finite_diff_check(
    loss_fn: Callable[[Mapping[str, Node]], Node],
    params: Mapping[str, np.ndarray],
    step: float = 1e-5,
) -> float:
    """Max relative error between autodiff and central finite differences.

    Relative error per entry is ``|analytic - numeric| / (|numeric| + 1e-8)``.
    Raises if two evaluations of ``loss_fn`` at the same point disagree.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def value_at(p):
        return loss_fn({k: leaf(v) for k, v in p.items()}).item()

    if value_at(base) != value_at(base):
        raise ValueError("loss function is not deterministic")
    _, analytic = grad_of(loss_fn, base)
    worst = 0.0
    for name, arr in base.items():
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = value_at(base)
            flat[i] = orig - step
            down = value_at(base)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            a = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / (abs(numeric) + 1e-8))
    return worst
