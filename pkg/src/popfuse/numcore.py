"""Dense float64 tensors with reverse-mode automatic differentiation.

Everything trainable in the pipeline is built on :class:`Tensor`: each
operation records its inputs and a closure computing input gradients, and
``backward()`` walks the graph in reverse topological order. Shapes stay
small (hundreds of nodes, thousands of features) so all storage is dense
numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """A hyperparameter is outside its valid range."""


class TrainingError(RuntimeError):
    """Training cannot continue (non-finite gradient or loss)."""


class GradCheckError(RuntimeError):
    """The gradient checker's preconditions are violated."""


class Tensor:
    """A dense float64 array that participates in reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _result(data, parents, backward_fn):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        return out

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        if self.grad is None:
            self.grad = np.ones_like(self.data)
        else:
            self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward_fn(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad = parent.grad + g
        # interior grads are only needed during this sweep
        for node in topo:
            if node._parents:
                node.grad = None

    # -- elementwise arithmetic (broadcasting) -----------------------------

    @staticmethod
    def _wrap(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data + b.data
        return Tensor._result(data, (a, b), lambda g: (
            _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data - b.data
        return Tensor._result(data, (a, b), lambda g: (
            _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))

    def __rsub__(self, other):
        return Tensor._wrap(other) - self

    def __mul__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data * b.data
        return Tensor._result(data, (a, b), lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, Tensor._wrap(other)
        data = a.data / b.data
        return Tensor._result(data, (a, b), lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))

    def __rtruediv__(self, other):
        return Tensor._wrap(other) / self

    def __neg__(self):
        a = self
        return Tensor._result(-a.data, (a,), lambda g: (-g,))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise ParameterError("only scalar exponents are supported")
        a = self
        data = a.data ** p
        return Tensor._result(data, (a,), lambda g: (g * p * a.data ** (p - 1),))

    # -- linear algebra ----------------------------------------------------

    def __matmul__(self, other):
        a, b = self, Tensor._wrap(other)
        if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
            raise DimensionError(
                f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
        data = a.data @ b.data
        return Tensor._result(data, (a, b), lambda g: (
            g @ b.data.T, a.data.T @ g))

    @property
    def T(self):
        a = self
        return Tensor._result(a.data.T, (a,), lambda g: (g.T,))

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self
        data = a.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            return (np.broadcast_to(gg, a.data.shape).copy(),)

        return Tensor._result(data, (a,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities ----------------------------------------

    def exp(self):
        a = self
        data = np.exp(a.data)
        return Tensor._result(data, (a,), lambda g: (g * data,))

    def log(self):
        a = self
        return Tensor._result(np.log(a.data), (a,), lambda g: (g / a.data,))

    def sqrt(self):
        a = self
        data = np.sqrt(a.data)
        return Tensor._result(data, (a,), lambda g: (g * 0.5 / data,))

    def relu(self):
        a = self
        mask = a.data > 0
        return Tensor._result(np.where(mask, a.data, 0.0), (a,),
                              lambda g: (g * mask,))

    def clip_min(self, lo: float):
        """Elementwise max(x, lo); gradient passes only where x > lo."""
        a = self
        mask = a.data > lo
        return Tensor._result(np.maximum(a.data, lo), (a,),
                              lambda g: (g * mask,))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    # -- structural ops ----------------------------------------------------

    def cols(self, start: int, stop: int):
        """Column slice [:, start:stop] of a 2-D tensor."""
        a = self
        if a.data.ndim != 2:
            raise DimensionError("cols() requires a 2-D tensor")
        data = a.data[:, start:stop]

        def bw(g):
            full = np.zeros_like(a.data)
            full[:, start:stop] = g
            return (full,)

        return Tensor._result(data, (a,), bw)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def concat_cols(tensors: list[Tensor]) -> Tensor:
    """Concatenate 2-D tensors along the feature (column) axis."""
    if not tensors:
        raise DimensionError("concat_cols needs at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=1)
    widths = [t.data.shape[1] for t in tensors]
    offsets = np.cumsum([0] + widths)

    def bw(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(tensors)))

    return Tensor._result(data, tuple(tensors), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return a @ b


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for overflow safety.

    The subtracted row max is treated as a constant; softmax is invariant
    to per-row shifts, so the gradient is unaffected.
    """
    m = np.max(x.data, axis=-1, keepdims=True)
    e = (x - Tensor(m)).exp()
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardization followed by a learned affine map."""
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    return xc / (var + eps).sqrt() * gain + bias


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x) with the erf-based standard-normal CDF."""
    a = x
    z = a.data
    phi = 0.5 * (1.0 + erf(z / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    data = z * phi
    return Tensor._result(data, (a,), lambda g: (g * (phi + z * pdf),))


def dropout(x: Tensor, rate: float, training: bool,
            rng: np.random.Generator) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity at eval."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


# -- optimizer -------------------------------------------------------------


@dataclass
class AdamState:
    """Adam moments and hyperparameters for a named parameter set."""

    learning_rate: float = 0.01
    weight_decay: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One Adam update over ``params`` using each tensor's .grad, in place.

    Weight decay is the classic L2 form: added to the raw gradient before
    the moment updates.
    """
    t = state.step_count + 1
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * (g * g)
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        p.data = p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    state.step_count = t


# -- gradient checker ------------------------------------------------------


def grad_check(closure, params: dict[str, Tensor], h: float = 1e-5,
               max_samples_per_param: int = 8, seed: int = 0) -> float:
    """Compare analytic gradients against central finite differences.

    ``closure()`` must return a deterministic scalar-loss Tensor built from
    ``params``. Returns the max relative error over sampled entries.
    """
    l1 = float(closure().data)
    l2 = float(closure().data)
    if l1 != l2:
        raise GradCheckError("closure is not deterministic; disable dropout")

    zero_grads(params)
    closure().backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        idxs = np.arange(n) if n <= max_samples_per_param else rng.choice(
            n, size=max_samples_per_param, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            lp = float(closure().data)
            flat[i] = orig - h
            lm = float(closure().data)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            a = analytic[name].reshape(-1)[i]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst
