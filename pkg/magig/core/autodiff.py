"""Dense float64 tensors with a per-evaluation reverse-mode tape.

A differentiable function records its primitives on an `EvalTape` while it is
evaluated once. The tape is sealed when the forward pass returns and can then be
replayed backward for any number of cotangents, as long as the function's
parameters have not changed since (see `StaleTapeError`).
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit
from scipy.special import softmax as _softmax

from magig.core.exception_error import (
    NonFiniteValueError,
    PreconditionError,
    SelectorError,
    ShapeMismatchError,
    StaleTapeError,
)

Tensor = np.ndarray
INPUT = "input"

VjpFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _readonly(values) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.flags.writeable:
        array = array.copy()
        array.setflags(write=False)
    return array


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


@dataclass(frozen=True)
class Node:
    index: int
    value: np.ndarray

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape


@dataclass(frozen=True)
class TapeEntry:
    op: str
    output: int
    parents: Tuple[int, ...]
    vjp: VjpFn
    layer: int


class EvalTape:
    """Ordered record of the primitives applied during one forward evaluation."""

    def __init__(self, source: Optional["DifferentiableFunction"] = None):
        self.source = source
        self.source_version = getattr(source, "version", 0)
        self.layer = 0
        self.sealed = False
        self.output: Optional[Node] = None
        self._values: List[np.ndarray] = []
        self._entries: List[TapeEntry] = []
        self._leaves: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def ops(self) -> List[str]:
        return [entry.op for entry in self._entries]

    def _new_node(self, value: np.ndarray) -> Node:
        if self.sealed:
            raise StaleTapeError("tape is sealed; record a new forward evaluation")
        self._values.append(value)
        return Node(len(self._values) - 1, value)

    def variable(self, value, name: str = INPUT) -> Node:
        if name in self._leaves:
            raise ShapeMismatchError(f"leaf '{name}' recorded twice")
        node = self._new_node(_readonly(value))
        self._leaves[name] = node.index
        return node

    def parameter(self, name: str, value) -> Node:
        return self.variable(value, name)

    def constant(self, value) -> Node:
        return self._new_node(_readonly(value))

    def _record(self, op: str, value: np.ndarray, parents: Sequence[Node], vjp: VjpFn) -> Node:
        if not np.all(np.isfinite(value)):
            raise NonFiniteValueError(f"non-finite value produced by {op}", layer=self.layer)
        value.setflags(write=False)
        node = self._new_node(value)
        self._entries.append(TapeEntry(op, node.index, tuple(p.index for p in parents), vjp, self.layer))
        return node

    def seal(self, output: Node) -> None:
        self.output = output
        self.sealed = True

    def check_fresh(self) -> None:
        if not self.sealed:
            raise StaleTapeError("tape is still recording; finish the forward pass first")
        if self.source is not None and getattr(self.source, "version", 0) != self.source_version:
            raise StaleTapeError(
                f"tape recorded at parameter version {self.source_version}, "
                f"function is now at version {self.source.version}"
            )

    # Dense affine maps. Weights are (out, in) and act on the last axis.

    def affine(self, x: Node, w: Node, b: Node) -> Node:
        xv, wv = x.value, w.value

        def vjp(g):
            g2 = g.reshape(-1, g.shape[-1])
            return g @ wv, g2.T @ xv.reshape(-1, xv.shape[-1]), g2.sum(axis=0)

        return self._record("affine", xv @ wv.T + b.value, (x, w, b), vjp)

    def matmul(self, x: Node, w: Node) -> Node:
        xv, wv = x.value, w.value

        def vjp(g):
            return g @ wv, g.reshape(-1, g.shape[-1]).T @ xv.reshape(-1, xv.shape[-1])

        return self._record("matmul", xv @ wv.T, (x, w), vjp)

    # Elementwise arithmetic with numpy broadcasting.

    def add(self, a: Node, b: Node) -> Node:
        sa, sb = a.shape, b.shape
        return self._record("add", a.value + b.value, (a, b),
                            lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    def sub(self, a: Node, b: Node) -> Node:
        sa, sb = a.shape, b.shape
        return self._record("sub", a.value - b.value, (a, b),
                            lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))

    def mul(self, a: Node, b: Node) -> Node:
        av, bv = a.value, b.value
        return self._record("mul", av * bv, (a, b),
                            lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))

    def div(self, a: Node, b: Node) -> Node:
        av, bv = a.value, b.value
        return self._record("div", av / bv, (a, b),
                            lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * av / (bv * bv), bv.shape)))

    def scale(self, x: Node, factor: float) -> Node:
        return self._record("scale", x.value * factor, (x,), lambda g: (g * factor,))

    # Pointwise nonlinearities.

    def relu(self, x: Node) -> Node:
        # subgradient at 0 is 0
        mask = x.value > 0
        return self._record("relu", np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))

    def tanh(self, x: Node) -> Node:
        y = np.tanh(x.value)
        return self._record("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))

    def sigmoid(self, x: Node) -> Node:
        y = expit(x.value)
        return self._record("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))

    def softmax(self, x: Node) -> Node:
        y = _softmax(x.value, axis=-1)
        return self._record("softmax", y, (x,),
                            lambda g: (y * (g - np.sum(g * y, axis=-1, keepdims=True)),))

    def sin(self, x: Node) -> Node:
        xv = x.value
        return self._record("sin", np.sin(xv), (x,), lambda g: (g * np.cos(xv),))

    def cos(self, x: Node) -> Node:
        xv = x.value
        return self._record("cos", np.cos(xv), (x,), lambda g: (-g * np.sin(xv),))

    def sqrt(self, x: Node) -> Node:
        y = np.sqrt(x.value)
        return self._record("sqrt", y, (x,), lambda g: (g / (2.0 * y),))

    def atan2(self, y: Node, x: Node) -> Node:
        yv, xv = y.value, x.value

        def vjp(g):
            r2 = xv * xv + yv * yv
            return _unbroadcast(g * xv / r2, yv.shape), _unbroadcast(-g * yv / r2, xv.shape)

        return self._record("atan2", np.arctan2(yv, xv), (y, x), vjp)

    # Reductions over the last axis keep that axis with size 1.

    def sum(self, x: Node) -> Node:
        shape = x.shape
        return self._record("sum", np.sum(x.value, axis=-1, keepdims=True), (x,),
                            lambda g: (np.broadcast_to(g, shape).copy(),))

    def mean(self, x: Node) -> Node:
        shape, n = x.shape, x.shape[-1]
        return self._record("mean", np.mean(x.value, axis=-1, keepdims=True), (x,),
                            lambda g: (np.broadcast_to(g / n, shape).copy(),))

    # Structural primitives.

    def gather(self, x: Node, index: np.ndarray, op: str = "gather") -> Node:
        index = np.asarray(index, dtype=np.intp)
        shape = x.shape

        def vjp(g):
            grad = np.zeros(shape)
            flat = g.reshape(g.shape[: g.ndim - index.ndim] + (-1,))
            np.add.at(grad.T, index.ravel(), flat.T)
            return (grad,)

        return self._record(op, x.value[..., index], (x,), vjp)

    def take(self, x: Node, indices: Sequence[int]) -> Node:
        return self.gather(x, np.asarray(indices), op="take")

    def concat(self, nodes: Sequence[Node]) -> Node:
        sizes = [node.shape[-1] for node in nodes]
        splits = np.cumsum(sizes)[:-1]
        value = np.concatenate([node.value for node in nodes], axis=-1)
        return self._record("concat", value, tuple(nodes), lambda g: tuple(np.split(g, splits, axis=-1)))

    def reshape(self, x: Node, shape: Tuple[int, ...]) -> Node:
        original = x.shape
        return self._record("reshape", x.value.reshape(shape), (x,), lambda g: (g.reshape(original),))

    def im2col(self, x: Node, image_shape: Tuple[int, int, int], kernel: Tuple[int, int], stride: int = 1) -> Node:
        """Patches of a flattened (C, H, W) image as rows, so convolution is a matmul."""
        return self.gather(x, im2col_index(image_shape, kernel, stride), op="im2col")

    # Backward pass.

    def backward(self, cotangent, output: Optional[Node] = None) -> Dict[str, np.ndarray]:
        self.check_fresh()
        output = output or self.output
        cotangent = np.asarray(cotangent, dtype=np.float64)
        if cotangent.shape != output.shape:
            raise ShapeMismatchError(f"cotangent shape {cotangent.shape} does not match output shape {output.shape}")

        adjoints: List[Optional[np.ndarray]] = [None] * len(self._values)
        adjoints[output.index] = cotangent
        for entry in reversed(self._entries):
            upstream = adjoints[entry.output]
            if upstream is None:
                continue
            for parent, grad in zip(entry.parents, entry.vjp(upstream)):
                if grad is None:
                    continue
                adjoints[parent] = grad if adjoints[parent] is None else adjoints[parent] + grad

        return {
            name: adjoints[index] if adjoints[index] is not None else np.zeros_like(self._values[index])
            for name, index in self._leaves.items()
        }


def im2col_index(image_shape: Tuple[int, int, int], kernel: Tuple[int, int], stride: int = 1) -> np.ndarray:
    channels, height, width = image_shape
    kh, kw = kernel
    out_h = (height - kh) // stride + 1
    out_w = (width - kw) // stride + 1
    c, i, j = np.meshgrid(np.arange(channels), np.arange(kh), np.arange(kw), indexing="ij")
    patch = (c * height * width + i * width + j).ravel()
    rows, cols = np.meshgrid(np.arange(out_h) * stride, np.arange(out_w) * stride, indexing="ij")
    offsets = (rows * width + cols).ravel()
    return offsets[:, None] + patch[None, :]


class DifferentiableFunction(ABC):
    input_shape: Tuple[int, ...]
    output_shape: Tuple[int, ...]
    version: int = 0

    @abstractmethod
    def trace(self, tape: EvalTape, x: Node) -> Node:
        ...

    def __call__(self, x) -> Tensor:
        output, _ = forward(self, x)
        return output


def _check_input_shape(shape: Tuple[int, ...], declared: Tuple[int, ...]) -> None:
    trailing = shape[len(shape) - len(declared):] if len(shape) >= len(declared) else shape
    if tuple(trailing) != tuple(declared) or len(shape) > len(declared) + 1:
        raise ShapeMismatchError(f"input shape {shape} does not match declared shape {declared}")


def forward(fn: DifferentiableFunction, input) -> Tuple[Tensor, EvalTape]:
    x = np.asarray(input, dtype=np.float64)
    _check_input_shape(x.shape, fn.input_shape)
    tape = EvalTape(source=fn)
    output = fn.trace(tape, tape.variable(x, INPUT))
    tape.seal(output)
    return output.value, tape


def grad_input(tape: EvalTape, output_selector: int) -> Tensor:
    tape.check_fresh()
    output = tape.output.value
    if not 0 <= output_selector < output.shape[-1]:
        raise SelectorError(f"selector {output_selector} out of range for output width {output.shape[-1]}")
    cotangent = np.zeros_like(output)
    cotangent[..., output_selector] = 1.0
    return tape.backward(cotangent)[INPUT]


def decoder_vjp(decoder: DifferentiableFunction, z, cotangent) -> Tensor:
    output, tape = forward(decoder, z)
    cotangent = np.asarray(cotangent, dtype=np.float64)
    if cotangent.shape != output.shape:
        raise ShapeMismatchError(f"cotangent shape {cotangent.shape} does not match decoder output {output.shape}")
    return tape.backward(cotangent)[INPUT]


def _scalar(fn: Union[DifferentiableFunction, Callable], x: np.ndarray, selector: int) -> float:
    if isinstance(fn, DifferentiableFunction):
        output, _ = forward(fn, x)
    else:
        output = np.atleast_1d(np.asarray(fn(x), dtype=np.float64))
    return float(output[..., selector])


def finite_diff_gradient(fn, input, step: float = 1e-5, selector: int = 0) -> Tensor:
    if step <= 0:
        raise PreconditionError(f"finite-difference step must be positive, got {step}")
    x = np.array(input, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        plus, minus = x.copy(), x.copy()
        plus.flat[i] += step
        minus.flat[i] -= step
        grad.flat[i] = (_scalar(fn, plus, selector) - _scalar(fn, minus, selector)) / (2.0 * step)
    return grad


def jacobian(fn: DifferentiableFunction, x) -> Tensor:
    """Exact Jacobian (rows = outputs) from one forward pass and one VJP per output."""
    output, tape = forward(fn, x)
    rows = []
    for i in range(output.size):
        cotangent = np.zeros_like(output)
        cotangent.flat[i] = 1.0
        rows.append(tape.backward(cotangent)[INPUT].ravel())
    return np.stack(rows)


def finite_diff_jacobian(fn: DifferentiableFunction, x, step: float = 1e-5) -> Tensor:
    """Column-by-column central differences."""
    if step <= 0:
        raise PreconditionError(f"finite-difference step must be positive, got {step}")
    x = np.array(x, dtype=np.float64)
    columns = []
    for i in range(x.size):
        plus, minus = x.copy(), x.copy()
        plus.flat[i] += step
        minus.flat[i] -= step
        columns.append((fn(plus) - fn(minus)).ravel() / (2.0 * step))
    return np.stack(columns, axis=1)


@dataclass(frozen=True)
class ScalarTarget:
    """One output coordinate of a function, e.g. the target-class probability."""

    fn: DifferentiableFunction
    selector: int = 0

    def value(self, x) -> float:
        output, _ = forward(self.fn, x)
        if not 0 <= self.selector < output.shape[-1]:
            raise SelectorError(f"selector {self.selector} out of range for output width {output.shape[-1]}")
        return float(output[..., self.selector])

    def value_and_grad(self, x) -> Tuple[float, Tensor]:
        output, tape = forward(self.fn, x)
        grad = grad_input(tape, self.selector)
        return float(output[..., self.selector]), grad

    def grad(self, x) -> Tensor:
        return self.value_and_grad(x)[1]


def target_value_and_grad(fn: DifferentiableFunction, x, selector: int = 0) -> Tuple[float, Tensor]:
    return ScalarTarget(fn, selector).value_and_grad(x)
