"""MLP classifiers / autoencoder halves and a few elementary differentiable maps."""
from abc import ABC, abstractmethod
from typing import Dict, Tuple

import numpy as np

from magig.core.autodiff import INPUT, DifferentiableFunction, EvalTape, Node, Tensor, _readonly
from magig.core.exception_error import PreconditionError, ShapeMismatchError
from magig.model.network_model import MlpSpec, TrainConfig


def weight_name(layer: int) -> str:
    return f"layers.{layer}.weight"


def bias_name(layer: int) -> str:
    return f"layers.{layer}.bias"


class Mlp(DifferentiableFunction):
    def __init__(self, spec: MlpSpec, params: Dict[str, np.ndarray]):
        self.spec = spec
        self.input_shape = (spec.widths[0],)
        self.output_shape = (spec.widths[-1],)
        self.version = 0
        self.frozen = False
        self.params = self._validated(params)

    @classmethod
    def initialize(cls, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        # He-style uniform scaling
        params = {}
        for layer, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
            limit = np.sqrt(6.0 / fan_in)
            params[weight_name(layer)] = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            params[bias_name(layer)] = np.zeros(fan_out)
        return cls(spec, params)

    @property
    def layer_count(self) -> int:
        return len(self.spec.widths) - 1

    def _validated(self, params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        checked = {}
        for layer, (fan_in, fan_out) in enumerate(zip(self.spec.widths[:-1], self.spec.widths[1:])):
            for name, shape in ((weight_name(layer), (fan_out, fan_in)), (bias_name(layer), (fan_out,))):
                if name not in params:
                    raise ShapeMismatchError(f"missing parameter '{name}'")
                value = _readonly(params[name])
                if value.shape != shape:
                    raise ShapeMismatchError(f"parameter '{name}' has shape {value.shape}, expected {shape}")
                checked[name] = value
        return checked

    def assign(self, params: Dict[str, np.ndarray]) -> None:
        if self.frozen:
            raise PreconditionError("model is frozen; parameters are immutable after training")
        self.params = self._validated(params)
        self.version += 1

    def freeze(self) -> "Mlp":
        self.frozen = True
        return self

    def _trace(self, tape: EvalTape, x: Node, head: bool) -> Node:
        h = x
        for layer in range(self.layer_count):
            tape.layer = layer
            w = tape.parameter(weight_name(layer), self.params[weight_name(layer)])
            b = tape.parameter(bias_name(layer), self.params[bias_name(layer)])
            h = tape.affine(h, w, b)
            if layer < self.layer_count - 1:
                h = getattr(tape, self.spec.activation)(h)
        if head and self.spec.head == "softmax-k":
            h = tape.softmax(h)
        elif head and self.spec.head == "sigmoid-scalar":
            h = tape.sigmoid(h)
        return h

    def trace(self, tape: EvalTape, x: Node) -> Node:
        return self._trace(tape, x, head=True)

    def forward_logits(self, x) -> Tuple[Tensor, EvalTape]:
        tape = EvalTape(source=self)
        output = self._trace(tape, tape.variable(np.asarray(x, dtype=np.float64), INPUT), head=False)
        tape.seal(output)
        return output.value, tape


class Identity(DifferentiableFunction):
    def __init__(self, dim: int):
        self.input_shape = self.output_shape = (dim,)

    def trace(self, tape: EvalTape, x: Node) -> Node:
        return tape.scale(x, 1.0)


class SumOfSquares(DifferentiableFunction):
    def __init__(self, dim: int):
        self.input_shape, self.output_shape = (dim,), (1,)

    def trace(self, tape: EvalTape, x: Node) -> Node:
        return tape.sum(tape.mul(x, x))


class Constant(DifferentiableFunction):
    def __init__(self, dim: int, value: float = 1.0, outputs: int = 1):
        self.input_shape, self.output_shape = (dim,), (outputs,)
        self.value = value

    def trace(self, tape: EvalTape, x: Node) -> Node:
        zero = tape.constant(np.zeros((self.output_shape[0], self.input_shape[0])))
        return tape.add(tape.matmul(x, zero), tape.constant(np.full(self.output_shape, self.value)))


class LinearMap(DifferentiableFunction):
    """x -> W x + b; with a softmax head it is a linear probe classifier."""

    def __init__(self, weight, bias=None, softmax: bool = False):
        self.weight = _readonly(np.atleast_2d(weight))
        out_dim, in_dim = self.weight.shape
        self.bias = _readonly(np.zeros(out_dim) if bias is None else bias)
        self.softmax = softmax
        self.input_shape, self.output_shape = (in_dim,), (out_dim,)

    def trace(self, tape: EvalTape, x: Node) -> Node:
        h = tape.affine(x, tape.constant(self.weight), tape.constant(self.bias))
        return tape.softmax(h) if self.softmax else h


class Optimizer(ABC):
    def __init__(self, cfg: TrainConfig):
        self.lr = cfg.learning_rate
        self.weight_decay = cfg.weight_decay

    def _decayed(self, name: str, grad: np.ndarray, value: np.ndarray) -> np.ndarray:
        if self.weight_decay and name.endswith(".weight"):
            return grad + self.weight_decay * value
        return grad

    @abstractmethod
    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """Return updated parameters; `params` is not modified."""


class Sgd(Optimizer):
    def step(self, params, grads):
        return {name: value - self.lr * self._decayed(name, grads[name], value) for name, value in params.items()}


class Adam(Optimizer):
    def __init__(self, cfg: TrainConfig, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(cfg)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        updated = {}
        for name, value in params.items():
            grad = self._decayed(name, grads[name], value)
            self.m[name] = self.beta1 * self.m.get(name, 0.0) + (1 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v.get(name, 0.0) + (1 - self.beta2) * grad * grad
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            updated[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def build_optimizer(cfg: TrainConfig) -> Optimizer:
    return Adam(cfg) if cfg.optimizer == "adam" else Sgd(cfg)


def prefixed(params: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    return {f"{prefix}.{name}": value for name, value in params.items()}


def unprefixed(params: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    head = f"{prefix}."
    return {name[len(head):]: value for name, value in params.items() if name.startswith(head)}


def parameters_equal(a: Mlp, b: Mlp) -> bool:
    return a.spec == b.spec and all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
