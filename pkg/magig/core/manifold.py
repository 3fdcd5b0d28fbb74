"""Analytic manifolds with exact charts, tangent frames, reach and distance.

Every manifold is embedded isometrically into R^n through a fixed orthonormal
frame drawn from a seeded generator, so the same ManifoldSpec always yields the same
embedding.
"""
import math
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from magig.core.autodiff import DifferentiableFunction, EvalTape, Node
from magig.core.config import config
from magig.model.manifold_model import ManifoldSpec

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
UNIQUE_PROJECTION_TOL = 1e-12


def orthonormal_frame(ambient_dim: int, columns: int, seed: int) -> np.ndarray:
    if ambient_dim == columns:
        return np.eye(ambient_dim)
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((ambient_dim, columns)))
    return q * np.sign(np.diag(r))


class AnalyticManifold(ABC):
    kind: str
    ambient_dim: int
    intrinsic_dim: int
    reach: float
    periodic_dims: Tuple[int, ...] = ()

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec

    @abstractmethod
    def chart(self, z) -> np.ndarray:
        ...

    @abstractmethod
    def chart_jacobian(self, z) -> np.ndarray:
        ...

    @abstractmethod
    def inverse_chart(self, x) -> np.ndarray:
        """Principal-branch chart value; off the manifold it is the chart extension."""

    @abstractmethod
    def trace_chart(self, tape: EvalTape, z: Node) -> Node:
        ...

    @abstractmethod
    def trace_inverse_chart(self, tape: EvalTape, x: Node) -> Node:
        ...

    @abstractmethod
    def distance(self, x) -> float:
        ...

    @abstractmethod
    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        ...

    @abstractmethod
    def has_unique_projection(self, x) -> bool:
        ...

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.chart(self.sample_latent(count, rng))

    def project(self, x) -> np.ndarray:
        return self.chart(self.inverse_chart(x))

    def tangent_basis(self, x) -> np.ndarray:
        q, _ = np.linalg.qr(self.chart_jacobian(self.inverse_chart(x)))
        return q

    def is_on_manifold(self, x, tol: Optional[float] = None) -> bool:
        return self.distance(x) < (config.on_manifold_tol if tol is None else tol)

    def describe(self) -> dict:
        return self.spec.model_dump(mode="json")


class EmbeddedCircle(AnalyticManifold):
    kind = "circle"
    intrinsic_dim = 1
    periodic_dims = (0,)

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.ambient_dim = spec.ambient_dim
        self.radius = spec.radius
        self.reach = spec.radius
        self.frame = orthonormal_frame(spec.ambient_dim, 2, spec.seed)

    def _plane(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.frame

    def chart(self, z) -> np.ndarray:
        theta = np.asarray(z, dtype=np.float64)[..., 0]
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1) @ self.frame.T

    def chart_jacobian(self, z) -> np.ndarray:
        theta = float(np.asarray(z)[0])
        return (self.radius * (-math.sin(theta) * self.frame[:, 0] + math.cos(theta) * self.frame[:, 1]))[:, None]

    def inverse_chart(self, x) -> np.ndarray:
        u = self._plane(x)
        return np.arctan2(u[..., 1], u[..., 0])[..., None]

    def trace_chart(self, tape: EvalTape, z: Node) -> Node:
        unit = tape.concat([tape.cos(z), tape.sin(z)])
        return tape.matmul(unit, tape.constant(self.radius * self.frame))

    def trace_inverse_chart(self, tape: EvalTape, x: Node) -> Node:
        u = tape.matmul(x, tape.constant(self.frame.T))
        return tape.atan2(tape.take(u, [1]), tape.take(u, [0]))

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        u = self._plane(x)
        off_plane = x - u @ self.frame.T
        return float(math.hypot(np.linalg.norm(off_plane), np.linalg.norm(u) - self.radius))

    def has_unique_projection(self, x) -> bool:
        return bool(np.linalg.norm(self._plane(x)) > UNIQUE_PROJECTION_TOL)

    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-math.pi, math.pi, size=(count, 1))


class Sphere(AnalyticManifold):
    """Radius-r sphere in R^3, chart (polar angle, azimuth)."""

    kind = "sphere"
    intrinsic_dim = 2
    ambient_dim = 3
    periodic_dims = (1,)

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.radius = spec.radius
        self.reach = spec.radius

    def chart(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        theta, phi = z[..., 0], z[..., 1]
        return self.radius * np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
        )

    def chart_jacobian(self, z) -> np.ndarray:
        theta, phi = float(z[0]), float(z[1])
        return self.radius * np.array([
            [math.cos(theta) * math.cos(phi), -math.sin(theta) * math.sin(phi)],
            [math.cos(theta) * math.sin(phi), math.sin(theta) * math.cos(phi)],
            [-math.sin(theta), 0.0],
        ])

    def inverse_chart(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        rho = np.hypot(x[..., 0], x[..., 1])
        return np.stack([np.arctan2(rho, x[..., 2]), np.arctan2(x[..., 1], x[..., 0])], axis=-1)

    def trace_chart(self, tape: EvalTape, z: Node) -> Node:
        theta, phi = tape.take(z, [0]), tape.take(z, [1])
        sin_theta = tape.sin(theta)
        unit = tape.concat([
            tape.mul(sin_theta, tape.cos(phi)),
            tape.mul(sin_theta, tape.sin(phi)),
            tape.cos(theta),
        ])
        return tape.scale(unit, self.radius)

    def trace_inverse_chart(self, tape: EvalTape, x: Node) -> Node:
        x1, x2, x3 = tape.take(x, [0]), tape.take(x, [1]), tape.take(x, [2])
        rho = tape.sqrt(tape.add(tape.mul(x1, x1), tape.mul(x2, x2)))
        return tape.concat([tape.atan2(rho, x3), tape.atan2(x2, x1)])

    def tangent_basis(self, x) -> np.ndarray:
        # the polar chart degenerates at the poles, the normal projector does not
        normal = np.asarray(x, dtype=np.float64) / np.linalg.norm(x)
        u, _, _ = np.linalg.svd(np.eye(3) - np.outer(normal, normal))
        return u[:, :2]

    def distance(self, x) -> float:
        return float(abs(np.linalg.norm(x) - self.radius))

    def has_unique_projection(self, x) -> bool:
        return bool(np.linalg.norm(x) > UNIQUE_PROJECTION_TOL)

    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        points = rng.standard_normal((count, 3))
        return self.inverse_chart(points / np.linalg.norm(points, axis=1, keepdims=True))


class Ellipse(AnalyticManifold):
    """Closed curve of non-constant curvature: (a cos t, b sin t) in a seeded plane.

    Distance has no closed form; it is found by dense chart sampling, a
    golden-section bracket refinement and a final Newton polish.
    """

    kind = "ellipse"
    intrinsic_dim = 1
    periodic_dims = (0,)

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.ambient_dim = spec.ambient_dim
        self.a, self.b = spec.semi_axes
        self.frame = orthonormal_frame(spec.ambient_dim, 2, spec.seed)
        self.grid = np.linspace(-math.pi, math.pi, config.distance_grid, endpoint=False)
        self.grid_points = self.chart(self.grid[:, None])
        self.reach = self._curvature_reach()

    def _curvature_reach(self) -> float:
        s, c = np.sin(self.grid), np.cos(self.grid)
        curvature = self.a * self.b / (self.a ** 2 * s ** 2 + self.b ** 2 * c ** 2) ** 1.5
        return float(1.0 / curvature.max())

    def _curve(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        f0, f1 = self.frame[:, 0], self.frame[:, 1]
        point = self.a * math.cos(t) * f0 + self.b * math.sin(t) * f1
        velocity = -self.a * math.sin(t) * f0 + self.b * math.cos(t) * f1
        return point, velocity, -point

    def chart(self, z) -> np.ndarray:
        t = np.asarray(z, dtype=np.float64)[..., 0]
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1) @ self.frame.T

    def chart_jacobian(self, z) -> np.ndarray:
        return self._curve(float(np.asarray(z)[0]))[1][:, None]

    def inverse_chart(self, x) -> np.ndarray:
        u = np.asarray(x, dtype=np.float64) @ self.frame
        return np.arctan2(u[..., 1] / self.b, u[..., 0] / self.a)[..., None]

    def trace_chart(self, tape: EvalTape, z: Node) -> Node:
        unit = tape.concat([tape.cos(z), tape.sin(z)])
        axes = self.frame * np.array([self.a, self.b])
        return tape.matmul(unit, tape.constant(axes))

    def trace_inverse_chart(self, tape: EvalTape, x: Node) -> Node:
        u = tape.matmul(x, tape.constant(self.frame.T))
        return tape.atan2(tape.scale(tape.take(u, [1]), 1.0 / self.b), tape.scale(tape.take(u, [0]), 1.0 / self.a))

    def nearest_parameter(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        squared = np.sum((self.grid_points - x) ** 2, axis=1)
        spacing = self.grid[1] - self.grid[0]
        centre = float(self.grid[int(np.argmin(squared))])

        def objective(t: float) -> float:
            return float(np.sum((self._curve(t)[0] - x) ** 2))

        lo, hi = centre - spacing, centre + spacing
        inner_lo, inner_hi = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
        f_lo, f_hi = objective(inner_lo), objective(inner_hi)
        for _ in range(config.golden_steps):
            if f_lo < f_hi:
                hi, inner_hi, f_hi = inner_hi, inner_lo, f_lo
                inner_lo = hi - GOLDEN * (hi - lo)
                f_lo = objective(inner_lo)
            else:
                lo, inner_lo, f_lo = inner_lo, inner_hi, f_hi
                inner_hi = lo + GOLDEN * (hi - lo)
                f_hi = objective(inner_hi)
        t = 0.5 * (lo + hi)

        # Newton on the stationarity condition <c(t) - x, c'(t)> = 0
        for _ in range(8):
            point, velocity, acceleration = self._curve(t)
            residual = point - x
            slope = float(velocity @ velocity + residual @ acceleration)
            if slope <= 0:
                break
            step = float(residual @ velocity) / slope
            if abs(step) > spacing:
                break
            t -= step
            if abs(step) < 1e-16:
                break
        return t

    def project(self, x) -> np.ndarray:
        return self._curve(self.nearest_parameter(x))[0]

    def tangent_basis(self, x) -> np.ndarray:
        velocity = self._curve(self.nearest_parameter(x))[1]
        return (velocity / np.linalg.norm(velocity))[:, None]

    def distance(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - self.project(x)))

    def has_unique_projection(self, x) -> bool:
        return bool(np.linalg.norm(np.asarray(x) @ self.frame) > UNIQUE_PROJECTION_TOL)

    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-math.pi, math.pi, size=(count, 1))


class LinearSubspace(AnalyticManifold):
    kind = "subspace"
    reach = math.inf

    def __init__(self, spec: ManifoldSpec):
        super().__init__(spec)
        self.ambient_dim = spec.ambient_dim
        self.intrinsic_dim = spec.intrinsic_dim
        self.basis = orthonormal_frame(spec.ambient_dim, spec.intrinsic_dim, spec.seed)

    def chart(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.basis.T

    def chart_jacobian(self, z) -> np.ndarray:
        return self.basis.copy()

    def inverse_chart(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.basis

    def trace_chart(self, tape: EvalTape, z: Node) -> Node:
        return tape.matmul(z, tape.constant(self.basis))

    def trace_inverse_chart(self, tape: EvalTape, x: Node) -> Node:
        return tape.matmul(x, tape.constant(self.basis.T))

    def tangent_basis(self, x) -> np.ndarray:
        return self.basis.copy()

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(np.linalg.norm(x - self.project(x)))

    def has_unique_projection(self, x) -> bool:
        return True

    def sample_latent(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((count, self.intrinsic_dim))


MANIFOLDS = {
    "circle": EmbeddedCircle,
    "sphere": Sphere,
    "ellipse": Ellipse,
    "subspace": LinearSubspace,
}


def build_manifold(spec: ManifoldSpec) -> AnalyticManifold:
    return MANIFOLDS[spec.kind](spec)


class ChartDecoder(DifferentiableFunction):
    def __init__(self, manifold: AnalyticManifold):
        self.manifold = manifold
        self.input_shape = (manifold.intrinsic_dim,)
        self.output_shape = (manifold.ambient_dim,)

    def trace(self, tape: EvalTape, z: Node) -> Node:
        return self.manifold.trace_chart(tape, z)


class ChartEncoder(DifferentiableFunction):
    def __init__(self, manifold: AnalyticManifold):
        self.manifold = manifold
        self.input_shape = (manifold.ambient_dim,)
        self.output_shape = (manifold.intrinsic_dim,)

    def trace(self, tape: EvalTape, x: Node) -> Node:
        return self.manifold.trace_inverse_chart(tape, x)
