import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from magig.core.autodiff import jacobian
from magig.core.config import config
from magig.core.exception_error import NotOnManifoldError, PreconditionError
from magig.core.logger import logger
from magig.core.manifold import AnalyticManifold
from magig.model.attribution_model import PathTrace
from magig.model.autoencoder_model import Autoencoder
from magig.model.manifold_model import (
    DecompositionResult,
    DriftReport,
    PerpendicularSweepRow,
    Prop1Result,
    ReachCheck,
)

# numerical floor for "strictly off the manifold"
LEAVES_FLOOR = 1e-12
# the circle and sphere meet the reach bound with equality
REACH_TOL = 1e-12


def _require_on_manifold(m: AnalyticManifold, x: np.ndarray) -> None:
    distance = m.distance(x)
    if not distance < config.on_manifold_tol:
        raise NotOnManifoldError(f"point is {distance:.3e} from the {m.kind}, tolerance {config.on_manifold_tol}")


def _perpendicular(m: AnalyticManifold, x: np.ndarray, dx: np.ndarray) -> np.ndarray:
    basis = m.tangent_basis(x)
    return dx - basis @ (basis.T @ dx)


class GeometryService:
    def tangent_project(self, m: AnalyticManifold, x, dx) -> DecompositionResult:
        x, dx = np.asarray(x, dtype=np.float64), np.asarray(dx, dtype=np.float64)
        _require_on_manifold(m, x)
        basis = m.tangent_basis(x)
        parallel = basis @ (basis.T @ dx)
        return DecompositionResult(parallel=parallel, perpendicular=dx - parallel)

    def reach_bound_check(self, m: AnalyticManifold, x, y) -> ReachCheck:
        x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
        _require_on_manifold(m, x)
        _require_on_manifold(m, y)
        gap = float(np.linalg.norm(y - x))
        if gap > 0 and not gap < m.reach:
            raise PreconditionError(f"points are {gap:.4f} apart, not within the reach {m.reach}")
        lhs = float(np.linalg.norm(_perpendicular(m, x, y - x)))
        rhs = 0.0 if math.isinf(m.reach) else gap * gap / (2.0 * m.reach)
        slack = rhs - lhs
        return ReachCheck(holds=slack >= -REACH_TOL, lhs=lhs, rhs=rhs, slack=slack)

    def prop1_witness(self, m: AnalyticManifold, x, dx) -> Prop1Result:
        x, dx = np.asarray(x, dtype=np.float64), np.asarray(dx, dtype=np.float64)
        _require_on_manifold(m, x)
        step = float(np.linalg.norm(dx))
        if step > m.reach / 2.0:
            raise PreconditionError(f"step norm {step:.4f} exceeds half the reach ({m.reach / 2.0})")
        perpendicular = float(np.linalg.norm(_perpendicular(m, x, dx)))
        threshold = 0.0 if math.isinf(m.reach) else step * step / m.reach
        distance = m.distance(x + dx)
        if perpendicular > threshold and distance > LEAVES_FLOOR:
            return Prop1Result(verdict="leaves", perpendicular_norm=perpendicular, threshold=threshold, distance=distance)
        if perpendicular > threshold:
            logger.warning(f"dominance hypothesis holds but the step stays within {distance:.3e} of the {m.kind}")
        return Prop1Result(verdict="inconclusive", perpendicular_norm=perpendicular, threshold=threshold, distance=distance)

    def drift_accumulation(self, m: AnalyticManifold, trace: PathTrace) -> DriftReport:
        states = trace.states
        deviations = [m.distance(state) for state in states]
        steps = [
            float(np.linalg.norm(_perpendicular(m, state, delta)))
            for state, delta in zip(states[:-1], trace.deltas)
        ]
        cumulative = np.cumsum([0.0] + steps).tolist()
        allowance = 0.0
        if not math.isinf(m.reach):
            allowance = float(np.sum(np.sum(trace.deltas ** 2, axis=1)) / m.reach)
        slack = deviations[-1] - cumulative[-1]
        holds: Optional[bool] = None
        if deviations[0] < config.on_manifold_tol:
            holds = deviations[-1] <= cumulative[-1] + allowance + REACH_TOL
        return DriftReport(
            deviations=deviations,
            perpendicular_steps=steps,
            cumulative_perpendicular=cumulative,
            curvature_slack=slack,
            second_order_allowance=allowance,
            bound_holds=holds,
        )

    def jacobian_tangent_angles(self, m: AnalyticManifold, ae: Autoencoder, count: int = 50, seed: int = 0) -> np.ndarray:
        """Largest principal angle between Im J_D(z) and the tangent space at D(z), per sampled z."""
        rng = np.random.default_rng(seed)
        angles = []
        for z in m.sample_latent(count, rng):
            x = ae.decode(z)
            angles.append(float(np.max(subspace_angles(jacobian(ae.decoder, z), m.tangent_basis(x)))))
        return np.asarray(angles)

    def jacobian_matches_tangent(self, m: AnalyticManifold, ae: Autoencoder, tol: float = 1e-6, count: int = 50) -> bool:
        return bool(np.all(self.jacobian_tangent_angles(m, ae, count) < tol))

    def perpendicular_ratio_sweep(
        self,
        m: AnalyticManifold,
        ae: Autoencoder,
        z,
        latent_steps: Sequence[float] = (1e-1, 1e-2, 1e-3),
        direction=None,
    ) -> List[PerpendicularSweepRow]:
        logger.info(f"Sweeping latent step sizes {list(latent_steps)} on the {m.kind}")
        z = np.asarray(z, dtype=np.float64)
        direction = np.ones_like(z) if direction is None else np.asarray(direction, dtype=np.float64)
        direction = direction / np.linalg.norm(direction)
        x = ae.decode(z)
        rows = []
        for size in latent_steps:
            dx = ae.decode(z + size * direction) - x
            decomposition = self.tangent_project(m, x, dx)
            verdict = self.prop1_witness(m, x, dx).verdict
            rows.append(PerpendicularSweepRow(
                latent_step=size,
                step_norm=float(np.linalg.norm(dx)),
                perpendicular_norm=decomposition.perpendicular_norm,
                ratio=decomposition.perpendicular_norm / float(np.linalg.norm(dx)),
                verdict=verdict,
            ))
        return rows
