from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from magig.model.base_model import Base

ManifoldKind = Literal["circle", "sphere", "ellipse", "subspace"]


class ManifoldSpec(Base):
    kind: ManifoldKind = "circle"
    ambient_dim: int = Field(2, ge=2, le=64)
    radius: float = Field(1.0, gt=0)
    semi_axes: Tuple[float, float] = (2.0, 1.0)
    intrinsic_dim: int = Field(1, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def consistent(self) -> "ManifoldSpec":
        if self.kind == "sphere" and self.ambient_dim != 3:
            raise ValueError("the sphere lives in R^3")
        if self.kind == "subspace" and self.intrinsic_dim >= self.ambient_dim:
            raise ValueError("subspace dimension must be below the ambient dimension")
        if self.kind == "ellipse" and min(self.semi_axes) <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        return self


class DecompositionResult(Base):
    parallel: np.ndarray
    perpendicular: np.ndarray

    @property
    def parallel_norm(self) -> float:
        return float(np.linalg.norm(self.parallel))

    @property
    def perpendicular_norm(self) -> float:
        return float(np.linalg.norm(self.perpendicular))


class ReachCheck(Base):
    holds: bool
    lhs: float
    rhs: float
    slack: float


class Prop1Result(Base):
    verdict: Literal["leaves", "inconclusive"]
    perpendicular_norm: float
    threshold: float
    distance: Optional[float] = None


class DriftReport(Base):
    deviations: List[float]
    perpendicular_steps: List[float]
    cumulative_perpendicular: List[float]
    curvature_slack: float
    second_order_allowance: float
    bound_holds: Optional[bool] = None


class PerpendicularSweepRow(Base):
    latent_step: float
    step_norm: float
    perpendicular_norm: float
    ratio: float
    verdict: Literal["leaves", "inconclusive"]
