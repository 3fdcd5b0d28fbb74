from typing import List, Literal, Optional

import numpy as np
from pydantic import Field
from scipy.integrate import trapezoid

from magig.model.base_model import Base

PerturbationMode = Literal["insertion", "deletion"]
ProfileKind = Literal["distance-to-manifold", "target-confidence", "reconstruction-distance"]
BaselineMode = Literal["mean", "zero"]


class PerturbationCurve(Base):
    levels: np.ndarray
    confidences: np.ndarray
    mode: PerturbationMode

    @property
    def auc(self) -> float:
        return float(trapezoid(self.confidences, self.levels))


class DiffIdResult(Base):
    levels: np.ndarray
    psi: np.ndarray
    score: float
    insertion_auc: float
    deletion_auc: float
    absolute_ranking: bool = False


class DeviationProfile(Base):
    alphas: np.ndarray
    values: np.ndarray
    kind: ProfileKind
    auc: float
    interior_auc: float = 0.0
    method: Optional[str] = None


class ProfileSummary(Base):
    alphas: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    kind: ProfileKind
    method: Optional[str] = None
    auc_mean: float
    auc_std: float
    interior_auc_mean: float = 0.0
    interior_auc_std: float = 0.0
    count: int


class SignTestResult(Base):
    wins: int
    losses: int
    ties: int
    p_value: float
    label: str = ""
    per_seed: List["SignTestResult"] = Field(default_factory=list)
