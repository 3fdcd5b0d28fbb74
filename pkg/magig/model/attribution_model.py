from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import Field, model_validator

from magig.model.base_model import Base

Method = Literal["gxi", "ig", "gig", "eig", "magig"]


class PathTrace(Base):
    """States of a discrete path from baseline (row 0) to input (row K)."""

    method: str
    states: np.ndarray
    latents: Optional[np.ndarray] = None
    gradients: Optional[np.ndarray] = None
    selections: List[np.ndarray] = Field(default_factory=list)
    target: int = 0

    @model_validator(mode="after")
    def two_dimensional(self) -> "PathTrace":
        if self.states.ndim != 2 or len(self.states) == 0:
            raise ValueError(f"states must be a nonempty (K+1, n) array, got shape {self.states.shape}")
        if self.latents is not None and len(self.latents) != len(self.states):
            raise ValueError("latent and input state counts differ")
        return self

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.states, axis=0)

    @property
    def interior(self) -> np.ndarray:
        return self.states[1:-1]


class AttributionMap(Base):
    values: np.ndarray
    method: str
    completeness_residual: Optional[float] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def finite(self) -> "AttributionMap":
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.method} attribution has non-finite values")
        return self

    @property
    def total(self) -> float:
        return float(np.sum(self.values))
