from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from magig.core.config import config
from magig.core.interpolation import InterpolationMode
from magig.model.attribution_model import Method
from magig.model.autoencoder_model import Autoencoder
from magig.model.classifier_model import Classifier


class PathRequest(BaseModel):
    """Everything needed to build a path; a single step is enough for path diagnostics."""

    x: np.ndarray
    baseline: Optional[np.ndarray] = None
    classifier: Classifier
    target: int = 0
    method: Method = "magig"
    steps: int = Field(default_factory=lambda: config.steps, ge=1)
    fraction: Optional[float] = Field(None, gt=0, lt=1)
    eta: float = Field(default_factory=lambda: config.eta, gt=0, le=1)
    interpolation: InterpolationMode = "linear"
    autoencoder: Optional[Autoencoder] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def consistent(self) -> "PathRequest":
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.baseline is None:
            self.baseline = np.zeros_like(self.x)
        self.baseline = np.asarray(self.baseline, dtype=np.float64)
        if self.x.shape != self.baseline.shape:
            raise ValueError(f"input shape {self.x.shape} and baseline shape {self.baseline.shape} differ")
        if self.method in ("eig", "magig") and self.autoencoder is None:
            raise ValueError(f"method '{self.method}' needs an autoencoder")
        if self.fraction is None:
            self.fraction = config.magig_fraction if self.method == "magig" else config.gig_fraction
        return self


class AttributionRequest(PathRequest):
    steps: int = Field(default_factory=lambda: config.steps, ge=2)
