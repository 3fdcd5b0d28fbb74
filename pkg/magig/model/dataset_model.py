from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from magig.model.base_model import Base

DatasetKind = Literal["circle", "sphere", "ellipse", "subspace", "blobs", "shapes"]


class DatasetSpec(Base):
    kind: DatasetKind = "circle"
    ambient_dim: int = Field(16, ge=2)
    samples: int = Field(2000, ge=0)
    noise: float = Field(0.0, ge=0)
    classes: int = Field(2, ge=2)
    seed: int = 0
    radius: float = Field(1.0, gt=0)
    semi_axes: Tuple[float, float] = (2.0, 1.0)
    intrinsic_dim: int = Field(1, ge=1)
    separation: float = Field(4.0, gt=0)

    @model_validator(mode="after")
    def shapes_are_square_images(self) -> "DatasetSpec":
        if self.kind == "shapes" and self.ambient_dim != 64:
            raise ValueError("shapes images are 8x8, ambient_dim must be 64")
        if self.kind == "sphere" and self.ambient_dim != 3:
            raise ValueError("the sphere lives in R^3")
        return self


class Dataset(Base):
    spec: DatasetSpec
    features: np.ndarray
    labels: np.ndarray
    latents: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.features)

    @property
    def mean(self) -> np.ndarray:
        return self.features.mean(axis=0)
