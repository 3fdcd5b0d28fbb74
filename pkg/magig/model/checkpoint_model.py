from typing import Any, Dict

import numpy as np
from pydantic import Field

from magig.model.base_model import Base

CHECKPOINT_VERSION = 1


class Checkpoint(Base):
    version: int = CHECKPOINT_VERSION
    metadata: Dict[str, Any] = Field(default_factory=dict)
    tensors: Dict[str, np.ndarray] = Field(default_factory=dict)
