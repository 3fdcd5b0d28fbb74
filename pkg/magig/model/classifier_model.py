from typing import Optional

import numpy as np

from magig.core.autodiff import DifferentiableFunction, ScalarTarget, forward
from magig.model.base_model import Base
from magig.model.network_model import ClassifierMetrics, MlpSpec


class Classifier(Base):
    network: DifferentiableFunction
    spec: Optional[MlpSpec] = None
    metrics: Optional[ClassifierMetrics] = None

    @property
    def num_outputs(self) -> int:
        return self.network.output_shape[0]

    def predict_proba(self, x) -> np.ndarray:
        return forward(self.network, x)[0]

    def predict(self, x) -> np.ndarray:
        probs = self.predict_proba(x)
        if self.num_outputs == 1:
            return (probs[..., 0] >= 0.5).astype(np.int64)
        return np.argmax(probs, axis=-1)

    def target(self, selector: int) -> ScalarTarget:
        return ScalarTarget(self.network, selector)
