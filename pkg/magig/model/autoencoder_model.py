from typing import Literal, Optional, Tuple

import numpy as np

from magig.core.autodiff import DifferentiableFunction, forward
from magig.core.exception_error import ChartUndefinedError
from magig.core.interpolation import unwrap_periodic
from magig.core.logger import logger
from magig.core.manifold import AnalyticManifold
from magig.model.base_model import Base
from magig.model.network_model import AutoencoderMetrics, MlpSpec

AutoencoderMode = Literal["trained", "exact-chart"]


class Autoencoder(Base):
    """Encoder/decoder pair; in exact-chart mode both halves are the manifold's chart."""

    encoder: DifferentiableFunction
    decoder: DifferentiableFunction
    mode: AutoencoderMode = "trained"
    manifold: Optional[AnalyticManifold] = None
    spec: Optional[MlpSpec] = None
    metrics: Optional[AutoencoderMetrics] = None

    @property
    def latent_dim(self) -> int:
        return self.decoder.input_shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.decoder.output_shape[0]

    @property
    def periodic_dims(self) -> Tuple[int, ...]:
        return self.manifold.periodic_dims if self.manifold is not None else ()

    def encode(self, x, strict: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.manifold is not None and x.ndim == 1:
            if not self.manifold.has_unique_projection(x):
                if strict:
                    raise ChartUndefinedError(f"{self.manifold.kind} chart is undefined at {x.tolist()}: no unique nearest point")
                logger.warning(f"{self.manifold.kind} chart has no unique nearest point at this input, using the principal-branch value")
            elif not self.manifold.is_on_manifold(x):
                logger.warning(f"off-manifold input encoded by chart extension (distance {self.manifold.distance(x):.3e})")
        return forward(self.encoder, x)[0]

    def decode(self, z) -> np.ndarray:
        return forward(self.decoder, z)[0]

    def reconstruct(self, x) -> np.ndarray:
        return self.decode(self.encode(x))

    def encode_endpoints(self, x, baseline) -> Tuple[np.ndarray, np.ndarray]:
        """Latents of input and baseline, with periodic dims of the input on the shorter arc."""
        z_baseline = self.encode(baseline)
        z = unwrap_periodic(self.encode(x), z_baseline, self.periodic_dims)
        return z, z_baseline
