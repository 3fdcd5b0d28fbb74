"""Latent interpolation between two endpoints, linear or along the great circle.

`at(t)` accepts a scalar or a per-coordinate progress vector; with a vector each
coordinate is read off the curve at its own progress, which is how the guided
path advances only the selected latent dimensions.
"""
import math
from typing import Literal, Union

import numpy as np

from magig.core.logger import logger

InterpolationMode = Literal["linear", "slerp"]
ANTIPARALLEL_TOL = 1e-9
PARALLEL_TOL = 1e-7


class LatentInterpolator:
    def __init__(self, start, end, mode: InterpolationMode = "linear"):
        self.start = np.asarray(start, dtype=np.float64)
        self.end = np.asarray(end, dtype=np.float64)
        self.requested = mode
        self.mode = mode
        self.omega = 0.0
        if mode == "slerp":
            self._prepare_slerp()

    def _prepare_slerp(self) -> None:
        norm_start, norm_end = np.linalg.norm(self.start), np.linalg.norm(self.end)
        if norm_start == 0.0 or norm_end == 0.0:
            logger.warning("slerp undefined for a zero latent endpoint, using linear interpolation")
            self.mode = "linear"
            return
        cosine = float(np.clip(np.dot(self.start / norm_start, self.end / norm_end), -1.0, 1.0))
        omega = math.acos(cosine)
        if math.pi - omega < ANTIPARALLEL_TOL:
            logger.warning(f"slerp undefined for antiparallel latents (angle {omega:.12f}), using linear interpolation")
            self.mode = "linear"
        elif omega < PARALLEL_TOL:
            self.mode = "linear"
        else:
            self.omega = omega

    @property
    def fell_back(self) -> bool:
        return self.requested != self.mode

    def at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.mode == "linear":
            return (1.0 - t) * self.start + t * self.end
        sin_omega = math.sin(self.omega)
        return (np.sin((1.0 - t) * self.omega) / sin_omega) * self.start + (np.sin(t * self.omega) / sin_omega) * self.end


def unwrap_periodic(z, reference, periodic_dims, period: float = 2.0 * math.pi) -> np.ndarray:
    """Shift periodic coordinates of `z` by whole periods onto the shorter arc from `reference`."""
    z = np.array(z, dtype=np.float64)
    for dim in periodic_dims:
        z[..., dim] = reference[..., dim] + np.remainder(z[..., dim] - reference[..., dim] + period / 2, period) - period / 2
    return z
