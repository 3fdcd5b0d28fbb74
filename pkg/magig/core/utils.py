from typing import Final, Literal

import numpy as np
from PIL import Image, ImageDraw

IMAGE_SIZE: Final[int] = 8
ShapeKind = Literal["square", "cross"]


def render_shape(kind: ShapeKind, size: int, left: int, top: int, intensity: float = 1.0) -> np.ndarray:
    """Draw a hollow square or a plus-shaped cross on an 8x8 canvas, values in [0, 1]."""
    canvas = Image.new("L", (IMAGE_SIZE, IMAGE_SIZE), 0)
    draw = ImageDraw.Draw(canvas)
    level = int(round(255 * intensity))
    right, bottom = left + size - 1, top + size - 1
    if kind == "square":
        draw.rectangle([left, top, right, bottom], outline=level, width=1)
    else:
        middle_x, middle_y = left + size // 2, top + size // 2
        draw.line([left, middle_y, right, middle_y], fill=level, width=1)
        draw.line([middle_x, top, middle_x, bottom], fill=level, width=1)
    return np.asarray(canvas, dtype=np.float64).ravel() / 255.0


def attribution_order(attribution, absolute: bool = False) -> np.ndarray:
    """Coordinates from most to least salient; ties keep index order."""
    scores = np.abs(attribution) if absolute else np.asarray(attribution, dtype=np.float64)
    return np.argsort(-scores.ravel(), kind="stable")


def fraction_count(fraction: float, total: int) -> int:
    # guards fractions like 0.3 * 10 landing a hair above an integer
    return int(min(total, max(0, np.ceil(fraction * total - 1e-9))))


def nearest_rank_threshold(magnitudes: np.ndarray, fraction: float) -> float:
    rank = max(1, fraction_count(fraction, magnitudes.size))
    return float(np.sort(magnitudes, kind="stable")[rank - 1])
