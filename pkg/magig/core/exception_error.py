import json
import sys
from typing import Any, Optional

from magig.core.logger import logger

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class ToolkitError(Exception):
    exit_code: int = EXIT_RUNTIME

    def __init__(self, detail: Any, metrics: Optional[dict] = None):
        super().__init__(detail)
        self.detail = detail
        self.metrics = metrics or {}


class UsageError(ToolkitError):
    exit_code = EXIT_USAGE


class ShapeMismatchError(ToolkitError):
    pass


class NonFiniteValueError(ToolkitError):
    def __init__(self, detail: Any, layer: int):
        super().__init__(f"{detail} (layer {layer})")
        self.layer = layer


class StaleTapeError(ToolkitError):
    pass


class SelectorError(ToolkitError):
    pass


class PreconditionError(ToolkitError):
    pass


class NotOnManifoldError(PreconditionError):
    pass


class ChartUndefinedError(ToolkitError):
    pass


class DivergenceError(ToolkitError):
    pass


class AccuracyFloorError(ToolkitError):
    pass


class ReconstructionCeilingError(ToolkitError):
    pass


class CheckpointError(ToolkitError):
    pass


class DatasetError(ToolkitError):
    pass


class PathEvaluationError(ToolkitError):
    def __init__(self, detail: Any, step: int):
        super().__init__(f"step {step}: {detail}")
        self.step = step


def cli_exception_handler(exc: BaseException) -> int:
    if isinstance(exc, ToolkitError):
        detail, code = exc.detail, exc.exit_code
    else:
        detail, code = f"{type(exc).__name__}: {exc}", EXIT_RUNTIME
    logger.error(f"{type(exc).__name__}: {detail}")

    # Ensure the detail is JSON serializable
    if not isinstance(detail, (str, dict, list)):
        detail = str(detail)
    payload = {"errors": detail}
    if isinstance(exc, ToolkitError) and exc.metrics:
        payload["metrics"] = exc.metrics
    sys.stderr.write(json.dumps(payload, default=str) + "\n")
    return code
