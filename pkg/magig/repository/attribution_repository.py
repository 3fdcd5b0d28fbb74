from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from magig.core.exception_error import ToolkitError
from magig.model.attribution_model import AttributionMap
from magig.model.checkpoint_model import Checkpoint
from magig.repository.base_repository import BaseRepository
from magig.repository.checkpoint_repository import CheckpointRepository

ATTRIBUTION_DIR = "attributions"
MANIFEST = "attributions.csv"
CSV_LIMIT = 256


class AttributionRepository(BaseRepository):
    def __init__(self, root) -> None:
        super().__init__(root)
        self.checkpoints = CheckpointRepository(self.root)

    @staticmethod
    def relative_name(label: str, sample_id: int) -> str:
        return f"{ATTRIBUTION_DIR}/{label}/{sample_id:05d}.ckpt"

    def save(self, attribution: AttributionMap, label: str, sample_id: int) -> Path:
        name = self.relative_name(label, sample_id)
        metadata = {"method": attribution.method, "label": label, "sample_id": sample_id, **attribution.metadata}
        if attribution.completeness_residual is not None:
            metadata["completeness_residual"] = attribution.completeness_residual
        path = self.checkpoints.save(Checkpoint(metadata=metadata, tensors={"attribution": attribution.values}), name)
        if attribution.values.size <= CSV_LIMIT:
            frame = pd.DataFrame({"index": np.arange(attribution.values.size), "value": attribution.values.ravel()})
            self.write_csv(name.replace(".ckpt", ".csv"), frame)
        return path

    def load(self, name: str) -> AttributionMap:
        checkpoint = self.checkpoints.load(name)
        if "attribution" not in checkpoint.tensors:
            raise ToolkitError(f"{name} holds no 'attribution' tensor")
        metadata = dict(checkpoint.metadata)
        return AttributionMap(
            values=checkpoint.tensors["attribution"],
            method=metadata.pop("method", "unknown"),
            completeness_residual=metadata.pop("completeness_residual", None),
            metadata=metadata,
        )

    def write_manifest(self, rows: List[dict]) -> Path:
        frame = pd.DataFrame(rows, columns=["sample_id", "label", "method", "target", "file", "completeness_residual"])
        return self.write_csv(MANIFEST, frame.sort_values(["sample_id", "label"], kind="stable"))

    def read_manifest(self) -> pd.DataFrame:
        return self.read_csv(MANIFEST, required=["sample_id", "label", "method", "target", "file"])
