from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd

from magig.core.exception_error import DatasetError, ToolkitError
from magig.core.logger import logger
from magig.model.dataset_model import Dataset, DatasetSpec
from magig.repository.base_repository import BaseRepository

DATASET_CSV = "dataset.csv"
DATASET_MANIFEST = "dataset.json"
LABEL = "label"


def feature_columns(dim: int):
    return [f"x{i}" for i in range(dim)]


class DatasetRepository(BaseRepository):
    def save(self, dataset: Dataset) -> Tuple[Path, Path]:
        if len(dataset) == 0:
            raise DatasetError("refusing to write an empty dataset")
        frame = pd.DataFrame(dataset.features, columns=feature_columns(dataset.features.shape[1]))
        frame[LABEL] = dataset.labels
        csv_path = self.write_csv(DATASET_CSV, frame)
        manifest = {
            "spec": dataset.spec.model_dump(mode="json"),
            "seed": dataset.spec.seed,
            "samples": len(dataset),
            "label_counts": np.bincount(dataset.labels, minlength=dataset.spec.classes).tolist(),
        }
        manifest_path = self.write_json(DATASET_MANIFEST, manifest)
        logger.info(f"Dataset written to {csv_path}")
        return csv_path, manifest_path

    def load(self) -> Dataset:
        try:
            manifest = self.read_json(DATASET_MANIFEST)
            spec = DatasetSpec(**manifest["spec"])
            frame = self.read_csv(DATASET_CSV, required=[LABEL])
        except (ToolkitError, KeyError, ValueError) as err:
            raise DatasetError(f"cannot load dataset from {self.root}: {err}")
        features = frame.drop(columns=[LABEL]).to_numpy(dtype=np.float64)
        return Dataset(spec=spec, features=features, labels=frame[LABEL].to_numpy(dtype=np.int64))
