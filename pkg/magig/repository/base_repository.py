import json
from pathlib import Path
from typing import Any, List, Optional

import pandas as pd

from magig.core.exception_error import ToolkitError

FLOAT_FORMAT = "%.17g"


class BaseRepository:
    def __init__(self, root) -> None:
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def _writable(self, name: str) -> Path:
        target = self.path(name)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise ToolkitError(f"cannot create {target.parent}: {err}")
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        target = self._writable(name)
        target.write_text(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n", encoding="utf-8")
        return target

    def read_json(self, name: str) -> Any:
        try:
            return json.loads(self.path(name).read_text(encoding="utf-8"))
        except (OSError, ValueError) as err:
            raise ToolkitError(f"cannot read {self.path(name)}: {err}")

    def write_jsonl(self, name: str, rows: List[dict]) -> Path:
        target = self._writable(name)
        with target.open("w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True, default=str) + "\n")
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self._writable(name)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return target

    def read_csv(self, name: str, required: Optional[List[str]] = None) -> pd.DataFrame:
        try:
            frame = pd.read_csv(self.path(name), float_precision="round_trip")
        except (OSError, ValueError) as err:
            raise ToolkitError(f"cannot read {self.path(name)}: {err}")
        missing = [column for column in required or [] if column not in frame.columns]
        if missing:
            raise ToolkitError(f"{self.path(name)} lacks columns {missing}")
        return frame
