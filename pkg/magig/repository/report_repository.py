from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from magig.repository.base_repository import BaseRepository
from magig.schema.report_schema import RunReport

REPORT_JSON = "report.json"
REPORT_JSONL = "report.jsonl"
TIMINGS = "timings.csv"


class ReportRepository(BaseRepository):
    def write_table(self, name: str, frame: pd.DataFrame, sort_by: Optional[list] = None) -> Path:
        if sort_by:
            frame = frame.sort_values(sort_by, kind="stable")
        return self.write_csv(name, frame.reset_index(drop=True))

    def read_table(self, name: str) -> Optional[pd.DataFrame]:
        return self.read_csv(name) if self.exists(name) else None

    def save(self, report: RunReport) -> Dict[str, Path]:
        payload = report.model_dump(mode="json")
        lines = [{"record": "run", "version": report.version, "seed": report.seed, "config": report.config}]
        for section in ("rows", "aggregates", "ranking", "sweep", "profiles", "sign_tests"):
            lines += [{"record": section.rstrip("s"), **row} for row in payload[section]]
        return {"json": self.write_json(REPORT_JSON, payload), "jsonl": self.write_jsonl(REPORT_JSONL, lines)}
