from typing import Any, Dict, List

from pydantic import BaseModel, Field


class RunReport(BaseModel):
    version: str
    seed: int
    config_text: str
    config: Dict[str, Any]
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    aggregates: List[Dict[str, Any]] = Field(default_factory=list)
    ranking: List[Dict[str, Any]] = Field(default_factory=list)
    sweep: List[Dict[str, Any]] = Field(default_factory=list)
    profiles: List[Dict[str, Any]] = Field(default_factory=list)
    sign_tests: List[Dict[str, Any]] = Field(default_factory=list)
    autoencoder: Dict[str, Any] = Field(default_factory=dict)
    failures: List[str] = Field(default_factory=list)
