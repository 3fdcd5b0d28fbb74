from typing import Generic, List, Optional, TypeVar

from pydantic import BaseModel, Field

T = TypeVar("T")


class CommandResponse(BaseModel, Generic[T]):
    data: T
    outputs: List[str] = Field(default_factory=list)
    failures: List[str] = Field(default_factory=list)
    errors: Optional[str] = None

    @property
    def complete(self) -> bool:
        return not self.failures and self.errors is None
