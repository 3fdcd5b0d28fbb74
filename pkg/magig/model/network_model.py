from typing import List, Literal, Optional

from pydantic import Field, field_validator

from magig.model.base_model import Base

Activation = Literal["relu", "tanh", "sigmoid"]
Head = Literal["softmax-k", "sigmoid-scalar", "linear"]


class MlpSpec(Base):
    widths: List[int]
    activation: Activation = "tanh"
    head: Head = "softmax-k"

    @field_validator("widths")
    @classmethod
    def positive_widths(cls, widths: List[int]) -> List[int]:
        if len(widths) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if any(width <= 0 for width in widths):
            raise ValueError(f"widths must be positive, got {widths}")
        return widths

    @property
    def hidden_layers(self) -> int:
        return len(self.widths) - 2

    def mirrored(self) -> "MlpSpec":
        return MlpSpec(widths=list(reversed(self.widths)), activation=self.activation, head="linear")


class TrainConfig(Base):
    learning_rate: float = Field(1e-2, gt=0)
    batch_size: int = Field(32, gt=0)
    epochs: int = Field(100, ge=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    weight_decay: float = Field(0.0, ge=0)
    seed: int
    holdout_fraction: float = Field(0.2, gt=0, lt=1)
    accuracy_floor: Optional[float] = None
    mse_ceiling: Optional[float] = None
    latent_noise: float = Field(0.0, ge=0)
    pca_warm_start: bool = False


class ClassifierMetrics(Base):
    seed: int
    epochs: int
    loss_history: List[float]
    train_accuracy: float
    heldout_accuracy: float
    accuracy_floor: float


class AutoencoderMetrics(Base):
    seed: int
    epochs: int
    loss_history: List[float]
    heldout_mse: float
    mse_ceiling: float
    closed_form: bool = False
    train_mse: Optional[float] = None
    warm_started: bool = False
