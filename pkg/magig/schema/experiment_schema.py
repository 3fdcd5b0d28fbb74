"""Experiment configuration read from an INI-style `key = value` file.

Sections: [experiment], [dataset], [classifier], [autoencoder], one
[method:<label>] per attribution method, and [evaluation]. The raw text is kept
so every report can echo the exact file that produced it.
"""
import configparser
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from magig.core.config import config
from magig.core.exception_error import UsageError
from magig.core.interpolation import InterpolationMode
from magig.model.attribution_model import Method
from magig.model.dataset_model import DatasetSpec
from magig.model.metric_model import BaselineMode, ProfileKind
from magig.model.network_model import Activation, Head

METHOD_PREFIX = "method:"


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.replace(";", ",").split(",") if item.strip()]


class ExperimentSection(BaseModel):
    seed: int = 0
    output_dir: str = Field(default_factory=lambda: config.output_dir)
    workers: int = Field(default_factory=lambda: config.workers, ge=1)
    samples: int = Field(100, ge=1)
    baseline: BaselineMode = "zero"
    target: Literal["predicted", "label"] = "predicted"


class ClassifierSection(BaseModel):
    hidden: List[int] = Field(default_factory=lambda: [32])
    activation: Activation = "tanh"
    head: Head = "softmax-k"
    learning_rate: float = Field(1e-2, gt=0)
    batch_size: int = Field(32, gt=0)
    epochs: int = Field(100, ge=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    weight_decay: float = Field(0.0, ge=0)
    holdout_fraction: float = Field(0.2, gt=0, lt=1)
    accuracy_floor: float = Field(default_factory=lambda: config.accuracy_floor, ge=0, le=1)


class AutoencoderSection(BaseModel):
    mode: Literal["trained", "exact-chart"] = "exact-chart"
    latent_dim: int = Field(2, ge=1)
    hidden: List[int] = Field(default_factory=lambda: [32])
    activation: Activation = "tanh"
    learning_rate: float = Field(1e-2, gt=0)
    batch_size: int = Field(32, gt=0)
    epochs: int = Field(200, ge=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    weight_decay: float = Field(0.0, ge=0)
    holdout_fraction: float = Field(0.2, gt=0, lt=1)
    latent_noise: float = Field(0.0, ge=0)
    pca_warm_start: bool = False
    mse_ceiling: float = Field(default_factory=lambda: config.mse_ceiling, gt=0)


class MethodConfig(BaseModel):
    label: str
    method: Method
    steps: int = Field(default_factory=lambda: config.steps, ge=1)
    fraction: Optional[float] = Field(None, gt=0, lt=1)
    eta: float = Field(default_factory=lambda: config.eta, gt=0, le=1)
    interpolation: InterpolationMode = "linear"

    @model_validator(mode="after")
    def default_fraction(self) -> "MethodConfig":
        if self.fraction is None and self.method in ("gig", "magig"):
            self.fraction = config.magig_fraction if self.method == "magig" else config.gig_fraction
        return self

    @property
    def needs_autoencoder(self) -> bool:
        return self.method in ("eig", "magig")


def default_methods() -> List[MethodConfig]:
    return [
        MethodConfig(label="gxi", method="gxi"),
        MethodConfig(label="ig", method="ig"),
        MethodConfig(label="gig", method="gig"),
        MethodConfig(label="eig", method="eig"),
        MethodConfig(label="magig", method="magig"),
    ]


class EvaluationSection(BaseModel):
    levels: int = Field(default_factory=lambda: config.diffid_levels, ge=2)
    imputation: BaselineMode = "mean"
    absolute: bool = False
    fractions: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    sweep_methods: List[str] = Field(default_factory=lambda: ["gig", "magig"])
    profiles: List[ProfileKind] = Field(default_factory=lambda: ["distance-to-manifold", "target-confidence"])

    @field_validator("fractions")
    @classmethod
    def open_unit_interval(cls, fractions: List[float]) -> List[float]:
        if any(not 0 < q < 1 for q in fractions):
            raise ValueError(f"selection fractions must lie in (0, 1), got {fractions}")
        return fractions


class ExperimentConfig(BaseModel):
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    classifier: ClassifierSection = Field(default_factory=ClassifierSection)
    autoencoder: AutoencoderSection = Field(default_factory=AutoencoderSection)
    methods: List[MethodConfig] = Field(default_factory=default_methods)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    source_text: str = ""

    @model_validator(mode="after")
    def unique_labels(self) -> "ExperimentConfig":
        labels = [method.label for method in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"method labels must be unique, got {labels}")
        return self

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise UsageError(f"malformed config: {err}")

        data: Dict[str, Any] = {"source_text": text}
        for section in ("experiment", "dataset", "evaluation"):
            if parser.has_section(section):
                data[section] = dict(parser.items(section))
        for section in ("classifier", "autoencoder"):
            if parser.has_section(section):
                data[section] = dict(parser.items(section))
                if "hidden" in data[section]:
                    data[section]["hidden"] = [int(width) for width in _split(data[section]["hidden"])]
        if "dataset" in data and "semi_axes" in data["dataset"]:
            data["dataset"]["semi_axes"] = tuple(float(axis) for axis in _split(data["dataset"]["semi_axes"]))
        if "evaluation" in data:
            evaluation = data["evaluation"]
            for key in ("fractions", "sweep_methods", "profiles"):
                if key in evaluation:
                    evaluation[key] = _split(evaluation[key])

        method_sections = [name for name in parser.sections() if name.startswith(METHOD_PREFIX)]
        if method_sections:
            data["methods"] = [
                {"label": name[len(METHOD_PREFIX):], **dict(parser.items(name))} for name in method_sections
            ]
        elif parser.has_option("experiment", "methods"):
            data["methods"] = [{"label": name, "method": name} for name in _split(parser.get("experiment", "methods"))]
            data["experiment"].pop("methods")

        try:
            return cls(**data)
        except ValueError as err:
            raise UsageError(f"invalid config: {err}")

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise UsageError(f"cannot read config {path}: {err}")
        return cls.from_text(text)

    def method(self, label: str) -> MethodConfig:
        for method in self.methods:
            if method.label == label:
                return method
        raise UsageError(f"unknown method label '{label}'")

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"source_text"})
