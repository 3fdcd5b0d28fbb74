from typing import List, Optional

from magig.core.exception_error import UsageError
from magig.schema.experiment_schema import ExperimentConfig, MethodConfig
from magig.service.experiment_service import ExperimentService

METHOD_NAMES = ("gxi", "ig", "gig", "eig", "magig")


def parse_sample_ids(raw: Optional[str]) -> Optional[List[int]]:
    if raw is None:
        return None
    try:
        return [int(item) for item in raw.split(",") if item.strip()]
    except ValueError:
        raise UsageError(f"--sample-ids expects comma-separated integers, got '{raw}'")


class BaseController:
    def __init__(self, experiment_service: Optional[ExperimentService] = None):
        self.experiment_service = experiment_service or ExperimentService()

    @staticmethod
    def load_config(args) -> ExperimentConfig:
        cfg = ExperimentConfig.from_ini(args.config) if getattr(args, "config", None) else ExperimentConfig()
        experiment, dataset = {}, {}
        if getattr(args, "seed", None) is not None:
            experiment["seed"] = dataset["seed"] = args.seed
        if getattr(args, "out", None):
            experiment["output_dir"] = args.out
        if getattr(args, "workers", None):
            experiment["workers"] = args.workers
        if getattr(args, "baseline", None):
            experiment["baseline"] = args.baseline
        if getattr(args, "samples", None) is not None:
            experiment["samples"] = args.samples
        data = cfg.model_dump()
        data["experiment"].update(experiment)
        data["dataset"].update(dataset)
        if getattr(args, "absolute", False):
            data["evaluation"]["absolute"] = True
        try:
            data["methods"] = [method.model_dump() for method in BaseController.select_methods(cfg, args)]
            return ExperimentConfig(**data)
        except ValueError as err:
            raise UsageError(f"invalid option: {err}")

    @staticmethod
    def select_methods(cfg: ExperimentConfig, args) -> List[MethodConfig]:
        """Methods named by --method (all configured ones by default) with per-run overrides applied."""
        known = {method.label: method for method in cfg.methods}
        overrides = {
            key: value for key, value in (
                ("steps", getattr(args, "steps", None)),
                ("fraction", getattr(args, "fraction", None)),
                ("eta", getattr(args, "eta", None)),
                ("interpolation", "slerp" if getattr(args, "slerp", False) else None),
            ) if value is not None
        }
        raw = getattr(args, "method", None)
        if raw is None:
            names = list(known)
        else:
            names = [name.strip() for name in raw.split(",") if name.strip()]
            if not names:
                raise UsageError("--method needs at least one method label")
        selected = []
        for name in names:
            if name in known:
                base = known[name].model_dump()
            elif name in METHOD_NAMES:
                base = {"label": name, "method": name}
            else:
                raise UsageError(f"unknown method '{name}'; expected a configured label or one of {list(METHOD_NAMES)}")
            selected.append(MethodConfig(**{**base, **overrides}))
        return selected
