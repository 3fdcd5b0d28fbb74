from magig.cli.controller.base_controller import BaseController
from magig.core.exception_error import UsageError
from magig.model.dataset_model import DatasetSpec
from magig.schema.base_schema import CommandResponse


class DataController(BaseController):
    def gen_data(self, args) -> CommandResponse[dict]:
        cfg = self.load_config(args)
        if args.dataset_samples is not None:
            try:
                spec = DatasetSpec(**{**cfg.dataset.model_dump(), "samples": args.dataset_samples})
            except ValueError as err:
                raise UsageError(f"invalid --samples: {err}")
            cfg = cfg.model_copy(update={"dataset": spec})
        return self.experiment_service.gen_data(cfg)
