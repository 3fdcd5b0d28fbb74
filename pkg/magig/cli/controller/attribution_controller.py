from magig.cli.controller.base_controller import BaseController, parse_sample_ids
from magig.core.exception_error import UsageError
from magig.schema.base_schema import CommandResponse


class AttributionController(BaseController):
    def attribute(self, args) -> CommandResponse[dict]:
        cfg = self.load_config(args)
        latent = [method.label for method in cfg.methods if method.needs_autoencoder]
        if latent and not args.vae:
            raise UsageError(f"methods {latent} need an autoencoder checkpoint: pass --vae PATH")
        ctx = self.experiment_service.context(
            cfg, classifier_path=args.classifier, autoencoder_path=args.vae,
            default_autoencoder=False, sample_ids=parse_sample_ids(args.sample_ids),
        )
        return self.experiment_service.attribute(ctx)
