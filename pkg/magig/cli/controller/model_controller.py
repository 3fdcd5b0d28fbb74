from magig.cli.controller.base_controller import BaseController
from magig.schema.base_schema import CommandResponse


class ModelController(BaseController):
    def train_classifier(self, args) -> CommandResponse[dict]:
        return self.experiment_service.train_classifier(self.load_config(args))

    def train_vae(self, args) -> CommandResponse[dict]:
        return self.experiment_service.train_autoencoder(self.load_config(args))
