from magig.cli.controller.base_controller import BaseController, parse_sample_ids
from magig.schema.base_schema import CommandResponse


def _summary(response) -> CommandResponse[dict]:
    report = response.data
    data = {"ranking": report.ranking, "sign_tests": report.sign_tests, "sweep": report.sweep}
    return CommandResponse(data=data, outputs=response.outputs, failures=response.failures)


class EvaluationController(BaseController):
    def _context(self, args):
        return self.experiment_service.context(
            self.load_config(args), classifier_path=args.classifier, autoencoder_path=args.vae,
            sample_ids=parse_sample_ids(args.sample_ids),
        )

    def evaluate(self, args) -> CommandResponse[dict]:
        return _summary(self.experiment_service.evaluate(self._context(args)))

    def path_diagnostics(self, args) -> CommandResponse[dict]:
        return self.experiment_service.path_diagnostics(self._context(args))

    def report(self, args) -> CommandResponse[dict]:
        return _summary(self.experiment_service.report(self.load_config(args), runs=args.runs))
