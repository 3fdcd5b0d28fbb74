from magig.cli.command.common import add_method_arguments, add_model_arguments, add_run_arguments, add_sample_arguments
from magig.cli.controller.evaluation_controller import EvaluationController


def get_evaluation_command(subparsers):
    evaluation_controller = EvaluationController()

    evaluate = subparsers.add_parser("evaluate", help="DiffID, insertion/deletion, residual and q-sweep tables")
    add_run_arguments(evaluate)
    add_model_arguments(evaluate)
    add_method_arguments(evaluate)
    add_sample_arguments(evaluate)
    evaluate.add_argument("--absolute", action="store_true", help="also rank by |attribution|")
    evaluate.set_defaults(handler=evaluation_controller.evaluate)

    diagnostics = subparsers.add_parser("path-diagnostics", help="distance and confidence profiles along paths")
    add_run_arguments(diagnostics)
    add_model_arguments(diagnostics)
    add_method_arguments(diagnostics)
    add_sample_arguments(diagnostics)
    diagnostics.set_defaults(handler=evaluation_controller.path_diagnostics)

    report = subparsers.add_parser("report", help="aggregate one or more evaluated runs into report.json")
    add_run_arguments(report)
    report.add_argument("--runs", nargs="+", help="run directories to pool (default: --out)")
    report.set_defaults(handler=evaluation_controller.report)
    return evaluate, diagnostics, report
