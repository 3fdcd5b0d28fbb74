from magig.cli.command.common import add_method_arguments, add_model_arguments, add_run_arguments, add_sample_arguments
from magig.cli.controller.attribution_controller import AttributionController


def get_attribution_command(subparsers):
    attribution_controller = AttributionController()

    attribute = subparsers.add_parser("attribute", help="attribution maps for held-out samples, one file per method")
    add_run_arguments(attribute)
    add_model_arguments(attribute)
    add_method_arguments(attribute)
    add_sample_arguments(attribute)
    attribute.set_defaults(handler=attribution_controller.attribute)
    return attribute
