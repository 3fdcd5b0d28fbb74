from magig.cli.command.common import add_run_arguments
from magig.cli.controller.data_controller import DataController


def get_data_command(subparsers):
    data_controller = DataController()

    gen_data = subparsers.add_parser("gen-data", help="generate a synthetic dataset (CSV + manifest)")
    add_run_arguments(gen_data)
    gen_data.add_argument("--samples", dest="dataset_samples", type=int, help="number of samples to draw")
    gen_data.set_defaults(handler=data_controller.gen_data)
    return gen_data
