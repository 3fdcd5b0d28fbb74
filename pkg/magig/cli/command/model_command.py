from magig.cli.command.common import add_run_arguments
from magig.cli.controller.model_controller import ModelController


def get_model_command(subparsers):
    model_controller = ModelController()

    classifier = subparsers.add_parser("train-classifier", help="train the MLP classifier on the run's dataset")
    add_run_arguments(classifier)
    classifier.set_defaults(handler=model_controller.train_classifier)

    autoencoder = subparsers.add_parser("train-vae", help="train or build the autoencoder (trained or exact-chart)")
    add_run_arguments(autoencoder)
    autoencoder.set_defaults(handler=model_controller.train_vae)
    return classifier, autoencoder
