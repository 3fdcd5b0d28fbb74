import argparse
import sys
from typing import List, Optional

from magig import __version__
from magig.cli.command.attribution_command import get_attribution_command
from magig.cli.command.data_command import get_data_command
from magig.cli.command.evaluation_command import get_evaluation_command
from magig.cli.command.model_command import get_model_command
from magig.core.config import config
from magig.core.exception_error import EXIT_OK, EXIT_RUNTIME, UsageError, cli_exception_handler
from magig.core.logger import logger


class ToolkitArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> ToolkitArgumentParser:
    parser = ToolkitArgumentParser(
        prog=config.app_name,
        description="Manifold-aligned path attribution: data, models, attribution and evaluation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ToolkitArgumentParser)

    get_data_command(subparsers)
    get_model_command(subparsers)
    get_attribution_command(subparsers)
    get_evaluation_command(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logger.info(f"Running {args.command}")
        response = args.handler(args)
        sys.stdout.write(response.model_dump_json(indent=2) + "\n")
        if not response.complete:
            logger.error(f"{args.command} finished with {len(response.failures)} failed rows")
            return EXIT_RUNTIME
        return EXIT_OK
    except Exception as exc:
        return cli_exception_handler(exc)


if __name__ == "__main__":
    sys.exit(main())
