"""
dpopf - main entry point

command line harness for private distributed dc optimal power flow
"""

import argparse
import logging
import sys

from src.commands import attack, convert, run, sensitivity, tradeoff
from src.config.settings import EXIT_OK, EXIT_USAGE
from src.utils.cli_helpers import setup_logging
from src.utils.errors import DpOpfError

logger = logging.getLogger("dpopf")


class CliParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for data errors here"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = CliParser(prog="dpopf", description="differentially private distributed dc-opf")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (run, attack, sensitivity, convert, tradeoff):
        module.register(subparsers)
    return parser


def main(argv=None):
    """main application entry point"""
    args = build_parser().parse_args(argv)
    setup_logging(verbose=args.verbose, quiet=args.quiet)

    # route to the selected command
    command_routes = {
        "run": run.main,
        "attack": attack.main,
        "sensitivity": sensitivity.main,
        "convert": convert.main,
        "tradeoff": tradeoff.main,
    }

    logger.info("dpopf %s", args.command)
    try:
        command_routes[args.command](args)
    except DpOpfError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return exc.exit_code
    logger.info("dpopf %s done", args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
