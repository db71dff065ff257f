"""
convert subcommand: matpower text to native case json
"""

import logging
from pathlib import Path

from src.data.loader import load_case, parse_case_json, serialize_case
from src.reporting.tables import OutputWriter
from src.utils.cli_helpers import add_logging_options
from src.utils.errors import DataError

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("convert", help="convert a matpower case to json")
    parser.add_argument("matpower", help="matpower .m file")
    parser.add_argument("--out", default=None, help="output json (default: next to the input)")
    add_logging_options(parser)
    return parser


def cmd_convert(matpower_path, out_path=None):
    """parse, serialize and check that the json parses back"""
    matpower_path = Path(matpower_path)
    out_path = Path(out_path) if out_path else matpower_path.with_suffix(".json")
    case = load_case(matpower_path)
    text = serialize_case(case)
    if parse_case_json(text) != case:
        raise DataError("json does not parse back to the same network", str(out_path))
    with OutputWriter(out_path.parent) as out:
        out.write_text(text, out_path.name)
    return out_path


def main(args):
    cmd_convert(args.matpower, args.out)
