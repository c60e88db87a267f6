"""Main entrypoint for the permtest command line"""

import argparse
import logging
import sys

from pydantic import ValidationError

from app.backend.commands import COMMANDS
from app.backend.core.config import settings
from app.backend.core.exceptions import EXIT_USAGE, InvalidInput, PermTestError
from app.backend.schemas.base import ErrorResponse
from app.backend.utils.io import dump_json
from app.backend.utils.logger import setup_logging

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class PermTestArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 and an error JSON, like every other failure."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = PermTestArgumentParser(
        prog="permtest",
        description="Group permutation tests for a single regression coefficient",
    )
    parser.add_argument("--log-level", default=settings.PERMTEST_LOG_LEVEL)
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=PermTestArgumentParser)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _fail(code: str, message: str, detail: dict | None = None) -> None:
    dump_json(ErrorResponse(code=code, message=message, detail=detail or {}))


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        _fail("usage", str(exc))
        return EXIT_USAGE

    workers = getattr(args, "threads", None) or settings.PERMTEST_THREADS
    setup_logging(args.log_level, with_pid=workers > 1)
    try:
        return args.func(args)
    except PermTestError as exc:
        logger.error(f"{exc.code}: {exc.message}")
        _fail(exc.code, exc.message, exc.detail)
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"invalid input: {exc.error_count()} validation errors")
        _fail(
            InvalidInput.code,
            "invalid input",
            {"errors": [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]},
        )
        return InvalidInput.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
