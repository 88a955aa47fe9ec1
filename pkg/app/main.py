import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli import build_parser
from app.core.errors import ConfigError, HsiNormsError, SweepFailedError
from app.core.logging import configure_logging
from app.schemas.base import CommandResponse

logger = logging.getLogger(__name__)


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the command-line surface. Prints one JSON envelope on
    stdout and returns the exit status: 0 on success, 2 for usage and
    configuration errors, 3 when a sweep finished with failed replicates,
    1 otherwise.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed the offending flag
        return e.code if isinstance(e.code, int) else 2

    configure_logging(args.log_level)
    try:
        response = args.handler(args)
        status = 0
    except SweepFailedError as e:
        logger.error(str(e))
        response = CommandResponse.error_response(
            command=args.command, error=str(e), data={"failed_cells": e.failed_cells}
        )
        status = e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        response = CommandResponse.error_response(command=args.command, error=str(e))
        status = ConfigError.exit_code
    except HsiNormsError as e:
        logger.error(str(e))
        response = CommandResponse.error_response(command=args.command, error=str(e))
        status = e.exit_code
    except Exception as e:
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        response = CommandResponse.error_response(command=args.command, error=f"{type(e).__name__}: {e}")
        status = 1

    sys.stdout.write(response.model_dump_json(indent=2) + "\n")
    return status
