"""
Helpers shared by the subcommands
"""
import argparse
from pathlib import Path
from typing import Dict, Optional

from app.core.errors import ConfigError


def common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        default=None,
        help="Logging verbosity (stderr)",
    )
    return parent


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def read_config_file(path: Optional[str]) -> str:
    if path is None:
        return ""
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read configuration file {path}: {e.strerror}") from e


def flag_values(**flags) -> Dict[str, object]:
    """Flags the user actually passed"""
    return {key: value for key, value in flags.items() if value is not None}
