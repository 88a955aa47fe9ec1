import argparse

from app.cli.commands import classify, export_density, run, sweep
from app.cli.deps import common_options
from app.core.config import settings

COMMANDS = (
    (run, "run", "Run a single simulation and write its time series and snapshots"),
    (sweep, "sweep", "Execute an experiment plan and write pattern cells and phase maps"),
    (classify, "classify", "Recompute indicators and pattern codes from stored snapshots"),
    (export_density, "export-density", "Write attitude density tables of one snapshot"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.PROJECT_NAME,
        description="Bounded-confidence simulator with highly self-involved agents",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parent = common_options()
    for module, name, help_text in COMMANDS:
        command = subparsers.add_parser(name, help=help_text, description=help_text, parents=[parent])
        module.register(command)
        command.set_defaults(handler=module.execute)
    return parser
