"""
Exception hierarchy shared by services and the command-line surface
"""
from typing import Optional


class HsiNormsError(Exception):
    """Base class for every error raised by the simulator"""

    exit_code: int = 1


class ConfigError(HsiNormsError, ValueError):
    """Invalid configuration key or value"""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class SimulationError(HsiNormsError):
    """A single simulation could not be carried out"""


class IndicatorError(HsiNormsError, ValueError):
    """Indicator computed on an invalid input"""


class GridError(HsiNormsError, ValueError):
    """Pattern cells do not form a rectangular grid"""


class SerializationError(HsiNormsError):
    """Reading or writing an output file failed"""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{message} ({path})" if path else message)
        self.path = path


class SweepFailedError(HsiNormsError):
    """Some replicates of an experiment plan failed"""

    exit_code = 3

    def __init__(self, failed_cells: list):
        self.failed_cells = failed_cells
        super().__init__(f"{len(failed_cells)} cell(s) voided by failed replicates")
