"""Exception hierarchy shared by every module.

Each concrete error carries the process exit code the CLI maps it to:
2 for malformed inputs, 3 for model-range problems, 4 for infeasibility.
"""


class DSEError(Exception):
    exit_code = 1

    @property
    def kind(self) -> str:
        return type(self).__name__


class ParseError(DSEError, ValueError):
    exit_code = 2


class ModelRangeError(DSEError, ValueError):
    exit_code = 3


class InfeasibleError(DSEError):
    exit_code = 4
