"""Exception hierarchy shared by every module.

Each error carries the name of the module that raised it so the CLI can
emit module-qualified codes (``scaling.parameter`` and so on) and map the
error family onto a process exit status.
"""


class FxtsError(Exception):
    kind = "error"
    exit_status = 3

    def __init__(self, message, module="fxts", **details):
        super().__init__(message)
        self.module = module
        self.details = details

    @property
    def code(self):
        return f"{self.module}.{self.kind}"

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = self.details
        return out


class InputError(FxtsError, ValueError):
    """Malformed input such as a state vector of the wrong length."""

    kind = "input"
    exit_status = 2


class ParameterError(FxtsError, ValueError):
    """A numeric parameter lies outside the range its formula requires."""

    kind = "parameter"
    exit_status = 2


class ContractError(FxtsError):
    """An operation was called on an object that lacks a required property."""

    kind = "contract"
    exit_status = 2


class UnknownSystemError(FxtsError, KeyError):
    kind = "lookup"
    exit_status = 2

    def __str__(self):
        return self.args[0] if self.args else ""


class NumericError(FxtsError, ArithmeticError):
    kind = "numeric"
    exit_status = 3


class QuadratureError(NumericError):
    kind = "quadrature"


class OutputError(FxtsError, OSError):
    kind = "io"
    exit_status = 4
