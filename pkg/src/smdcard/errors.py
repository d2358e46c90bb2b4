"""Exception hierarchy shared across the package.

Every error carries a stable code that the CLI prints as ``E<code>: <message>``
on stderr, one line per error. Codes: E1xx internal, E2xx user-facing
(config, input, plan, card).
"""


class SmdError(Exception):
    """Base class for all errors raised by this package."""

    code = "E100"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConfigError(SmdError):
    """Malformed or inconsistent evaluation configuration."""

    code = "E200"


class InputError(SmdError):
    """Unparseable or structurally invalid input data."""

    code = "E210"


class PlanError(SmdError):
    """Evaluation plan cannot run against the supplied inputs."""

    code = "E220"


class CardError(SmdError):
    """Card manifest or report-linkage problem."""

    code = "E230"


class EvaluationError(SmdError):
    """A metric's preconditions are violated at compute time."""

    code = "E240"
