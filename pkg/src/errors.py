"""Exception hierarchy shared by the library and the command-line app."""


class TPADError(Exception):
    """Base error. `exit_code` is what the CLI returns when this escapes a command."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigurationError(TPADError):
    exit_code = 2


class DecodeError(ConfigurationError):
    """An operator sequence that does not describe a model in the search space."""


class DataError(TPADError):
    exit_code = 3


class ParseError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class FormatError(DataError):
    """A cache or sample file whose header and payload disagree."""


class ResumeError(DataError):
    """Search state on disk that cannot be resumed."""


class NumericError(TPADError):
    exit_code = 4


class ContractError(TPADError, ValueError):
    """A violated precondition inside library code (bad shapes, bad arguments)."""
