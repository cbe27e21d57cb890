class SmaleError(Exception):
    """
    Base class for every error the toolkit raises on purpose.

    Each subclass carries the CLI exit code and the HTTP status code it maps to.
    """
    exit_code: int = 1
    status_code: int = 500

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InputValidationError(SmaleError):
    exit_code = 2
    status_code = 400


class PeriodMismatchError(InputValidationError):
    pass


class PerronConvergenceError(InputValidationError):
    pass


class CapExceededError(SmaleError):
    exit_code = 3
    status_code = 413

    def __init__(self, message: str, count: int):
        super().__init__(message)
        # the exact size is always known before enumeration starts
        self.count = count


class UndefinedMeasureError(SmaleError):
    exit_code = 4
    status_code = 422
