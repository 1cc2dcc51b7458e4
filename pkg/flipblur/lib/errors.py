"""
Exception families shared by the library and the command-line apps.

Each family maps to a process exit code; the domain exceptions live in the
module that raises them and subclass one of these.
"""


from typing import List, Optional


class FlipblurError(Exception):
    """
    Base class for all flipblur errors.
    """

    exit_code = 1


class UsageError(FlipblurError):
    """
    Invalid input: malformed files, bad parameters, violated preconditions.
    """

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class NumericalFailureError(FlipblurError):
    """
    A numerical routine produced non-finite values or failed to converge.
    """

    exit_code = 3


class VerificationError(FlipblurError):
    """
    One or more oracle checks failed.
    """

    exit_code = 4

    def __init__(self, failed: List[str]):
        super().__init__(f"Verification failed: {', '.join(failed)}")
        self.failed = failed
