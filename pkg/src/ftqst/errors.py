"""Exception hierarchy shared by the library and the command line tool."""


class FTQSTError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidStateError(FTQSTError, ValueError):
    """A matrix fails the density-matrix checks (Hermitian, unit trace, PSD)."""

    exit_code = 4


class DegenerateInputError(FTQSTError, ValueError):
    """Input carries no usable information (all-zero parameters or scans)."""

    exit_code = 2


class NyquistError(FTQSTError, ValueError):
    """Angle grid too coarse or unevenly spaced for exact harmonic projection."""

    exit_code = 4


class FrequencySetError(FTQSTError, ValueError):
    """Spectrum does not match the frequency set an operation requires."""

    exit_code = 2


class ConvergenceError(FTQSTError, RuntimeError):
    """An iterative fit stopped before reaching its tolerance."""

    exit_code = 3


class ScanFormatError(FTQSTError, ValueError):
    """Malformed data file. Carries the 1-based line number when known."""

    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
